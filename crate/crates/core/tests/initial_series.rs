mod common;

use common::*;
use rg_core::fock::{assemble_h, DiscreteFockSpace};
use rg_core::initial::{
    beta_derivatives_initial, initial_kernel_at, internal_space_for, CouplingShape, SeriesConfig, ToyModel,
};
use rg_core::kernel_space::{weighted_norm, KernelSequence};
use rg_core::Complex64;

fn cfg(l_max: usize) -> SeriesConfig {
    SeriesConfig {
        l_max,
        ..SeriesConfig::default()
    }
}

fn cos_model() -> ToyModel {
    ToyModel {
        shape: CouplingShape::Cos,
        beta: 0.3,
        ..ToyModel::default()
    }
}

fn difference(a: &KernelSequence, b: &KernelSequence) -> KernelSequence {
    KernelSequence::combine(&[(a, c(1.0)), (b, c(-1.0))])
}

#[test]
fn adding_one_order_stays_within_the_certificate() {
    let grid = small_grid();
    let model = ToyModel::default();
    let z = Complex64::new(0.1, 0.05);
    let mut norms = Vec::new();
    let mut certs = Vec::new();
    for l in [3, 4] {
        let internal = internal_space_for(&grid, l, 2);
        let (seq, sums, _) = initial_kernel_at(&model, &grid, &cfg(l), &internal, z).unwrap();
        norms.push(weighted_norm(&seq, &grid, 1));
        certs.push(sums.certificate());
    }
    assert!((norms[1] - norms[0]).abs() <= certs[0], "{norms:?} vs {certs:?}");
}

#[test]
fn beta_derivative_matches_richardson_limit() {
    let grid = small_grid();
    let model = cos_model();
    let z = Complex64::new(0.05, 0.0);
    let h = 0.05;
    let coarse = beta_derivatives_initial(&model, &grid, &cfg(3), z, 1, h).unwrap();
    let fine = beta_derivatives_initial(&model, &grid, &cfg(3), z, 1, h / 2.0).unwrap();
    // Five-point stencils are fourth order.
    let limit = KernelSequence::combine(&[(&fine[1], c(16.0 / 15.0)), (&coarse[1], c(-1.0 / 15.0))]);
    let err = weighted_norm(&difference(&fine[1], &limit), &grid, 0);
    assert!(err <= 1e-6, "{err}");
    assert!(weighted_norm(&limit, &grid, 0) > 1e-6);
}

#[test]
fn zero_coupling_has_vanishing_beta_derivatives() {
    let grid = small_grid();
    let model = cos_model().with_g(Complex64::new(0.0, 0.0));
    let d = beta_derivatives_initial(&model, &grid, &cfg(2), Complex64::new(0.1, 0.0), 2, 0.05).unwrap();
    for l in 1..=2 {
        assert!(weighted_norm(&d[l], &grid, 0) < 1e-12);
    }
}

#[test]
fn phase_coupling_derivative_is_momentum_multiplied() {
    let model = ToyModel {
        beta: 0.4,
        ..ToyModel::default()
    };
    let (k1, k2) = (0.3, 0.7);
    let w = model.interaction_scalar((1, 1), &[k1], &[k2]);
    let h = 1e-5;
    let fd = (model.with_beta(0.4 + h).interaction_scalar((1, 1), &[k1], &[k2])
        - model.with_beta(0.4 - h).interaction_scalar((1, 1), &[k1], &[k2]))
        / (2.0 * h);
    let exact = Complex64::new(0.0, k1 - k2) * w;
    assert!((fd - exact).norm() <= 1e-8 * w.norm().max(1e-12));
    assert!((model.coupling_dbeta(k1) - Complex64::new(0.0, k1) * model.coupling(k1)).norm() < 1e-15);
}

#[test]
fn kernel_is_symmetric_for_real_coupling() {
    let grid = small_grid();
    let model = ToyModel::default();
    let space = DiscreteFockSpace::from_grid(&grid, 2);
    let internal = internal_space_for(&grid, 3, 2);
    let z = Complex64::new(0.12, 0.07);
    let (a, _, _) = initial_kernel_at(&model, &grid, &cfg(3), &internal, z).unwrap();
    let (b, _, _) = initial_kernel_at(&model, &grid, &cfg(3), &internal, z.conj()).unwrap();
    let ha = assemble_h(&a, &grid, &space).unwrap().to_dense();
    let hb = assemble_h(&b, &grid, &space).unwrap().to_dense();
    assert!((ha.adjoint() - hb).norm() <= 1e-10 * ha.norm());
}

#[test]
fn energy_shift_vanishes_quadratically_in_g() {
    let grid = small_grid();
    let internal = internal_space_for(&grid, 2, 2);
    let z = Complex64::new(0.1, 0.0);
    let shift = |g: f64| {
        let model = ToyModel::default().with_g(Complex64::new(g, 0.0));
        let (seq, _, _) = initial_kernel_at(&model, &grid, &cfg(2), &internal, z).unwrap();
        (seq.w00().values[0] + z).norm()
    };
    let (a, b) = (shift(0.02), shift(0.01));
    assert!(b < a && (a / b - 4.0).abs() < 0.05, "{a} {b}");
}
