mod common;

use std::sync::OnceLock;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rg_core::fock::{assemble_h, DiscreteFockSpace};
use rg_core::initial::{initial_kernel_at, internal_space_for, OracleParts, ToyModel};
use rg_core::kernel_space::{weighted_norm, KernelSequence};
use rg_core::rg::{e_of, e_rho, invert_e, RgConfig};
use rg_core::solver::{
    energy_iterates, ground_energy, ground_state, ground_state_from_flow, oracle_ground_state, run_flow, Flow,
    SolverConfig,
};
use rg_core::Complex64;

fn small_cfg() -> SolverConfig {
    SolverConfig {
        steps: 6,
        ..SolverConfig::default()
    }
}

fn small_flow() -> &'static Flow {
    static FLOW: OnceLock<Flow> = OnceLock::new();
    FLOW.get_or_init(|| run_flow(&ToyModel::default(), &small_grid(), &small_cfg()).unwrap())
}

fn random_disk(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>())
}

#[test]
fn inversion_is_a_fixed_point_at_random_targets() {
    let flow = small_flow();
    let cfg = small_cfg().rg;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for family in &flow.families {
        for _ in 0..100 {
            let z = random_disk(&mut rng, 0.3);
            let (i, _) = invert_e(family, &cfg, z).unwrap();
            assert!((e_rho(family, cfg.rho, i).0 - z).norm() <= 1e-12);
        }
    }
}

#[test]
fn inverse_has_bounded_derivative() {
    let flow = small_flow();
    let cfg = small_cfg().rg;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    for family in &flow.families {
        for _ in 0..10 {
            let z = random_disk(&mut rng, 0.25);
            let a = invert_e(family, &cfg, z + h).unwrap().0;
            let b = invert_e(family, &cfg, z - h).unwrap().0;
            assert!(((a - b) / (2.0 * h)).norm() <= 16.0 * cfg.rho / 15.0);
        }
    }
}

#[test]
fn spectral_map_matches_matrix_backend() {
    let grid = small_grid();
    let space = DiscreteFockSpace::from_grid(&grid, 2);
    for family in &small_flow().families {
        let w = &family.contour()[3];
        let h = assemble_h(w, &grid, &space).unwrap().to_dense();
        assert!((-h[(0, 0)] - e_of(w)).norm() <= 1e-12);
    }
}

#[test]
fn interpolated_and_recomputed_kernels_agree() {
    let grid = small_grid();
    let model = ToyModel::default();
    let cfg = small_cfg();
    let family = &small_flow().families[0];
    let internal = internal_space_for(&grid, cfg.series.l_max, 2);
    for &zeta in small_flow().trace[1].record.as_ref().unwrap().inverse_points.iter().step_by(5) {
        let direct = initial_kernel_at(&model, &grid, &cfg.series, &internal, zeta).unwrap().0;
        let interp = family.at(zeta);
        let diff = KernelSequence::combine(&[(&direct, c(1.0)), (&interp, c(-1.0))]);
        assert!(weighted_norm(&diff, &grid, 0) <= 1e-8, "{zeta}");
    }
}

#[test]
fn first_step_at_least_halves_the_interaction() {
    let trace = &small_flow().trace;
    let rep = trace[1].contraction.as_ref().unwrap();
    assert!(rep.gamma_ratio <= 0.5, "{rep:?}");
    for t in &trace[1..] {
        assert!(t.contraction.as_ref().unwrap().halves);
        assert_eq!(t.tail_mode, "additive");
    }
}

#[test]
fn energy_iterates_follow_the_cauchy_schedule() {
    let flow = small_flow();
    let e = energy_iterates(flow, &small_cfg().rg).unwrap();
    for m in 0..e.len() - 1 {
        assert!((e[m] - e[m + 1]).norm() <= 0.5f64.powi(m as i32 + 1));
    }
}

#[test]
fn real_coupling_gives_the_bottom_of_the_oracle_spectrum() {
    let grid = small_grid();
    let model = ToyModel::default();
    let cfg = small_cfg();
    let gs = ground_state_from_flow(&model, &grid, &cfg, small_flow().clone()).unwrap();
    let exact = oracle_ground_state(&model, &grid, cfg.n_ph_max).unwrap();
    assert!(gs.energy.im.abs() <= 1e-10);
    assert!(((gs.energy.re - exact.energy) / exact.energy).abs() <= 5e-4);
    assert!(gs.residual <= 1e-8);
    assert!(gs.psi_norms.iter().all(|&n| n <= 4.0 * 4f64.exp()));
}

#[test]
fn zero_coupling_is_trivial() {
    let grid = small_grid();
    let model = ToyModel::default().with_g(Complex64::new(0.0, 0.0));
    let gs = ground_state(&model, &grid, &small_cfg()).unwrap();
    assert!(gs.energy.norm() <= 1e-15);
    assert!((gs.vector[0] - c(1.0)).norm() <= 1e-14);
    let rest: f64 = gs.vector[1..].iter().map(|v| v.norm_sqr()).sum();
    assert!(rest <= 1e-28);
    for t in &gs.trace {
        assert_eq!(t.ball.measured.gamma, 0.0);
    }
}

#[test]
fn free_field_oracle_is_the_vacuum() {
    let grid = small_grid();
    let parts = OracleParts::new(&ToyModel::default(), &grid, 2).unwrap();
    let gs = rg_core::fock::exact_ground_state(&parts.h0).unwrap();
    assert!(gs.energy.abs() <= 1e-12);
    assert!((gs.vector[0].norm() - 1.0).abs() <= 1e-9);
}

#[test]
fn energy_is_independent_of_rho() {
    let grid = small_grid();
    let model = ToyModel::default();
    let mut energies = Vec::new();
    for rho in [0.05, 0.1, 0.2] {
        let cfg = SolverConfig {
            rg: RgConfig { rho, ..RgConfig::default() },
            steps: 5,
            ..SolverConfig::default()
        };
        energies.push(ground_energy(&model, &grid, &cfg).unwrap().re);
    }
    for e in &energies[1..] {
        assert!(((e - energies[0]) / energies[0]).abs() <= 5e-4, "{energies:?}");
    }
}
