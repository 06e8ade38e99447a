//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rg_core::feshbach::{numerical_kernel, numerical_kernel_dim, FeshbachPair};
use rg_core::grid::{KGridSpec, RadialGrid};
use rg_core::smooth::chi1;
use rg_core::Complex64;

/// Exact-diagonalization energy of the reference model (g = 0.05, 16 modes,
/// 33 r-nodes, n_ph_max = 3), frozen from the first run.
pub const REFERENCE_ORACLE_ENERGY: f64 = -1.7522328586783454e-4;
/// Flow energy of the same run.
pub const REFERENCE_FLOW_ENERGY: f64 = -1.7522338512109426e-4;

pub fn grid(n_k: usize, n_r: usize) -> RadialGrid {
    RadialGrid::new(
        n_r,
        KGridSpec {
            n_nodes: n_k,
            ratio: 2.0,
            nodes_per_interval: 2,
        },
        1.0,
    )
}

pub fn reference_grid() -> RadialGrid {
    grid(16, 33)
}

pub fn small_grid() -> RadialGrid {
    grid(6, 17)
}

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Complex64> {
    (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    (&a + a.adjoint()) * c(0.5)
}

/// Kind of spectral shift applied to a random pair.
#[derive(Clone, Copy, Debug)]
pub enum PairKind {
    /// H shifted by its lowest eigenvalue: one-dimensional kernel.
    Simple,
    /// Two identical blocks shifted by their common eigenvalue.
    Doubled,
    /// Shift off the spectrum: trivial kernel.
    Regular,
}

/// Random pair of dimension `dim`: T diagonal with entries in [0, 3],
/// chi = chi_1(T), H = T + W with a small Hermitian W, then both shifted.
pub fn random_pair(rng: &mut ChaCha8Rng, dim: usize, kind: PairKind) -> FeshbachPair {
    let block = if matches!(kind, PairKind::Doubled) { dim / 2 } else { dim };
    let diag: Vec<f64> = (0..block)
        .map(|i| if i == 0 { 0.0 } else { 3.0 * rng.gen::<f64>() })
        .collect();
    let t_b = DMatrix::from_fn(block, block, |i, j| if i == j { c(diag[i]) } else { c(0.0) });
    let w = random_hermitian(rng, block);
    let scale = 0.2 / w.norm().max(1e-300);
    let h_b = &t_b + w * c(scale);
    let (t, h, d) = if matches!(kind, PairKind::Doubled) {
        let n = 2 * block;
        let mut t = DMatrix::zeros(n, n);
        let mut h = DMatrix::zeros(n, n);
        t.view_mut((0, 0), (block, block)).copy_from(&t_b);
        t.view_mut((block, block), (block, block)).copy_from(&t_b);
        h.view_mut((0, 0), (block, block)).copy_from(&h_b);
        h.view_mut((block, block), (block, block)).copy_from(&h_b);
        let d: Vec<f64> = diag.iter().chain(&diag).copied().collect();
        (t, h, d)
    } else {
        (t_b, h_b, diag)
    };
    let lowest = h.clone().symmetric_eigenvalues().min();
    let shift = match kind {
        PairKind::Regular => lowest - 0.05,
        _ => lowest,
    };
    let n = h.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let chi: Vec<f64> = d.iter().map(|&x| chi1(x)).collect();
    FeshbachPair::new(&h - &id * c(shift), &t - &id * c(shift), chi).unwrap()
}

/// Outcome of one isospectrality check.
#[derive(Clone, Debug)]
pub struct IsoCheck {
    pub dim: usize,
    pub ker_h: usize,
    pub ker_f: usize,
    /// max ||H Q v|| / ||Q v|| over the kernel basis of F.
    pub residual: f64,
    /// max ||chi Q v - v|| over the kernel basis of F.
    pub roundtrip: f64,
}

pub fn isospectrality(pair: &FeshbachPair, threshold: f64) -> IsoCheck {
    let f = pair.feshbach_map().unwrap();
    let q = pair.feshbach_q().unwrap();
    let ker_h = numerical_kernel_dim(&pair.h, threshold);
    let ker_f = numerical_kernel_dim(&f, threshold);
    let mut residual: f64 = 0.0;
    let mut roundtrip: f64 = 0.0;
    for v in numerical_kernel(&f, threshold) {
        let v = nalgebra::DVector::from_vec(v);
        let qv = &q * &v;
        residual = residual.max((&pair.h * &qv).norm() / qv.norm());
        let mut d: f64 = 0.0;
        for i in 0..pair.dim() {
            d = d.max((qv[i] * pair.chi[i] - v[i]).norm());
        }
        roundtrip = roundtrip.max(d);
    }
    IsoCheck {
        dim: pair.dim(),
        ker_h,
        ker_f,
        residual,
        roundtrip,
    }
}

/// The 50-pair suite: dimensions between 4 and 64, all three kinds.
pub fn isospectrality_suite(seed: u64) -> Vec<IsoCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..50)
        .map(|i| {
            let kind = match i % 3 {
                0 => PairKind::Simple,
                1 => PairKind::Doubled,
                _ => PairKind::Regular,
            };
            let dim = 2 * rng.gen_range(2..=32);
            let pair = random_pair(&mut rng, dim, kind);
            isospectrality(&pair, 1e-8)
        })
        .collect()
}
