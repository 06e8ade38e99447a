mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rg_core::fock::{
    assemble_component, dense_norm, pull_through_check, trivial_identity_sides, DiscreteFockSpace,
};
use rg_core::kernel_space::{
    project_support, sharp_norm, symmetrize, xi_norm, Kernel, KernelFile, KernelSequence, ZSamples,
};
use rg_core::smooth::{chi1, chibar1, chi_rho, chibar_rho};
use rg_core::Complex64;

fn factorial(k: usize) -> f64 {
    (1..=k).product::<usize>() as f64
}

fn wavy(m: usize, n: usize, a: f64, b: f64) -> Kernel {
    Kernel::from_fn(m, n, &small_grid(), |r, cre, ann| {
        let s: f64 = cre.iter().enumerate().map(|(i, k)| (i + 1) as f64 * k).sum();
        let t: f64 = ann.iter().enumerate().map(|(i, k)| (i + 2) as f64 * k).sum();
        Complex64::new((a * r + s).cos(), (b * r - t).sin())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partitions_of_unity(x in -0.5f64..2.0, rho in 0.01f64..0.25) {
        prop_assert!((chi1(x).powi(2) + chibar1(x).powi(2) - 1.0).abs() < 1e-14);
        prop_assert!((chi_rho(rho, x).powi(2) + chibar_rho(rho, x).powi(2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetrize_is_idempotent(a in -3.0f64..3.0, b in -3.0f64..3.0, m in 0usize..3, n in 0usize..3) {
        let w = symmetrize(&wavy(m, n, a, b));
        let ww = symmetrize(&w);
        for (x, y) in w.values.iter().zip(&ww.values) {
            prop_assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn support_projection_is_idempotent(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = small_grid();
        let p = project_support(&wavy(1, 1, a, b), &grid);
        prop_assert_eq!(project_support(&p, &grid), p);
    }

    #[test]
    fn sharp_norm_is_homogeneous_and_subadditive(a in -3.0f64..3.0, b in -3.0f64..3.0, s in -4.0f64..4.0) {
        let grid = small_grid();
        let w = wavy(1, 1, a, b);
        let v = wavy(1, 1, b, a);
        let mut sw = w.clone();
        sw.scale(Complex64::new(s, 0.5 * s));
        let n = sharp_norm(&w, &grid);
        prop_assert!((sharp_norm(&sw, &grid) - Complex64::new(s, 0.5 * s).norm() * n).abs() <= 1e-12 * (1.0 + n));
        let mut sum = w.clone();
        sum.add_scaled(&v, Complex64::new(1.0, 0.0));
        prop_assert!(sharp_norm(&sum, &grid) <= n + sharp_norm(&v, &grid) + 1e-12);
    }

    #[test]
    fn xi_norm_weights_by_arity(a in -3.0f64..3.0, b in -3.0f64..3.0, xi in 0.05f64..0.5) {
        let grid = small_grid();
        let mut seq = KernelSequence::free(&grid, Complex64::new(0.1, 0.0), xi);
        let w = wavy(1, 1, a, b);
        let w20 = wavy(2, 0, b, a);
        let expect = sharp_norm(seq.w00(), &grid) + sharp_norm(&w, &grid) / xi.powi(2) + sharp_norm(&w20, &grid) / xi.powi(2);
        seq.insert(w);
        seq.insert(w20);
        prop_assert!((xi_norm(&seq, &grid) - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn operator_norm_bound_holds(a in -3.0f64..3.0, b in -3.0f64..3.0, sector in 0usize..5) {
        let grid = small_grid();
        let space = DiscreteFockSpace::from_grid(&grid, 3);
        let (m, n) = [(1, 1), (2, 0), (0, 2), (1, 2), (2, 1)][sector];
        let w = wavy(m, n, a, b);
        let sup = w.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let bound = sup / (factorial(m) * factorial(n)).sqrt();
        let norm = dense_norm(&assemble_component(&w, &grid, &space).unwrap().to_dense());
        prop_assert!(norm <= bound * (1.0 + 1e-9), "{} > {}", norm, bound);
    }

    #[test]
    fn trivial_identity_holds(seed in 0u64..1000, n in 1usize..3) {
        let space = DiscreteFockSpace::from_grid(&small_grid(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_vector(&mut rng, space.dim);
        let (l, r) = trivial_identity_sides(&space, &phi, n);
        prop_assert!((l - r).abs() <= 1e-10 * r);
    }

    #[test]
    fn pull_through_for_smooth_functions(p in 0.5f64..3.0, mode in 0usize..6) {
        let space = DiscreteFockSpace::from_grid(&small_grid(), 3);
        let d = pull_through_check(&space, |x| (p * x).sin() + chi1(x), mode).unwrap();
        prop_assert!(d <= 1e-12);
    }

    #[test]
    fn cauchy_interpolant_reproduces_polynomials(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c5 in -1.0f64..1.0, re in -0.2f64..0.2, im in -0.2f64..0.2) {
        let zs = ZSamples::standard();
        let f = |z: Complex64| Complex64::new(c0, 0.0) + z * c1 + z.powi(5) * c5;
        let vals: Vec<Complex64> = zs.contour().into_iter().map(f).collect();
        let z = Complex64::new(re, im);
        let v: Complex64 = zs.cauchy_weights(z).iter().zip(&vals).map(|(l, v)| l * v).sum();
        prop_assert!((v - f(z)).norm() < 1e-12);
    }

    #[test]
    fn random_pairs_keep_kernel_dimension(seed in 0u64..10_000, half in 2usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for kind in [PairKind::Simple, PairKind::Doubled, PairKind::Regular] {
            let r = isospectrality(&random_pair(&mut rng, 2 * half, kind), 1e-8);
            prop_assert_eq!(r.ker_h, r.ker_f);
            prop_assert!(r.residual <= 1e-8 && r.roundtrip <= 1e-8);
        }
    }
}

#[test]
fn kernel_file_roundtrip_is_bit_exact() {
    let grid = small_grid();
    let w = wavy(2, 1, 0.7, -1.3);
    let file = KernelFile::from_kernel(&w, &grid, 0.2, Some(Complex64::new(0.1, -0.05)));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    file.write(&path).unwrap();
    let back = KernelFile::read(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.kernel().unwrap(), w);
}
