//! Smooth Feshbach map on dense matrices with diagonal partitions of unity.
//!
//! F_chi(H, T) = T + chi W chi - chi W chibar H_chibar^{-1} chibar W chi and
//! Q_chi = chi - chibar H_chibar^{-1} chibar W chi, with W = H - T and the
//! inverse taken on the coordinate subspace where chibar is nonzero.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::dense_norm;

/// Entries of chibar below this are treated as outside its range.
pub const RANGE_TOL: f64 = 1e-14;
/// Largest condition number accepted for H_chibar on Ran chibar.
pub const MAX_CONDITION: f64 = 1e12;

/// A pair (H, T) with a diagonal partition chi^2 + chibar^2 = 1.
#[derive(Clone, Debug)]
pub struct FeshbachPair {
    pub h: DMatrix<Complex64>,
    pub t: DMatrix<Complex64>,
    pub w: DMatrix<Complex64>,
    pub chi: Vec<f64>,
    pub chibar: Vec<f64>,
}

/// Outcome of checking the pair conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct PairReport {
    pub partition_defect: f64,
    pub commutator_chi: f64,
    pub commutator_chibar: f64,
    /// Smallest singular value of T on Ran chibar.
    pub t_min_singular: f64,
    /// ||T^{-1} chibar W chibar|| on Ran chibar.
    pub neumann_left: f64,
    /// ||chibar W chibar T^{-1}|| on Ran chibar.
    pub neumann_right: f64,
    pub verdict: bool,
}

impl PairReport {
    /// Distance of the worse Neumann norm from 1.
    pub fn margin(&self) -> f64 {
        1.0 - self.neumann_left.max(self.neumann_right)
    }
}

fn diag_scale_rows(m: &DMatrix<Complex64>, d: &[f64]) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (i, &s) in d.iter().enumerate() {
        out.row_mut(i).scale_mut(s);
    }
    out
}

fn diag_scale_cols(m: &DMatrix<Complex64>, d: &[f64]) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (j, &s) in d.iter().enumerate() {
        out.column_mut(j).scale_mut(s);
    }
    out
}

fn submatrix(m: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn commutator_with_diag(m: &DMatrix<Complex64>, d: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] * (d[j] - d[i])).norm());
        }
    }
    worst
}

impl FeshbachPair {
    pub fn new(h: DMatrix<Complex64>, t: DMatrix<Complex64>, chi: Vec<f64>) -> Result<Self> {
        let n = h.nrows();
        if h.shape() != (n, n) || t.shape() != (n, n) || chi.len() != n {
            return Err(Error::Numerical("Feshbach pair: dimension mismatch".into()));
        }
        if chi.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Numerical("Feshbach pair: chi must take values in [0, 1]".into()));
        }
        let chibar = chi.iter().map(|c| (1.0 - c * c).max(0.0).sqrt()).collect();
        Ok(Self::with_partition(h, t, chi, chibar))
    }

    /// Uses a caller-supplied chibar (for partitions computed in closed form).
    pub fn with_partition(h: DMatrix<Complex64>, t: DMatrix<Complex64>, chi: Vec<f64>, chibar: Vec<f64>) -> Self {
        let w = &h - &t;
        FeshbachPair { h, t, w, chi, chibar }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Coordinates where chibar is nonzero.
    pub fn chibar_range(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.chibar[i] > RANGE_TOL).collect()
    }

    /// chibar W chibar and chibar W chi restricted to rows in Ran chibar.
    fn blocks(&self) -> (Vec<usize>, DMatrix<Complex64>, DMatrix<Complex64>) {
        let s = self.chibar_range();
        let all: Vec<usize> = (0..self.dim()).collect();
        let bwb = diag_scale_cols(&diag_scale_rows(&self.w, &self.chibar), &self.chibar);
        let bwc = diag_scale_cols(&diag_scale_rows(&self.w, &self.chibar), &self.chi);
        let h_bar = &submatrix(&self.t, &s, &s) + &submatrix(&bwb, &s, &s);
        (s.clone(), h_bar, submatrix(&bwc, &s, &all))
    }

    /// H_chibar^{-1} chibar W chi as an |S| x n matrix, S = Ran chibar.
    fn solve_block(&self) -> Result<(Vec<usize>, DMatrix<Complex64>)> {
        let (s, h_bar, rhs) = self.blocks();
        if s.is_empty() {
            return Ok((s, DMatrix::zeros(0, self.dim())));
        }
        let sv = h_bar.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if smin == 0.0 || smax / smin > MAX_CONDITION {
            return Err(Error::Numerical(format!(
                "H_chibar is numerically singular on Ran chibar (condition {:e})",
                smax / smin
            )));
        }
        let x = h_bar
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("H_chibar solve failed".into()))?;
        Ok((s, x))
    }

    /// The Feshbach map F_chi(H, T).
    pub fn feshbach_map(&self) -> Result<DMatrix<Complex64>> {
        let (s, x) = self.solve_block()?;
        let cwc = diag_scale_cols(&diag_scale_rows(&self.w, &self.chi), &self.chi);
        let mut f = &self.t + cwc;
        if !s.is_empty() {
            let all: Vec<usize> = (0..self.dim()).collect();
            let cwb = diag_scale_cols(&diag_scale_rows(&self.w, &self.chi), &self.chibar);
            f -= submatrix(&cwb, &all, &s) * x;
        }
        Ok(f)
    }

    /// The map Q_chi taking ker F_chi onto ker H.
    pub fn feshbach_q(&self) -> Result<DMatrix<Complex64>> {
        let (s, x) = self.solve_block()?;
        let n = self.dim();
        let mut q = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(self.chi[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for (a, &i) in s.iter().enumerate() {
            for j in 0..n {
                q[(i, j)] -= x[(a, j)] * self.chibar[i];
            }
        }
        Ok(q)
    }

    /// Checks the matrix pair conditions: partition identity, commutation
    /// of T with chi and chibar, invertibility of T on Ran chibar and both
    /// Neumann norms below 1.
    pub fn pair_conditions(&self) -> Result<PairReport> {
        let partition_defect = self
            .chi
            .iter()
            .zip(&self.chibar)
            .map(|(c, b)| (c * c + b * b - 1.0).abs())
            .fold(0.0, f64::max);
        let commutator_chi = commutator_with_diag(&self.t, &self.chi);
        let commutator_chibar = commutator_with_diag(&self.t, &self.chibar);
        let s = self.chibar_range();
        if s.is_empty() {
            return Ok(PairReport {
                partition_defect,
                commutator_chi,
                commutator_chibar,
                t_min_singular: f64::INFINITY,
                neumann_left: 0.0,
                neumann_right: 0.0,
                verdict: partition_defect <= 1e-12,
            });
        }
        let t_s = submatrix(&self.t, &s, &s);
        let sv = t_s.clone().singular_values();
        let t_min_singular = sv.min();
        let scale = dense_norm(&self.h).max(dense_norm(&self.t)).max(1.0);
        if t_min_singular <= 1e-14 * scale {
            return Err(Error::Numerical("T is singular on Ran chibar".into()));
        }
        let t_inv = t_s
            .try_inverse()
            .ok_or_else(|| Error::Numerical("T is singular on Ran chibar".into()))?;
        let bwb = diag_scale_cols(&diag_scale_rows(&self.w, &self.chibar), &self.chibar);
        let bwb_s = submatrix(&bwb, &s, &s);
        let neumann_left = dense_norm(&(&t_inv * &bwb_s));
        let neumann_right = dense_norm(&(&bwb_s * &t_inv));
        let tol = 1e-12 * scale;
        let verdict = partition_defect <= 1e-12
            && commutator_chi <= tol
            && commutator_chibar <= tol
            && neumann_left < 1.0
            && neumann_right < 1.0;
        Ok(PairReport {
            partition_defect,
            commutator_chi,
            commutator_chibar,
            t_min_singular,
            neumann_left,
            neumann_right,
            verdict,
        })
    }

    /// Applies H_chibar^{-1} on Ran chibar to `rhs` (indexed by the range
    /// coordinates) by the Neumann series in T^{-1} chibar W chibar.
    pub fn neumann_solve(&self, rhs: &[Complex64], tol: f64, max_terms: usize) -> Result<Vec<Complex64>> {
        let (s, h_bar, _) = self.blocks();
        if rhs.len() != s.len() {
            return Err(Error::Numerical("Neumann solve: right-hand side has wrong length".into()));
        }
        let t_s = submatrix(&self.t, &s, &s);
        let t_lu = t_s.clone().lu();
        let pert = &h_bar - &t_s;
        let b = nalgebra::DVector::from_column_slice(rhs);
        let mut term = t_lu
            .solve(&b)
            .ok_or_else(|| Error::Numerical("T is singular on Ran chibar".into()))?;
        let mut sum = term.clone();
        for _ in 0..max_terms {
            term = -t_lu.solve(&(&pert * &term)).unwrap();
            sum += &term;
            if term.norm() <= tol * sum.norm() {
                return Ok(sum.iter().copied().collect());
            }
        }
        Err(Error::Numerical("Neumann series did not converge".into()))
    }
}

/// Number of singular values below `threshold` times the largest one.
pub fn numerical_kernel_dim(m: &DMatrix<Complex64>, threshold: f64) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.max().max(f64::MIN_POSITIVE);
    sv.iter().filter(|&&s| s <= threshold * top).count()
}

/// Orthonormal basis of the numerical kernel (right singular vectors).
pub fn numerical_kernel(m: &DMatrix<Complex64>, threshold: f64) -> Vec<Vec<Complex64>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let top = svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold * top)
        .map(|(i, _)| v_t.row(i).iter().map(|c| c.conj()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(next(), next()));
        (&a + a.adjoint()) * c(0.5)
    }

    #[test]
    fn vanishing_perturbation_gives_t_and_chi() {
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5), c(1.0), c(2.0), c(3.0)]));
        let pair = FeshbachPair::new(t.clone(), t.clone(), vec![1.0, 0.8, 0.3, 0.0]).unwrap();
        let rep = pair.pair_conditions().unwrap();
        assert!(rep.verdict);
        assert_eq!(rep.margin(), 1.0);
        assert!((pair.feshbach_map().unwrap() - &t).norm() < 1e-14);
        let q = pair.feshbach_q().unwrap();
        for i in 0..4 {
            assert!((q[(i, i)].re - pair.chi[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn sharp_partition_is_schur_complement() {
        let h0 = hermitian(6, 11);
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            (0..6).map(|i| c(if i < 3 { 0.1 } else { 4.0 + i as f64 })).collect(),
        ));
        let h = &t + h0 * c(0.5);
        let pair = FeshbachPair::new(h.clone(), t.clone(), vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = pair.feshbach_map().unwrap();
        let a = h.view((0, 0), (3, 3)).into_owned();
        let b = h.view((0, 3), (3, 3)).into_owned();
        let cc = h.view((3, 0), (3, 3)).into_owned();
        let d = h.view((3, 3), (3, 3)).into_owned();
        let schur = a - b * d.clone().try_inverse().unwrap() * cc.clone();
        assert!((f.view((0, 0), (3, 3)) - &schur).norm() < 1e-12);
        assert!((f.view((3, 3), (3, 3)) - t.view((3, 3), (3, 3))).norm() < 1e-14);
        let q = pair.feshbach_q().unwrap();
        let lower = -(d.try_inverse().unwrap() * cc);
        assert!((q.view((3, 0), (3, 3)) - lower).norm() < 1e-12);
    }

    #[test]
    fn large_perturbation_fails_verdict() {
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(1.0), c(1.0)]));
        let w = hermitian(3, 5) * c(40.0);
        let pair = FeshbachPair::new(&t + w, t, vec![1.0, 0.2, 0.0]).unwrap();
        assert!(!pair.pair_conditions().unwrap().verdict);
    }

    #[test]
    fn neumann_matches_direct_solve() {
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec((0..8).map(|i| c(2.0 + i as f64)).collect()));
        let h = &t + hermitian(8, 3) * c(0.3);
        let pair = FeshbachPair::new(h, t, vec![1.0, 0.9, 0.5, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let rep = pair.pair_conditions().unwrap();
        assert!(rep.neumann_left <= 0.5);
        let (s, h_bar, _) = pair.blocks();
        let rhs: Vec<Complex64> = (0..s.len()).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let direct = h_bar.lu().solve(&nalgebra::DVector::from_column_slice(&rhs)).unwrap();
        let it = pair.neumann_solve(&rhs, 1e-15, 200).unwrap();
        let diff: f64 = it.iter().zip(direct.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff <= 1e-10 * direct.norm());
    }
}
