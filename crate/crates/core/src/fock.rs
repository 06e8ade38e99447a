//! Truncated bosonic Fock space over the quadrature modes: ladder operators,
//! the free field energy, operators H(w) assembled from kernels, and the
//! exact-diagonalisation oracle.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::kernel_space::{Kernel, KernelSequence};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Occupation-number basis of all states with at most `n_ph_max` photons,
/// ordered by photon number (vacuum first) and then lexicographically.
#[derive(Clone, Debug)]
pub struct DiscreteFockSpace {
    pub n_modes: usize,
    pub n_ph_max: usize,
    pub energies: Vec<f64>,
    pub basis: Vec<Vec<u8>>,
    pub dim: usize,
    index: HashMap<Vec<u8>, usize>,
    hf: Vec<f64>,
    layer_start: Vec<usize>,
}

fn enumerate_layer(n_modes: usize, total: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(mode: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if mode + 1 == cur.len() {
            cur[mode] = left as u8;
            out.push(cur.clone());
            cur[mode] = 0;
            return;
        }
        for c in (0..=left).rev() {
            cur[mode] = c as u8;
            rec(mode + 1, left - c, cur, out);
        }
        cur[mode] = 0;
    }
    let mut cur = vec![0u8; n_modes];
    rec(0, total, &mut cur, out);
}

impl DiscreteFockSpace {
    /// Space over modes with the given energies and a total photon cap.
    pub fn new(energies: &[f64], n_ph_max: usize) -> Self {
        let n_modes = energies.len();
        assert!(n_modes > 0, "Fock space needs at least one mode");
        let mut basis = Vec::new();
        let mut layer_start = Vec::new();
        for total in 0..=n_ph_max {
            layer_start.push(basis.len());
            enumerate_layer(n_modes, total, &mut basis);
        }
        layer_start.push(basis.len());
        let index = basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        let hf = basis
            .iter()
            .map(|occ| occ.iter().zip(energies).map(|(&n, &k)| n as f64 * k).sum())
            .collect();
        DiscreteFockSpace {
            n_modes,
            n_ph_max,
            energies: energies.to_vec(),
            dim: basis.len(),
            basis,
            index,
            hf,
            layer_start,
        }
    }

    pub fn from_grid(grid: &RadialGrid, n_ph_max: usize) -> Self {
        DiscreteFockSpace::new(&grid.k_nodes, n_ph_max)
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Free field energy of basis state `i`.
    pub fn hf(&self, i: usize) -> f64 {
        self.hf[i]
    }

    pub fn photons(&self, i: usize) -> usize {
        self.basis[i].iter().map(|&n| n as usize).sum()
    }

    /// Index range of the states with exactly `n` photons.
    pub fn layer(&self, n: usize) -> std::ops::Range<usize> {
        self.layer_start[n]..self.layer_start[n + 1]
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::Numerical(format!(
                "mode {mode} out of range for {} modes",
                self.n_modes
            )));
        }
        Ok(())
    }
}

/// Compressed sparse row matrix with complex entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, Complex64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            data.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix::from_triplets(nrows, ncols, Vec::new())
    }

    pub fn diagonal(d: &[Complex64]) -> Self {
        let t = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        SparseMatrix::from_triplets(d.len(), d.len(), t)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                out.push((r, self.indices[p], self.data[p]));
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.nrows];
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[p] * x[self.indices[p]];
            }
            *yr = acc;
        }
        y
    }

    pub fn adjoint(&self) -> Self {
        let t = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v.conj()))
            .collect();
        SparseMatrix::from_triplets(self.ncols, self.nrows, t)
    }

    /// a * self + b * other.
    pub fn axpby(&self, a: Complex64, other: &SparseMatrix, b: Complex64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (r, c, a * v)).collect();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, b * v)));
        SparseMatrix::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        self.axpby(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &SparseMatrix) -> Self {
        self.axpby(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    /// Sparse product self * other.
    pub fn mul(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        for r in 0..self.nrows {
            let mut acc: HashMap<usize, Complex64> = HashMap::new();
            for p in self.indptr[r]..self.indptr[r + 1] {
                let k = self.indices[p];
                for q in other.indptr[k]..other.indptr[k + 1] {
                    *acc.entry(other.indices[q]).or_insert(ZERO) += self.data[p] * other.data[q];
                }
            }
            let mut row: Vec<_> = acc.into_iter().collect();
            row.sort_by_key(|e| e.0);
            t.extend(row.into_iter().map(|(c, v)| (r, c, v)));
        }
        SparseMatrix::from_triplets(self.nrows, other.ncols, t)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<Complex64>, drop_below: f64) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].norm() > drop_below {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        SparseMatrix::from_triplets(m.nrows(), m.ncols(), t)
    }

    /// Largest |A_ij - conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    /// Spectral-norm estimate by power iteration on A^* A (lower bound that
    /// converges to the norm).
    pub fn norm_estimate(&self, iters: usize) -> f64 {
        let adj = self.adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x: Vec<Complex64> = (0..self.ncols)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut est = 0.0;
        for _ in 0..iters {
            let nx = vec_norm(&x);
            if nx == 0.0 {
                return 0.0;
            }
            for v in &mut x {
                *v /= nx;
            }
            let y = adj.matvec(&self.matvec(&x));
            est = vec_norm(&y).sqrt();
            x = y;
        }
        est
    }

    /// Writes "row col re im" lines with a header comment.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(f, "% {} {} {}", self.nrows, self.ncols, self.nnz()).map_err(io)?;
        for (r, c, v) in self.triplets() {
            writeln!(f, "{r} {c} {:e} {:e}", v.re, v.im).map_err(io)?;
        }
        Ok(())
    }
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Exact spectral norm of a dense matrix via its singular values.
pub fn dense_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// a*(mode) with the photon cap: states already at the cap map to zero.
pub fn creation(space: &DiscreteFockSpace, mode: usize) -> Result<SparseMatrix> {
    space.check_mode(mode)?;
    let mut t = Vec::new();
    for (i, occ) in space.basis.iter().enumerate() {
        let mut next = occ.clone();
        next[mode] += 1;
        if let Some(j) = space.index_of(&next) {
            t.push((j, i, Complex64::new(((occ[mode] as f64) + 1.0).sqrt(), 0.0)));
        }
    }
    Ok(SparseMatrix::from_triplets(space.dim, space.dim, t))
}

/// a(mode), the adjoint of `creation`.
pub fn annihilation(space: &DiscreteFockSpace, mode: usize) -> Result<SparseMatrix> {
    Ok(creation(space, mode)?.adjoint())
}

/// H_f = sum_i k_i a_i^* a_i.
pub fn free_field(space: &DiscreteFockSpace) -> SparseMatrix {
    let d: Vec<Complex64> = (0..space.dim).map(|i| Complex64::new(space.hf(i), 0.0)).collect();
    SparseMatrix::diagonal(&d)
}

/// Diagonal operator f(H_f + shift).
pub fn function_of_hf<F: Fn(f64) -> Complex64>(space: &DiscreteFockSpace, shift: f64, f: F) -> SparseMatrix {
    let d: Vec<Complex64> = (0..space.dim).map(|i| f(space.hf(i) + shift)).collect();
    SparseMatrix::diagonal(&d)
}

/// Frobenius norm of f(H_f) a^*(mode) - a^*(mode) f(H_f + k_mode), an upper
/// bound on the operator-norm deviation.
pub fn pull_through_check<F: Fn(f64) -> f64>(space: &DiscreteFockSpace, f: F, mode: usize) -> Result<f64> {
    let a = creation(space, mode)?;
    let k = space.energies[mode];
    let lhs = function_of_hf(space, 0.0, |x| Complex64::new(f(x), 0.0)).mul(&a);
    let rhs = a.mul(&function_of_hf(space, k, |x| Complex64::new(f(x), 0.0)));
    Ok(lhs.sub(&rhs).frobenius())
}

/// Ordered tuples of annihilations applied to a basis state: (resulting
/// state, product of sqrt(occupation) factors, modes).
fn annihilate_tuples(space: &DiscreteFockSpace, state: usize, n: usize) -> Vec<(Vec<u8>, f64, Vec<usize>)> {
    let mut out = vec![(space.basis[state].clone(), 1.0, Vec::new())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (occ, amp, modes) in &out {
            for j in 0..space.n_modes {
                if occ[j] > 0 {
                    let mut o = occ.clone();
                    let f = (o[j] as f64).sqrt();
                    o[j] -= 1;
                    let mut ms = modes.clone();
                    ms.push(j);
                    next.push((o, amp * f, ms));
                }
            }
        }
        out = next;
    }
    out
}

/// All ordered tuples of creations applied to an occupation vector.
fn create_tuples(occ: &[u8], n_modes: usize, m: usize) -> Vec<(Vec<u8>, f64, Vec<usize>)> {
    let mut out = vec![(occ.to_vec(), 1.0, Vec::new())];
    for _ in 0..m {
        let mut next = Vec::new();
        for (o, amp, modes) in &out {
            for i in 0..n_modes {
                let mut p = o.clone();
                p[i] += 1;
                let f = (p[i] as f64).sqrt();
                let mut ms = modes.clone();
                ms.push(i);
                next.push((p, amp * f, ms));
            }
        }
        out = next;
    }
    // Creation a^*(K_1) ... a^*(K_m): the last listed slot acts first, which
    // only permutes the tuple and is irrelevant for the summed operator.
    out
}

fn check_grid(space: &DiscreteFockSpace, grid: &RadialGrid) -> Result<()> {
    if space.energies != grid.k_nodes {
        return Err(Error::Numerical(
            "kernel grid and Fock-space modes do not match".into(),
        ));
    }
    Ok(())
}

/// H_{m,n}(w) = P_red sum a^*(K) w(H_f; K, K~) a(K~) P_red with slot
/// amplitudes from the grid and P_red = 1[H_f <= 1].
pub fn assemble_component(w: &Kernel, grid: &RadialGrid, space: &DiscreteFockSpace) -> Result<SparseMatrix> {
    check_grid(space, grid)?;
    let amp = grid.slot_amplitudes();
    let mut t = Vec::new();
    let cols = w.n_cols();
    let mut weight_cache: HashMap<usize, Vec<f64>> = HashMap::new();
    for s in 0..space.dim {
        if space.hf(s) > 1.0 {
            continue;
        }
        for (mid, a_amp, jmodes) in annihilate_tuples(space, s, w.n) {
            let mid_idx = space.index_of(&mid).expect("annihilation stays in the space");
            let r = space.hf(mid_idx);
            if r > 1.0 {
                continue;
            }
            let lw = weight_cache
                .entry(mid_idx)
                .or_insert_with(|| grid.r.weights_at(r))
                .clone();
            let a_prod: f64 = jmodes.iter().map(|&j| amp[j]).product();
            for (out, c_amp, imodes) in create_tuples(&mid, space.n_modes, w.m) {
                let Some(o) = space.index_of(&out) else { continue };
                if space.hf(o) > 1.0 {
                    continue;
                }
                let c_prod: f64 = imodes.iter().map(|&i| amp[i]).product();
                let mut idx = imodes.clone();
                idx.extend_from_slice(&jmodes);
                let col = w.flatten(&idx);
                let mut val = ZERO;
                for (ir, l) in lw.iter().enumerate() {
                    if *l != 0.0 {
                        val += w.values[ir * cols + col] * *l;
                    }
                }
                let v = val * (a_amp * c_amp * a_prod * c_prod);
                if v != ZERO {
                    t.push((o, s, v));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.dim, space.dim, t))
}

/// H(w) = sum over stored components of H_{m,n}(w_{m,n}).
pub fn assemble_h(w: &KernelSequence, grid: &RadialGrid, space: &DiscreteFockSpace) -> Result<SparseMatrix> {
    let mut h = SparseMatrix::zeros(space.dim, space.dim);
    for k in w.components.values() {
        h = h.add(&assemble_component(k, grid, space)?);
    }
    Ok(h)
}

/// Quadrature form of ||w||_sharp: sum over node tuples of the slot weights
/// times sup_r |w|^2 prod_l (r + partial sums).
pub fn sharp_form_norm(w: &Kernel, grid: &RadialGrid) -> f64 {
    let cols = w.n_cols();
    let mut idx = vec![0usize; w.arity()];
    let mc2 = grid.measure_const * grid.measure_const;
    let mut total = 0.0;
    for col in 0..cols {
        w.unflatten(col, &mut idx);
        let weight: f64 = idx.iter().map(|&i| mc2 * grid.k_weights[i]).product();
        let column = w.column(col);
        let ks: Vec<f64> = idx.iter().map(|&i| grid.k_nodes[i]).collect();
        let factor = |r: f64| -> f64 {
            let mut p = 1.0;
            let mut s = 0.0;
            for &k in &ks[..w.m] {
                s += k;
                p *= r + s;
            }
            s = 0.0;
            for &k in &ks[w.m..] {
                s += k;
                p *= r + s;
            }
            p
        };
        let mut sup: f64 = 0.0;
        for (&r, v) in grid.r.nodes().iter().zip(&column) {
            sup = sup.max(v.norm_sqr() * factor(r));
        }
        for &r in grid.r.fine_nodes() {
            sup = sup.max(grid.r.interpolate(&column, r).norm_sqr() * factor(r));
        }
        total += weight * sup;
    }
    total.sqrt()
}

/// Both sides of sum_K prod k ||prod (H_f + partial sums)^{-1/2} a(K) phi||^2
/// = ||P_{N>=n} phi||^2 for n annihilation slots (P_Omega^perp for n = 1).
pub fn trivial_identity_sides(space: &DiscreteFockSpace, phi: &[Complex64], n: usize) -> (f64, f64) {
    let mut lhs = 0.0;
    // Accumulate a(K_1)..a(K_n) phi for every ordered tuple.
    let mut acc: HashMap<Vec<usize>, HashMap<usize, Complex64>> = HashMap::new();
    for (s, &c) in phi.iter().enumerate() {
        if c == ZERO {
            continue;
        }
        for (mid, a, modes) in annihilate_tuples(space, s, n) {
            let j = space.index_of(&mid).unwrap();
            *acc.entry(modes).or_default().entry(j).or_insert(ZERO) += c * a;
        }
    }
    for (modes, vec) in acc {
        let kprod: f64 = modes.iter().map(|&j| space.energies[j]).product();
        for (j, v) in vec {
            let hf = space.hf(j);
            // modes are listed in order of application, so a(K_1) is last.
            let mut denom = 1.0;
            let mut s = 0.0;
            for &m in modes.iter().rev() {
                s += space.energies[m];
                denom *= hf + s;
            }
            lhs += kprod * v.norm_sqr() / denom;
        }
    }
    let rhs: f64 = phi
        .iter()
        .enumerate()
        .filter(|(i, _)| space.photons(*i) >= n)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    (lhs, rhs)
}

/// Result of the ground-state oracle.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Lowest eigenpair of a self-adjoint sparse matrix by Lanczos with full
/// reorthogonalisation.
pub fn exact_ground_state(op: &SparseMatrix) -> Result<GroundState> {
    let n = op.nrows;
    let scale = op.max_abs().max(1.0);
    let defect = op.hermiticity_defect();
    if defect > 1e-10 * scale {
        return Err(Error::Numerical(format!(
            "operator is not self-adjoint (defect {defect:e})"
        )));
    }
    if n <= 64 {
        let m = op.to_dense();
        let eig = nalgebra::SymmetricEigen::new(m);
        let (imin, &e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let v: Vec<Complex64> = eig.eigenvectors.column(imin).iter().copied().collect();
        let hv = op.matvec(&v);
        let res = vec_norm(&hv.iter().zip(&v).map(|(a, b)| a - b * e).collect::<Vec<_>>());
        return Ok(GroundState {
            energy: e,
            vector: phase_fix(v),
            residual: res,
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, 0.0))
        .collect();
    let nq = vec_norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let max_k = n.min(400);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best = (f64::INFINITY, Vec::new(), f64::INFINITY);
    for k in 0..max_k {
        basis.push(q.clone());
        let mut w = op.matvec(&q);
        let a = inner(&q, &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let bnorm = vec_norm(&w);
        let dim = k + 1;
        if dim >= 8 && (dim % 8 == 0 || bnorm < 1e-14 * scale || dim == max_k) {
            let mut t = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                t[(i, i)] = alpha[i];
                if i + 1 < dim {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = nalgebra::SymmetricEigen::new(t);
            let (imin, &e) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            let y = eig.eigenvectors.column(imin);
            let res = (bnorm * y[dim - 1]).abs();
            best = (e, y.iter().copied().collect::<Vec<f64>>(), res);
            if res < 1e-11 * scale || bnorm < 1e-14 * scale {
                break;
            }
        }
        if bnorm < 1e-14 * scale {
            break;
        }
        beta.push(bnorm);
        q = w.iter().map(|v| v / bnorm).collect();
    }
    let (e, y, _) = best;
    if !e.is_finite() {
        return Err(Error::Numerical("Lanczos produced no Ritz value".into()));
    }
    let mut v = vec![ZERO; n];
    for (b, c) in basis.iter().zip(&y) {
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi += bi * *c;
        }
    }
    let nv = vec_norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let hv = op.matvec(&v);
    let res = vec_norm(&hv.iter().zip(&v).map(|(a, b)| a - b * e).collect::<Vec<_>>());
    if res > 1e-8 * scale {
        return Err(Error::Numerical(format!(
            "Lanczos did not converge (residual {res:e})"
        )));
    }
    Ok(GroundState {
        energy: e,
        vector: phase_fix(v),
        residual: res,
        iterations: basis.len(),
    })
}

/// Rotates a vector so that its largest component is real positive.
pub fn phase_fix(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap_or(ZERO);
    if big.norm() > 0.0 {
        let ph = big.conj() / big.norm();
        v.iter_mut().for_each(|x| *x *= ph);
    }
    v
}

/// Eigenpair summary written as JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenpairRecord {
    pub energy: [f64; 2],
    pub vector_norm: f64,
    pub residual: f64,
    pub dim: usize,
}

impl EigenpairRecord {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Binary Fock-vector file: magic, dim, n_modes, n_ph_max, atom_dim, then
/// little-endian (re, im) pairs.
pub fn write_fock_vector(
    path: &Path,
    v: &[Complex64],
    space: &DiscreteFockSpace,
    atom_dim: usize,
) -> Result<()> {
    let mut bytes = Vec::with_capacity(40 + 16 * v.len());
    bytes.extend_from_slice(b"FOCKVEC1");
    for x in [v.len(), space.n_modes, space.n_ph_max, atom_dim] {
        bytes.extend_from_slice(&(x as u64).to_le_bytes());
    }
    for c in v {
        bytes.extend_from_slice(&c.re.to_le_bytes());
        bytes.extend_from_slice(&c.im.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Reads a file written by `write_fock_vector`: (vector, n_modes, n_ph_max,
/// atom_dim).
pub fn read_fock_vector(path: &Path) -> Result<(Vec<Complex64>, usize, usize, usize)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let bad = || Error::Io(format!("{}: not a Fock-vector file", path.display()));
    if bytes.len() < 40 || &bytes[..8] != b"FOCKVEC1" {
        return Err(bad());
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap()) as usize;
    let (len, modes, cap, atom) = (word(0), word(1), word(2), word(3));
    if bytes.len() != 40 + 16 * len {
        return Err(bad());
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let v = (0..len)
        .map(|i| Complex64::new(f(40 + 16 * i), f(48 + 16 * i)))
        .collect();
    Ok((v, modes, cap, atom))
}

/// Kronecker product (atom matrix) x (Fock operator); the atom index is the
/// slow one.
pub fn kron_atom(atom: &DMatrix<Complex64>, op: &SparseMatrix) -> SparseMatrix {
    let d = atom.nrows();
    let mut t = Vec::new();
    for a in 0..d {
        for b in 0..d {
            let c = atom[(a, b)];
            if c == ZERO {
                continue;
            }
            for (r, col, v) in op.triplets() {
                t.push((a * op.nrows + r, b * op.ncols + col, c * v));
            }
        }
    }
    SparseMatrix::from_triplets(d * op.nrows, d * op.ncols, t)
}

pub fn to_dvector(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}
