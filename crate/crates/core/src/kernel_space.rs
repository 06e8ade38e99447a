//! Integral kernels w_{m,n}(r; K, K~) on the radial tensor grid, their
//! norms, symmetrisation, support projection and polydisc-ball membership.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{KGridSpec, RadialGrid};

/// Values below this are treated as zero by the support invariant.
pub const SUPPORT_TOL: f64 = 1e-14;

/// One component w_{m,n}: values over r-nodes x k-nodes^{m+n}, row-major with
/// r outermost and the first creation slot most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub m: usize,
    pub n: usize,
    pub n_r: usize,
    pub n_k: usize,
    pub values: Vec<Complex64>,
    pub dr_values: Vec<Complex64>,
}

impl Kernel {
    pub fn zeros(m: usize, n: usize, grid: &RadialGrid) -> Self {
        let n_r = grid.n_r();
        let n_k = grid.n_k();
        let len = n_r * n_k.pow((m + n) as u32);
        Kernel {
            m,
            n,
            n_r,
            n_k,
            values: vec![Complex64::new(0.0, 0.0); len],
            dr_values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Samples `f(r, creation momenta, annihilation momenta)` on the grid and
    /// differentiates spectrally.
    pub fn from_fn<F>(m: usize, n: usize, grid: &RadialGrid, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> Complex64,
    {
        let mut w = Kernel::zeros(m, n, grid);
        let cols = w.n_cols();
        let mut idx = vec![0usize; m + n];
        let mut ks = vec![0.0; m + n];
        for col in 0..cols {
            w.unflatten(col, &mut idx);
            for (s, &i) in idx.iter().enumerate() {
                ks[s] = grid.k_nodes[i];
            }
            for (ir, &r) in grid.r.nodes().iter().enumerate() {
                w.values[ir * cols + col] = f(r, &ks[..m], &ks[m..]);
            }
        }
        w.refresh_derivative(grid);
        w
    }

    pub fn arity(&self) -> usize {
        self.m + self.n
    }

    /// Number of momentum columns, n_k^{m+n}.
    pub fn n_cols(&self) -> usize {
        self.n_k.pow(self.arity() as u32)
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n_k + i)
    }

    pub fn unflatten(&self, mut col: usize, idx: &mut [usize]) {
        for s in (0..idx.len()).rev() {
            idx[s] = col % self.n_k;
            col /= self.n_k;
        }
    }

    pub fn value(&self, ir: usize, col: usize) -> Complex64 {
        self.values[ir * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        let cols = self.n_cols();
        (0..self.n_r).map(|ir| self.values[ir * cols + col]).collect()
    }

    pub fn dr_column(&self, col: usize) -> Vec<Complex64> {
        let cols = self.n_cols();
        (0..self.n_r).map(|ir| self.dr_values[ir * cols + col]).collect()
    }

    /// Recomputes the stored r-derivative from the values.
    pub fn refresh_derivative(&mut self, grid: &RadialGrid) {
        let cols = self.n_cols();
        let d = grid.r.diff_matrix();
        let n_r = self.n_r;
        for col in 0..cols {
            for i in 0..n_r {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n_r {
                    acc += self.values[j * cols + col] * d[i * n_r + j];
                }
                self.dr_values[i * cols + col] = acc;
            }
        }
    }

    /// Largest r kept by the support condition for column `col`.
    pub fn support_edge(&self, grid: &RadialGrid, col: usize) -> f64 {
        let mut idx = vec![0usize; self.arity()];
        self.unflatten(col, &mut idx);
        let sc: f64 = idx[..self.m].iter().map(|&i| grid.k_nodes[i]).sum();
        let sa: f64 = idx[self.m..].iter().map(|&i| grid.k_nodes[i]).sum();
        1.0 - sc.max(sa)
    }

    /// Evaluates the r-interpolant of one column.
    pub fn eval_column(&self, grid: &RadialGrid, col: usize, r: f64) -> Complex64 {
        grid.r.interpolate(&self.column(col), r)
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in self.values.iter_mut().chain(self.dr_values.iter_mut()) {
            *v *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &Kernel, s: Complex64) {
        assert_eq!((self.m, self.n, self.values.len()), (other.m, other.n, other.values.len()));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += *b * s;
        }
        for (a, b) in self.dr_values.iter_mut().zip(&other.dr_values) {
            *a += *b * s;
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Average over permutations of the creation slots and of the annihilation
/// slots.
pub fn symmetrize(w: &Kernel) -> Kernel {
    if w.m <= 1 && w.n <= 1 {
        return w.clone();
    }
    let pm = permutations(w.m);
    let pn = permutations(w.n);
    let norm = 1.0 / (pm.len() * pn.len()) as f64;
    let cols = w.n_cols();
    let mut out = w.clone();
    let mut idx = vec![0usize; w.arity()];
    let mut jdx = vec![0usize; w.arity()];
    for col in 0..cols {
        w.unflatten(col, &mut idx);
        let mut sources = Vec::with_capacity(pm.len() * pn.len());
        for a in &pm {
            for b in &pn {
                for (s, &t) in a.iter().enumerate() {
                    jdx[s] = idx[t];
                }
                for (s, &t) in b.iter().enumerate() {
                    jdx[w.m + s] = idx[w.m + t];
                }
                sources.push(w.flatten(&jdx));
            }
        }
        for ir in 0..w.n_r {
            let mut v = Complex64::new(0.0, 0.0);
            let mut d = Complex64::new(0.0, 0.0);
            for &src in &sources {
                v += w.values[ir * cols + src];
                d += w.dr_values[ir * cols + src];
            }
            out.values[ir * cols + col] = v * norm;
            out.dr_values[ir * cols + col] = d * norm;
        }
    }
    out
}

/// Zeroes values (and stored derivatives) outside
/// Q_{m,n} = { r <= 1 - max(sum K, sum K~) }.
pub fn project_support(w: &Kernel, grid: &RadialGrid) -> Kernel {
    if w.arity() == 0 {
        return w.clone();
    }
    let mut out = w.clone();
    let cols = w.n_cols();
    for col in 0..cols {
        let edge = w.support_edge(grid, col);
        for (ir, &r) in grid.r.nodes().iter().enumerate() {
            if r > edge {
                out.values[ir * cols + col] = Complex64::new(0.0, 0.0);
                out.dr_values[ir * cols + col] = Complex64::new(0.0, 0.0);
            }
        }
    }
    out
}

/// max over k-columns of sup_r |w| + sup_r |d_r w|.
pub fn sharp_norm(w: &Kernel, grid: &RadialGrid) -> f64 {
    let cols = w.n_cols();
    let mut scans: Vec<(f64, usize)> = Vec::with_capacity(cols);
    for col in 0..cols {
        let c = w.column(col);
        let d = w.dr_column(col);
        if c.iter().chain(&d).all(|v| *v == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let coarse = coarse_sup(grid, &c) + coarse_sup(grid, &d);
        scans.push((coarse, col));
    }
    let top = scans.iter().map(|s| s.0).fold(0.0, f64::max);
    let mut best: f64 = 0.0;
    for (coarse, col) in scans {
        if coarse < 0.98 * top {
            continue;
        }
        let v = grid.r.sup_abs(&w.column(col)) + grid.r.sup_abs(&w.dr_column(col));
        best = best.max(v);
    }
    best
}

fn coarse_sup(grid: &RadialGrid, vals: &[Complex64]) -> f64 {
    let fine = grid.r.fine_nodes();
    let mut best: f64 = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    // Every fifth oversampled point is enough to rank columns.
    for &x in fine.iter().step_by(5) {
        best = best.max(grid.r.interpolate(vals, x).norm());
    }
    best
}

/// Polydisc parameters (alpha, beta, gamma).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BallParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        BallParams { alpha, beta, gamma }
    }

    pub fn uniform(eps: f64) -> Self {
        BallParams::new(eps, eps, eps)
    }

    pub fn is_valid(&self) -> bool {
        [self.alpha, self.beta, self.gamma]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn contains(&self, measured: &BallParams) -> bool {
        measured.alpha <= self.alpha && measured.beta <= self.beta && measured.gamma <= self.gamma
    }
}

/// Sequence {w_{m,n}} for m + n <= M_max plus a certified bound on the
/// xi-weighted norm of every discarded sector.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSequence {
    pub components: BTreeMap<(usize, usize), Kernel>,
    pub xi: f64,
    pub tail_bound: f64,
}

impl KernelSequence {
    pub fn new(xi: f64) -> Self {
        KernelSequence {
            components: BTreeMap::new(),
            xi,
            tail_bound: 0.0,
        }
    }

    /// Free kernel w_{0,0}(r) = r - z.
    pub fn free(grid: &RadialGrid, z: Complex64, xi: f64) -> Self {
        let mut s = KernelSequence::new(xi);
        s.insert(Kernel::from_fn(0, 0, grid, |r, _, _| Complex64::new(r, 0.0) - z));
        s
    }

    /// Inserts a component; the m + n = 1 sector must vanish identically.
    pub fn insert(&mut self, w: Kernel) {
        if w.arity() == 1 {
            let worst = w.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(worst <= SUPPORT_TOL, "m+n=1 sector must vanish, found {worst:e}");
            return;
        }
        self.components.insert((w.m, w.n), w);
    }

    pub fn get(&self, m: usize, n: usize) -> Option<&Kernel> {
        self.components.get(&(m, n))
    }

    pub fn w00(&self) -> &Kernel {
        self.get(0, 0).expect("sequence without a (0,0) component")
    }

    pub fn max_arity(&self) -> usize {
        self.components.keys().map(|(m, n)| m + n).max().unwrap_or(0)
    }

    /// Linear combination sum_j c_j s_j over sequences of identical shape;
    /// the tail bound combines as sum_j |c_j| tail_j.
    pub fn combine(parts: &[(&KernelSequence, Complex64)]) -> KernelSequence {
        let first = parts[0].0;
        let mut out = first.clone();
        for w in out.components.values_mut() {
            w.scale(Complex64::new(0.0, 0.0));
        }
        out.tail_bound = 0.0;
        for (seq, c) in parts {
            for (key, w) in &seq.components {
                match out.components.get_mut(key) {
                    Some(acc) => acc.add_scaled(w, *c),
                    None => {
                        let mut k = w.clone();
                        k.scale(*c);
                        out.components.insert(*key, k);
                    }
                }
            }
            out.tail_bound += c.norm() * seq.tail_bound;
        }
        out
    }
}

/// sum_{m,n} xi^{-(m+n)} ||w_{m,n}||^# + tail_bound.
pub fn xi_norm(w: &KernelSequence, grid: &RadialGrid) -> f64 {
    weighted_norm(w, grid, 0) + w.tail_bound
}

/// xi-norm of the components with m + n >= `min_arity` (without tail).
pub fn weighted_norm(w: &KernelSequence, grid: &RadialGrid, min_arity: usize) -> f64 {
    w.components
        .values()
        .filter(|k| k.arity() >= min_arity)
        .map(|k| w.xi.powi(-(k.arity() as i32)) * sharp_norm(k, grid))
        .fold(0.0, |a, b| a + b)
}

/// Interaction part ||w_{>=1}||_xi including the tail certificate.
pub fn interaction_norm(w: &KernelSequence, grid: &RadialGrid) -> f64 {
    weighted_norm(w, grid, 1) + w.tail_bound
}

/// Sample set of spectral parameters: equispaced contour points followed by
/// interior points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZSamples {
    pub radius: f64,
    pub n_contour: usize,
    pub interior: Vec<Complex64>,
}

impl ZSamples {
    /// 16 contour points on |z| = 0.3 plus a 3x3 interior grid.
    pub fn standard() -> Self {
        ZSamples::new(0.3, 16, 0.15)
    }

    pub fn new(radius: f64, n_contour: usize, interior_spacing: f64) -> Self {
        let mut interior = Vec::new();
        for a in -1..=1 {
            for b in -1..=1 {
                interior.push(Complex64::new(a as f64, b as f64) * interior_spacing);
            }
        }
        ZSamples {
            radius,
            n_contour,
            interior,
        }
    }

    pub fn contour(&self) -> Vec<Complex64> {
        (0..self.n_contour)
            .map(|j| {
                Complex64::from_polar(
                    self.radius,
                    2.0 * std::f64::consts::PI * j as f64 / self.n_contour as f64,
                )
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Complex64> {
        let mut p = self.contour();
        p.extend(self.interior.iter().copied());
        p
    }

    /// Weights lambda_j with f(z) ~ sum_j lambda_j f(z_j) over the contour
    /// points: the degree n_contour - 1 interpolant.
    pub fn cauchy_weights(&self, z: Complex64) -> Vec<Complex64> {
        let pts = self.contour();
        let n = self.n_contour as f64;
        pts.iter()
            .map(|&zj| {
                let q = z / zj;
                let mut acc = Complex64::new(0.0, 0.0);
                let mut p = Complex64::new(1.0, 0.0);
                for _ in 0..self.n_contour {
                    acc += p;
                    p *= q;
                }
                acc / n
            })
            .collect()
    }

    /// Weights for the z-derivative of the same interpolant.
    pub fn cauchy_deriv_weights(&self, z: Complex64) -> Vec<Complex64> {
        let pts = self.contour();
        let n = self.n_contour as f64;
        pts.iter()
            .map(|&zj| {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut p = Complex64::new(1.0, 0.0) / zj;
                for j in 1..self.n_contour {
                    acc += p * j as f64;
                    p *= z / zj;
                }
                acc / n
            })
            .collect()
    }
}

/// A kernel sequence sampled at every point of a `ZSamples` set.
#[derive(Clone, Debug)]
pub struct ZSampled {
    pub zs: ZSamples,
    pub seqs: Vec<KernelSequence>,
}

impl ZSampled {
    /// Builds the family from contour samples; interior samples come from
    /// the contour interpolant.
    pub fn from_contour(zs: ZSamples, contour: Vec<KernelSequence>) -> Self {
        assert_eq!(contour.len(), zs.n_contour);
        let mut fam = ZSampled {
            zs: zs.clone(),
            seqs: contour,
        };
        for &z in &zs.interior {
            let s = fam.at(z);
            fam.seqs.push(s);
        }
        fam
    }

    pub fn contour(&self) -> &[KernelSequence] {
        &self.seqs[..self.zs.n_contour]
    }

    /// Kernel sequence at an arbitrary z from the contour interpolant.
    pub fn at(&self, z: Complex64) -> KernelSequence {
        let lam = self.zs.cauchy_weights(z);
        let parts: Vec<(&KernelSequence, Complex64)> =
            self.contour().iter().zip(lam).collect();
        KernelSequence::combine(&parts)
    }

    /// w_{0,0}(z, r) from the contour interpolant.
    pub fn w00_at(&self, z: Complex64, r: f64, grid: &RadialGrid) -> Complex64 {
        let lam = self.zs.cauchy_weights(z);
        self.contour()
            .iter()
            .zip(lam)
            .map(|(s, l)| l * s.w00().eval_column(grid, 0, r))
            .sum()
    }

    /// (w_{0,0}(z, 0), d_z w_{0,0}(z, 0)).
    pub fn w00_origin_with_deriv(&self, z: Complex64) -> (Complex64, Complex64) {
        let lam = self.zs.cauchy_weights(z);
        let dlam = self.zs.cauchy_deriv_weights(z);
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for ((s, l), dl) in self.contour().iter().zip(lam).zip(dlam) {
            let w0 = s.w00().values[0];
            v += l * w0;
            d += dl * w0;
        }
        (v, d)
    }
}

/// Measured ball parameters and membership verdict.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BallVerdict {
    pub measured: BallParams,
    pub params: BallParams,
    pub inside: bool,
}

/// Measures sup over the sample of ||d_r w00 - 1||, |w00(z,0) + z| and
/// ||w_{>=1}||_xi.
pub fn ball_check(family: &ZSampled, grid: &RadialGrid, params: BallParams) -> Result<BallVerdict> {
    let pts = family.zs.points();
    if pts.is_empty() || family.seqs.is_empty() {
        return Err(Error::Numerical("ball check on an empty z-sample set".into()));
    }
    let mut measured = BallParams::default();
    for (z, seq) in pts.iter().zip(&family.seqs) {
        let w00 = seq.w00();
        let shifted: Vec<Complex64> = w00.dr_values.iter().map(|d| d - 1.0).collect();
        measured.alpha = measured.alpha.max(grid.r.sup_abs(&shifted));
        measured.beta = measured.beta.max((w00.values[0] + z).norm());
        measured.gamma = measured.gamma.max(interaction_norm(seq, grid));
    }
    Ok(BallVerdict {
        measured,
        params,
        inside: params.contains(&measured),
    })
}

/// Self-describing kernel file: header plus row-major complex arrays.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelFile {
    pub m: usize,
    pub n: usize,
    pub xi: f64,
    pub r_nodes: Vec<f64>,
    pub k_nodes: Vec<f64>,
    pub k_weights: Vec<f64>,
    pub k_grid: KGridSpec,
    pub measure_const: f64,
    pub z: Option<[f64; 2]>,
    pub values: Vec<[f64; 2]>,
    pub dr_values: Vec<[f64; 2]>,
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn unpairs(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|c| Complex64::new(c[0], c[1])).collect()
}

impl KernelFile {
    pub fn from_kernel(w: &Kernel, grid: &RadialGrid, xi: f64, z: Option<Complex64>) -> Self {
        KernelFile {
            m: w.m,
            n: w.n,
            xi,
            r_nodes: grid.r.nodes().to_vec(),
            k_nodes: grid.k_nodes.clone(),
            k_weights: grid.k_weights.clone(),
            k_grid: grid.k_spec,
            measure_const: grid.measure_const,
            z: z.map(|z| [z.re, z.im]),
            values: pairs(&w.values),
            dr_values: pairs(&w.dr_values),
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let n_r = self.r_nodes.len();
        let n_k = self.k_nodes.len();
        let len = n_r * n_k.pow((self.m + self.n) as u32);
        if self.values.len() != len || self.dr_values.len() != len {
            return Err(Error::Numerical(format!(
                "kernel file holds {} values, header implies {len}",
                self.values.len()
            )));
        }
        Ok(Kernel {
            m: self.m,
            n: self.n,
            n_r,
            n_k,
            values: unpairs(&self.values),
            dr_values: unpairs(&self.dr_values),
        })
    }

    pub fn grid(&self) -> RadialGrid {
        RadialGrid::new(self.r_nodes.len(), self.k_grid, self.measure_const)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn sharp_norm_of_constant_and_identity() {
        let grid = RadialGrid::default();
        let w = Kernel::from_fn(0, 0, &grid, |_, _, _| Complex64::new(0.3, -0.4));
        assert!((sharp_norm(&w, &grid) - 0.5).abs() < 1e-12);
        let w = Kernel::from_fn(0, 0, &grid, |r, _, _| c(r));
        assert!((sharp_norm(&w, &grid) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_two_slot_product() {
        let grid = RadialGrid::new(5, KGridSpec { n_nodes: 4, ratio: 2.0, nodes_per_interval: 2 }, 1.0);
        let f = |k: f64| c(1.0 + k);
        let g = |k: f64| c(k * k - 0.2);
        let w = Kernel::from_fn(2, 0, &grid, |_, a, _| f(a[0]) * g(a[1]));
        let s = symmetrize(&w);
        let ks = &grid.k_nodes;
        for i in 0..4 {
            for j in 0..4 {
                let col = w.flatten(&[i, j]);
                let want = 0.5 * (f(ks[i]) * g(ks[j]) + f(ks[j]) * g(ks[i]));
                assert!((s.value(2, col) - want).norm() < 1e-15);
            }
        }
        assert_eq!(symmetrize(&s), s);
    }

    #[test]
    fn support_projection_of_unit_kernel() {
        let grid = RadialGrid::default();
        let w = Kernel::from_fn(1, 0, &grid, |_, _, _| c(1.0));
        let p = project_support(&w, &grid);
        for col in 0..grid.n_k() {
            let k = grid.k_nodes[col];
            for (ir, &r) in grid.r.nodes().iter().enumerate() {
                let want = if r > 1.0 - k { 0.0 } else { 1.0 };
                assert_eq!(p.value(ir, col), c(want));
            }
        }
        assert_eq!(project_support(&p, &grid), p);
    }

    #[test]
    fn xi_weighting() {
        let grid = RadialGrid::default();
        let mut s = KernelSequence::new(0.5);
        s.insert(Kernel::from_fn(1, 1, &grid, |_, _, _| c(0.25)));
        assert!((xi_norm(&s, &grid) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cauchy_interpolant_is_exact_on_polynomials() {
        let zs = ZSamples::standard();
        let f = |z: Complex64| z * z * z - z * 0.5 + 2.0;
        let vals: Vec<Complex64> = zs.contour().iter().map(|&z| f(z)).collect();
        let z = Complex64::new(0.03, -0.02);
        let v: Complex64 = zs.cauchy_weights(z).iter().zip(&vals).map(|(l, v)| l * v).sum();
        assert!((v - f(z)).norm() < 1e-14);
        let d: Complex64 = zs.cauchy_deriv_weights(z).iter().zip(&vals).map(|(l, v)| l * v).sum();
        assert!((d - (z * z * 3.0 - 0.5)).norm() < 1e-13);
    }

    #[test]
    fn free_kernel_sits_at_ball_centre() {
        let grid = RadialGrid::default();
        let zs = ZSamples::standard();
        let contour = zs.contour().iter().map(|&z| KernelSequence::free(&grid, z, 0.2)).collect();
        let fam = ZSampled::from_contour(zs, contour);
        let v = ball_check(&fam, &grid, BallParams::uniform(1e-12)).unwrap();
        assert!(v.inside, "{:?}", v.measured);
    }
}
