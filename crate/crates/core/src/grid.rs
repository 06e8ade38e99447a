//! Radial discretisation: Chebyshev-Lobatto nodes in the field-energy
//! variable r and a graded composite Gauss rule in the photon momentum |k|.

use serde::{Deserialize, Serialize};

/// Chebyshev-Lobatto points on [0, 1] with barycentric interpolation and a
/// spectral differentiation matrix.
#[derive(Clone, Debug)]
pub struct ChebGrid {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    diff: Vec<f64>,
    fine: Vec<f64>,
    fine_interp: Vec<f64>,
}

impl ChebGrid {
    /// Builds the grid with `n >= 2` nodes, sorted ascending, 0 and 1 included.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Chebyshev grid needs at least two nodes");
        let nodes: Vec<f64> = (0..n)
            .map(|j| {
                let t = std::f64::consts::PI * j as f64 / (n - 1) as f64;
                0.5 * (1.0 - t.cos())
            })
            .collect();
        let mut nodes = nodes;
        nodes[0] = 0.0;
        nodes[n - 1] = 1.0;
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let mut diff = vec![0.0; n * n];
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if i != j {
                    let d = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                    diff[i * n + j] = d;
                    row_sum += d;
                }
            }
            diff[i * n + i] = -row_sum;
        }
        let n_fine = 10 * (n - 1) + 1;
        let fine: Vec<f64> = (0..n_fine)
            .map(|j| {
                let t = std::f64::consts::PI * j as f64 / (n_fine - 1) as f64;
                0.5 * (1.0 - t.cos())
            })
            .collect();
        let mut grid = ChebGrid {
            nodes,
            bary,
            diff,
            fine: Vec::new(),
            fine_interp: Vec::new(),
        };
        let mut fine_interp = Vec::with_capacity(n_fine * n);
        for &x in &fine {
            fine_interp.extend(grid.weights_at(x));
        }
        grid.fine = fine;
        grid.fine_interp = fine_interp;
        grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Oversampled evaluation points used for sup norms.
    pub fn fine_nodes(&self) -> &[f64] {
        &self.fine
    }

    /// Interpolation weights `l_j(x)` so that `p(x) = sum_j l_j(x) f_j`.
    pub fn weights_at(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        let mut out = vec![0.0; n];
        for (j, &xj) in self.nodes.iter().enumerate() {
            if x == xj {
                out[j] = 1.0;
                return out;
            }
        }
        let mut denom = 0.0;
        for j in 0..n {
            let t = self.bary[j] / (x - self.nodes[j]);
            out[j] = t;
            denom += t;
        }
        for v in &mut out {
            *v /= denom;
        }
        out
    }

    /// Barycentric interpolation of node values at `x`.
    pub fn interpolate<T>(&self, values: &[T], x: f64) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let w = self.weights_at(x);
        let mut acc = T::default();
        for (v, wj) in values.iter().zip(w) {
            acc = acc + *v * wj;
        }
        acc
    }

    /// Spectral derivative of node values.
    pub fn differentiate<T>(&self, values: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                let mut acc = T::default();
                for j in 0..n {
                    acc = acc + values[j] * self.diff[i * n + j];
                }
                acc
            })
            .collect()
    }

    /// Spectral differentiation matrix, row-major.
    pub fn diff_matrix(&self) -> &[f64] {
        &self.diff
    }

    /// Sup over r of `|p(r)|` for the interpolant of `values`: a scan on the
    /// oversampled grid followed by golden-section refinement around the
    /// best sample.
    pub fn sup_abs(&self, values: &[num_complex::Complex64]) -> f64 {
        let n = self.nodes.len();
        let mut best = 0.0;
        let mut best_i = 0;
        for (i, row) in self.fine_interp.chunks(n).enumerate() {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for (v, w) in values.iter().zip(row) {
                acc += *v * *w;
            }
            let a = acc.norm();
            if a > best {
                best = a;
                best_i = i;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        let lo = if best_i == 0 { self.fine[0] } else { self.fine[best_i - 1] };
        let hi = if best_i + 1 == self.fine.len() {
            self.fine[best_i]
        } else {
            self.fine[best_i + 1]
        };
        let f = |x: f64| -> f64 {
            let w = self.weights_at(x);
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for (v, wj) in values.iter().zip(w) {
                acc += *v * wj;
            }
            acc.norm()
        };
        let (mut a, mut b) = (lo, hi);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = f(c);
        let mut fd = f(d);
        for _ in 0..60 {
            if (b - a).abs() < 1e-12 {
                break;
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        best.max(fc).max(fd)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Parameters of the graded momentum rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KGridSpec {
    pub n_nodes: usize,
    pub ratio: f64,
    pub nodes_per_interval: usize,
}

impl Default for KGridSpec {
    fn default() -> Self {
        KGridSpec {
            n_nodes: 16,
            ratio: 2.0,
            nodes_per_interval: 2,
        }
    }
}

/// Composite Gauss rule on (0, 1] with breakpoints 1, 1/q, 1/q^2, ..., 0.
pub fn graded_gauss(spec: &KGridSpec) -> (Vec<f64>, Vec<f64>) {
    let per = spec.nodes_per_interval.max(1);
    let intervals = (spec.n_nodes / per).max(1);
    let (gx, gw) = gauss_legendre(per);
    let mut breaks: Vec<f64> = (0..intervals).map(|j| spec.ratio.powi(-(j as i32))).collect();
    breaks.push(0.0);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for j in (0..intervals).rev() {
        let (a, b) = (breaks[j + 1], breaks[j]);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(0.5 * (a + b) + 0.5 * (b - a) * x);
            weights.push(0.5 * (b - a) * w);
        }
    }
    (nodes, weights)
}

/// Local Lagrange interpolation on a sliding window of sorted nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalStencil {
    pub start: usize,
    pub weights: Vec<f64>,
}

/// Lagrange weights for evaluating at `x` from the `width` nodes nearest to
/// it (contiguous window, clamped at the ends).
pub fn local_stencil(nodes: &[f64], x: f64, width: usize) -> LocalStencil {
    let n = nodes.len();
    let width = width.min(n);
    let pos = nodes.partition_point(|&k| k < x);
    let start = pos.saturating_sub(width / 2).min(n - width);
    let window = &nodes[start..start + width];
    if let Some(j) = window.iter().position(|&k| k == x) {
        let mut weights = vec![0.0; width];
        weights[j] = 1.0;
        return LocalStencil { start, weights };
    }
    let weights = (0..width)
        .map(|j| {
            let mut l = 1.0;
            for m in 0..width {
                if m != j {
                    l *= (x - window[m]) / (window[j] - window[m]);
                }
            }
            l
        })
        .collect();
    LocalStencil { start, weights }
}

/// The tensor grid on which kernels live.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub r: ChebGrid,
    pub k_nodes: Vec<f64>,
    pub k_weights: Vec<f64>,
    pub measure_const: f64,
    pub k_spec: KGridSpec,
}

impl RadialGrid {
    pub fn new(n_r: usize, k_spec: KGridSpec, measure_const: f64) -> Self {
        let (k_nodes, k_weights) = graded_gauss(&k_spec);
        RadialGrid {
            r: ChebGrid::new(n_r),
            k_nodes,
            k_weights,
            measure_const,
            k_spec,
        }
    }

    pub fn n_r(&self) -> usize {
        self.r.len()
    }

    pub fn n_k(&self) -> usize {
        self.k_nodes.len()
    }

    /// Amplitude carried by one momentum slot at node `i`.
    pub fn slot_amplitude(&self, i: usize) -> f64 {
        self.measure_const * (self.k_weights[i] * self.k_nodes[i]).sqrt()
    }

    pub fn slot_amplitudes(&self) -> Vec<f64> {
        (0..self.n_k()).map(|i| self.slot_amplitude(i)).collect()
    }

    pub fn same_shape(&self, other: &RadialGrid) -> bool {
        self.r.nodes() == other.r.nodes()
            && self.k_nodes == other.k_nodes
            && self.k_weights == other.k_weights
            && self.measure_const == other.measure_const
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid::new(33, KGridSpec::default(), 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn chebyshev_nodes_are_sorted_with_endpoints() {
        let g = ChebGrid::new(33);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[32], 1.0);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interpolation_and_derivative_are_exact_on_polynomials() {
        let g = ChebGrid::new(17);
        let f = |x: f64| 1.0 - 2.0 * x + 3.0 * x.powi(4) - x.powi(7);
        let df = |x: f64| -2.0 + 12.0 * x.powi(3) - 7.0 * x.powi(6);
        let vals: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        for &x in &[0.013, 0.4, 0.77, 0.999] {
            assert!((g.interpolate(&vals, x) - f(x)).abs() < 1e-13);
        }
        let d = g.differentiate(&vals);
        for (x, dv) in g.nodes().iter().zip(&d) {
            assert!((dv - df(*x)).abs() < 1e-11, "{x} {dv}");
        }
    }

    #[test]
    fn sup_of_quadratic_bump() {
        let g = ChebGrid::new(9);
        let vals: Vec<Complex64> =
            g.nodes().iter().map(|&x| Complex64::new(x * (1.0 - x), 0.0)).collect();
        assert!((g.sup_abs(&vals) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_integrates_unit_interval() {
        let (k, w) = graded_gauss(&KGridSpec::default());
        assert_eq!(k.len(), 16);
        assert!(k.windows(2).all(|p| p[0] < p[1]));
        assert!(k[0] > 0.0 && k[15] <= 1.0);
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let cubic: f64 = k.iter().zip(&w).map(|(x, wi)| x.powi(3) * wi).sum();
        assert!((cubic - 0.25).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_five_points() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn local_stencil_reproduces_low_degree() {
        let (k, _) = graded_gauss(&KGridSpec::default());
        for &x in &[0.0005, 0.033, 0.31, 0.97] {
            let st = local_stencil(&k, x, 6);
            let v: f64 = st
                .weights
                .iter()
                .enumerate()
                .map(|(j, l)| l * (k[st.start + j].powi(5) - k[st.start + j]))
                .sum();
            assert!((v - (x.powi(5) - x)).abs() < 1e-12);
        }
    }
}
