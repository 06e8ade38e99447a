//! One renormalization step: the spectral map E_rho and its Newton inverse,
//! the Wick-ordered kernels of the Feshbach map for chi_rho(H_f) followed by
//! the dilation, and contraction diagnostics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DiscreteFockSpace, SparseMatrix};
use crate::grid::{local_stencil, RadialGrid};
use crate::kernel_space::{
    ball_check, interaction_norm, weighted_norm, BallParams, BallVerdict, Kernel, KernelSequence, ZSampled,
};
use crate::smooth::{chi_rho, chibar_rho};
use crate::wick::{
    self, assemble_sequence, factorial, FactorIndex, InternalSpace, SeriesOptions, SeriesReport, SeriesSums, Slot,
    WickSource,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Parameters of the renormalization map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RgConfig {
    pub rho: f64,
    pub xi: f64,
    pub l_max: usize,
    /// Output sectors kept: m + n <= m_max.
    pub m_max: usize,
    /// Tuples of output arity >= 1 with weighted bound below this are
    /// skipped and certified.
    pub skip_tol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Points of the uniform r-tables used for off-grid kernel lookups.
    pub table_points: usize,
}

impl Default for RgConfig {
    fn default() -> Self {
        RgConfig {
            rho: 0.1,
            xi: 0.2,
            l_max: 4,
            m_max: 2,
            skip_tol: 1e-5,
            newton_tol: 1e-13,
            newton_max_iter: 50,
            table_points: 257,
        }
    }
}

impl RgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 0.25) {
            return Err(Error::config(None, "rho must lie in (0, 1/4]"));
        }
        if !(self.xi > 0.0 && self.xi <= 0.25) {
            return Err(Error::config(None, "xi must lie in (0, 1/4]"));
        }
        if self.l_max < 2 {
            return Err(Error::config(None, "l_max must be at least 2"));
        }
        if self.m_max != 2 {
            return Err(Error::config(None, "only m_max = 2 kernel sectors are supported"));
        }
        if self.table_points < 3 {
            return Err(Error::config(None, "table_points must be at least 3"));
        }
        Ok(())
    }
}

/// E[w](z) = -w_{0,0}(z, 0) for a single sample.
pub fn e_of(w: &KernelSequence) -> Complex64 {
    -w.w00().values[0]
}

/// E_rho[w](z) and its z-derivative from the contour interpolant.
pub fn e_rho(family: &ZSampled, rho: f64, z: Complex64) -> (Complex64, Complex64) {
    let (v, d) = family.w00_origin_with_deriv(z);
    (-v / rho, -d / rho)
}

/// Solves E_rho[w](I) = target by Newton's method from rho * target.
/// Returns I and the iteration count.
pub fn invert_e(family: &ZSampled, cfg: &RgConfig, target: Complex64) -> Result<(Complex64, usize)> {
    let mut x = target * cfg.rho;
    for it in 1..=cfg.newton_max_iter {
        let (e, de) = e_rho(family, cfg.rho, x);
        if de.norm() == 0.0 || !de.is_finite() {
            return Err(Error::Numerical("E_rho has a vanishing derivative".into()));
        }
        let step = (e - target) / de;
        x -= step;
        let res = (e_rho(family, cfg.rho, x).0 - target).norm();
        if res <= cfg.newton_tol || step.norm() <= 1e-16 * (1.0 + x.norm()) {
            if x.norm() > 0.625 * cfg.rho {
                return Err(Error::Numerical(format!(
                    "I_rho({target}) = {x} escapes |z| < 5 rho / 8"
                )));
            }
            return Ok((x, it));
        }
    }
    Err(Error::Numerical(format!("Newton inversion of E_rho did not converge at {target}")))
}

/// Cubic Hermite tables in r of every kernel column at the slot momenta
/// {k_i} (internal) and {rho k_i} (external), for one spectral parameter.
pub struct KernelTables {
    rho: f64,
    n_k: usize,
    n_t: usize,
    /// Slot momenta: internal nodes then scaled external nodes.
    momenta: Vec<f64>,
    w00: Vec<(Complex64, Complex64)>,
    sectors: Vec<((usize, usize), Vec<(Complex64, Complex64)>)>,
    sups: Vec<((usize, usize), f64)>,
}

fn sample_column(grid: &RadialGrid, vals: &[Complex64], dvals: &[Complex64], n_t: usize) -> Vec<(Complex64, Complex64)> {
    (0..n_t)
        .map(|j| {
            let x = j as f64 / (n_t - 1) as f64;
            (grid.r.interpolate(vals, x), grid.r.interpolate(dvals, x))
        })
        .collect()
}

fn hermite(table: &[(Complex64, Complex64)], x: f64) -> Complex64 {
    let n = table.len();
    let h = 1.0 / (n - 1) as f64;
    let t = (x / h).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    let s = t - i as f64;
    let (y0, d0) = table[i];
    let (y1, d1) = table[i + 1];
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0) + d0 * (h * (s3 - 2.0 * s2 + s)) + y1 * (-2.0 * s3 + 3.0 * s2) + d1 * (h * (s3 - s2))
}

impl KernelTables {
    pub fn new(w: &KernelSequence, grid: &RadialGrid, rho: f64, n_t: usize) -> Result<Self> {
        let n_k = grid.n_k();
        let mut momenta = grid.k_nodes.clone();
        momenta.extend(grid.k_nodes.iter().map(|k| rho * k));
        let stencils: Vec<(usize, Vec<f64>)> = momenta
            .iter()
            .enumerate()
            .map(|(u, &k)| {
                if u < n_k {
                    (u, vec![1.0])
                } else {
                    let st = local_stencil(&grid.k_nodes, k, 6);
                    (st.start, st.weights)
                }
            })
            .collect();
        let w00k = w.w00();
        let w00 = sample_column(grid, &w00k.column(0), &w00k.dr_column(0), n_t);
        let mut sectors = Vec::new();
        let mut sups = Vec::new();
        for (&(m, n), k) in &w.components {
            match m + n {
                0 => continue,
                2 => {}
                a => return Err(Error::Numerical(format!("kernel tables support arity 2 only, found {a}"))),
            }
            let n_u = momenta.len();
            let mut tab = Vec::with_capacity(n_u * n_u * n_t);
            let cols = k.n_cols();
            let mut vals = vec![ZERO; k.n_r];
            let mut dvals = vec![ZERO; k.n_r];
            let mut sup: f64 = 0.0;
            for u1 in 0..n_u {
                for u2 in 0..n_u {
                    vals.iter_mut().for_each(|v| *v = ZERO);
                    dvals.iter_mut().for_each(|v| *v = ZERO);
                    let (s1, w1) = &stencils[u1];
                    let (s2, w2) = &stencils[u2];
                    for (a, wa) in w1.iter().enumerate() {
                        for (b, wb) in w2.iter().enumerate() {
                            let col = k.flatten(&[s1 + a, s2 + b]);
                            let c = wa * wb;
                            for ir in 0..k.n_r {
                                vals[ir] += k.values[ir * cols + col] * c;
                                dvals[ir] += k.dr_values[ir * cols + col] * c;
                            }
                        }
                    }
                    let col = sample_column(grid, &vals, &dvals, n_t);
                    sup = col.iter().fold(sup, |s, v| s.max(v.0.norm()));
                    tab.extend(col);
                }
            }
            sectors.push(((m, n), tab));
            sups.push(((m, n), sup));
        }
        Ok(KernelTables {
            rho,
            n_k,
            n_t,
            momenta,
            w00,
            sectors,
            sups,
        })
    }

    pub fn w00(&self, x: f64) -> Complex64 {
        hermite(&self.w00, x)
    }

    pub fn sup(&self, sector: (usize, usize)) -> f64 {
        self.sups.iter().find(|s| s.0 == sector).map_or(0.0, |s| s.1)
    }

    fn slot_index(&self, s: Slot) -> usize {
        match s {
            Slot::Int(i) => i,
            Slot::Ext(i) => self.n_k + i,
        }
    }

    /// Kernel value at field energy x with the given slots; zero outside
    /// the support x + sum K <= 1, x + sum K~ <= 1.
    pub fn eval(&self, sector: (usize, usize), cre: &[Slot], ann: &[Slot], x: f64) -> Complex64 {
        let Some((_, tab)) = self.sectors.iter().find(|s| s.0 == sector) else {
            return ZERO;
        };
        let u: Vec<usize> = cre.iter().chain(ann).map(|&s| self.slot_index(s)).collect();
        let sc: f64 = u[..cre.len()].iter().map(|&i| self.momenta[i]).sum();
        let sa: f64 = u[cre.len()..].iter().map(|&i| self.momenta[i]).sum();
        if x > 1.0 || x + sc > 1.0 || x + sa > 1.0 {
            return ZERO;
        }
        let n_u = self.momenta.len();
        let col = u[0] * n_u + u[1];
        hermite(&tab[col * self.n_t..(col + 1) * self.n_t], x)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Series data of one renormalization step at one spectral parameter.
pub struct RgSource<'a> {
    pub tables: &'a KernelTables,
    pub grid: &'a RadialGrid,
    amp: Vec<f64>,
    inner_sup: f64,
}

/// Lower bound t = 3 rho / 32 required of |w_{0,0}| on [3 rho / 4, 1].
pub fn w00_floor(rho: f64) -> f64 {
    3.0 * rho / 32.0
}

impl<'a> RgSource<'a> {
    pub fn new(tables: &'a KernelTables, grid: &'a RadialGrid) -> Result<Self> {
        let rho = tables.rho;
        let mut inner_sup: f64 = 0.0;
        let n = 4 * (tables.n_t - 1);
        for j in 0..=n {
            let x = 0.75 * rho + (1.0 - 0.75 * rho) * j as f64 / n as f64;
            let w = tables.w00(x).norm();
            if w < w00_floor(rho) {
                return Err(Error::Numerical(format!(
                    "|w00({x:.4})| = {w:.3e} is below 3 rho / 32"
                )));
            }
            inner_sup = inner_sup.max(chibar_rho(rho, x).powi(2) / w);
        }
        Ok(RgSource {
            tables,
            grid,
            amp: grid.slot_amplitudes(),
            inner_sup,
        })
    }
}

impl WickSource for RgSource<'_> {
    fn atom_dim(&self) -> usize {
        1
    }
    fn scale(&self) -> f64 {
        self.tables.rho
    }
    fn r_nodes(&self) -> &[f64] {
        self.grid.r.nodes()
    }
    fn ext_momenta(&self) -> &[f64] {
        &self.grid.k_nodes
    }
    fn int_momenta(&self) -> &[f64] {
        &self.grid.k_nodes
    }
    fn int_amplitudes(&self) -> &[f64] {
        &self.amp
    }
    fn has_sector(&self, a: usize, b: usize) -> bool {
        a + b > 0 && self.tables.sup((a, b)) > 0.0
    }
    fn kernel(&self, sector: (usize, usize), cre: &[Slot], ann: &[Slot], args: &[f64], out: &mut [Complex64]) {
        for (o, &x) in out.iter_mut().zip(args) {
            *o = self.tables.eval(sector, cre, ann, x);
        }
    }
    fn outer(&self, x: f64) -> f64 {
        chi_rho(self.tables.rho, x)
    }
    fn inner(&self, _atom: usize, x: f64) -> Complex64 {
        if x > 1.0 {
            return ZERO;
        }
        let c = chibar_rho(self.tables.rho, x);
        if c == 0.0 {
            return ZERO;
        }
        Complex64::new(c * c, 0.0) / self.tables.w00(x)
    }
    /// sup |w| / sqrt(p! q!).
    fn factor_bound(&self, f: FactorIndex) -> f64 {
        self.tables.sup(f.sector()) / (factorial(f.p) * factorial(f.q)).sqrt()
    }
    fn inner_bound(&self) -> f64 {
        self.inner_sup
    }
}

fn rg_options(cfg: &RgConfig) -> SeriesOptions {
    SeriesOptions {
        l_max: cfg.l_max,
        max_slots: 2,
        m_max: cfg.m_max,
        skip_tol: cfg.skip_tol,
        xi: cfg.xi,
        arity_factor: (0..=cfg.m_max).map(|a| cfg.rho.powi(a as i32 - 1)).collect(),
    }
}

/// Internal photon space of the renormalization series.
pub fn rg_internal_space(grid: &RadialGrid, cfg: &RgConfig) -> InternalSpace {
    crate::initial::internal_space_for(grid, cfg.l_max, 2)
}

/// R^#_rho(w) for a single sample w = w(zeta): the renormalized kernels with
/// the input tail added to the new certificate.
pub fn renormalize_sharp(
    w: &KernelSequence,
    grid: &RadialGrid,
    cfg: &RgConfig,
    internal: &InternalSpace,
) -> Result<(KernelSequence, SeriesSums)> {
    let tables = KernelTables::new(w, grid, cfg.rho, cfg.table_points)?;
    let src = RgSource::new(&tables, grid)?;
    let sums = wick::series(&src, internal, &rg_options(cfg));
    let w00 = w.w00();
    let col = w00.column(0);
    let dcol = w00.dr_column(0);
    let mut base = Kernel::from_fn(0, 0, grid, |r, _, _| grid.r.interpolate(&col, cfg.rho * r) / cfg.rho);
    // d/dr [rho^{-1} w(rho r)] = w'(rho r).
    for (ir, &r) in grid.r.nodes().iter().enumerate() {
        base.dr_values[ir] = grid.r.interpolate(&dcol, cfg.rho * r);
    }
    let (mut seq, parity) = assemble_sequence(&sums, grid, cfg.xi, base);
    if parity > 0.0 {
        return Err(Error::Numerical(format!("odd renormalized sectors do not vanish ({parity:e})")));
    }
    seq.tail_bound = sums.certificate() + w.tail_bound;
    Ok((seq, sums))
}

/// Record of one renormalization step over all contour samples.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub newton_iterations: usize,
    /// max |E_rho(I_rho(z)) - z| over the contour.
    pub fixed_point_residual: f64,
    /// I_rho at each contour point.
    pub inverse_points: Vec<Complex64>,
    pub series: SeriesReport,
    /// sup |d_z E_rho - 1 / rho| * rho over the contour images.
    pub de_deviation: f64,
}

/// R_rho(w)(z) = R^#_rho(w(I_rho(z))) at every contour point of the family.
pub fn renormalize(family: &ZSampled, grid: &RadialGrid, cfg: &RgConfig, step: usize) -> Result<(ZSampled, StepRecord)> {
    cfg.validate()?;
    let internal = rg_internal_space(grid, cfg);
    let contour = family.zs.contour();
    let results: Vec<Result<(KernelSequence, SeriesSums, Complex64, usize, f64, f64)>> = contour
        .par_iter()
        .map(|&z| {
            let (zeta, it) = invert_e(family, cfg, z)?;
            let (e, de) = e_rho(family, cfg.rho, zeta);
            let w = family.at(zeta);
            let (seq, sums) = renormalize_sharp(&w, grid, cfg, &internal)
                .map_err(|e| Error::certificate(step, e.to_string()))?;
            Ok((seq, sums, zeta, it, (e - z).norm(), (de * cfg.rho - 1.0).norm()))
        })
        .collect();
    let mut record = StepRecord {
        step,
        ..Default::default()
    };
    let mut seqs = Vec::with_capacity(contour.len());
    for r in results {
        let (seq, sums, zeta, it, res, dev) = r?;
        record.series.absorb(&sums, 0.0);
        record.newton_iterations = record.newton_iterations.max(it);
        record.fixed_point_residual = record.fixed_point_residual.max(res);
        record.de_deviation = record.de_deviation.max(dev);
        record.inverse_points.push(zeta);
        seqs.push(seq);
    }
    if record.series.ratio >= 0.5 {
        return Err(Error::certificate(
            step,
            format!("renormalization series ratio {:.3} is not below 1/2", record.series.ratio),
        ));
    }
    let tail = seqs.iter().map(|s| s.tail_bound).fold(0.0, f64::max);
    for s in &mut seqs {
        s.tail_bound = tail;
    }
    Ok((ZSampled::from_contour(family.zs.clone(), seqs), record))
}

/// Ratios of measured ball parameters across one step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionReport {
    pub before: BallParams,
    pub after: BallParams,
    /// Computed interaction norms (tails excluded), max over the contour.
    pub gamma_before: f64,
    pub gamma_after: f64,
    pub gamma_ratio: f64,
    /// Tail certificate added by this step, relative to `gamma_before`.
    pub slack_ratio: f64,
    pub beta_ratio: f64,
    pub alpha_growth: f64,
    /// Both interactions vanish; reported as a pass.
    pub degenerate: bool,
    /// gamma_ratio <= 1/2 + slack_ratio.
    pub halves: bool,
}

/// max over contour samples of ||w_{>=1}||_xi without tail.
pub fn computed_gamma(w: &ZSampled, grid: &RadialGrid) -> f64 {
    w.contour().iter().map(|s| weighted_norm(s, grid, 1)).fold(0.0, f64::max)
}

/// Compares two consecutive families; `slack` is the tail certificate
/// produced by the step.
pub fn contraction_report(before: &ZSampled, after: &ZSampled, grid: &RadialGrid, slack: f64) -> Result<ContractionReport> {
    let params = BallParams::uniform(f64::INFINITY);
    let b: BallVerdict = ball_check(before, grid, params)?;
    let a: BallVerdict = ball_check(after, grid, params)?;
    let ratio = |x: f64, y: f64| if x == 0.0 { 0.0 } else { y / x };
    let gb = computed_gamma(before, grid);
    let ga = computed_gamma(after, grid);
    let degenerate = gb == 0.0 && ga == 0.0;
    let gamma_ratio = ratio(gb, ga);
    let slack_ratio = if gb == 0.0 { 0.0 } else { slack / gb };
    Ok(ContractionReport {
        before: b.measured,
        after: a.measured,
        gamma_before: gb,
        gamma_after: ga,
        gamma_ratio,
        slack_ratio,
        beta_ratio: ratio(b.measured.beta, a.measured.beta),
        alpha_growth: a.measured.alpha - b.measured.alpha,
        degenerate,
        halves: degenerate || ga <= 0.5 * gb + slack,
    })
}

/// gamma = ||w_{>=1}||_xi of one sample (tail included).
pub fn gamma_of(w: &KernelSequence, grid: &RadialGrid) -> f64 {
    interaction_norm(w, grid)
}

/// One-photon matrix of the dilation adjoint on the grid modes:
/// G_ij = sqrt(w_i / w_j) rho^{-1/2} l_j(k_i / rho), with support clipped
/// at k_i / rho <= 1. Entry (i, j) maps mode j to mode i.
pub fn dilation_one_particle(grid: &RadialGrid, rho: f64) -> DMatrix<f64> {
    let n = grid.n_k();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let x = grid.k_nodes[i] / rho;
        if x > 1.0 {
            continue;
        }
        let st = local_stencil(&grid.k_nodes, x, 6);
        for (a, &l) in st.weights.iter().enumerate() {
            let j = st.start + a;
            g[(i, j)] = (grid.k_weights[i] / grid.k_weights[j]).sqrt() * l / rho.sqrt();
        }
    }
    g
}

/// Second quantization of a one-particle matrix on the capped Fock space;
/// photons pushed above the cap are dropped.
pub fn second_quantize(space: &DiscreteFockSpace, g: &DMatrix<f64>) -> SparseMatrix {
    use std::collections::BTreeMap;
    let n = space.n_modes;
    let mut trip = vec![(0usize, 0usize, Complex64::new(1.0, 0.0))];
    // Gamma a*(j_1)..a*(j_n) Omega = prod_l (sum_i G_{i j_l} a*(i)) Omega.
    for state in 1..space.dim {
        let occ = &space.basis[state];
        let norm: f64 = occ.iter().map(|&o| factorial(o as usize)).product::<f64>().sqrt();
        let mut v: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        v.insert(vec![0u8; n], 1.0 / norm);
        for (j, &o) in occ.iter().enumerate() {
            for _ in 0..o {
                let mut next: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
                for (o2, &c) in &v {
                    for i in 0..n {
                        let gij = g[(i, j)];
                        if gij == 0.0 {
                            continue;
                        }
                        let mut t = o2.clone();
                        t[i] += 1;
                        *next.entry(t.clone()).or_insert(0.0) += c * gij * (t[i] as f64).sqrt();
                    }
                }
                v = next;
            }
        }
        for (o2, c) in v {
            if c == 0.0 {
                continue;
            }
            if let Some(t) = space.index_of(&o2) {
                trip.push((t, state, Complex64::new(c, 0.0)));
            }
        }
    }
    SparseMatrix::from_triplets(space.dim, space.dim, trip)
}

/// Wick-ordered operator of one kernel with p created and q annihilated
/// internal slots and fixed external slots, on the capped Fock space:
/// sum over internal nodes of amplitudes times
/// a*(X) w(H_f + r; K, X; K~, X~) a(X~), sandwiched by P_red.
pub fn w_op_matrix(
    w: &Kernel,
    grid: &RadialGrid,
    space: &DiscreteFockSpace,
    ext_cre: &[usize],
    ext_ann: &[usize],
    r: f64,
) -> Result<SparseMatrix> {
    let p = w.m.checked_sub(ext_cre.len()).ok_or_else(|| Error::Numerical("too many external creation slots".into()))?;
    let q = w.n.checked_sub(ext_ann.len()).ok_or_else(|| Error::Numerical("too many external annihilation slots".into()))?;
    let amp = grid.slot_amplitudes();
    let n = grid.n_k();
    let mut trip = Vec::new();
    let mut idx = vec![0usize; p + q];
    let total = n.pow((p + q) as u32);
    for flat in 0..total {
        let mut c = flat;
        for s in (0..p + q).rev() {
            idx[s] = c % n;
            c /= n;
        }
        let mut full: Vec<usize> = ext_cre.to_vec();
        full.extend_from_slice(&idx[..p]);
        full.extend_from_slice(ext_ann);
        full.extend_from_slice(&idx[p..]);
        let col = w.flatten(&full);
        let a: f64 = idx.iter().map(|&i| amp[i]).product();
        for state in 0..space.dim {
            // Annihilate X~ (last slot first), apply w at the intermediate
            // field energy, create X.
            let mut occ = space.basis[state].clone();
            let mut coef = a;
            let mut ok = true;
            for &i in idx[p..].iter().rev() {
                if occ[i] == 0 {
                    ok = false;
                    break;
                }
                coef *= (occ[i] as f64).sqrt();
                occ[i] -= 1;
            }
            if !ok {
                continue;
            }
            let mid = space.index_of(&occ).expect("annihilation stays in the space");
            let x = space.hf(mid) + r;
            if x > 1.0 || space.hf(state) > 1.0 {
                continue;
            }
            let val = w.eval_column(grid, col, x);
            if val == ZERO {
                continue;
            }
            for &i in &idx[..p] {
                occ[i] += 1;
                coef *= (occ[i] as f64).sqrt();
            }
            let Some(target) = space.index_of(&occ) else {
                continue;
            };
            if space.hf(target) > 1.0 {
                continue;
            }
            trip.push((target, state, val * coef));
        }
    }
    Ok(SparseMatrix::from_triplets(space.dim, space.dim, trip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::KGridSpec;
    use crate::kernel_space::ZSamples;

    fn small_grid() -> RadialGrid {
        RadialGrid::new(
            17,
            KGridSpec {
                n_nodes: 6,
                ratio: 2.0,
                nodes_per_interval: 2,
            },
            1.0,
        )
    }

    fn free_family(grid: &RadialGrid, shift: Complex64) -> ZSampled {
        let zs = ZSamples::standard();
        let contour = zs
            .contour()
            .into_iter()
            .map(|z| KernelSequence::free(grid, z - shift, 0.2))
            .collect();
        ZSampled::from_contour(zs, contour)
    }

    #[test]
    fn free_kernel_spectral_map_and_inverse() {
        let grid = small_grid();
        let cfg = RgConfig::default();
        let fam = free_family(&grid, ZERO);
        let z = Complex64::new(0.2, -0.1);
        let (e, de) = e_rho(&fam, cfg.rho, z);
        assert!((e - z / cfg.rho).norm() < 1e-12);
        assert!((de - 1.0 / cfg.rho).norm() < 1e-10);
        let (i, it) = invert_e(&fam, &cfg, z).unwrap();
        assert!((i - z * cfg.rho).norm() < 1e-14);
        assert!(it <= 2);
    }

    #[test]
    fn shifted_free_kernel_is_inverted() {
        let grid = small_grid();
        let cfg = RgConfig::default();
        let c = Complex64::new(0.003, 0.001);
        let fam = free_family(&grid, c);
        let z = Complex64::new(-0.3, 0.2);
        let (i, _) = invert_e(&fam, &cfg, z).unwrap();
        assert!((e_rho(&fam, cfg.rho, i).0 - z).norm() < 1e-12);
        assert!((i - (c + z * cfg.rho)).norm() < 1e-12);
    }

    #[test]
    fn free_kernel_is_a_fixed_point() {
        let grid = small_grid();
        let cfg = RgConfig::default();
        let fam = free_family(&grid, ZERO);
        let (out, rec) = renormalize(&fam, &grid, &cfg, 1).unwrap();
        assert!(rec.fixed_point_residual < 1e-12);
        for (z, seq) in fam.zs.contour().iter().zip(out.contour()) {
            assert_eq!(seq.components.len(), 1);
            for (ir, &r) in grid.r.nodes().iter().enumerate() {
                let expect = Complex64::new(r, 0.0) - z;
                assert!((seq.w00().values[ir] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hermite_tables_reproduce_cubics() {
        let grid = small_grid();
        let w = Kernel::from_fn(0, 0, &grid, |r, _, _| Complex64::new(r * r * r - r, 0.5 * r));
        let mut seq = KernelSequence::new(0.2);
        seq.insert(w);
        let t = KernelTables::new(&seq, &grid, 0.1, 33).unwrap();
        for x in [0.0, 0.123, 0.5, 0.77, 1.0] {
            let e = Complex64::new(x * x * x - x, 0.5 * x);
            assert!((t.w00(x) - e).norm() < 1e-12);
        }
    }

    #[test]
    fn dilation_scales_field_energy() {
        let grid = small_grid();
        let rho = 0.5;
        let g = dilation_one_particle(&grid, rho);
        // Gamma* maps mode j into the modes near rho k_j: rows with
        // k_i / rho <= 1 carry mass.
        for i in 0..grid.n_k() {
            let row: f64 = (0..grid.n_k()).map(|j| g[(i, j)].abs()).sum();
            if grid.k_nodes[i] / rho > 1.0 {
                assert_eq!(row, 0.0);
            } else {
                assert!(row > 0.0);
            }
        }
    }

    #[test]
    fn w_op_without_contractions_is_a_multiplier() {
        let grid = small_grid();
        let space = DiscreteFockSpace::from_grid(&grid, 2);
        let w = Kernel::from_fn(0, 0, &grid, |r, _, _| Complex64::new(1.0 + r, 0.0));
        let m = w_op_matrix(&w, &grid, &space, &[], &[], 0.1).unwrap().to_dense();
        for i in 0..space.dim {
            let hf = space.hf(i);
            let expect = if hf + 0.1 <= 1.0 { 1.1 + hf } else { 0.0 };
            assert!((m[(i, i)] - expect).norm() < 1e-12);
        }
    }
}
