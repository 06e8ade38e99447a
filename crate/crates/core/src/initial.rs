//! Toy atom-field model, its exact matrix on the capped Fock space, and the
//! initial Feshbach step producing the kernel sequence w^(0)(z).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DiscreteFockSpace, SparseMatrix};
use crate::grid::RadialGrid;
use crate::kernel_space::{Kernel, KernelSequence, ZSampled, ZSamples};
use crate::smooth::{chi1, chibar1};
use crate::wick::{self, assemble_sequence, FactorIndex, SeriesReport, InternalSpace, SeriesOptions, SeriesSums, Slot, WickSource};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Momentum profile of the coupling function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingShape {
    /// k e^{i beta k} / sqrt 2
    Phase,
    /// k cos(beta k) / sqrt 2
    Cos,
}

/// Atom with diagonal Hamiltonian coupled to the field through a linear
/// term g lambda1 L (x) phi(c) and a quadratic term g^2 A (x) :phi(c)^2:.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    /// Diagonal of H_at; entry 0 is the ground level at 0, the gap is 1.
    pub atom_energies: Vec<f64>,
    /// Diagonal of A.
    pub quad_coupling: Vec<f64>,
    pub g: Complex64,
    pub beta: f64,
    pub lambda1: f64,
    /// Momentum cutoff Lambda <= 1.
    pub cutoff: f64,
    pub shape: CouplingShape,
}

impl Default for ToyModel {
    fn default() -> Self {
        ToyModel {
            atom_energies: vec![0.0, 1.0],
            quad_coupling: vec![1.0, 0.5],
            g: Complex64::new(0.05, 0.0),
            beta: 0.0,
            lambda1: 1.0,
            cutoff: 1.0,
            shape: CouplingShape::Phase,
        }
    }
}

impl ToyModel {
    pub fn with_g(&self, g: Complex64) -> Self {
        ToyModel { g, ..self.clone() }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ToyModel { beta, ..self.clone() }
    }

    pub fn atom_dim(&self) -> usize {
        self.atom_energies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.atom_dim();
        if d < 2 {
            return Err(Error::config(None, "the atom needs at least two levels"));
        }
        if self.quad_coupling.len() != d {
            return Err(Error::config(None, "quad_coupling must have one entry per atomic level"));
        }
        if self.atom_energies[0] != 0.0 {
            return Err(Error::config(None, "the ground level must sit at energy 0"));
        }
        let gap = self.atom_energies[1..].iter().copied().fold(f64::INFINITY, f64::min);
        if (gap - 1.0).abs() > 1e-12 {
            return Err(Error::config(None, format!("the atomic gap must be 1, found {gap}")));
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return Err(Error::config(None, "cutoff must lie in (0, 1]"));
        }
        if !(self.g.re.is_finite() && self.g.im.is_finite() && self.beta.is_finite() && self.lambda1.is_finite()) {
            return Err(Error::config(None, "model parameters must be finite"));
        }
        Ok(())
    }

    /// c(k) for creation slots.
    pub fn coupling(&self, k: f64) -> Complex64 {
        if k > self.cutoff {
            return ZERO;
        }
        let a = k / std::f64::consts::SQRT_2;
        match self.shape {
            CouplingShape::Phase => Complex64::from_polar(a, self.beta * k),
            CouplingShape::Cos => Complex64::new(a * (self.beta * k).cos(), 0.0),
        }
    }

    /// d/dbeta c(k).
    pub fn coupling_dbeta(&self, k: f64) -> Complex64 {
        if k > self.cutoff {
            return ZERO;
        }
        let a = k / std::f64::consts::SQRT_2;
        match self.shape {
            CouplingShape::Phase => Complex64::new(0.0, k) * Complex64::from_polar(a, self.beta * k),
            CouplingShape::Cos => Complex64::new(-a * k * (self.beta * k).sin(), 0.0),
        }
    }

    pub fn atom_hamiltonian(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.atom_dim(), self.atom_dim(), |i, j| {
            if i == j {
                Complex64::new(self.atom_energies[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// L: couples the ground level to every excited level.
    pub fn linear_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.atom_dim(), self.atom_dim(), |i, j| {
            if (i == 0) != (j == 0) {
                Complex64::new(1.0, 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn quad_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.atom_dim(), self.atom_dim(), |i, j| {
            if i == j {
                Complex64::new(self.quad_coupling[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Scalar part of w^(I)_{a,b}; the atomic part is L for a + b = 1 and A
    /// for a + b = 2.
    pub fn interaction_scalar(&self, sector: (usize, usize), cre: &[f64], ann: &[f64]) -> Complex64 {
        let mut v = match sector {
            (1, 0) | (0, 1) => self.g * self.lambda1,
            (2, 0) | (0, 2) => self.g * self.g,
            (1, 1) => self.g * self.g * 2.0,
            _ => return ZERO,
        };
        for &k in cre {
            v *= self.coupling(k);
        }
        for &k in ann {
            v *= self.coupling(k).conj();
        }
        v
    }

    /// Full atom-matrix-valued interaction kernel w^(I)_{a,b}.
    pub fn interaction_kernel(&self, sector: (usize, usize), cre: &[f64], ann: &[f64]) -> DMatrix<Complex64> {
        let s = self.interaction_scalar(sector, cre, ann);
        let m = if sector.0 + sector.1 == 1 {
            self.linear_matrix()
        } else {
            self.quad_matrix()
        };
        m * s
    }

    /// Ground-level projections <phi_at, w^(I) phi_at> on the grid with
    /// w_{0,0} = r - z. The m + n = 1 projections vanish identically.
    pub fn projected_interaction(&self, grid: &RadialGrid, z: Complex64, xi: f64) -> KernelSequence {
        let mut seq = KernelSequence::free(grid, z, xi);
        for sector in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            let w = Kernel::from_fn(sector.0, sector.1, grid, |_, c, a| {
                self.interaction_kernel(sector, c, a)[(0, 0)]
            });
            seq.insert(w);
        }
        seq
    }
}

/// H_at (x) 1 + 1 (x) H_f on atom (x) Fock, atom index slow.
pub fn free_hamiltonian(model: &ToyModel, space: &DiscreteFockSpace) -> SparseMatrix {
    let id = DMatrix::<Complex64>::identity(model.atom_dim(), model.atom_dim());
    let fock_id = SparseMatrix::diagonal(&vec![Complex64::new(1.0, 0.0); space.dim]);
    fock::kron_atom(&model.atom_hamiltonian(), &fock_id).add(&fock::kron_atom(&id, &fock::free_field(space)))
}

/// Free part H_0 and the unscaled interactions V_1 = L (x) phi(c),
/// V_2 = A (x) :phi(c)^2: with H = H_0 + g lambda1 V_1 + g^2 V_2.
pub struct OracleParts {
    pub space: DiscreteFockSpace,
    pub h0: SparseMatrix,
    pub v1: SparseMatrix,
    pub v2: SparseMatrix,
}

impl OracleParts {
    pub fn new(model: &ToyModel, grid: &RadialGrid, n_ph_max: usize) -> Result<Self> {
        model.validate()?;
        let space = DiscreteFockSpace::from_grid(grid, n_ph_max);
        let amp = grid.slot_amplitudes();
        let n = grid.n_k();
        let cre: Vec<SparseMatrix> = (0..n).map(|i| fock::creation(&space, i)).collect::<Result<_>>()?;
        let ann: Vec<SparseMatrix> = cre.iter().map(|a| a.adjoint()).collect();
        let c: Vec<Complex64> = grid.k_nodes.iter().map(|&k| model.coupling(k)).collect();
        let mut lin = SparseMatrix::zeros(space.dim, space.dim);
        for i in 0..n {
            let t = cre[i]
                .scale(c[i] * amp[i])
                .add(&ann[i].scale(c[i].conj() * amp[i]));
            lin = lin.add(&t);
        }
        let mut quad = SparseMatrix::zeros(space.dim, space.dim);
        for i in 0..n {
            for j in 0..n {
                let a2 = amp[i] * amp[j];
                let t = cre[i].mul(&cre[j]).scale(c[i] * c[j] * a2);
                let t = t.add(&cre[i].mul(&ann[j]).scale(c[i] * c[j].conj() * (2.0 * a2)));
                let t = t.add(&ann[i].mul(&ann[j]).scale(c[i].conj() * c[j].conj() * a2));
                quad = quad.add(&t);
            }
        }
        Ok(OracleParts {
            h0: free_hamiltonian(model, &space),
            v1: fock::kron_atom(&model.linear_matrix(), &lin),
            v2: fock::kron_atom(&model.quad_matrix(), &quad),
            space,
        })
    }

    pub fn hamiltonian(&self, model: &ToyModel) -> SparseMatrix {
        self.h0
            .add(&self.v1.scale(model.g * model.lambda1))
            .add(&self.v2.scale(model.g * model.g))
    }

    /// Second-order Rayleigh-Schroedinger coefficient E^(2) of the ground
    /// level in the expansion E = E_at + g^2 E^(2) + O(g^4).
    pub fn second_order(&self, model: &ToyModel) -> Complex64 {
        let diag: std::collections::BTreeMap<usize, Complex64> =
            self.h0.triplets().into_iter().filter(|t| t.0 == t.1).map(|t| (t.0, t.2)).collect();
        let e0 = diag.get(&0).copied().unwrap_or(ZERO);
        let trip = self.v1.triplets();
        let col0: std::collections::BTreeMap<usize, Complex64> =
            trip.iter().filter(|t| t.1 == 0 && t.0 != 0).map(|t| (t.0, t.2)).collect();
        let mut e2 = self.v2.triplets().into_iter().find(|t| t.0 == 0 && t.1 == 0).map_or(ZERO, |t| t.2);
        let l2 = model.lambda1 * model.lambda1;
        for t in trip.iter().filter(|t| t.0 == 0 && t.1 != 0) {
            if let Some(&c) = col0.get(&t.1) {
                let gap = diag.get(&t.1).copied().unwrap_or(ZERO) - e0;
                e2 -= t.2 * c * l2 / gap;
            }
        }
        e2
    }
}

/// The full toy Hamiltonian on atom (x) capped Fock space over the grid
/// modes, with the slot amplitudes of the kernel representation.
pub fn oracle_hamiltonian(model: &ToyModel, grid: &RadialGrid, n_ph_max: usize) -> Result<(SparseMatrix, DiscreteFockSpace)> {
    let parts = OracleParts::new(model, grid, n_ph_max)?;
    Ok((parts.hamiltonian(model), parts.space))
}

/// Series data of the initial step at one spectral parameter.
pub struct InitialSource<'a> {
    pub model: &'a ToyModel,
    pub grid: &'a RadialGrid,
    pub z: Complex64,
    amp: Vec<f64>,
    c: Vec<Complex64>,
    lin: DMatrix<Complex64>,
    quad: DMatrix<Complex64>,
    /// Bound constants: sup |c|, and ||f|| + ||f / sqrt k|| with f = amp c.
    c_max: f64,
    f_norm: f64,
}

impl<'a> InitialSource<'a> {
    pub fn new(model: &'a ToyModel, grid: &'a RadialGrid, z: Complex64) -> Self {
        let amp = grid.slot_amplitudes();
        let c: Vec<Complex64> = grid.k_nodes.iter().map(|&k| model.coupling(k)).collect();
        let c_max = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let f2: f64 = amp.iter().zip(&c).map(|(a, v)| a * a * v.norm_sqr()).sum();
        let fk2: f64 = amp
            .iter()
            .zip(&c)
            .zip(&grid.k_nodes)
            .map(|((a, v), k)| a * a * v.norm_sqr() / k)
            .sum();
        InitialSource {
            model,
            grid,
            z,
            amp,
            lin: model.linear_matrix(),
            quad: model.quad_matrix(),
            c,
            c_max,
            f_norm: f2.sqrt() + fk2.sqrt(),
        }
    }

    fn slot_c(&self, s: Slot, conj: bool) -> Complex64 {
        let i = match s {
            Slot::Ext(i) | Slot::Int(i) => i,
        };
        if conj {
            self.c[i].conj()
        } else {
            self.c[i]
        }
    }
}

fn op_norm(m: &DMatrix<Complex64>) -> f64 {
    fock::dense_norm(m)
}

impl WickSource for InitialSource<'_> {
    fn atom_dim(&self) -> usize {
        self.model.atom_dim()
    }
    fn scale(&self) -> f64 {
        1.0
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
        match a + b {
            1 => self.model.lambda1 != 0.0 && self.model.g != ZERO,
            2 => self.model.g != ZERO,
            _ => false,
        }
    }
    fn kernel(&self, sector: (usize, usize), cre: &[Slot], ann: &[Slot], args: &[f64], out: &mut [Complex64]) {
        let mut v = match sector {
            (1, 0) | (0, 1) => self.model.g * self.model.lambda1,
            (1, 1) => self.model.g * self.model.g * 2.0,
            _ => self.model.g * self.model.g,
        };
        for &s in cre {
            v *= self.slot_c(s, false);
        }
        for &s in ann {
            v *= self.slot_c(s, true);
        }
        let m = if sector.0 + sector.1 == 1 { &self.lin } else { &self.quad };
        let d = self.atom_dim();
        for ir in 0..args.len() {
            for i in 0..d {
                for j in 0..d {
                    out[(ir * d + i) * d + j] = m[(i, j)] * v;
                }
            }
        }
    }
    fn outer(&self, x: f64) -> f64 {
        chi1(x)
    }
    fn inner(&self, atom: usize, x: f64) -> Complex64 {
        let e = self.model.atom_energies[atom];
        let num = if atom == 0 { chibar1(x).powi(2) } else { 1.0 };
        if num == 0.0 {
            return ZERO;
        }
        Complex64::new(num, 0.0) / (Complex64::new(e + x, 0.0) - self.z)
    }
    fn product_matrix(&self, sector: (usize, usize)) -> Option<DMatrix<Complex64>> {
        let s = match sector {
            (1, 0) | (0, 1) => self.model.g * self.model.lambda1,
            (1, 1) => self.model.g * self.model.g * 2.0,
            _ => self.model.g * self.model.g,
        };
        let m = if sector.0 + sector.1 == 1 { &self.lin } else { &self.quad };
        Some(m * s)
    }
    fn slot_value(&self, create: bool, slot: Slot) -> Complex64 {
        self.slot_c(slot, !create)
    }
    /// Relative bound ||(H_f+1)^{-1/2} W (H_f+1)^{-1/2}||.
    fn factor_bound(&self, f: FactorIndex) -> f64 {
        let (a, b) = f.sector();
        let coupling = match a + b {
            1 => (self.model.g * self.model.lambda1).norm() * op_norm(&self.lin),
            2 => self.model.g.norm_sqr() * op_norm(&self.quad) * if a == 1 { 2.0 } else { 1.0 },
            _ => 0.0,
        };
        coupling * self.c_max.powi((f.m + f.n) as i32) * self.f_norm.powi((f.p + f.q) as i32)
    }
    /// sup_x (1 + x) |F(x)| over both atomic blocks.
    fn inner_bound(&self) -> f64 {
        let zn = self.z.norm();
        let mut best: f64 = 0.0;
        for (a, &e) in self.model.atom_energies.iter().enumerate() {
            let lo = if a == 0 { 0.75 } else { 0.0 };
            // (1 + x) / |e + x - z| is decreasing in x once e + x > |z| - 1.
            best = best.max((1.0 + lo) / (e + lo - zn));
        }
        best
    }
}

/// Truncation and sampling of the initial series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub l_max: usize,
    pub m_max: usize,
    pub skip_tol: f64,
    pub xi: f64,
    pub zs: ZSamples,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            l_max: 4,
            m_max: 2,
            skip_tol: 1e-9,
            xi: 0.2,
            zs: ZSamples::standard(),
        }
    }
}

/// Options of the initial series in terms of a config.
fn initial_options(cfg: &SeriesConfig) -> SeriesOptions {
    SeriesOptions {
        l_max: cfg.l_max,
        max_slots: 2,
        m_max: cfg.m_max,
        skip_tol: cfg.skip_tol,
        xi: cfg.xi,
        arity_factor: vec![1.0],
    }
}

/// Internal photon space large enough for every tuple up to `l_max`.
pub fn internal_space_for(grid: &RadialGrid, l_max: usize, max_slots: usize) -> InternalSpace {
    let cap = (l_max / 2) * max_slots;
    InternalSpace::new(&grid.k_nodes, cap.max(1), max_slots)
}

/// w^(0)(z) at one spectral parameter.
pub fn initial_kernel_at(
    model: &ToyModel,
    grid: &RadialGrid,
    cfg: &SeriesConfig,
    internal: &InternalSpace,
    z: Complex64,
) -> Result<(KernelSequence, SeriesSums, f64)> {
    let src = InitialSource::new(model, grid, z);
    let sums = wick::series(&src, internal, &initial_options(cfg));
    let base = Kernel::from_fn(0, 0, grid, |r, _, _| Complex64::new(r, 0.0) - z);
    let (seq, parity) = assemble_sequence(&sums, grid, cfg.xi, base);
    Ok((seq, sums, parity))
}

/// w^(0) on the contour of `cfg.zs` (interior samples by interpolation)
/// with its certificate. Fails when the series ratio reaches 1/2 or parity
/// is broken.
pub fn initial_kernel(model: &ToyModel, grid: &RadialGrid, cfg: &SeriesConfig) -> Result<(ZSampled, SeriesReport)> {
    model.validate()?;
    if cfg.l_max < 2 {
        return Err(Error::config(None, "l_max must be at least 2"));
    }
    if cfg.zs.radius >= 0.5 {
        return Err(Error::config(None, "z samples must lie inside |z| < 1/2"));
    }
    let internal = internal_space_for(grid, cfg.l_max, 2);
    let results: Vec<Result<(KernelSequence, SeriesSums, f64)>> = cfg
        .zs
        .contour()
        .into_par_iter()
        .map(|z| initial_kernel_at(model, grid, cfg, &internal, z))
        .collect();
    let mut report = SeriesReport::default();
    let mut contour = Vec::new();
    for r in results {
        let (seq, sums, parity) = r?;
        report.absorb(&sums, parity);
        contour.push(seq);
    }
    for s in &mut contour {
        s.tail_bound = report.tail_bound;
    }
    if report.ratio >= 0.5 {
        return Err(Error::certificate(
            0,
            format!("initial series ratio {:.3} is not below 1/2", report.ratio),
        ));
    }
    let scale = model.g.norm().max(1e-300);
    if report.parity_defect > 1e-12 * scale {
        return Err(Error::Numerical(format!(
            "odd kernel sectors do not vanish ({:e})",
            report.parity_defect
        )));
    }
    Ok((ZSampled::from_contour(cfg.zs.clone(), contour), report))
}

/// Central-difference beta derivatives of w^(0) at z up to order `k`
/// (k <= 4) with step h; entry l holds d^l/dbeta^l.
pub fn beta_derivatives_initial(
    model: &ToyModel,
    grid: &RadialGrid,
    cfg: &SeriesConfig,
    z: Complex64,
    k: usize,
    h: f64,
) -> Result<Vec<KernelSequence>> {
    if k > 4 {
        return Err(Error::config(None, "beta derivatives are available up to order 4"));
    }
    let internal = internal_space_for(grid, cfg.l_max, 2);
    let offsets: Vec<i32> = (-2..=2).collect();
    let samples: Vec<KernelSequence> = offsets
        .iter()
        .map(|&o| {
            initial_kernel_at(&model.with_beta(model.beta + o as f64 * h), grid, cfg, &internal, z).map(|r| r.0)
        })
        .collect::<Result<_>>()?;
    // Five-point central stencils for orders 0..4.
    let stencils: [[f64; 5]; 5] = [
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0],
        [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
        [-0.5, 1.0, 0.0, -1.0, 0.5],
        [1.0, -4.0, 6.0, -4.0, 1.0],
    ];
    let mut out = Vec::new();
    for (l, st) in stencils.iter().enumerate().take(k + 1) {
        let scale = h.powi(-(l as i32));
        let parts: Vec<(&KernelSequence, Complex64)> = samples
            .iter()
            .zip(st)
            .map(|(s, &c)| (s, Complex64::new(c * scale, 0.0)))
            .collect();
        out.push(KernelSequence::combine(&parts));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::KGridSpec;

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

    #[test]
    fn zero_coupling_gives_free_kernel() {
        let grid = small_grid();
        let model = ToyModel::default().with_g(ZERO);
        let cfg = SeriesConfig::default();
        let internal = internal_space_for(&grid, cfg.l_max, 2);
        let z = Complex64::new(0.1, 0.2);
        let (seq, sums, _) = initial_kernel_at(&model, &grid, &cfg, &internal, z).unwrap();
        let free = KernelSequence::free(&grid, z, cfg.xi);
        assert_eq!(seq.w00().values, free.w00().values);
        for (key, w) in &seq.components {
            if *key != (0, 0) {
                assert!(w.values.iter().all(|v| *v == ZERO));
            }
        }
        assert_eq!(sums.certificate(), 0.0);
    }

    #[test]
    fn interaction_kernel_closed_form_and_conjugation() {
        let model = ToyModel::default().with_beta(0.7);
        let (k1, k2) = (0.3, 0.8);
        let w20 = model.interaction_scalar((2, 0), &[k1, k2], &[]);
        let expect = model.g * model.g * model.coupling(k1) * model.coupling(k2);
        assert!((w20 - expect).norm() < 1e-16);
        let w02 = model.interaction_scalar((0, 2), &[], &[k1, k2]);
        assert!((w02 - w20.conj()).norm() < 1e-16);
    }

    #[test]
    fn linear_sector_projects_to_zero() {
        let grid = small_grid();
        let seq = ToyModel::default().projected_interaction(&grid, ZERO, 0.2);
        assert!(seq.get(1, 0).is_none());
        assert!(seq.get(2, 0).is_some());
    }

    #[test]
    fn oracle_is_self_adjoint_for_real_g() {
        let grid = small_grid();
        let (h, space) = oracle_hamiltonian(&ToyModel::default(), &grid, 3).unwrap();
        assert_eq!(h.nrows, 2 * space.dim);
        assert!(h.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn vacuum_column_matches_matrix_feshbach_map() {
        use crate::feshbach::FeshbachPair;
        let grid = RadialGrid::new(
            17,
            KGridSpec {
                n_nodes: 4,
                ratio: 2.0,
                nodes_per_interval: 2,
            },
            1.0,
        );
        let model = ToyModel::default().with_g(Complex64::new(0.02, 0.0)).with_beta(0.4);
        let z = Complex64::new(0.05, 0.1);
        let (h, space) = oracle_hamiltonian(&model, &grid, 6).unwrap();
        let n = space.dim;
        let mut hz = h.to_dense();
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        let mut chi = vec![0.0; 2 * n];
        for a in 0..2 {
            for i in 0..n {
                let j = a * n + i;
                hz[(j, j)] -= z;
                t[(j, j)] = Complex64::new(model.atom_energies[a] + space.hf(i), 0.0) - z;
                if a == 0 {
                    chi[j] = chi1(space.hf(i));
                }
            }
        }
        let exact = FeshbachPair::new(hz, t, chi).unwrap().feshbach_map().unwrap();

        let cfg = SeriesConfig {
            skip_tol: 0.0,
            ..SeriesConfig::default()
        };
        let internal = internal_space_for(&grid, cfg.l_max, 2);
        let (seq, _, _) = initial_kernel_at(&model, &grid, &cfg, &internal, z).unwrap();
        let small = DiscreteFockSpace::from_grid(&grid, 2);
        let series = fock::assemble_h(&seq, &grid, &small).unwrap().to_dense();
        let mut worst: f64 = 0.0;
        for i in 0..small.dim {
            if small.hf(i) > 1.0 {
                continue;
            }
            let occ = small.basis[i].clone();
            let j = space.index_of(&occ).unwrap();
            worst = worst.max((exact[(j, 0)] - series[(i, 0)]).norm());
        }
        assert!(worst < 1e-9, "vacuum column mismatch {worst:e}");
    }
}
