//! The iterated renormalization flow: ground-state energy as the limit of
//! e_(0,m), the eigenvector through the Feshbach Q-maps, and diagnostics in
//! beta and g.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feshbach::FeshbachPair;
use crate::fock::{self, DiscreteFockSpace, SparseMatrix};
use crate::grid::RadialGrid;
use crate::initial::{initial_kernel, OracleParts, SeriesConfig, ToyModel};
use crate::kernel_space::{ball_check, BallParams, BallVerdict, ZSampled};
use crate::rg::{self, contraction_report, ContractionReport, RgConfig, StepRecord};
use crate::smooth::{chi1, chi_rho, chibar1, chibar_rho};
use crate::wick::SeriesReport;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Everything a ground-state computation needs besides the model and grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub series: SeriesConfig,
    pub rg: RgConfig,
    /// Number of renormalization steps.
    pub steps: usize,
    /// Photon cap of the Fock spaces carrying the eigenvector.
    pub n_ph_max: usize,
    /// Abort when a measured ball check fails.
    pub strict_ball: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            series: SeriesConfig::default(),
            rg: RgConfig::default(),
            steps: 10,
            n_ph_max: 3,
            strict_ball: false,
        }
    }
}

/// Per-step trace line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub ball: BallVerdict,
    pub contraction: Option<ContractionReport>,
    pub record: Option<StepRecord>,
    pub tail_bound: f64,
    /// Additive propagation of tail certificates across steps.
    pub tail_mode: String,
}

/// The kernel families w^(0), ..., w^(steps) with their diagnostics.
#[derive(Clone, Debug)]
pub struct Flow {
    pub families: Vec<ZSampled>,
    pub initial: SeriesReport,
    pub trace: Vec<StepTrace>,
}

/// Ball radius checked at each step.
pub fn ball_radius(rho: f64) -> BallParams {
    BallParams::uniform(rho / 8.0)
}

/// Runs the initial step and `cfg.steps` renormalization steps.
pub fn run_flow(model: &ToyModel, grid: &RadialGrid, cfg: &SolverConfig) -> Result<Flow> {
    cfg.rg.validate()?;
    let (w0, initial) = initial_kernel(model, grid, &cfg.series)?;
    let mut families = vec![w0];
    let mut trace = Vec::new();
    let ball = ball_check(&families[0], grid, ball_radius(cfg.rg.rho))?;
    check_ball(cfg, 0, &ball)?;
    trace.push(StepTrace {
        step: 0,
        ball,
        contraction: None,
        record: None,
        tail_bound: families[0].contour()[0].tail_bound,
        tail_mode: "additive".into(),
    });
    for step in 1..=cfg.steps {
        let (next, record) = rg::renormalize(families.last().unwrap(), grid, &cfg.rg, step)?;
        let contraction = contraction_report(families.last().unwrap(), &next, grid, record.series.tail_bound)?;
        let ball = ball_check(&next, grid, ball_radius(cfg.rg.rho))?;
        check_ball(cfg, step, &ball)?;
        trace.push(StepTrace {
            step,
            ball,
            contraction: Some(contraction),
            tail_bound: next.contour()[0].tail_bound,
            record: Some(record),
            tail_mode: "additive".into(),
        });
        families.push(next);
    }
    Ok(Flow {
        families,
        initial,
        trace,
    })
}

fn check_ball(cfg: &SolverConfig, step: usize, ball: &BallVerdict) -> Result<()> {
    if cfg.strict_ball && !ball.inside {
        return Err(Error::certificate(
            step,
            format!(
                "kernel family leaves the ball: measured ({:.3e}, {:.3e}, {:.3e})",
                ball.measured.alpha, ball.measured.beta, ball.measured.gamma
            ),
        ));
    }
    Ok(())
}

/// e_(n,m) = J_n^{-1} o ... o J_m^{-1}(0) with J_j = E_rho[w^(j)]; returns
/// the values for n = m, m-1, ..., 0 indexed by n.
pub fn energy_chain(flow: &Flow, cfg: &RgConfig, m: usize) -> Result<Vec<Complex64>> {
    if m >= flow.families.len() {
        return Err(Error::Numerical(format!("energy chain needs {} families", m + 1)));
    }
    let mut out = vec![ZERO; m + 1];
    let mut x = ZERO;
    for n in (0..=m).rev() {
        x = rg::invert_e(&flow.families[n], cfg, x)?.0;
        out[n] = x;
    }
    Ok(out)
}

/// e_(0,m) for m = 0..=steps.
pub fn energy_iterates(flow: &Flow, cfg: &RgConfig) -> Result<Vec<Complex64>> {
    (0..flow.families.len())
        .map(|m| energy_chain(flow, cfg, m).map(|c| c[0]))
        .collect()
}

/// Indices of the states with H_f <= 1.
pub fn reduced_indices(space: &DiscreteFockSpace) -> Vec<usize> {
    (0..space.dim).filter(|&i| space.hf(i) <= 1.0).collect()
}

fn restrict(m: &SparseMatrix, idx: &[usize], full: usize) -> DMatrix<Complex64> {
    let mut pos = vec![usize::MAX; full];
    for (a, &i) in idx.iter().enumerate() {
        pos[i] = a;
    }
    let mut out = DMatrix::zeros(idx.len(), idx.len());
    for (i, j, v) in m.triplets() {
        if pos[i] != usize::MAX && pos[j] != usize::MAX {
            out[(pos[i], pos[j])] += v;
        }
    }
    out
}

/// Q_n = chi_rho - chibar_rho (H_n)_{chibar}^{-1} chibar_rho W_n chi_rho on
/// the reduced space, for the family sample at z.
pub fn q_matrix(
    family: &ZSampled,
    z: Complex64,
    grid: &RadialGrid,
    space: &DiscreteFockSpace,
    idx: &[usize],
    rho: f64,
) -> Result<DMatrix<Complex64>> {
    let w = family.at(z);
    let h = restrict(&fock::assemble_h(&w, grid, space)?, idx, space.dim);
    let w00 = w.w00();
    let col = w00.column(0);
    let t = DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
        if i == j {
            grid.r.interpolate(&col, space.hf(idx[i]))
        } else {
            ZERO
        }
    });
    let chi: Vec<f64> = idx.iter().map(|&i| chi_rho(rho, space.hf(i))).collect();
    let chibar: Vec<f64> = idx.iter().map(|&i| chibar_rho(rho, space.hf(i))).collect();
    FeshbachPair::with_partition(h, t, chi, chibar).feshbach_q()
}

/// psi_(0,m) for m = 1..=steps on the reduced space of the capped Fock
/// space over the grid modes, with e_(n) the converged energies.
pub fn eigenvector_iterates(
    flow: &Flow,
    energies: &[Complex64],
    grid: &RadialGrid,
    cfg: &SolverConfig,
) -> Result<(Vec<Vec<Complex64>>, DiscreteFockSpace, Vec<usize>)> {
    let space = DiscreteFockSpace::from_grid(grid, cfg.n_ph_max);
    let idx = reduced_indices(&space);
    let steps = flow.families.len() - 1;
    let qs: Vec<DMatrix<Complex64>> = (0..steps)
        .map(|n| q_matrix(&flow.families[n], energies[n], grid, &space, &idx, cfg.rg.rho))
        .collect::<Result<_>>()?;
    let gamma = rg::second_quantize(&space, &rg::dilation_one_particle(grid, cfg.rg.rho));
    let gamma = restrict(&gamma, &idx, space.dim);
    let mut out = Vec::with_capacity(steps);
    for m in 1..=steps {
        let mut v = nalgebra::DVector::<Complex64>::zeros(idx.len());
        v[0] = ONE;
        for n in (0..m).rev() {
            v = &qs[n] * v;
            if n > 0 {
                v = &gamma * v;
            }
        }
        out.push(v.iter().copied().collect());
    }
    Ok((out, space, idx))
}

/// Physical eigenpair and the flow diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateResult {
    pub energy: Complex64,
    /// e_(0,m) for m = 0..=steps.
    pub energy_iterates: Vec<Complex64>,
    /// ||psi_(0,m)|| for m = 1..=steps.
    pub psi_norms: Vec<f64>,
    /// Eigenvector on atom (x) capped Fock space, atom index slow.
    pub vector: Vec<Complex64>,
    /// ||(H - E) psi|| / ||psi|| on the capped space.
    pub residual: f64,
    pub initial: SeriesReport,
    pub trace: Vec<StepTrace>,
}

/// The eigenvector bound 4 e^4.
pub fn psi_norm_bound() -> f64 {
    4.0 * 4f64.exp()
}

/// Ground-state energy only.
pub fn ground_energy(model: &ToyModel, grid: &RadialGrid, cfg: &SolverConfig) -> Result<Complex64> {
    let flow = run_flow(model, grid, cfg)?;
    let e = energy_chain(&flow, &cfg.rg, flow.families.len() - 1)?;
    Ok(model.atom_energies[0] + e[0])
}

/// Energy, eigenvector and trace of the toy model.
pub fn ground_state(model: &ToyModel, grid: &RadialGrid, cfg: &SolverConfig) -> Result<GroundStateResult> {
    let flow = run_flow(model, grid, cfg)?;
    ground_state_from_flow(model, grid, cfg, flow)
}

pub fn ground_state_from_flow(model: &ToyModel, grid: &RadialGrid, cfg: &SolverConfig, flow: Flow) -> Result<GroundStateResult> {
    let steps = flow.families.len() - 1;
    let iterates = energy_iterates(&flow, &cfg.rg)?;
    let chain = energy_chain(&flow, &cfg.rg, steps)?;
    let e = chain[0];
    let (psis, space, idx) = eigenvector_iterates(&flow, &chain, grid, cfg)?;
    let psi_norms: Vec<f64> = psis.iter().map(|v| fock::vec_norm(v)).collect();
    let psi0 = psis.last().cloned().unwrap_or_else(|| {
        let mut v = vec![ZERO; idx.len()];
        v[0] = ONE;
        v
    });
    let parts = OracleParts::new(model, grid, cfg.n_ph_max)?;
    let h = parts.hamiltonian(model);
    let d = model.atom_dim();
    let n = space.dim;
    let mut phi = vec![ZERO; d * n];
    for (a, &i) in idx.iter().enumerate() {
        phi[i] = psi0[a];
    }
    let vector: Vec<Complex64> = (q_initial(model, &parts, &h, e)? * fock::to_dvector(&phi)).iter().copied().collect();
    let hv = h.matvec(&vector);
    let res: Vec<Complex64> = hv.iter().zip(&vector).map(|(a, b)| a - e * b).collect();
    let residual = fock::vec_norm(&res) / fock::vec_norm(&vector);
    Ok(GroundStateResult {
        energy: model.atom_energies[0] + e,
        energy_iterates: iterates.iter().map(|x| model.atom_energies[0] + x).collect(),
        psi_norms,
        vector,
        residual,
        initial: flow.initial,
        trace: flow.trace,
    })
}

/// Q_{chi^(I)}(e) on atom (x) capped Fock space.
fn q_initial(model: &ToyModel, parts: &OracleParts, h: &SparseMatrix, e: Complex64) -> Result<DMatrix<Complex64>> {
    let n = parts.space.dim;
    let d = model.atom_dim();
    let dim = d * n;
    let mut hz = h.to_dense();
    let mut t = DMatrix::zeros(dim, dim);
    let mut chi = vec![0.0; dim];
    let mut chibar = vec![1.0; dim];
    for a in 0..d {
        for i in 0..n {
            let j = a * n + i;
            hz[(j, j)] -= e;
            t[(j, j)] = Complex64::new(model.atom_energies[a] + parts.space.hf(i), 0.0) - e;
            if a == 0 {
                chi[j] = chi1(parts.space.hf(i));
                chibar[j] = chibar1(parts.space.hf(i));
            }
        }
    }
    FeshbachPair::with_partition(hz, t, chi, chibar).feshbach_q()
}

/// |<a, b>| / (||a|| ||b||).
pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    fock::inner(a, b).norm() / (fock::vec_norm(a) * fock::vec_norm(b))
}

/// Exact ground state of the oracle matrix.
pub fn oracle_ground_state(model: &ToyModel, grid: &RadialGrid, n_ph_max: usize) -> Result<fock::GroundState> {
    let parts = OracleParts::new(model, grid, n_ph_max)?;
    fock::exact_ground_state(&parts.hamiltonian(model))
}

/// Finite-difference beta derivatives of E at one point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub energy: f64,
    /// [d1, d2] with step h.
    pub coarse: [f64; 2],
    /// [d1, d2] with step h / 2.
    pub fine: [f64; 2],
}

/// E(beta) on the grid `betas` with five-point central differences of
/// orders 1 and 2 at steps h and h / 2. Every beta value is evaluated once.
pub fn beta_scan(model: &ToyModel, grid: &RadialGrid, cfg: &SolverConfig, betas: &[f64], h: f64) -> Result<Vec<BetaPoint>> {
    let mut cache: Vec<(f64, f64)> = Vec::new();
    let mut energy = |b: f64| -> Result<f64> {
        if let Some(c) = cache.iter().find(|c| (c.0 - b).abs() < 1e-12) {
            return Ok(c.1);
        }
        let e = ground_energy(&model.with_beta(b), grid, cfg)?.re;
        cache.push((b, e));
        Ok(e)
    };
    let mut out = Vec::new();
    for &b in betas {
        let e0 = energy(b)?;
        let mut diffs = [[0.0; 2]; 2];
        for (s, step) in [h, 0.5 * h].into_iter().enumerate() {
            let p1 = energy(b + step)?;
            let m1 = energy(b - step)?;
            let p2 = energy(b + 2.0 * step)?;
            let m2 = energy(b - 2.0 * step)?;
            diffs[s] = [
                (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * step),
                (-p2 + 16.0 * p1 - 30.0 * e0 + 16.0 * m1 - m2) / (12.0 * step * step),
            ];
        }
        out.push(BetaPoint {
            beta: b,
            energy: e0,
            coarse: diffs[0],
            fine: diffs[1],
        });
    }
    Ok(out)
}

/// Taylor coefficients a_k of E(g) from samples on |g| = radius:
/// a_k = (1 / n) sum_j E(g_j) g_j^{-k}.
pub fn g_expansion(model: &ToyModel, grid: &RadialGrid, cfg: &SolverConfig, radius: f64, n: usize) -> Result<Vec<Complex64>> {
    let samples: Vec<(Complex64, Complex64)> = (0..n)
        .map(|j| {
            let g = Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64);
            ground_energy(&model.with_g(g), grid, cfg).map(|e| (g, e))
        })
        .collect::<Result<_>>()?;
    Ok((0..n)
        .map(|k| samples.iter().map(|(g, e)| e * g.powi(-(k as i32))).sum::<Complex64>() / n as f64)
        .collect())
}
