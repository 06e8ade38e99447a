//! Batch front-end: `run`, `compare` and `scan`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fock::{self, DiscreteFockSpace, EigenpairRecord};
use crate::initial::{initial_kernel_at, internal_space_for, OracleParts};
use crate::kernel_space::KernelFile;
use crate::solver::{self, GroundStateResult};
use crate::Complex64;

#[derive(Parser, Debug)]
#[command(name = "rgflow", version, about = "Renormalization-group ground states of toy atom-field models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for contour and scan points.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed of the randomized spot-checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ground state by the renormalization flow.
    Run,
    /// Flow against exact diagonalization.
    Compare,
    /// Parameter scan.
    Scan {
        #[arg(value_enum)]
        kind: ScanKind,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScanKind {
    Beta,
    G,
    Rho,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config(None, "--config is required"))?;
    let cfg = RunConfig::load(path)?;
    if let Some(n) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir());
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    match cli.command {
        Command::Run => cmd_run(&cfg, &out).map(|_| 0),
        Command::Compare => cmd_compare(&cfg, &out, cli.seed),
        Command::Scan { kind } => cmd_scan(&cfg, &out, kind).map(|_| 0),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn schedule_bound(m: usize) -> f64 {
    0.5f64.powi(m as i32)
}

/// Runs the flow and writes trace, energy table, eigenvector and eigenpair.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<GroundStateResult> {
    let model = cfg.model();
    let grid = cfg.grid();
    let scfg = cfg.solver();
    let gs = solver::ground_state(&model, &grid, &scfg)?;

    let trace_path = out.join(&cfg.output.trace);
    let mut trace = String::new();
    for s in &gs.trace {
        trace.push_str(&serde_json::to_string(s).map_err(|e| Error::Io(e.to_string()))?);
        trace.push('\n');
    }
    write_text(&trace_path, &trace)?;

    let mut table = String::from("m,energy_re,energy_im,step_change,schedule_bound\n");
    for (m, e) in gs.energy_iterates.iter().enumerate() {
        let change = if m + 1 < gs.energy_iterates.len() {
            (gs.energy_iterates[m + 1] - e).norm()
        } else {
            0.0
        };
        table.push_str(&format!("{m},{:e},{:e},{:e},{:e}\n", e.re, e.im, change, schedule_bound(m + 1)));
    }
    write_text(&out.join(&cfg.output.table), &table)?;

    let space = DiscreteFockSpace::new(&grid.k_nodes, scfg.n_ph_max);
    fock::write_fock_vector(&out.join(&cfg.output.vector), &gs.vector, &space, model.atom_dim())?;
    EigenpairRecord {
        energy: [gs.energy.re, gs.energy.im],
        vector_norm: fock::vec_norm(&gs.vector),
        residual: gs.residual,
        dim: gs.vector.len(),
    }
    .write(&out.join(&cfg.output.eigenpair))?;

    if !cfg.output.kernel.is_empty() {
        let internal = internal_space_for(&grid, scfg.series.l_max, 2);
        let (seq, _, _) = initial_kernel_at(&model, &grid, &scfg.series, &internal, Complex64::new(0.0, 0.0))?;
        let files: Vec<KernelFile> = seq
            .components
            .values()
            .map(|k| KernelFile::from_kernel(k, &grid, seq.xi, Some(Complex64::new(0.0, 0.0))))
            .collect();
        let text = serde_json::to_string(&files).map_err(|e| Error::Io(e.to_string()))?;
        write_text(&out.join(&cfg.output.kernel), &text)?;
    }
    if !cfg.output.triplets.is_empty() {
        let parts = OracleParts::new(&model, &grid, scfg.n_ph_max)?;
        parts.hamiltonian(&model).write_triplets(&out.join(&cfg.output.triplets))?;
    }

    let m = gs.energy_iterates.len().saturating_sub(1);
    let last_change = if m > 0 {
        (gs.energy_iterates[m] - gs.energy_iterates[m - 1]).norm()
    } else {
        0.0
    };
    println!("E          = {:.15e} {:+.3e}i", gs.energy.re, gs.energy.im);
    println!("residual   = {:.3e}", gs.residual);
    println!("last step  = {:.3e} (schedule bound {:.3e})", last_change, schedule_bound(m));
    println!(
        "tail bound = {:.3e} ({})",
        gs.trace.last().map(|t| t.tail_bound).unwrap_or(0.0),
        gs.trace.last().map(|t| t.tail_mode.as_str()).unwrap_or("additive")
    );
    let max_psi = gs.psi_norms.iter().copied().fold(0.0, f64::max);
    println!("max |psi|  = {:.6} (bound {:.3})", max_psi, solver::psi_norm_bound());
    Ok(gs)
}

/// Runs the flow and the oracle; exit code 2 when a budget is exceeded.
pub fn cmd_compare(cfg: &RunConfig, out: &Path, seed: u64) -> Result<i32> {
    let oracle = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| Error::config(None, "compare needs an [oracle] block"))?;
    let gs = cmd_run(cfg, out)?;
    let model = cfg.model();
    let grid = cfg.grid();
    let parts = OracleParts::new(&model, &grid, oracle.n_ph_max)?;
    let h = parts.hamiltonian(&model);
    let hermitian_defect = spot_check_hermitian(&h, seed, 4);
    let exact = fock::exact_ground_state(&h)?;
    let gap = (gs.energy.re - exact.energy).abs();
    let rel = if exact.energy == 0.0 { gap } else { gap / exact.energy.abs() };
    let ov = if gs.vector.len() == exact.vector.len() {
        solver::overlap(&gs.vector, &exact.vector)
    } else {
        0.0
    };
    let energy_ok = rel <= oracle.energy_tol || gap <= 1e-12;
    let overlap_ok = ov >= oracle.overlap_min;
    let table = format!(
        "quantity,value,budget,met\nrelative_energy_gap,{rel:e},{:e},{energy_ok}\noverlap,{ov:.15},{},{overlap_ok}\n",
        oracle.energy_tol, oracle.overlap_min
    );
    write_text(&out.join("compare.csv"), &table)?;
    println!("E_oracle   = {:.15e}", exact.energy);
    println!("|dE|/|E|   = {rel:.3e} (budget {:.1e})", oracle.energy_tol);
    println!("overlap    = {ov:.12} (budget {})", oracle.overlap_min);
    println!("hermitian spot-check defect = {hermitian_defect:.3e} (seed {seed})");
    if energy_ok && overlap_ok {
        println!("budgets met");
        Ok(0)
    } else {
        println!("budget exceeded");
        Ok(2)
    }
}

/// max |<u, H v> - <H u, v>| over seeded random unit vectors.
pub fn spot_check_hermitian(h: &fock::SparseMatrix, seed: u64, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<Complex64> {
        let v: Vec<Complex64> = (0..h.ncols)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let s = fock::vec_norm(&v);
        v.into_iter().map(|x| x / s).collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let u = draw();
        let v = draw();
        let a = fock::inner(&u, &h.matvec(&v));
        let b = fock::inner(&h.matvec(&u), &v);
        worst = worst.max((a - b).norm());
    }
    worst
}

fn write_xy(path: &Path, xy: &[(f64, f64)]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    for (x, y) in xy {
        writeln!(f, "{x:e} {y:e}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Scans beta, g or rho and writes a CSV table plus x-y plot data.
pub fn cmd_scan(cfg: &RunConfig, out: &Path, kind: ScanKind) -> Result<()> {
    let scan = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Error::config(None, "scan needs a [scan] block"))?;
    let model = cfg.model();
    let grid = cfg.grid();
    let scfg = cfg.solver();
    match kind {
        ScanKind::Beta => {
            let betas = if scan.betas.is_empty() {
                (0..9).map(|i| 0.1 * i as f64).collect()
            } else {
                scan.betas.clone()
            };
            let pts = solver::beta_scan(&model, &grid, &scfg, &betas, scan.beta_step)?;
            let mut t = String::from("beta,energy,d1,d2,d1_half,d2_half,d1_change,d2_change\n");
            for p in &pts {
                t.push_str(&format!(
                    "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                    p.beta,
                    p.energy,
                    p.coarse[0],
                    p.coarse[1],
                    p.fine[0],
                    p.fine[1],
                    (p.coarse[0] - p.fine[0]).abs(),
                    (p.coarse[1] - p.fine[1]).abs()
                ));
            }
            write_text(&out.join("scan_beta.csv"), &t)?;
            write_xy(&out.join("beta_energy.dat"), &pts.iter().map(|p| (p.beta, p.energy)).collect::<Vec<_>>())?;
            println!("beta scan: {} points", pts.len());
        }
        ScanKind::G => {
            let coeffs = solver::g_expansion(&model, &grid, &scfg, scan.g_radius, scan.g_points)?;
            let mut t = String::from("k,re,im,abs\n");
            for (k, c) in coeffs.iter().enumerate() {
                t.push_str(&format!("{k},{:e},{:e},{:e}\n", c.re, c.im, c.norm()));
            }
            write_text(&out.join("scan_g.csv"), &t)?;
            write_xy(
                &out.join("g_coefficients.dat"),
                &coeffs.iter().enumerate().map(|(k, c)| (k as f64, c.norm())).collect::<Vec<_>>(),
            )?;
            println!("g expansion: {} coefficients", coeffs.len());
        }
        ScanKind::Rho => {
            let mut rows = Vec::new();
            for &rho in &scan.rhos {
                let mut c = scfg.clone();
                c.rg.rho = rho;
                let e = solver::ground_energy(&model, &grid, &c)?;
                rows.push((rho, e.re));
            }
            let e0 = rows.first().map(|r| r.1).unwrap_or(0.0);
            let mut t = String::from("rho,energy,deviation\n");
            for (rho, e) in &rows {
                t.push_str(&format!("{rho},{e:e},{:e}\n", (e - e0).abs()));
            }
            write_text(&out.join("scan_rho.csv"), &t)?;
            write_xy(&out.join("rho_energy.dat"), &rows)?;
            println!("rho scan: {} points", rows.len());
        }
    }
    Ok(())
}
