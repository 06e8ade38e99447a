//! Run configuration read from a TOML file.
//!
//! Every error carries the line of the offending key when it can be found.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{KGridSpec, RadialGrid};
use crate::initial::{CouplingShape, SeriesConfig, ToyModel};
use crate::kernel_space::ZSamples;
use crate::rg::RgConfig;
use crate::solver::SolverConfig;
use crate::Complex64;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default = "default_atom")]
    pub atom_energies: Vec<f64>,
    #[serde(default = "default_quad")]
    pub quad_coupling: Vec<f64>,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default)]
    pub g_im: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one")]
    pub lambda1: f64,
    #[serde(default = "one")]
    pub cutoff: f64,
    /// "phase" or "cos".
    #[serde(default = "default_shape")]
    pub shape: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "default_r_nodes")]
    pub r_nodes: usize,
    #[serde(default = "default_k_nodes")]
    pub k_nodes: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "default_per_interval")]
    pub nodes_per_interval: usize,
    #[serde(default = "one")]
    pub measure: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgBlock {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default = "default_big_m")]
    pub m_max_sector: usize,
    /// Number of RG steps (energy iterates e_(0,m) for m up to this).
    #[serde(default = "default_steps")]
    pub m_max: usize,
    #[serde(default = "default_rg_skip")]
    pub skip_tol: f64,
    #[serde(default = "default_initial_skip")]
    pub initial_skip_tol: f64,
    #[serde(default)]
    pub strict_ball: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default = "default_n_ph")]
    pub n_ph_max: usize,
    /// Relative energy budget.
    #[serde(default = "default_energy_budget")]
    pub energy_tol: f64,
    #[serde(default = "default_overlap_budget")]
    pub overlap_min: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default = "default_trace")]
    pub trace: String,
    #[serde(default = "default_table")]
    pub table: String,
    #[serde(default = "default_vector")]
    pub vector: String,
    #[serde(default = "default_eigenpair")]
    pub eigenpair: String,
    /// Initial kernel at z = 0 in the kernel JSON format; empty disables it.
    #[serde(default)]
    pub kernel: String,
    /// Oracle Hamiltonian in triplet format; empty disables it.
    #[serde(default)]
    pub triplets: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default = "default_beta_h")]
    pub beta_step: f64,
    #[serde(default = "default_g_radius")]
    pub g_radius: f64,
    #[serde(default = "default_g_points")]
    pub g_points: usize,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
}

/// Parsed configuration file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default = "default_grid_block")]
    pub grids: GridBlock,
    #[serde(default = "default_rg_block")]
    pub rg: RgBlock,
    pub oracle: Option<OracleBlock>,
    #[serde(default = "default_output_block")]
    pub output: OutputBlock,
    pub scan: Option<ScanBlock>,
}

fn one() -> f64 {
    1.0
}
fn default_atom() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn default_quad() -> Vec<f64> {
    vec![1.0, 0.5]
}
fn default_g() -> f64 {
    0.05
}
fn default_shape() -> String {
    "phase".into()
}
fn default_r_nodes() -> usize {
    33
}
fn default_k_nodes() -> usize {
    16
}
fn default_grading() -> f64 {
    2.0
}
fn default_per_interval() -> usize {
    2
}
fn default_rho() -> f64 {
    0.1
}
fn default_xi() -> f64 {
    0.2
}
fn default_l_max() -> usize {
    4
}
fn default_big_m() -> usize {
    2
}
fn default_steps() -> usize {
    10
}
fn default_rg_skip() -> f64 {
    RgConfig::default().skip_tol
}
fn default_initial_skip() -> f64 {
    SeriesConfig::default().skip_tol
}
fn default_n_ph() -> usize {
    3
}
fn default_energy_budget() -> f64 {
    5e-4
}
fn default_overlap_budget() -> f64 {
    0.999
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_trace() -> String {
    "trace.jsonl".into()
}
fn default_table() -> String {
    "energies.csv".into()
}
fn default_vector() -> String {
    "ground_state.fvec".into()
}
fn default_eigenpair() -> String {
    "eigenpair.json".into()
}
fn default_beta_h() -> f64 {
    0.05
}
fn default_g_radius() -> f64 {
    0.05
}
fn default_g_points() -> usize {
    8
}
fn default_rhos() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}
fn default_grid_block() -> GridBlock {
    toml::from_str("").unwrap()
}
fn default_rg_block() -> RgBlock {
    toml::from_str("").unwrap()
}
fn default_output_block() -> OutputBlock {
    toml::from_str("").unwrap()
}

/// 1-based line of byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, or of the section header itself.
pub fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

impl RunConfig {
    /// Parses and validates a configuration string.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            Error::config(line, e.message().to_string())
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self, text: &str) -> Result<()> {
        let at = |section: &str, key: &str, msg: String| Error::config(key_line(text, section, key), msg);
        let m = &self.model;
        if m.shape != "phase" && m.shape != "cos" {
            return Err(at("model", "shape", format!("unknown coupling shape '{}'", m.shape)));
        }
        self.model().validate().map_err(|e| {
            let key = match &e {
                Error::Config { message, .. } if message.contains("quad") => "quad_coupling",
                Error::Config { message, .. } if message.contains("cutoff") => "cutoff",
                Error::Config { message, .. } if message.contains("finite") => "g",
                _ => "atom_energies",
            };
            at("model", key, e.to_string())
        })?;
        let g = &self.grids;
        if g.r_nodes < 5 {
            return Err(at("grids", "r_nodes", "r_nodes must be at least 5".into()));
        }
        if g.k_nodes < 2 || g.k_nodes % g.nodes_per_interval.max(1) != 0 {
            return Err(at(
                "grids",
                "k_nodes",
                "k_nodes must be a positive multiple of nodes_per_interval".into(),
            ));
        }
        if !(g.grading > 1.0) {
            return Err(at("grids", "grading", "grading must exceed 1".into()));
        }
        if !(g.measure > 0.0) {
            return Err(at("grids", "measure", "measure must be positive".into()));
        }
        let r = &self.rg;
        if !(r.rho > 0.0 && r.rho <= 0.25) {
            return Err(at("rg", "rho", "rho must lie in (0, 1/4]".into()));
        }
        if !(r.xi > 0.0 && r.xi <= 0.25) {
            return Err(at("rg", "xi", "xi must lie in (0, 1/4]".into()));
        }
        if r.l_max < 2 {
            return Err(at("rg", "l_max", "l_max must be at least 2".into()));
        }
        if r.m_max_sector != 2 {
            return Err(at("rg", "m_max_sector", "only m_max_sector = 2 is supported".into()));
        }
        if r.m_max == 0 {
            return Err(at("rg", "m_max", "m_max must be positive".into()));
        }
        if !(r.skip_tol >= 0.0 && r.initial_skip_tol >= 0.0) {
            return Err(at("rg", "skip_tol", "skip tolerances must be non-negative".into()));
        }
        if let Some(o) = &self.oracle {
            if o.n_ph_max == 0 {
                return Err(at("oracle", "n_ph_max", "n_ph_max must be positive".into()));
            }
        }
        if let Some(s) = &self.scan {
            if !(s.beta_step > 0.0) {
                return Err(at("scan", "beta_step", "beta_step must be positive".into()));
            }
            if !(s.g_radius > 0.0) || s.g_points < 2 {
                return Err(at("scan", "g_radius", "g contour needs a positive radius and at least 2 points".into()));
            }
            if s.rhos.iter().any(|&x| !(x > 0.0 && x <= 0.25)) {
                return Err(at("scan", "rhos", "every rho must lie in (0, 1/4]".into()));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> ToyModel {
        let m = &self.model;
        ToyModel {
            atom_energies: m.atom_energies.clone(),
            quad_coupling: m.quad_coupling.clone(),
            g: Complex64::new(m.g, m.g_im),
            beta: m.beta,
            lambda1: m.lambda1,
            cutoff: m.cutoff,
            shape: if m.shape == "cos" { CouplingShape::Cos } else { CouplingShape::Phase },
        }
    }

    pub fn grid(&self) -> RadialGrid {
        let g = &self.grids;
        RadialGrid::new(
            g.r_nodes,
            KGridSpec {
                n_nodes: g.k_nodes,
                ratio: g.grading,
                nodes_per_interval: g.nodes_per_interval,
            },
            g.measure,
        )
    }

    pub fn solver(&self) -> SolverConfig {
        let r = &self.rg;
        let oracle_cap = self.oracle.as_ref().map(|o| o.n_ph_max).unwrap_or(3);
        SolverConfig {
            series: SeriesConfig {
                l_max: r.l_max,
                m_max: r.m_max_sector,
                skip_tol: r.initial_skip_tol,
                xi: r.xi,
                zs: ZSamples::standard(),
            },
            rg: RgConfig {
                rho: r.rho,
                xi: r.xi,
                l_max: r.l_max,
                m_max: r.m_max_sector,
                skip_tol: r.skip_tol,
                ..RgConfig::default()
            },
            steps: r.m_max,
            n_ph_max: oracle_cap,
            strict_ball: r.strict_ball,
        }
    }

    /// Output directory, overridable by `RGFLOW_OUT`.
    pub fn out_dir(&self) -> PathBuf {
        std::env::var_os("RGFLOW_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output.dir.clone())
    }
}
