//! Run configuration: flat JSON keys, validated, with command line overrides.

use serde::{Deserialize, Serialize};

use crate::beam::Order;
use crate::error::{Error, Result};
use crate::initial_data::{preset_dimension, PresetParams};
use crate::medium::MediumModel;
use crate::phase_space::DEFAULT_ETA_CELLS;
use crate::validation::study::{OracleChoice, StudyMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Propagate,
    Superpose,
    Eulerian,
    Convergence,
    SphericalExample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Propagate => "propagate",
            Command::Superpose => "superpose",
            Command::Eulerian => "eulerian",
            Command::Convergence => "convergence",
            Command::SphericalExample => "spherical-example",
        }
    }
}

/// Axis-aligned evaluation grid `[lo, hi]` with spacing at most `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
}

/// Phase-space grid for the Eulerian command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGridSpec {
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub nx: usize,
    pub np: usize,
}

fn default_medium() -> MediumModel {
    MediumModel::constant(1.0)
}

fn default_n_times() -> usize {
    5
}

fn default_tol() -> f64 {
    1e-8
}

fn default_out() -> String {
    "out".into()
}

fn default_eta_cells() -> f64 {
    DEFAULT_ETA_CELLS
}

fn default_cells() -> f64 {
    24.0
}

fn default_mode() -> StudyMode {
    StudyMode::Lagrangian
}

fn default_oracle() -> OracleChoice {
    OracleChoice::Auto
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_medium")]
    pub medium: MediumModel,
    /// Preset name; defaults to `chirp1d` (`radial3d` for the spherical example).
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub preset_params: PresetParams,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    /// Beam width parameter; defaults to 1 (8 for the spherical example).
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub k: Option<u8>,
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Output times; default `n_times` uniform samples of `[0, t_end]`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub phase_grid: Option<PhaseGridSpec>,
    #[serde(default = "default_mode")]
    pub mode: StudyMode,
    #[serde(default = "default_oracle")]
    pub oracle: OracleChoice,
    #[serde(default = "default_out")]
    pub out: String,
    /// Reserved; no numerical path draws random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub r_rho: Option<f64>,
    #[serde(default = "default_eta_cells")]
    pub eta_cells: f64,
    #[serde(default = "default_cells")]
    pub cells_per_sqrt_eps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all keys have defaults")
    }
}

/// Command line overrides; `None` leaves the config value untouched.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub t: Option<f64>,
    pub out: Option<String>,
    pub k: Option<u8>,
    pub beta: Option<f64>,
    pub preset: Option<String>,
    pub mode: Option<StudyMode>,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies overrides, then fills command-specific defaults so the
    /// manifest records every value actually used.
    pub fn resolve(mut self, cmd: Command, o: &Overrides) -> Result<Self> {
        if let Some(e) = o.eps {
            self.eps = Some(e);
            self.eps_list = None;
        }
        if let Some(t) = o.t {
            self.t_end = Some(t);
            self.times = None;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if o.k.is_some() {
            self.k = o.k;
        }
        if o.beta.is_some() {
            self.beta = o.beta;
        }
        if o.preset.is_some() {
            self.preset = o.preset.clone();
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(t) = o.tol {
            self.tol = t;
        }
        let spherical = cmd == Command::SphericalExample;
        self.preset.get_or_insert_with(|| if spherical { "radial3d".into() } else { "chirp1d".into() });
        self.beta.get_or_insert(if spherical { 8.0 } else { 1.0 });
        self.k.get_or_insert(1);
        self.t_end.get_or_insert(0.5);
        match cmd {
            Command::Convergence | Command::SphericalExample => {
                if self.eps_list.is_none() {
                    self.eps_list = Some(match (self.eps, spherical) {
                        (Some(e), _) => vec![e],
                        (None, true) => vec![1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0],
                        (None, false) => vec![1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0],
                    });
                }
                self.eps = None;
            }
            _ => {
                self.eps.get_or_insert(1.0 / 50.0);
                self.eps_list = None;
            }
        }
        if self.times.is_none() && !matches!(cmd, Command::SphericalExample | Command::Convergence) {
            let t = self.t_end.unwrap_or(0.0);
            let n = self.n_times.max(2);
            self.times = Some((0..n).map(|i| t * i as f64 / (n - 1) as f64).collect());
        }
        self.validate(cmd)?;
        Ok(self)
    }

    pub fn validate(&self, cmd: Command) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let order = self.order()?;
        let beta = self.beta.unwrap_or(1.0);
        if !(beta > 0.0 && beta.is_finite()) {
            return bad(format!("beta must be positive, got {beta}"));
        }
        for e in self.eps.iter().chain(self.eps_list.iter().flatten()) {
            if !(*e > 0.0 && e.is_finite()) {
                return bad(format!("eps must be positive, got {e}"));
            }
        }
        let t = self.t_end.unwrap_or(0.0);
        if !(t >= 0.0 && t.is_finite()) {
            return bad(format!("T must be non-negative, got {t}"));
        }
        if let Some(ts) = &self.times {
            if ts.is_empty() || ts.iter().any(|t| !t.is_finite()) {
                return bad("times must be a non-empty list of finite values".into());
            }
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if let Some(r) = self.r_rho {
            if !(r > 0.0) {
                return bad(format!("r_rho must be positive, got {r}"));
            }
        }
        if !(self.eta_cells > 0.0) || !(self.cells_per_sqrt_eps > 0.0) {
            return bad("eta_cells and cells_per_sqrt_eps must be positive".into());
        }
        let dim = self.dimension()?;
        self.medium.validate(dim)?;
        if let Some(g) = &self.grid {
            if g.lo.len() != dim || g.hi.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: g.lo.len().min(g.hi.len()) });
            }
            if !(g.h > 0.0) || g.lo.iter().zip(&g.hi).any(|(a, b)| !(b > a)) {
                return bad("grid needs h > 0 and lo < hi on every axis".into());
            }
        }
        match cmd {
            Command::Eulerian | Command::Convergence if dim != 1 => {
                bad(format!("`{}` runs in one dimension only; preset has n = {dim}", cmd.name()))
            }
            Command::Eulerian if order != Order::First => bad("the Eulerian command supports k = 1 only".into()),
            Command::Convergence if self.mode == StudyMode::Eulerian && order != Order::First => {
                bad("Eulerian convergence runs support k = 1 only".into())
            }
            Command::SphericalExample if self.preset.as_deref() != Some("radial3d") => {
                bad("the spherical example uses the radial3d preset".into())
            }
            Command::SphericalExample if order != Order::First => bad("the spherical example uses k = 1".into()),
            Command::Convergence if self.eps_list.as_ref().is_some_and(|l| l.len() < 2) => {
                bad("a convergence run needs at least two eps values".into())
            }
            _ => Ok(()),
        }
    }

    pub fn order(&self) -> Result<Order> {
        Order::try_from(self.k.unwrap_or(1)).map_err(Error::Config)
    }

    pub fn preset_name(&self) -> &str {
        self.preset.as_deref().unwrap_or("chirp1d")
    }

    pub fn dimension(&self) -> Result<usize> {
        preset_dimension(self.preset_name())
    }
}
