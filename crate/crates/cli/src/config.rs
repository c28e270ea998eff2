//! Run configuration: a TOML document with one section per command.

use std::fmt;

use chemotaxis_core::liouville::SolveOptions;
use chemotaxis_core::{FlowConfig, GridKind, Params};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Classify,
    Sweep,
    Steady,
    Flow,
    Blowdown,
    Oracle,
    Functional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub m1: f64,
    #[serde(default)]
    pub m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    Uniform,
    Graded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub kind: GridChoice,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: chemotaxis_core::model::DEFAULT_CELLS, kind: GridChoice::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub m1_range: [f64; 2],
    pub m2_range: [f64; 2],
    pub resolution: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { m1_range: [0.0, 40.0], m2_range: [0.0, 40.0], resolution: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub continuation_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverSection { tol: d.tol, max_iter: d.max_iter, damping: d.damping, continuation_steps: d.continuation_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    Uniform,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub delta1: f64,
    pub delta2: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub t_end: f64,
    pub adapt: bool,
    pub init: InitialData,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            delta1: 1.0,
            delta2: 0.0,
            epsilon: 0.0,
            dt: 1e-3,
            t_end: 1.0,
            adapt: true,
            init: InitialData::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowdownSection {
    pub psis: Vec<f64>,
    pub mode: Mode,
}

impl Default for BlowdownSection {
    fn default() -> Self {
        BlowdownSection { psis: chemotaxis_core::scaling::default_ladder(), mode: Mode::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub psis: Vec<f64>,
    /// Product `beta M`; defaults to `beta * m1`.
    pub beta_m: Option<f64>,
    pub steps: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { psis: vec![1e-4, 1e-6, 1e-8], beta_m: None, steps: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionalSection {
    pub directions: usize,
    pub step: f64,
}

impl Default for FunctionalSection {
    fn default() -> Self {
        FunctionalSection { directions: 8, step: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub params: ParamsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub blowdown: BlowdownSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub functional: FunctionalSection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Syntax, type or unknown-key failure, with the parser's location.
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.params().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if cfg.grid.n < chemotaxis_core::model::MIN_CELLS {
        return Err(ConfigError::Invalid(format!("grid.n = {} is below {}", cfg.grid.n, chemotaxis_core::model::MIN_CELLS)));
    }
    cfg.solve_options().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    match cfg.command {
        Command::Sweep => {
            let s = &cfg.sweep;
            if s.m1_range[1] < s.m1_range[0] || s.m2_range[1] < s.m2_range[0] {
                return Err(ConfigError::Invalid("sweep ranges must be increasing".into()));
            }
        }
        Command::Flow => {
            cfg.flow_config().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Command::Oracle if cfg.oracle.psis.is_empty() => {
            return Err(ConfigError::Invalid("oracle.psis is empty".into()));
        }
        _ => {}
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn params(&self) -> chemotaxis_core::Result<Params> {
        let p = &self.params;
        Params::new(p.alpha, p.beta, p.gamma, p.theta, p.m1, p.m2)
    }

    pub fn grid_kind(&self) -> GridKind {
        match self.grid.kind {
            GridChoice::Uniform => GridKind::Uniform,
            GridChoice::Graded => GridKind::Graded,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solver;
        SolveOptions { tol: s.tol, max_iter: s.max_iter, damping: s.damping, continuation_steps: s.continuation_steps }
    }

    pub fn flow_config(&self) -> chemotaxis_core::Result<FlowConfig> {
        let f = &self.flow;
        FlowConfig::new(f.delta1, f.delta2, f.epsilon, f.dt, f.t_end, f.adapt)
    }

    /// The fully resolved configuration, defaults included.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
