//! Experiment configuration: JSON schema, parsing, and validation.
//!
//! The schema is validated before any work starts and every rejection names
//! the offending field, so a bad batch config fails in milliseconds rather
//! than after a partial run.

use serde::Deserialize;

use srpt_lab_core::dist::ProcTimeDist;
use srpt_lab_core::htseq::{HeavyTrafficParams, InterarrivalKind};
use srpt_lab_core::sim::{Discipline, MIN_THRESHOLD};

/// How close `horizon / delta` must be to an integer.
pub const GRID_DIVISIBILITY_TOL: f64 = 1e-12;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw deserialized config, prior to validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dist: DistSpec,
    pub heavy_traffic: HeavyTrafficSpec,
    /// Band widths ε, one tracked (lʳ(ε), uʳ(ε)] pair each.
    pub epsilon: Vec<f64>,
    /// Fixed residual levels whose region statistics are tracked.
    pub fixed_x: Vec<f64>,
    /// Scaled grid step Δ.
    pub delta: f64,
    /// Scaled horizon T.
    pub horizon: f64,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub dump_events: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    #[default]
    Srpt,
    Fifo,
}

impl Pipeline {
    pub fn discipline(self) -> Discipline {
        match self {
            Pipeline::Srpt => Discipline::Srpt,
            Pipeline::Fifo => Discipline::Fifo,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Weibull { alpha: f64, beta: f64 },
    Exponential { rate: f64 },
}

impl DistSpec {
    pub fn build(&self) -> Result<ProcTimeDist, ConfigError> {
        match *self {
            DistSpec::Weibull { alpha, beta } => ProcTimeDist::weibull(alpha, beta),
            DistSpec::Exponential { rate } => ProcTimeDist::exponential(rate),
        }
        .map_err(|e| ConfigError(format!("dist: {e}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTrafficSpec {
    pub kappa: f64,
    pub w0: f64,
    pub interarrival: InterarrivalSpec,
    pub r_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterarrivalSpec {
    Exponential,
    Erlang { k: u32 },
    Hyperexponential { p: f64, rate1: f64, rate2: f64 },
}

impl InterarrivalSpec {
    fn build(&self) -> InterarrivalKind {
        match *self {
            InterarrivalSpec::Exponential => InterarrivalKind::Exponential,
            InterarrivalSpec::Erlang { k } => InterarrivalKind::Erlang { k },
            InterarrivalSpec::Hyperexponential { p, rate1, rate2 } => {
                InterarrivalKind::Hyperexponential { p, rate1, rate2 }
            }
        }
    }
}

/// Validated experiment, ready to run.
#[derive(Debug)]
pub struct Experiment {
    pub params: HeavyTrafficParams,
    pub r_values: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub fixed_x: Vec<f64>,
    pub delta: f64,
    pub horizon: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub pipeline: Pipeline,
    pub out_dir: Option<String>,
    pub dump_events: bool,
}

pub fn parse(json: &str) -> Result<ExperimentConfig, ConfigError> {
    serde_json::from_str(json).map_err(|e| ConfigError(format!("config parse error: {e}")))
}

pub fn validate(cfg: &ExperimentConfig) -> Result<Experiment, ConfigError> {
    let dist = cfg.dist.build()?;
    let params = HeavyTrafficParams::new(
        cfg.heavy_traffic.kappa,
        cfg.heavy_traffic.interarrival.build(),
        dist,
        cfg.heavy_traffic.w0,
    )
    .map_err(|e| ConfigError(format!("heavy_traffic: {e}")))?;

    let rs = &cfg.heavy_traffic.r_values;
    if rs.is_empty() {
        return err("r_values must not be empty");
    }
    if rs.iter().any(|&r| !(r > 1.0) || !r.is_finite()) {
        return err("r_values must all exceed 1");
    }
    if rs.windows(2).any(|w| w[1] <= w[0]) {
        return err("r_values not increasing");
    }

    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return err("horizon must be positive");
    }
    if !(cfg.delta > 0.0 && cfg.delta.is_finite()) {
        return err("delta must be positive");
    }
    let steps = cfg.horizon / cfg.delta;
    if (steps - steps.round()).abs() > GRID_DIVISIBILITY_TOL * steps.max(1.0) || steps < 0.5 {
        return err("delta does not divide horizon");
    }

    if cfg.replications < 1 {
        return err("replications must be at least 1");
    }

    if cfg.epsilon.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return err("epsilon values must be positive");
    }
    if cfg.epsilon.windows(2).any(|w| w[1] <= w[0]) {
        return err("epsilon values must be strictly increasing");
    }

    if cfg
        .fixed_x
        .iter()
        .any(|&x| !(x >= MIN_THRESHOLD) || !x.is_finite())
    {
        return err(format!("fixed_x values must be at least {MIN_THRESHOLD}"));
    }
    if cfg.fixed_x.windows(2).any(|w| w[1] <= w[0]) {
        return err("fixed_x values must be strictly increasing");
    }

    Ok(Experiment {
        params,
        r_values: rs.clone(),
        epsilon: cfg.epsilon.clone(),
        fixed_x: cfg.fixed_x.clone(),
        delta: cfg.delta,
        horizon: cfg.horizon,
        replications: cfg.replications,
        base_seed: cfg.base_seed,
        pipeline: cfg.pipeline,
        out_dir: cfg.out_dir.clone(),
        dump_events: cfg.dump_events,
    })
}
