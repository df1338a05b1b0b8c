//! Experiment configuration, Monte Carlo drivers and CSV persistence.
//!
//! Every replica `i` draws from the stream keyed by `(seed, i)` and results
//! are reduced in replica order, so the output does not depend on the number
//! of worker threads.

mod checks;
mod explore;
mod lattice_runs;
pub mod stats;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GffError, Result};
use crate::laws::LevelSchedule;
use crate::percolation::CrossingFractions;
use crate::sampler::SamplerMode;

pub use explore::martingale_traces;
pub use lattice_runs::chemical_distance_experiment;
pub use stats::{fit_power_law, wilson_interval, FitPoint, PowerLawFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    GreenAsymptotics,
    Sigma3,
    BridgeCheck,
    HittingCheck,
    MartingaleCheck,
    #[serde(rename = "critical_exponent_3d")]
    CriticalExponent3d,
    #[serde(rename = "supercritical_3d")]
    Supercritical3d,
    #[serde(rename = "subcritical_3d")]
    Subcritical3d,
    #[serde(rename = "critical_window_3d")]
    CriticalWindow3d,
    #[serde(rename = "crossing_2d")]
    Crossing2d,
    #[serde(rename = "chemical_distance_2d")]
    ChemicalDistance2d,
    #[serde(rename = "level_profile_2d")]
    LevelProfile2d,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GreenAsymptotics => "green_asymptotics",
            Experiment::Sigma3 => "sigma3",
            Experiment::BridgeCheck => "bridge_check",
            Experiment::HittingCheck => "hitting_check",
            Experiment::MartingaleCheck => "martingale_check",
            Experiment::CriticalExponent3d => "critical_exponent_3d",
            Experiment::Supercritical3d => "supercritical_3d",
            Experiment::Subcritical3d => "subcritical_3d",
            Experiment::CriticalWindow3d => "critical_window_3d",
            Experiment::Crossing2d => "crossing_2d",
            Experiment::ChemicalDistance2d => "chemical_distance_2d",
            Experiment::LevelProfile2d => "level_profile_2d",
        }
    }

    fn is_planar(self) -> bool {
        matches!(
            self,
            Experiment::MartingaleCheck
                | Experiment::Crossing2d
                | Experiment::ChemicalDistance2d
                | Experiment::LevelProfile2d
        )
    }

    fn is_percolation_3d(self) -> bool {
        matches!(
            self,
            Experiment::CriticalExponent3d
                | Experiment::Supercritical3d
                | Experiment::Subcritical3d
                | Experiment::CriticalWindow3d
        )
    }

    fn needs_sizes(self) -> bool {
        !matches!(self, Experiment::Sigma3 | Experiment::BridgeCheck | Experiment::HittingCheck)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Dirichlet,
    InfiniteRestricted,
    DirichletProxy,
}

/// A level schedule `h_N = c · shape(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: LevelSchedule,
    pub c: f64,
}

/// Outer box ratio of the proxy sampler when `kappa` is not given.
pub const DEFAULT_KAPPA: f64 = 3.0;

fn default_alpha() -> f64 {
    0.25
}
fn default_beta() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    0.75
}
fn default_k_max() -> usize {
    10
}

/// Experiment configuration as read from JSON; unknown fields are rejected.
///
/// Level conventions: `supercritical_3d` takes `h > 0` and estimates
/// `p_{N,−h}`; `critical_window_3d` always adds the reference level `0` to the
/// explicit levels and schedules. All levels of one `N` share their samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub d: usize,
    #[serde(rename = "N", default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default)]
    pub schedule: Vec<ScheduleSpec>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Exploration steps for the planar exploration experiments.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `infinite_restricted` in `d >= 3` and `dirichlet` otherwise.
    #[serde(default)]
    pub sampler: Option<SamplerKind>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| GffError::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn sampler_mode(&self) -> Result<SamplerMode> {
        let kind = self.sampler.unwrap_or(if self.d >= 3 && !self.experiment.is_planar() {
            SamplerKind::InfiniteRestricted
        } else {
            SamplerKind::Dirichlet
        });
        match (kind, self.kappa) {
            (SamplerKind::Dirichlet, None) => Ok(SamplerMode::Dirichlet),
            (SamplerKind::InfiniteRestricted, None) => {
                if self.d < 3 {
                    return Err(GffError::config("sampler", "infinite_restricted needs d >= 3"));
                }
                Ok(SamplerMode::InfiniteRestricted)
            }
            (SamplerKind::DirichletProxy, kappa) => {
                let kappa = kappa.unwrap_or(DEFAULT_KAPPA);
                if !(kappa >= 1.0) || !kappa.is_finite() {
                    return Err(GffError::config("kappa", format!("must be a finite number >= 1, got {kappa}")));
                }
                Ok(SamplerMode::DirichletProxy { kappa })
            }
            (_, Some(_)) => Err(GffError::config("kappa", "kappa only applies to dirichlet_proxy")),
        }
    }

    /// Levels used at size `n`, sorted increasingly and deduplicated.
    pub fn levels(&self, n: usize) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = match self.experiment {
            Experiment::Supercritical3d => self.h.iter().map(|h| -h).collect(),
            Experiment::CriticalExponent3d if self.h.is_empty() => vec![0.0],
            Experiment::CriticalWindow3d => {
                let mut v = self.h.clone();
                v.push(0.0);
                v
            }
            _ => self.h.clone(),
        };
        for s in &self.schedule {
            out.push(crate::laws::critical_window_envelopes(s.kind, s.c, n as f64)?.h);
        }
        if out.is_empty() {
            out.push(0.0);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.experiment;
        if self.samples == 0 {
            return Err(GffError::config("samples", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(GffError::config("workers", "must be at least 1"));
        }
        match e {
            Experiment::Sigma3 if self.d < 3 => return Err(GffError::config("d", "sigma3 needs d >= 3")),
            _ if e.is_planar() && self.d != 2 => {
                return Err(GffError::config("d", format!("{} needs d = 2", e.name())))
            }
            _ if e.is_percolation_3d() && self.d < 3 => {
                return Err(GffError::config("d", format!("{} needs d >= 3", e.name())))
            }
            Experiment::GreenAsymptotics if self.d < 2 => return Err(GffError::config("d", "needs d >= 2")),
            _ if self.d == 0 => return Err(GffError::config("d", "must be positive")),
            _ => {}
        }
        if e.needs_sizes() {
            if self.n.is_empty() {
                return Err(GffError::config("N", "needs at least one size"));
            }
            if let Some(i) = self.n.iter().position(|&n| n == 0) {
                return Err(GffError::config(format!("N[{i}]"), "sizes must be positive"));
            }
        }
        for (i, h) in self.h.iter().enumerate() {
            if !h.is_finite() {
                return Err(GffError::config(format!("h[{i}]"), "must be finite"));
            }
            if e == Experiment::Supercritical3d && *h <= 0.0 {
                return Err(GffError::config(format!("h[{i}]"), "supercritical_3d takes h > 0 and uses level -h"));
            }
            if e == Experiment::Subcritical3d && *h <= 0.0 {
                return Err(GffError::config(format!("h[{i}]"), "subcritical_3d needs h > 0"));
            }
        }
        if matches!(e, Experiment::Supercritical3d | Experiment::Subcritical3d) && self.h.is_empty() {
            return Err(GffError::config("h", "needs at least one level"));
        }
        for (i, s) in self.schedule.iter().enumerate() {
            if !s.c.is_finite() {
                return Err(GffError::config(format!("schedule[{i}].c"), "must be finite"));
            }
            if let Some(&n) = self.n.iter().find(|&&n| n < 3) {
                return Err(GffError::config("N", format!("level schedules need N >= 3, got {n}")));
            }
        }
        let fr = match e {
            Experiment::Crossing2d | Experiment::ChemicalDistance2d => {
                Some(CrossingFractions::new(self.alpha, self.beta, self.gamma)?)
            }
            Experiment::MartingaleCheck | Experiment::LevelProfile2d => {
                if !(0.0 < self.alpha && self.alpha < self.beta && self.beta < 1.0) {
                    return Err(GffError::config("alpha", "exploration needs 0 < alpha < beta < 1"));
                }
                if self.k_max == 0 {
                    return Err(GffError::config("k_max", "must be at least 1"));
                }
                None
            }
            _ => None,
        };
        if let Some(fr) = fr {
            for (i, &n) in self.n.iter().enumerate() {
                fr.radii(n).map_err(|_| {
                    GffError::config(format!("N[{i}]"), format!("N = {n} too small to separate the crossing radii"))
                })?;
            }
        }
        if e.is_planar()
            && self.sampler_mode()? != SamplerMode::Dirichlet
            && matches!(e, Experiment::MartingaleCheck | Experiment::LevelProfile2d)
        {
            return Err(GffError::config("sampler", "exploration experiments use the dirichlet sampler"));
        }
        if matches!(e, Experiment::MartingaleCheck | Experiment::LevelProfile2d) {
            if let Some((i, &n)) = self.n.iter().enumerate().find(|(_, &n)| {
                (self.alpha * n as f64).floor() as usize >= (self.beta * n as f64).floor() as usize
                    || (self.beta * n as f64).floor() as usize >= n
            }) {
                return Err(GffError::config(
                    format!("N[{i}]"),
                    format!("N = {n} too small for the exploration radii"),
                ));
            }
        }
        self.sampler_mode()?;
        Ok(())
    }
}

/// One row of the output CSV. For proportions `stderr_lo`/`stderr_hi` are the
/// Wilson 95% bounds; for means they are `estimate ∓ SE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub experiment: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub estimate: Option<f64>,
    pub stderr_lo: Option<f64>,
    pub stderr_hi: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub wall_s: Option<f64>,
    /// JSON object with conventions and secondary statistics.
    pub meta: String,
}

impl EstimateRecord {
    /// Field of the `meta` object, if present.
    pub fn meta_value(&self, key: &str) -> Option<serde_json::Value> {
        serde_json::from_str::<serde_json::Value>(&self.meta).ok()?.get(key).cloned()
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta_value(key)?.as_f64()
    }

    pub fn stderr(&self) -> Option<f64> {
        Some((self.stderr_hi? - self.stderr_lo?) / (2.0 * stats::Z95))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock seconds; disable for byte-identical output.
    pub wall_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { wall_time: true }
    }
}

pub(crate) struct RecordBuilder<'a> {
    cfg: &'a ExperimentConfig,
    opts: RunOptions,
    start: Instant,
}

impl<'a> RecordBuilder<'a> {
    pub(crate) fn new(cfg: &'a ExperimentConfig, opts: RunOptions) -> Self {
        RecordBuilder { cfg, opts, start: Instant::now() }
    }

    pub(crate) fn restart(&mut self) {
        self.start = Instant::now();
    }

    pub(crate) fn record(
        &self,
        n: usize,
        h: f64,
        estimate: Option<f64>,
        bounds: Option<(f64, f64)>,
        samples: usize,
        meta: serde_json::Value,
    ) -> EstimateRecord {
        EstimateRecord {
            experiment: self.cfg.experiment.name().to_string(),
            d: self.cfg.d,
            n,
            h,
            estimate,
            stderr_lo: bounds.map(|b| b.0),
            stderr_hi: bounds.map(|b| b.1),
            samples,
            seed: self.cfg.seed,
            wall_s: self.opts.wall_time.then(|| self.start.elapsed().as_secs_f64()),
            meta: meta.to_string(),
        }
    }
}

/// Runs an experiment with wall times recorded.
pub fn run(config: &ExperimentConfig) -> Result<Vec<EstimateRecord>> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EstimateRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| GffError::config("workers", e.to_string()))?;
    pool.install(|| match config.experiment {
        Experiment::GreenAsymptotics => lattice_runs::green_asymptotics(config, opts),
        Experiment::Sigma3 => lattice_runs::sigma3(config, opts),
        Experiment::BridgeCheck => checks::bridge_check(config, opts),
        Experiment::HittingCheck => checks::hitting_check(config, opts),
        Experiment::MartingaleCheck => explore::martingale_check(config, opts),
        Experiment::LevelProfile2d => explore::level_profile_experiment(config, opts),
        Experiment::CriticalExponent3d
        | Experiment::Supercritical3d
        | Experiment::Subcritical3d
        | Experiment::CriticalWindow3d => lattice_runs::origin_connection(config, opts),
        Experiment::Crossing2d | Experiment::ChemicalDistance2d => lattice_runs::crossing(config, opts),
    })
}

pub fn write_csv<W: Write>(records: &[EstimateRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if records.is_empty() {
        wr.write_record(CSV_HEADER)?;
    }
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<EstimateRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|x| x.map_err(GffError::from)).collect()
}

pub const CSV_HEADER: [&str; 11] =
    ["experiment", "d", "N", "h", "estimate", "stderr_lo", "stderr_hi", "samples", "seed", "wall_s", "meta"];

/// Splits `0..total` into blocks of `block` replicas.
pub(crate) fn blocks(total: usize, block: usize) -> Vec<std::ops::Range<usize>> {
    (0..total.div_ceil(block)).map(|b| b * block..((b + 1) * block).min(total)).collect()
}
