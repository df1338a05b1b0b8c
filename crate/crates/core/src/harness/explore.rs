//! Exploration martingale experiments on the planar Dirichlet box.
//!
//! `I_0 = V_{⌊αN⌋}` and `A = ∂V_{⌊βN⌋}`.

use rayon::prelude::*;
use serde_json::json;

use super::stats::{ks_test, mean_se};
use super::{blocks, EstimateRecord, ExperimentConfig, RecordBuilder, RunOptions};
use crate::error::{GffError, Result};
use crate::exploration::{level_profile, track_exploration, ExplorationTrace};
use crate::lattice::BoxSpec;
use crate::numerics::normal_cdf;
use crate::rng::replica_rng;
use crate::sampler::{BridgeUniforms, Field, FieldSampler, MetricLevelSet, SamplerMode};

const EXPLORE_BLOCK: usize = 16;

/// Conditional-variance drops below this are treated as no increment.
pub const MIN_VAR_DROP: f64 = 1e-9;

fn explore_all<T: Send>(
    cfg: &ExperimentConfig,
    n: usize,
    h: f64,
    f: impl Fn(&Field, ExplorationTrace) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let spec = BoxSpec::new(2, n)?;
    let sampler = FieldSampler::new(&spec, SamplerMode::Dirichlet)?;
    let i0 = spec.ball((cfg.alpha * n as f64).floor() as usize);
    let a = spec.sphere((cfg.beta * n as f64).floor() as usize);
    let per_block: Vec<Result<Vec<T>>> = blocks(cfg.samples, EXPLORE_BLOCK)
        .into_par_iter()
        .map(|r| {
            r.map(|i| {
                let mut rng = replica_rng(cfg.seed, i as u64);
                let field = sampler.sample(&mut rng);
                let u = BridgeUniforms::draw(&spec, &mut rng);
                let ls = MetricLevelSet::from_uniforms(&field, h, &u);
                let trace = track_exploration(&field, &ls, &i0, &a, cfg.k_max)?;
                f(&field, trace)
            })
            .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(cfg.samples);
    for b in per_block {
        out.extend(b?);
    }
    Ok(out)
}

fn single_level(cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.h.as_slice() {
        [] => Ok(0.0),
        [h] => Ok(*h),
        _ => Err(GffError::config("h", "exploration experiments take a single level")),
    }
}

/// Traces of every replica at the first configured size.
pub fn martingale_traces(cfg: &ExperimentConfig) -> Result<Vec<ExplorationTrace>> {
    cfg.validate()?;
    let n = cfg.n[0];
    explore_all(cfg, n, single_level(cfg)?, |_, t| Ok(t))
}

/// One record per step `k -> k+1`: the mean increment with `± SE` bounds, and
/// in `meta` the paired test of `ΔM² − ΔVar` and a pooled KS test of the
/// normalized increments `ΔM / √ΔVar` against `N(0,1)`.
pub fn martingale_check(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EstimateRecord>> {
    let h = single_level(cfg)?;
    let mut rb = RecordBuilder::new(cfg, opts);
    let mut out = Vec::new();
    for &n in &cfg.n {
        rb.restart();
        let traces = explore_all(cfg, n, h, |_, t| Ok(t))?;
        let mut normalized = Vec::new();
        let mut rows = Vec::new();
        for k in 0..cfg.k_max {
            let mut inc = Vec::with_capacity(traces.len());
            let mut sq = Vec::with_capacity(traces.len());
            let mut drop = Vec::with_capacity(traces.len());
            let mut diff = Vec::with_capacity(traces.len());
            let mut grew = 0usize;
            for t in &traces {
                let dm = t.steps[k + 1].m - t.steps[k].m;
                let dv = t.steps[k].var - t.steps[k + 1].var;
                inc.push(dm);
                sq.push(dm * dm);
                drop.push(dv);
                diff.push(dm * dm - dv);
                if dv > MIN_VAR_DROP {
                    grew += 1;
                    normalized.push(dm / dv.sqrt());
                }
            }
            rows.push((k, mean_se(&inc), mean_se(&sq), mean_se(&drop), mean_se(&diff), grew));
        }
        let ks = ks_test(&normalized, normal_cdf);
        for (k, inc, sq, drop, diff, grew) in rows {
            out.push(rb.record(
                n,
                h,
                Some(inc.mean),
                Some((inc.mean - inc.se, inc.mean + inc.se)),
                traces.len(),
                json!({
                    "k": k,
                    "increment_se": inc.se,
                    "mean_sq_increment": sq.mean,
                    "mean_sq_increment_se": sq.se,
                    "mean_var_drop": drop.mean,
                    "mean_var_drop_se": drop.se,
                    "paired_diff_mean": diff.mean,
                    "paired_diff_se": diff.se,
                    "replicas_with_growth": grew,
                    "ks_statistic": ks.statistic,
                    "ks_p": ks.p_value,
                    "ks_n": ks.n,
                    "inner_radius": (cfg.alpha * n as f64).floor(),
                    "target_radius": (cfg.beta * n as f64).floor(),
                }),
            ));
        }
    }
    Ok(out)
}

/// Mean `W_j` per band, with the mean `|B_j|` in `meta`.
pub fn level_profile_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EstimateRecord>> {
    let h = single_level(cfg)?;
    let mut rb = RecordBuilder::new(cfg, opts);
    let mut out = Vec::new();
    for &n in &cfg.n {
        rb.restart();
        let profiles = explore_all(cfg, n, h, |field, t| level_profile(field, &t, h, n))?;
        let bands = profiles.iter().map(|p| p.sizes.len()).max().unwrap_or(0);
        for j in 0..bands {
            let w: Vec<f64> = profiles.iter().map(|p| p.weights.get(j).copied().unwrap_or(0.0)).collect();
            let s: Vec<f64> = profiles.iter().map(|p| p.sizes.get(j).copied().unwrap_or(0) as f64).collect();
            let w = mean_se(&w);
            let s = mean_se(&s);
            out.push(rb.record(
                n,
                h,
                Some(w.mean),
                Some((w.mean - w.se, w.mean + w.se)),
                profiles.len(),
                json!({
                    "j": j,
                    "mean_size": s.mean,
                    "mean_size_se": s.se,
                    "band_scale": (n as f64).ln().sqrt(),
                    "weights": "harmonic measure at first reveal",
                }),
            ));
        }
    }
    Ok(out)
}
