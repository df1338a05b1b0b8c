//! Green's function diagnostics and level-set connection experiments.

use rayon::prelude::*;
use serde_json::json;

use super::stats::{quantile, wilson_interval, Z95};
use super::{blocks, EstimateRecord, Experiment, ExperimentConfig, RecordBuilder, RunOptions};
use crate::error::{GffError, Result};
use crate::green::{box_origin_green, green_infinite, sigma2_extrapolated, KilledSystem, LatticeConstants};
use crate::lattice::BoxSpec;
use crate::laws::supercritical_limit;
use crate::percolation::{crossing_event, origin_reaches_boundary, CrossingFractions};
use crate::rng::{replica_rng, ReplicaRng};
use crate::sampler::{BridgeUniforms, FieldSampler, MetricLevelSet};

/// Replicas sampled together; fixed so batched products are reproducible.
pub const SAMPLE_BLOCK: usize = 64;

const FINITE_SIZE_NOTE: &str = "finite-size trend diagnostic, not an asymptotic statement";

/// `d = 2`: `G_N(0,0)` of the Dirichlet box. `d >= 3`: `N · G(0, N e_1)` on
/// the whole lattice.
pub fn green_asymptotics(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EstimateRecord>> {
    let mut rb = RecordBuilder::new(cfg, opts);
    let mut out = Vec::new();
    let c_d = if cfg.d >= 3 { Some(LatticeConstants::new(cfg.d)?.c_d) } else { None };
    for &n in &cfg.n {
        rb.restart();
        let rec = match c_d {
            None => {
                let spec = BoxSpec::new(cfg.d, n)?;
                let g = if n == 0 {
                    0.0
                } else {
                    let sys = KilledSystem::dirichlet(&spec, &[])?;
                    sys.column(spec.origin())[spec.origin().0]
                };
                let lead = 2.0 / std::f64::consts::PI * (n as f64).ln();
                rb.record(
                    n,
                    0.0,
                    Some(g),
                    None,
                    1,
                    json!({"quantity": "G_N(0,0)", "boundary": "dirichlet", "log_law_leading_term": lead}),
                )
            }
            Some(c_d) => {
                let mut x = vec![0i64; cfg.d];
                x[0] = n as i64;
                let v = n as f64 * green_infinite(cfg.d, &x)?;
                let scaled = v * (n as f64).powi(cfg.d as i32 - 3);
                rb.record(
                    n,
                    0.0,
                    Some(scaled),
                    None,
                    1,
                    json!({"quantity": "|x|^(d-2) G(0,x), x = N e_1", "c_d": c_d, "ratio": scaled / c_d}),
                )
            }
        };
        out.push(rec);
    }
    Ok(out)
}

/// `σ_d² = G(0,0)` by quadrature, with the box extrapolation as a second
/// route.
pub fn sigma3(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EstimateRecord>> {
    let rb = RecordBuilder::new(cfg, opts);
    let lc = LatticeConstants::new(cfg.d)?;
    let radii = if cfg.d == 3 { [20, 40, 80] } else { [6, 12, 24] };
    let boxes: Vec<f64> = radii.iter().map(|&r| box_origin_green(cfg.d, r)).collect();
    let extra = sigma2_extrapolated(cfg.d, radii);
    Ok(vec![rb.record(
        0,
        0.0,
        Some(lc.sigma2),
        None,
        1,
        json!({
            "method": "quadrature",
            "extrapolated": extra,
            "relative_difference": (lc.sigma2 - extra).abs() / lc.sigma2,
            "box_radii": radii,
            "box_values": boxes,
            "c_d": lc.c_d,
        }),
    )])
}

fn level_label(cfg: &ExperimentConfig, n: usize, h: f64) -> serde_json::Value {
    for s in &cfg.schedule {
        if let Ok(w) = crate::laws::critical_window_envelopes(s.kind, s.c, n as f64) {
            if w.h == h {
                return json!({"schedule": s.kind, "c": s.c});
            }
        }
    }
    json!("fixed")
}

/// `P(0 ↔ ∂V_N in the level set ≥ h)` for every configured level, all levels
/// sharing fields and bridge uniforms.
pub fn origin_connection(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EstimateRecord>> {
    let mode = cfg.sampler_mode()?;
    let mut rb = RecordBuilder::new(cfg, opts);
    let limit_sigma2 =
        if cfg.experiment == Experiment::Supercritical3d { Some(LatticeConstants::new(cfg.d)?.sigma2) } else { None };
    let mut out = Vec::new();
    for &n in &cfg.n {
        rb.restart();
        let levels = cfg.levels(n)?;
        let spec = BoxSpec::new(cfg.d, n)?;
        let sampler = FieldSampler::new(&spec, mode)?;
        let per_block: Vec<Vec<u64>> = blocks(cfg.samples, SAMPLE_BLOCK)
            .into_par_iter()
            .map(|r| {
                let mut rngs: Vec<ReplicaRng> = r.map(|i| replica_rng(cfg.seed, i as u64)).collect();
                let fields = sampler.sample_batch(&mut rngs);
                let mut counts = vec![0u64; levels.len()];
                let mut scratch = Vec::new();
                for (field, rng) in fields.iter().zip(rngs.iter_mut()) {
                    let u = BridgeUniforms::draw(&spec, rng);
                    for (c, &h) in counts.iter_mut().zip(&levels) {
                        *c += u64::from(origin_reaches_boundary(field, &u, h, &mut scratch));
                    }
                }
                counts
            })
            .collect();
        let mut counts = vec![0u64; levels.len()];
        for b in &per_block {
            for (c, x) in counts.iter_mut().zip(b) {
                *c += x;
            }
        }
        let monotone = counts.windows(2).all(|w| w[0] >= w[1]);
        if !monotone {
            log::warn!("coupled estimates at N = {n} are not monotone in h: {counts:?}");
        }
        let total = cfg.samples as u64;
        for (&h, &c) in levels.iter().zip(&counts) {
            let mut meta = json!({
                "event": "origin_to_boundary",
                "sampler": mode.name(),
                "coupled_levels": levels.len(),
                "h_monotone": monotone,
                "level": level_label(cfg, n, h),
                "note": FINITE_SIZE_NOTE,
            });
            if let (Some(s2), true) = (limit_sigma2, h < 0.0) {
                meta["limit"] = json!(supercritical_limit(-h, s2)?);
                meta["sigma2"] = json!(s2);
            }
            out.push(rb.record(
                n,
                h,
                Some(c as f64 / total as f64),
                Some(wilson_interval(c, total, Z95)),
                cfg.samples,
                meta,
            ));
        }
    }
    Ok(out)
}

/// Per-replica crossing outcomes at every level: `(crosses, distance)`.
type Outcomes = Vec<Vec<(bool, Option<usize>)>>;

fn crossing_outcomes(cfg: &ExperimentConfig, n: usize, levels: &[f64], fr: &CrossingFractions) -> Result<Outcomes> {
    let spec = BoxSpec::new(cfg.d, n)?;
    let sampler = FieldSampler::new(&spec, cfg.sampler_mode()?)?;
    let per_block: Vec<Result<Outcomes>> = blocks(cfg.samples, SAMPLE_BLOCK)
        .into_par_iter()
        .map(|r| {
            let mut rngs: Vec<ReplicaRng> = r.map(|i| replica_rng(cfg.seed, i as u64)).collect();
            let fields = sampler.sample_batch(&mut rngs);
            fields
                .iter()
                .zip(rngs.iter_mut())
                .map(|(field, rng)| {
                    let u = BridgeUniforms::draw(&spec, rng);
                    levels
                        .iter()
                        .map(|&h| {
                            let ls = MetricLevelSet::from_uniforms(field, h, &u);
                            let o = crossing_event(&ls, fr, n)?;
                            Ok((o.crosses, o.distance))
                        })
                        .collect()
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

/// Crossing frequency `V_{αN} ↔ ∂V_{γN}`, and for the chemical distance
/// experiment the conditional law of `D(V_{αN}, ∂V_{βN}) / (N (log N)^{1/4})`
/// given that crossing.
pub fn crossing(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EstimateRecord>> {
    let fr = CrossingFractions::new(cfg.alpha, cfg.beta, cfg.gamma)?;
    let with_distance = cfg.experiment == Experiment::ChemicalDistance2d;
    let mode = cfg.sampler_mode()?;
    let mut rb = RecordBuilder::new(cfg, opts);
    let mut out = Vec::new();
    for &n in &cfg.n {
        rb.restart();
        let levels = cfg.levels(n)?;
        let outcomes = crossing_outcomes(cfg, n, &levels, &fr)?;
        let (ra, rbeta, rg) = fr.radii(n)?;
        let total = cfg.samples as u64;
        for (li, &h) in levels.iter().enumerate() {
            let crosses = outcomes.iter().filter(|o| o[li].0).count() as u64;
            out.push(rb.record(
                n,
                h,
                Some(crosses as f64 / total as f64),
                Some(wilson_interval(crosses, total, Z95)),
                cfg.samples,
                json!({
                    "statistic": "crossing_probability",
                    "inner_radius": ra,
                    "outer_radius": rg,
                    "sampler": mode.name(),
                }),
            ));
            if !with_distance {
                continue;
            }
            let scale = n as f64 * (n as f64).ln().powf(0.25);
            let dists: Vec<usize> = outcomes.iter().filter(|o| o[li].0).filter_map(|o| o[li].1).collect();
            let ratios: Vec<f64> = dists.iter().map(|&d| d as f64 / scale).collect();
            let gap = rbeta - ra;
            let finite: Vec<usize> = outcomes.iter().filter_map(|o| o[li].1).collect();
            let mut meta = json!({
                "statistic": "conditional_ratio_q95",
                "distance_units": "hops",
                "normalization": "N (log N)^(1/4)",
                "conditioning": "V_alphaN connected to boundary of V_gammaN",
                "conditioned_samples": dists.len(),
                "geometric_minimum": gap,
                "geometric_minimum_ratio": gap as f64 / scale,
                "finite_samples": finite.len(),
                "finite_below_geometric_minimum": finite.iter().filter(|&&d| d < gap).count(),
                "note": FINITE_SIZE_NOTE,
            });
            let q95 = quantile(&ratios, 0.95);
            match q95 {
                Some(_) => {
                    meta["q05"] = json!(quantile(&ratios, 0.05));
                    meta["q50"] = json!(quantile(&ratios, 0.5));
                    meta["q95"] = json!(q95);
                    meta["min_distance"] = json!(dists.iter().min());
                    meta["max_distance"] = json!(dists.iter().max());
                    meta["below_geometric_minimum"] = json!(dists.iter().filter(|&&d| d < gap).count());
                }
                None => meta["flag"] = json!("no_conditioning_events"),
            }
            out.push(rb.record(n, h, q95, None, dists.len(), meta));
        }
    }
    Ok(out)
}

/// Chemical distance experiment on its own; needs `d = 2`.
pub fn chemical_distance_experiment(cfg: &ExperimentConfig) -> Result<Vec<EstimateRecord>> {
    if cfg.d != 2 {
        return Err(GffError::config("d", "chemical distance experiment needs d = 2"));
    }
    let mut cfg = cfg.clone();
    cfg.experiment = Experiment::ChemicalDistance2d;
    super::run(&cfg)
}
