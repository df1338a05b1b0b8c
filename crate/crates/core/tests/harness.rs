use metric_gff::harness::stats::{ks_test, mean_se, quantile};
use metric_gff::harness::{
    self, chemical_distance_experiment, fit_power_law, read_csv, wilson_interval, write_csv, EstimateRecord,
    ExperimentConfig, FitPoint, RunOptions,
};
use metric_gff::GffError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const QUIET: RunOptions = RunOptions { wall_time: false };

fn cfg(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn config_field(json: &str) -> String {
    let err = ExperimentConfig::from_json(json).and_then(|c| harness::run_with(&c, QUIET).map(|_| ()));
    match err {
        Err(GffError::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn wilson_interval_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (p, n, trials) = (0.3, 200u64, 1000);
    let mut covered = 0;
    for _ in 0..trials {
        let k = (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
        let (lo, hi) = wilson_interval(k, n, 1.959_964);
        covered += usize::from(lo <= p && p <= hi);
    }
    let rate = covered as f64 / trials as f64;
    assert!((0.92..=0.98).contains(&rate), "coverage {rate}");
    assert_eq!(wilson_interval(0, 10, 1.96).0, 0.0);
    assert_eq!(wilson_interval(10, 10, 1.96).1, 1.0);
}

#[test]
fn power_law_fits() {
    let exact: Vec<FitPoint> =
        [4.0, 8.0, 16.0, 32.0].iter().map(|&n: &f64| FitPoint { n, p: n.powf(-0.5), se: 0.0 }).collect();
    let f = fit_power_law(&exact).unwrap();
    assert!((f.exponent + 0.5).abs() < 1e-12);
    assert!((f.amplitude - 1.0).abs() < 1e-12);

    let pts: Vec<FitPoint> = [2.0, 3.0, 5.0, 7.0].iter().map(|&n: &f64| FitPoint { n, p: 3.0 / n, se: 0.01 }).collect();
    let f = fit_power_law(&pts).unwrap();
    assert!((f.exponent + 1.0).abs() < 1e-10 && (f.amplitude - 3.0).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy: Vec<FitPoint> = [4.0, 6.0, 8.0, 10.0, 12.0]
        .iter()
        .map(|&n: &f64| {
            let p = 0.5 * n.powf(-0.5);
            let se = 0.02 * p;
            let z: f64 = rng.sample(StandardNormal);
            FitPoint { n, p: p + se * z, se }
        })
        .collect();
    assert!((fit_power_law(&noisy).unwrap().exponent + 0.5).abs() < 0.08);

    let mut with_zero = exact.clone();
    with_zero.push(FitPoint { n: 64.0, p: 0.0, se: 0.0 });
    let f = fit_power_law(&with_zero).unwrap();
    assert_eq!(f.points, 4);
    assert!(matches!(fit_power_law(&exact[..2]), Err(GffError::Fit(_))));

    let mut shuffled = noisy.clone();
    shuffled.shuffle(&mut rng);
    let (a, b) = (fit_power_law(&noisy).unwrap(), fit_power_law(&shuffled).unwrap());
    assert!((a.exponent - b.exponent).abs() <= 1e-12);
}

#[test]
fn summary_statistics() {
    let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m.mean, 2.5);
    assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), Some(2.0));
    assert_eq!(quantile(&[0.0, 10.0], 0.95), Some(9.5));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    assert!(ks_test(&xs, |x| x.clamp(0.0, 1.0)).p_value > 0.01);
    assert!(ks_test(&xs, |x| (x * x).clamp(0.0, 1.0)).p_value < 1e-6);
}

#[test]
fn crossing_probability_is_proper() {
    let c = cfg(r#"{"experiment":"crossing_2d","d":2,"N":[32],"samples":500,"seed":3}"#);
    let r = harness::run_with(&c, QUIET).unwrap();
    assert_eq!(r.len(), 1);
    let p = r[0].estimate.unwrap();
    assert!(p > 0.0 && p < 1.0);
    assert!(r[0].stderr_lo.unwrap() < p && p < r[0].stderr_hi.unwrap());
}

#[test]
fn critical_connection_decays() {
    let c = cfg(r#"{"experiment":"critical_exponent_3d","d":3,"N":[2,3,4],"samples":2000,"seed":11}"#);
    let r = harness::run_with(&c, QUIET).unwrap();
    let p: Vec<f64> = r.iter().map(|x| x.estimate.unwrap()).collect();
    assert_eq!(p.len(), 3);
    assert!(p[0] > p[1] && p[1] > p[2], "{p:?}");
    // a pinned boundary at the critical level cannot be reached
    let pinned =
        cfg(r#"{"experiment":"critical_exponent_3d","d":3,"N":[3],"samples":200,"seed":11,"sampler":"dirichlet"}"#);
    assert_eq!(harness::run_with(&pinned, QUIET).unwrap()[0].estimate, Some(0.0));
}

#[test]
fn output_is_independent_of_worker_count() {
    let text =
        r#"{"experiment":"chemical_distance_2d","d":2,"N":[16,20],"h":[-0.2,0.1],"samples":130,"seed":8,"workers":1}"#;
    let one = cfg(text);
    let mut two = one.clone();
    two.workers = Some(2);
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_csv(&harness::run_with(&one, QUIET).unwrap(), &mut a).unwrap();
    write_csv(&harness::run_with(&two, QUIET).unwrap(), &mut b).unwrap();
    assert_eq!(a, b);

    let m = cfg(r#"{"experiment":"martingale_check","d":2,"N":[12],"samples":40,"seed":2,"k_max":3,"workers":1}"#);
    let mut m2 = m.clone();
    m2.workers = Some(3);
    assert_eq!(harness::run_with(&m, QUIET).unwrap(), harness::run_with(&m2, QUIET).unwrap());
}

#[test]
fn config_errors_name_the_field() {
    assert_eq!(config_field(r#"{"experiment":"crossing_2d","d":2,"N":[32],"samples":0}"#), "samples");
    assert_eq!(config_field(r#"{"experiment":"crossing_2d","d":2,"N":[32,0],"samples":5}"#), "N[1]");
    assert_eq!(config_field(r#"{"experiment":"crossing_2d","d":2,"N":[32],"samples":5,"alpha":0.6}"#), "alpha");
    assert_eq!(config_field(r#"{"experiment":"crossing_2d","d":3,"N":[32],"samples":5}"#), "d");
    assert_eq!(config_field(r#"{"experiment":"supercritical_3d","d":3,"N":[4],"h":[-0.6],"samples":5}"#), "h[0]");
    assert_eq!(config_field(r#"{"experiment":"critical_exponent_3d","d":3,"N":[4],"samples":5,"kappa":2}"#), "kappa");
    assert_eq!(
        config_field(r#"{"experiment":"critical_exponent_3d","d":3,"N":[4],"samples":5,"workers":0}"#),
        "workers"
    );
    assert!(config_field(
        r#"{"experiment":"critical_window_3d","d":3,"N":[4],"samples":5,"schedule":[{"kind":"inv_sqrt","c":1e999}]}"#
    )
    .starts_with("line 1"));
    let f = config_field(r#"{"experiment":"crossing_2d","d":2,"N":[32],"samples":5,"bogus":1}"#);
    assert!(f.starts_with("line 1"));
    assert!(config_field(r#"{"experiment":"teleport","d":2,"samples":5}"#).starts_with("line 1"));
}

#[test]
fn oversized_dense_sampler_is_a_capacity_error() {
    let c = cfg(r#"{"experiment":"critical_exponent_3d","d":3,"N":[11],"samples":5}"#);
    assert!(matches!(harness::run_with(&c, QUIET), Err(GffError::Capacity(_))));
}

#[test]
fn chemical_distance_at_very_low_level() {
    let c = cfg(r#"{"experiment":"chemical_distance_2d","d":2,"N":[32],"h":[-1000],"samples":20,"seed":1}"#);
    let r = chemical_distance_experiment(&c).unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r[0].estimate, Some(1.0));
    let expect = 8.0 / (32.0 * 32f64.ln().powf(0.25));
    assert!((r[1].estimate.unwrap() - expect).abs() < 1e-12);
    assert_eq!(r[1].meta_f64("min_distance"), Some(8.0));
    assert_eq!(r[1].meta_f64("below_geometric_minimum"), Some(0.0));
}

#[test]
fn distances_respect_the_geometric_minimum() {
    let c = cfg(r#"{"experiment":"chemical_distance_2d","d":2,"N":[24],"h":[0],"samples":200,"seed":4}"#);
    let r = chemical_distance_experiment(&c).unwrap();
    let chem = &r[1];
    if chem.samples > 0 {
        assert!(chem.meta_f64("min_distance").unwrap() >= 6.0);
        assert_eq!(chem.meta_f64("below_geometric_minimum"), Some(0.0));
    }
    assert!(chemical_distance_experiment(&cfg(r#"{"experiment":"crossing_2d","d":3,"N":[24],"samples":2}"#)).is_err());
}

#[test]
fn csv_roundtrip() {
    let c = cfg(r#"{"experiment":"hitting_check","d":2,"samples":500,"seed":6}"#);
    let recs = harness::run(&c).unwrap();
    assert_eq!(recs.len(), 18);
    assert!(recs.iter().all(|r| r.wall_s.is_some()));
    let mut buf = Vec::new();
    write_csv(&recs, &mut buf).unwrap();
    let back: Vec<EstimateRecord> = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, recs);
    let mut empty = Vec::new();
    write_csv(&[], &mut empty).unwrap();
    assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
}

#[test]
fn green_and_sigma_records() {
    let c = cfg(r#"{"experiment":"green_asymptotics","d":2,"N":[4,8],"samples":1}"#);
    let r = harness::run_with(&c, QUIET).unwrap();
    assert_eq!(r.len(), 2);
    assert!(r[1].estimate.unwrap() > r[0].estimate.unwrap());
    assert!(r[0].meta_f64("log_law_leading_term").is_some());
}
