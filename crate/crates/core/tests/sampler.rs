use metric_gff::green::{green_dirichlet, LatticeConstants};
use metric_gff::rng::replica_rng;
use metric_gff::sampler::{
    edge_open_prob, edge_open_probabilities, sample_level_set, BridgeUniforms, Field, FieldSampler, MetricLevelSet,
    SamplerMode,
};
use metric_gff::{BoxSpec, GffError, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn samples(spec: &BoxSpec, mode: SamplerMode, n: usize, seed: u64) -> Vec<Field> {
    let sampler = FieldSampler::new(spec, mode).unwrap();
    let mut out = Vec::with_capacity(n);
    for start in (0..n).step_by(64) {
        let mut rngs: Vec<_> = (start..(start + 64).min(n)).map(|i| replica_rng(seed, i as u64)).collect();
        out.extend(sampler.sample_batch(&mut rngs));
    }
    out
}

fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var, v.len())
}

#[test]
fn dirichlet_fields_vanish_on_the_boundary() {
    let spec = BoxSpec::new(2, 4).unwrap();
    for f in samples(&spec, SamplerMode::Dirichlet, 10, 1) {
        for b in spec.internal_boundary() {
            assert_eq!(f.value(b), 0.0);
        }
    }
}

#[test]
fn origin_moments() {
    let spec = BoxSpec::new(2, 1).unwrap();
    let fs = samples(&spec, SamplerMode::Dirichlet, 10_000, 2);
    let (m, var, _) = mean_var(fs.iter().map(|f| f.value(spec.origin())));
    assert!(m.abs() < 3.0 / 100.0);
    assert!((var - 1.0).abs() < 0.05);

    let spec = BoxSpec::new(3, 4).unwrap();
    let s2 = LatticeConstants::new(3).unwrap().sigma2;
    let fs = samples(&spec, SamplerMode::InfiniteRestricted, 10_000, 3);
    let (m, var, _) = mean_var(fs.iter().map(|f| f.value(spec.origin())));
    assert!(m.abs() < 3.0 * s2.sqrt() / 100.0);
    assert!((var / s2 - 1.0).abs() < 0.05, "var {var}");
}

#[test]
fn pair_covariances_match_green() {
    let spec = BoxSpec::new(2, 3).unwrap();
    let g = green_dirichlet(&spec).unwrap();
    let n = 20_000;
    let fs = samples(&spec, SamplerMode::Dirichlet, n, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let interior: Vec<VertexId> = spec.ids().filter(|v| !spec.is_boundary(*v)).collect();
    for _ in 0..20 {
        let u = interior[rng.random_range(0..interior.len())];
        let v = interior[rng.random_range(0..interior.len())];
        let prods: Vec<f64> = fs.iter().map(|f| f.value(u) * f.value(v)).collect();
        let (m, var, _) = mean_var(prods.into_iter());
        let se = (var / n as f64).sqrt();
        assert!((m - g.get(u, v)).abs() < 4.0 * se, "{u:?} {v:?}: {m} vs {}", g.get(u, v));
    }
}

#[test]
fn proxy_sampler_uses_the_larger_box() {
    let spec = BoxSpec::new(2, 3).unwrap();
    let big = BoxSpec::new(2, 6).unwrap();
    let g = green_dirichlet(&big).unwrap().get(big.origin(), big.origin());
    let fs = samples(&spec, SamplerMode::DirichletProxy { kappa: 2.0 }, 10_000, 5);
    let (_, var, _) = mean_var(fs.iter().map(|f| f.value(spec.origin())));
    assert!((var / g - 1.0).abs() < 0.05);
    assert!(fs[0].spec == spec);
    assert!(matches!(
        FieldSampler::new(&spec, SamplerMode::DirichletProxy { kappa: 0.5 }),
        Err(GffError::Config { .. })
    ));
}

#[test]
fn capacity_limits() {
    let big = BoxSpec::new(3, 11).unwrap();
    assert!(matches!(FieldSampler::new(&big, SamplerMode::InfiniteRestricted), Err(GffError::Capacity(_))));
    let planar = BoxSpec::new(2, 3).unwrap();
    assert!(FieldSampler::new(&planar, SamplerMode::InfiniteRestricted).is_err());
}

#[test]
fn sampling_is_deterministic() {
    let spec = BoxSpec::new(2, 5).unwrap();
    let a = samples(&spec, SamplerMode::Dirichlet, 70, 6);
    let b = samples(&spec, SamplerMode::Dirichlet, 70, 6);
    assert_eq!(a, b);
    let la = sample_level_set(&a[3], 0.1, &mut replica_rng(1, 2));
    let lb = sample_level_set(&b[3], 0.1, &mut replica_rng(1, 2));
    assert_eq!(la, lb);
    let spec3 = BoxSpec::new(3, 2).unwrap();
    assert_eq!(
        samples(&spec3, SamplerMode::InfiniteRestricted, 64, 7),
        samples(&spec3, SamplerMode::InfiniteRestricted, 64, 7)
    );
}

#[test]
fn edge_probability_examples() {
    assert_eq!(edge_open_prob(0.0, 5.0, 0.0, 2), 0.0);
    let s = 3f64.sqrt();
    assert!((edge_open_prob(s + 0.2, s + 0.2, 0.2, 3) - (1.0 - (-1f64).exp())).abs() < 1e-12);
    assert!((edge_open_prob(s, s, 0.0, 3) - 0.632_120_558_8).abs() < 1e-10);
}

#[test]
fn extreme_levels() {
    let spec = BoxSpec::new(2, 6).unwrap();
    let f = &samples(&spec, SamplerMode::Dirichlet, 1, 8)[0];
    let min = f.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = max - min;
    let low = sample_level_set(f, min - 50.0 * spread, &mut replica_rng(8, 0));
    let edges = spec.edges().count();
    assert!(low.open_edge_count() as f64 >= 0.999 * edges as f64);
    let high = sample_level_set(f, max + 1.0, &mut replica_rng(8, 0));
    assert!(high.vertex.iter().all(|&v| !v));
    assert_eq!(high.open_edge_count(), 0);
}

#[test]
fn hand_set_grid_probabilities() {
    let spec = BoxSpec::new(2, 1).unwrap();
    let values = vec![0.5, 1.0, -0.2, 2.0, 1.5, 0.3, 0.0, 0.9, 1.2];
    let f = Field::new(spec, values.clone(), SamplerMode::Dirichlet).unwrap();
    let h = 0.25;
    let p = edge_open_probabilities(&f, h);
    let mut seen = 0;
    for (slot, u, v) in spec.edges() {
        let (a, b) = (values[u.0], values[v.0]);
        let expect = if a > h && b > h { 1.0 - (-(a - h) * (b - h) / 2.0).exp() } else { 0.0 };
        assert!((p[slot] - expect).abs() < 1e-15);
        seen += 1;
    }
    assert_eq!(seen, 12);
}

#[test]
fn edges_are_conditionally_independent() {
    // residuals 1_open − p are uncorrelated across disjoint edges
    let spec = BoxSpec::new(2, 4).unwrap();
    let fs = samples(&spec, SamplerMode::Dirichlet, 10_000, 10);
    let e1 = (spec.index_of(&[0, 0]).unwrap(), spec.index_of(&[1, 0]).unwrap());
    let e2 = (spec.index_of(&[0, 1]).unwrap(), spec.index_of(&[1, 1]).unwrap());
    let slot = |a: VertexId, b: VertexId| spec.incident_edges(a).find(|&(_, o)| o == b).unwrap().0;
    let (s1, s2) = (slot(e1.0, e1.1), slot(e2.0, e2.1));
    let h = -0.5;
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let u = BridgeUniforms::draw(&spec, &mut replica_rng(99, i as u64));
        let ls = MetricLevelSet::from_uniforms(f, h, &u);
        let p = edge_open_probabilities(f, h);
        if p[s1] > 0.0 && p[s2] > 0.0 {
            r1.push(f64::from(u8::from(ls.open[s1])) - p[s1]);
            r2.push(f64::from(u8::from(ls.open[s2])) - p[s2]);
        }
    }
    let n = r1.len() as f64;
    assert!(n > 1000.0);
    let (m1, v1, _) = mean_var(r1.iter().copied());
    let (m2, v2, _) = mean_var(r2.iter().copied());
    let cov = r1.iter().zip(&r2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / (n - 1.0);
    let rho = cov / (v1 * v2).sqrt();
    assert!(rho.abs() < 4.0 / n.sqrt(), "rho {rho}");
}

#[test]
fn bridge_oracle_matches_closed_form() {
    // Brownian bridge with variance rate 2d over unit time built as
    // a + t(b − a) + σ(W_t − t W_1); minimum monitored on a grid of step 1e-3
    // with the barrier shifted by 0.5826 σ √Δt.
    let (ga, gb, d) = (1.0, 2.0, 3usize);
    let sigma = (2.0 * d as f64).sqrt();
    let steps = 1000;
    let dt = 1.0 / steps as f64;
    let shift = 0.5826 * sigma * dt.sqrt();
    let paths = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut w = vec![0.0; steps + 1];
    let mut survive = 0u64;
    for _ in 0..paths {
        for i in 1..=steps {
            let z: f64 = rng.sample(StandardNormal);
            w[i] = w[i - 1] + dt.sqrt() * z;
        }
        let w1 = w[steps];
        let ok = (1..steps).all(|i| {
            let t = i as f64 * dt;
            ga + t * (gb - ga) + sigma * (w[i] - t * w1) > shift
        });
        survive += u64::from(ok);
    }
    let p = survive as f64 / paths as f64;
    let se = (p * (1.0 - p) / paths as f64).sqrt();
    let exact = edge_open_prob(ga, gb, 0.0, d);
    assert!((p - exact).abs() < 3.0 * se, "{p} vs {exact}");
}
