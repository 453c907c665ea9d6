use std::collections::BTreeMap;

use aedbench_core::detectors::{
    build_native, DetectContext, Detector, DetectorError, DetectorKind, DetectorSpec, PredictionSeries, TrainLabels,
    Verdict,
};
use aedbench_core::evaluation::{benchmark, BenchDetector, BenchParams, Instance};
use aedbench_core::generator::{generate, GeneratorConfig, RandomBursts};
use aedbench_core::labeler::{LabelMatrix, RuleParams};
use aedbench_core::sampling::{sample_instances, BfsDirection};
use aedbench_core::sensitivity::{
    density_additions, drift_selects, perturb_concept_drift, perturb_spatial_density, run_sensitivity, LabelMode,
    PopulationSource, SensitivityInputs, SensitivitySpec, SensitivityTest,
};
use aedbench_core::snapshot::{bin_events_in_span, SnapshotSequence, TimeSpan};

fn generated(seed: u64, nodes: usize, bins: u64) -> SnapshotSequence {
    let g = generate(&GeneratorConfig {
        num_nodes: nodes,
        duration: bins * 900,
        base_rate: 1.5,
        random_bursts: Some(RandomBursts { count: 6, duration: None, intensity: 20.0 }),
        rng_seed: seed,
        ..GeneratorConfig::default()
    })
    .unwrap();
    bin_events_in_span(&g, 900, Some(TimeSpan::new(0, bins as i64 * 900 - 1))).unwrap()
}

#[test]
fn zero_drift_is_the_identity() {
    let snap = generated(1, 50, 40);
    assert_eq!(perturb_concept_drift(&snap, 0.0, 9).content_hash(), snap.content_hash());
    let all = perturb_concept_drift(&snap, 1.0, 9);
    assert_eq!(all.total_count(), 0);
    assert_eq!(all.num_bins(), snap.num_bins());
}

#[test]
fn drift_removal_fraction_is_binomial() {
    let p = 0.01;
    let snap = generated(2, 400, 200);
    let seed = 77;
    let out = perturb_concept_drift(&snap, p, seed);
    let mut pairs = 0usize;
    let mut removed = 0usize;
    for t in 0..snap.num_bins() {
        let mut incident = std::collections::BTreeSet::new();
        for e in snap.bin(t).edges() {
            incident.insert(e.source as usize);
            incident.insert(e.target as usize);
        }
        for &v in &incident {
            pairs += 1;
            let selected = drift_selects(seed, p, v, t);
            removed += usize::from(selected);
            let left = out.bin(t).outgoing(v as u32).len() + out.bin(t).incoming(v as u32).len();
            if selected {
                assert_eq!(left, 0, "selected pair ({v}, {t}) kept edges");
            }
        }
        // surviving edges touch no selected node
        for e in out.bin(t).edges() {
            assert!(!drift_selects(seed, p, e.source as usize, t) && !drift_selects(seed, p, e.target as usize, t));
            assert_eq!(e.count, snap.bin(t).count(e.source, e.target));
        }
    }
    let m = pairs as f64;
    let frac = removed as f64 / m;
    let sigma = (p * (1.0 - p) / m).sqrt();
    assert!(pairs > 10_000);
    assert!((frac - p).abs() <= 3.0 * sigma, "fraction {frac} over {pairs} pairs, 3σ {}", 3.0 * sigma);
}

#[test]
fn density_additions_are_exact_per_bin() {
    let snap = generated(3, 60, 120);
    let e0 = snap.bin(0).edges().len();
    assert!(e0 > 0);
    for i in 1..=10u32 {
        let out = perturb_spatial_density(&snap, i, 5).unwrap();
        let mut total = 0;
        for t in 0..snap.num_bins() {
            let added = out.bin(t).total_count() - snap.bin(t).total_count();
            assert_eq!(added, (e0 * t * i as usize / 100_000) as u64, "i {i} t {t}");
            assert_eq!(added, density_additions(e0, t, i));
            total += added;
        }
        let expected: u64 = (0..snap.num_bins()).map(|t| (e0 * t * i as usize / 100_000) as u64).sum();
        assert_eq!(total, expected);
        assert!(out.bins().iter().all(|b| b.edges().iter().all(|e| e.source != e.target)));
    }
    assert_eq!(density_additions(1000, 10, 10), 1);
    assert_eq!(density_additions(12345, 0, 10), 0);
}

#[test]
fn perturbations_are_pure_and_seeded() {
    let snap = generated(4, 40, 60);
    let before = snap.content_hash();
    let a = perturb_concept_drift(&snap, 0.05, 1);
    let b = perturb_concept_drift(&snap, 0.05, 1);
    let c = perturb_spatial_density(&snap, 10, 1).unwrap();
    let d = perturb_spatial_density(&snap, 10, 1).unwrap();
    assert_eq!(snap.content_hash(), before);
    assert_eq!(a.content_hash(), b.content_hash());
    assert_eq!(c.content_hash(), d.content_hash());
    assert_ne!(perturb_concept_drift(&snap, 0.05, 2).content_hash(), a.content_hash());
}

/// Replays the true labels of the instance it is shown, whatever the lag.
struct LabelReplay {
    truth: BTreeMap<u64, LabelMatrix>,
}

impl Detector for LabelReplay {
    fn name(&self) -> &str {
        "replay"
    }

    fn windowed(&self) -> bool {
        false
    }

    fn predict(
        &self,
        snap: &SnapshotSequence,
        _train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError> {
        let labels = &self.truth[&snap.content_hash()];
        let mut p = PredictionSeries::new(snap.node_count(), ctx.targets.clone(), ctx.lag);
        p.fill(|v, t| if labels.label(v, t) == Some(true) { Verdict::Anomalous } else { Verdict::Normal });
        Ok(p)
    }
}

fn population(z: usize, seeds: std::ops::Range<u64>) -> Vec<Instance> {
    seeds
        .enumerate()
        .map(|(i, s)| Instance::label(i, generated(s, 40, 60), &RuleParams::with_z(z)).unwrap())
        .collect()
}

fn replay_for(instances: &[Instance]) -> BenchDetector {
    let truth = instances.iter().map(|i| (i.snap.content_hash(), i.labels.clone())).collect();
    BenchDetector { detector: Box::new(LabelReplay { truth }), window: 1 }
}

#[test]
fn label_replay_is_lag_invariant() {
    let z = 3;
    let instances = population(z, 10..14);
    let detectors = [replay_for(&instances)];
    let params = BenchParams { z, ..BenchParams::default() };
    let baseline = benchmark(&instances, &detectors, &params);
    assert_eq!(baseline.detectors[0].mean, 1.0);
    let inputs = SensitivityInputs {
        instances: &instances,
        detectors: &detectors,
        baseline: &baseline,
        params,
        rules: RuleParams::with_z(z),
        labels: LabelMode::Recomputed,
        population: None,
    };
    let report = run_sensitivity(&inputs, &[SensitivitySpec::new(SensitivityTest::Lag)]).unwrap();
    let lag = report.result("replay", SensitivityTest::Lag).unwrap();
    assert_eq!(lag.points.len(), z);
    assert!(lag.points.iter().all(|p| p.f1 == Some(1.0)));
    assert_eq!(lag.delta_f1, Some(0.0));
}

#[test]
fn single_lag_point_has_zero_delta() {
    let instances = population(1, 20..23);
    let detectors = [BenchDetector { detector: build_native(&DetectorSpec::new(DetectorKind::RollingZscore)).unwrap(), window: 1 }];
    let params = BenchParams { z: 1, ..BenchParams::default() };
    let baseline = benchmark(&instances, &detectors, &params);
    let inputs = SensitivityInputs {
        instances: &instances,
        detectors: &detectors,
        baseline: &baseline,
        params,
        rules: RuleParams::with_z(1),
        labels: LabelMode::Recomputed,
        population: None,
    };
    let report = run_sensitivity(&inputs, &[SensitivitySpec::new(SensitivityTest::Lag)]).unwrap();
    let r = &report.results[0];
    assert_eq!(r.points.len(), 1);
    assert_eq!(r.delta_f1, Some(0.0));
}

#[test]
fn two_detectors_four_tests_give_eight_entries() {
    let z = 2;
    let g = generate(&GeneratorConfig {
        num_nodes: 120,
        duration: 60 * 900,
        random_bursts: Some(RandomBursts { count: 10, duration: None, intensity: 20.0 }),
        rng_seed: 31,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let span = TimeSpan::new(0, 60 * 900 - 1);
    let instances: Vec<Instance> = sample_instances(&g, 3, 40, 8, BfsDirection::Undirected)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, s)| Instance::label(i, bin_events_in_span(s, 900, Some(span)).unwrap(), &RuleParams::with_z(z)).unwrap())
        .collect();
    let detectors: Vec<BenchDetector> = [DetectorKind::Random, DetectorKind::SpectralCausal]
        .iter()
        .map(|&k| BenchDetector { detector: build_native(&DetectorSpec::new(k)).unwrap(), window: 1 })
        .collect();
    let params = BenchParams { z, ..BenchParams::default() };
    let baseline = benchmark(&instances, &detectors, &params);
    let inputs = SensitivityInputs {
        instances: &instances,
        detectors: &detectors,
        baseline: &baseline,
        params,
        rules: RuleParams::with_z(z),
        labels: LabelMode::Recomputed,
        population: Some(PopulationSource {
            graph: &g,
            instances: 3,
            direction: BfsDirection::Undirected,
            bin_width: 900,
            span: Some(span),
        }),
    };
    let mut specs = SensitivitySpec::suite(5);
    for s in &mut specs {
        s.points = match s.test {
            SensitivityTest::Size => Some(vec![30.0, 40.0]),
            SensitivityTest::Drift => Some(vec![0.0, 0.01]),
            SensitivityTest::Density => Some(vec![1.0, 10.0]),
            SensitivityTest::Lag => None,
        };
    }
    let report = run_sensitivity(&inputs, &specs).unwrap();
    assert_eq!(report.results.len(), 8);
    assert!(report.results.iter().all(|r| r.delta_f1.is_some()));
    assert!(report.deltas_consistent());
    for t in SensitivityTest::ALL {
        for d in ["random", "spectral_causal"] {
            assert!(report.result(d, t).is_some());
        }
    }
    // drift at p = 0 reproduces the unperturbed scores
    for d in &baseline.detectors {
        let drift = report.result(&d.detector, SensitivityTest::Drift).unwrap();
        assert!((drift.points[0].f1.unwrap() - d.mean).abs() < 1e-12);
    }
    assert_eq!(report, run_sensitivity(&inputs, &specs).unwrap());
}
