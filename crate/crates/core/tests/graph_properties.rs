use std::collections::BTreeSet;

use aedbench_core::generator::{generate, GeneratorConfig};
use aedbench_core::graph::{build_graph, Action, InteractionEvent, TemporalGraph};
use aedbench_core::sampling::{bfs_sample, sample_instances, BfsDirection, SamplingError};
use aedbench_core::snapshot::{bin_events, bin_events_in_span, TimeSpan};
use proptest::prelude::*;

fn events_strategy(max_nodes: u64, max_ts: i64) -> impl Strategy<Value = Vec<InteractionEvent>> {
    prop::collection::vec(
        (0..max_nodes, 1..max_nodes, 0..max_ts, 0usize..3),
        1..200,
    )
    .prop_map(move |raw| {
        raw.into_iter()
            .map(|(s, off, ts, a)| {
                let t = (s + off) % max_nodes;
                InteractionEvent::new(s, t, ts, Action::ALL[a])
            })
            .collect()
    })
}

fn graph_strategy() -> impl Strategy<Value = TemporalGraph> {
    events_strategy(12, 40 * 900).prop_map(|e| build_graph(e, None).unwrap())
}

proptest! {
    #[test]
    fn binning_conserves_events(g in graph_strategy(), width in 1u64..3000) {
        let snap = bin_events(&g, width).unwrap();
        prop_assert_eq!(snap.total_count(), g.events().len() as u64);
        let (lo, hi) = g.time_range().unwrap();
        let first = lo.div_euclid(width as i64);
        prop_assert_eq!(snap.num_bins() as i64, hi.div_euclid(width as i64) - first + 1);
        for e in g.events() {
            let b = (e.timestamp.div_euclid(width as i64) - first) as usize;
            let (s, t) = (snap.index_of(e.source).unwrap() as u32, snap.index_of(e.target).unwrap() as u32);
            prop_assert!(snap.bin(b).count(s, t) >= 1);
        }
    }

    #[test]
    fn degree_equals_neighbor_set_size(g in graph_strategy()) {
        let snap = bin_events(&g, 900).unwrap();
        let ids = g.nodes();
        for v in 0..snap.node_count() {
            let series = snap.degree_series(v).unwrap();
            for t in 0..snap.num_bins() {
                let brute: BTreeSet<usize> = g
                    .events()
                    .iter()
                    .filter(|e| e.target == ids[v] && snap_bin(&g, e.timestamp) == t)
                    .map(|e| ids.binary_search(&e.source).unwrap())
                    .collect();
                let got = snap.neighbor_set(v, t).unwrap();
                prop_assert_eq!(&got, &brute.iter().copied().collect::<Vec<_>>());
                prop_assert_eq!(series.values[t] as usize, brute.len());
                prop_assert!((series.values[t] as usize) < snap.node_count());
            }
        }
    }

    #[test]
    fn halving_and_merging_bins_restores_counts(g in graph_strategy()) {
        // span starts on a coarse boundary so every coarse bin is exactly two fine bins
        let (lo, hi) = g.time_range().unwrap();
        let span = TimeSpan::new(lo.div_euclid(900) * 900, hi);
        let coarse = bin_events_in_span(&g, 900, Some(span)).unwrap();
        let fine = bin_events_in_span(&g, 450, Some(span)).unwrap();
        for t in 0..coarse.num_bins() {
            for e in coarse.bin(t).edges() {
                let merged: u32 = (2 * t..(2 * t + 2).min(fine.num_bins()))
                    .map(|f| fine.bin(f).count(e.source, e.target))
                    .sum();
                prop_assert_eq!(merged, e.count);
            }
            let total: u64 = (2 * t..(2 * t + 2).min(fine.num_bins())).map(|f| fine.bin(f).total_count()).sum();
            prop_assert_eq!(total, coarse.bin(t).total_count());
        }
    }

    #[test]
    fn events_are_sorted_and_members(events in events_strategy(30, 100_000)) {
        let g = build_graph(events.clone(), None).unwrap();
        prop_assert!(g.is_well_formed());
        prop_assert!(g.events().windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(g.events().len(), events.len());
    }

    #[test]
    fn bfs_returns_exact_size(seed in 0u64..1000, target in 1usize..40) {
        let g = generate(&GeneratorConfig { num_nodes: 40, duration: 20 * 900, rng_seed: seed, ..Default::default() }).unwrap();
        let start = g.nodes()[seed as usize % 40];
        match bfs_sample(&g, start, target, BfsDirection::Undirected) {
            Ok(sub) => {
                prop_assert_eq!(sub.node_count(), target);
                prop_assert!(sub.is_well_formed());
                prop_assert!(sub.events().iter().all(|e| sub.contains(e.source) && sub.contains(e.target)));
                // induced: every parent event between kept nodes survives
                let kept = g.events().iter().filter(|e| sub.contains(e.source) && sub.contains(e.target)).count();
                prop_assert_eq!(kept, sub.events().len());
            }
            Err(SamplingError::InsufficientComponent(reached)) => prop_assert!(reached < target),
            Err(e) => prop_assert!(false, "unexpected {e:?}"),
        }
    }
}

fn snap_bin(g: &TemporalGraph, ts: i64) -> usize {
    let lo = g.time_range().unwrap().0;
    (ts.div_euclid(900) - lo.div_euclid(900)) as usize
}

#[test]
fn desk_scale_sampling_sizes_and_determinism() {
    let g = generate(&GeneratorConfig {
        num_nodes: 1000,
        rng_seed: 5,
        ..Default::default()
    })
    .unwrap();
    let a = sample_instances(&g, 100, 500, 9, BfsDirection::Undirected).unwrap();
    assert_eq!(a.len(), 100);
    assert!(a.iter().all(|s| s.node_count() == 500));
    let b = sample_instances(&g, 100, 500, 9, BfsDirection::Undirected).unwrap();
    assert_eq!(a, b);
    let whole = sample_instances(&g, 1, 1000, 1, BfsDirection::Undirected);
    // the generator graph is connected at this density
    assert_eq!(whole.unwrap()[0].nodes(), g.nodes());
}

#[test]
fn bfs_is_repeatable() {
    let g = generate(&GeneratorConfig {
        num_nodes: 300,
        duration: 50 * 900,
        rng_seed: 12,
        ..Default::default()
    })
    .unwrap();
    let a = bfs_sample(&g, 17, 50, BfsDirection::Undirected).unwrap();
    let b = bfs_sample(&g, 17, 50, BfsDirection::Undirected).unwrap();
    assert_eq!(a, b);
}
