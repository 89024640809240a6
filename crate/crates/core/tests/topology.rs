mod common;

use std::collections::BTreeMap;

use common::{experiment_train_config, planted_weights, weights_forcing};
use facetopo::data::{synth_generate, DatasetManifest, SynthConfig};
use facetopo::embedding::EncoderKind;
use facetopo::graph::{prim_mst, EdgeWeightVector};
use facetopo::pipeline::{median, TrainConfig};
use facetopo::seed;
use facetopo::topology::{optimize_topology, optimize_with, random_tree, Evaluator, SwarmConfig, TopologyHistory};

fn tiny_data() -> DatasetManifest {
    synth_generate(&SynthConfig {
        landmarks: 6,
        samples_per_class: 10,
        image_size: 24,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn tiny_train() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        hidden: 6,
        fusion_dim: 6,
        encoder: EncoderKind::RandomProjection { dim: 6, seed: 17 },
        ..TrainConfig::default()
    }
}

fn tiny_swarm(iterations: usize) -> SwarmConfig {
    SwarmConfig { swarm_size: 4, iterations, inner_epochs: 2, ..SwarmConfig::default() }
}

#[test]
fn random_trees_are_uniform_over_labeled_trees() {
    let draws = 8000;
    let mut counts: BTreeMap<Vec<(usize, usize)>, usize> = BTreeMap::new();
    for s in 0..draws {
        *counts.entry(random_tree(4, 0, s).unwrap().edges().to_vec()).or_default() += 1;
    }
    assert_eq!(counts.len(), 16);
    let expected = draws as f64 / 16.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 15 degrees of freedom; the 99.9% quantile is about 37.7.
    assert!(chi2 < 37.7, "chi-square {chi2}");
}

#[test]
fn weights_with_the_same_tree_score_identically() {
    let data = tiny_data();
    let ev = Evaluator::new(&data, &tiny_swarm(1), &tiny_train(), None).unwrap();
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)];
    let mut rng = seed::rng(3);
    let a = ev.evaluate(&weights_forcing(6, &edges, &mut rng)).unwrap();
    let b = ev.evaluate(&weights_forcing(6, &edges, &mut rng)).unwrap();
    assert_eq!(a.tree.edges(), &edges);
    assert_eq!(a.j.to_bits(), b.j.to_bits());
    assert_eq!(ev.unique_evaluations(), 1);

    let fresh = Evaluator::new(&data, &tiny_swarm(1), &tiny_train(), None).unwrap();
    let c = fresh.evaluate(&weights_forcing(6, &edges, &mut rng)).unwrap();
    assert_eq!(a.j.to_bits(), c.j.to_bits());
}

#[test]
fn objective_is_a_finite_nonnegative_mean_of_head_losses() {
    let data = tiny_data();
    let ev = Evaluator::new(&data, &tiny_swarm(1), &tiny_train(), Some(2)).unwrap();
    for s in 0..4 {
        let r = ev.evaluate_tree(&random_tree(6, 0, s).unwrap()).unwrap();
        assert!(r.j.is_finite() && r.j >= 0.0);
        assert!((r.j - r.losses.objective()).abs() < 1e-15);
        assert_eq!(r.sequence.root(), 2);
    }
}

#[test]
fn degenerate_datasets_are_rejected() {
    let data = tiny_data();
    let one_class: Vec<usize> = (0..data.len()).filter(|&i| data.samples[i].label == 0).collect();
    assert!(Evaluator::new(&data.subset(&one_class), &tiny_swarm(1), &tiny_train(), None).is_err());
    assert!(Evaluator::new(&data.subset(&[0]), &tiny_swarm(1), &tiny_train(), None).is_err());
}

#[test]
fn one_iteration_gives_one_record() {
    let r = optimize_topology(&tiny_data(), &tiny_swarm(1), &tiny_train(), None).unwrap();
    assert_eq!(r.history.records.len(), 1);
    assert_eq!(r.history.records[0].iteration, 1);
}

#[test]
fn search_is_deterministic_and_monotone() {
    let data = tiny_data();
    let a = optimize_topology(&data, &tiny_swarm(4), &tiny_train(), None).unwrap();
    let b = optimize_topology(&data, &tiny_swarm(4), &tiny_train(), None).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.best_weights, b.best_weights);
    assert!(a.history.is_nonincreasing());
    assert_eq!(a.history.records.len(), 4);
    assert_eq!(a.best.j, a.history.records.last().unwrap().best_j);
    let text = a.history.to_jsonl();
    assert_eq!(TopologyHistory::from_jsonl(&text).unwrap(), a.history);
}

#[test]
fn progress_sees_every_record() {
    let data = tiny_data();
    let ev = Evaluator::new(&data, &tiny_swarm(3), &tiny_train(), None).unwrap();
    let mut seen = Vec::new();
    let r = optimize_with(&ev, &tiny_swarm(3), |rec| seen.push(rec.clone())).unwrap();
    assert_eq!(seen, r.history.records);
}

#[test]
fn best_tree_is_the_mst_of_the_best_weights() {
    let data = tiny_data();
    let r = optimize_topology(&data, &tiny_swarm(3), &tiny_train(), None).unwrap();
    let mst = prim_mst(6, &r.best_weights, r.best.tree.root()).unwrap();
    assert_eq!(mst.edges(), r.best.tree.edges());
}

#[test]
fn weight_length_mismatch_is_rejected() {
    let ev = Evaluator::new(&tiny_data(), &tiny_swarm(1), &tiny_train(), None).unwrap();
    assert!(ev.evaluate(&EdgeWeightVector::new(5, vec![0.5; 10]).unwrap()).is_err());
}

/// On planted data, a tree joining every signal pair scores below the
/// median of 20 uniform random trees.
#[test]
fn planted_tree_beats_median_random_tree() {
    let synth = SynthConfig::default();
    let data = synth_generate(&synth).unwrap();
    let ev = Evaluator::new(&data, &SwarmConfig::default(), &experiment_train_config(), None).unwrap();
    let n = synth.landmarks;
    let planted = ev
        .evaluate(&planted_weights(n, &synth.pairs(), &mut seed::rng(5)))
        .unwrap();
    for &(a, b) in &synth.pairs() {
        assert!(planted.tree.contains_edge(a, b));
    }
    let random: Vec<f64> = (0..20)
        .map(|s| ev.evaluate_tree(&random_tree(n, ev.root(), 100 + s).unwrap()).unwrap().j)
        .collect();
    let m = median(&random);
    println!("planted J {:.5}, random median {m:.5}", planted.j);
    assert!(planted.j < m, "planted J {} vs random median {m}", planted.j);
}
