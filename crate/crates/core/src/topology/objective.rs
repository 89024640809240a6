use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SwarmConfig;
use crate::data::{stratified_partition, DatasetManifest};
use crate::error::{Error, Result};
use crate::graph::{edge_count, preorder_traverse, prim_mst, EdgeWeightVector, SpanningTree, TraversalSequence};
use crate::neural::LossTerms;
use crate::pipeline::{train_prepared, Prepared, TrainConfig};
use crate::seed;

/// Score of one candidate topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    /// Mean of the active heads' validation focal losses.
    pub j: f64,
    pub losses: LossTerms,
    pub tree: SpanningTree,
    pub sequence: TraversalSequence,
    /// Epoch whose validation loss was kept.
    pub epoch: usize,
}

/// Scores trees by training fresh models for a short budget and measuring
/// the validation objective. Results are memoized by edge set, and the
/// training seed is derived from the edge set, so a tree always gets the
/// same score no matter which weight vector produced it.
pub struct Evaluator {
    prepared: Prepared,
    train: TrainConfig,
    root: usize,
    cache: Mutex<BTreeMap<Vec<(usize, usize)>, ObjectiveReport>>,
}

impl Evaluator {
    /// Splits `dataset` 80/20 (stratified) into inner train and validation sets.
    pub fn new(dataset: &DatasetManifest, swarm: &SwarmConfig, train: &TrainConfig, root: Option<usize>) -> Result<Self> {
        swarm.validate()?;
        let counts = dataset.class_counts();
        if dataset.len() < 2 || counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::invalid("topology search needs at least two samples from two classes"));
        }
        let groups = stratified_partition(&dataset.labels(), &[0.8, 0.2], seed::stream(swarm.seed, "objective-split"))?;
        if groups[0].is_empty() || groups[1].is_empty() {
            return Err(Error::invalid("dataset too small for an 80/20 validation split"));
        }
        let cfg = TrainConfig {
            epochs: swarm.inner_epochs,
            patience: Some(swarm.inner_patience),
            ..train.clone()
        };
        let (tr, va) = (dataset.subset(&groups[0]), dataset.subset(&groups[1]));
        let prepared = Prepared::new(&tr, Some(&va), &cfg)?;
        let root = root.unwrap_or(prepared.default_root);
        if root >= dataset.n_landmarks {
            return Err(Error::invalid(format!("root {root} out of range")));
        }
        Ok(Self {
            prepared,
            train: cfg,
            root,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.prepared.n_landmarks
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn dim(&self) -> usize {
        edge_count(self.n())
    }

    /// Number of distinct trees scored so far.
    pub fn unique_evaluations(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn evaluate_tree(&self, tree: &SpanningTree) -> Result<ObjectiveReport> {
        let tree = tree.rerooted(self.root)?;
        let key = tree.edges().to_vec();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let sequence = preorder_traverse(&tree);
        let words = key.iter().flat_map(|&(a, b)| [a as u64, b as u64]);
        let cfg = TrainConfig {
            seed: seed::derive(self.train.seed, words),
            ..self.train.clone()
        };
        let trained = train_prepared(&self.prepared, &sequence, &cfg)?;
        let (epoch, losses) = trained
            .history
            .iter()
            .filter_map(|r| r.val.map(|v| (r.epoch, v)))
            .fold(None::<(usize, LossTerms)>, |best, (e, v)| match best {
                Some((_, b)) if b.objective() <= v.objective() => best,
                _ => Some((e, v)),
            })
            .ok_or_else(|| Error::invalid("no validation loss recorded"))?;
        let report = ObjectiveReport {
            j: losses.objective(),
            losses,
            tree,
            sequence,
            epoch,
        };
        self.cache.lock().expect("cache lock").insert(key, report.clone());
        Ok(report)
    }

    pub fn evaluate(&self, w: &EdgeWeightVector) -> Result<ObjectiveReport> {
        if w.n() != self.n() {
            return Err(Error::invalid(format!("weights for {} nodes, dataset has {}", w.n(), self.n())));
        }
        self.evaluate_tree(&prim_mst(self.n(), w, self.root)?)
    }

    /// Scores positions concurrently; results come back in input order.
    pub fn evaluate_batch(&self, positions: &[Vec<f64>]) -> Result<Vec<ObjectiveReport>> {
        positions
            .par_iter()
            .map(|p| self.evaluate(&EdgeWeightVector::new(self.n(), p.clone())?))
            .collect()
    }
}

/// One-off objective evaluation of a weight vector.
pub fn evaluate_objective(
    w: &EdgeWeightVector,
    dataset: &DatasetManifest,
    swarm: &SwarmConfig,
    train: &TrainConfig,
    root: Option<usize>,
) -> Result<ObjectiveReport> {
    Evaluator::new(dataset, swarm, train, root)?.evaluate(w)
}

pub fn random_weights(n: usize, rng: &mut impl Rng) -> EdgeWeightVector {
    let values = (0..edge_count(n)).map(|_| rng.random::<f64>()).collect();
    EdgeWeightVector::new(n, values).expect("finite weights of the right length")
}

/// Tree drawn uniformly from all `n^(n-2)` labeled trees, via a random
/// Prüfer sequence.
pub fn random_tree(n: usize, root: usize, seed_value: u64) -> Result<SpanningTree> {
    if n < 3 {
        let edges: Vec<(usize, usize)> = if n == 2 { vec![(0, 1)] } else { Vec::new() };
        return SpanningTree::from_edges(n, &edges, root);
    }
    let mut rng = seed::rng(seed::stream(seed_value, "random-tree"));
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &v in &code {
        degree[v] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &v in &code {
        let Reverse(leaf) = leaves.pop().expect("a Prüfer sequence always leaves a leaf");
        edges.push((leaf, v));
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.push(Reverse(v));
        }
    }
    let Reverse(a) = leaves.pop().expect("two nodes remain");
    let Reverse(b) = leaves.pop().expect("two nodes remain");
    edges.push((a, b));
    SpanningTree::from_edges(n, &edges, root)
}
