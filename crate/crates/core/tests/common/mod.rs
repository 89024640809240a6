//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use facetopo::graph::{edge_index, EdgeWeightVector, SpanningTree};
use rand::Rng;

/// Decodes a Prüfer sequence over `0..n` into a sorted edge list.
pub fn prufer_decode(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    assert_eq!(seq.len() + 2, n);
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).expect("a leaf always exists");
        edges.push((leaf.min(v), leaf.max(v)));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort_unstable();
    edges
}

/// Every labeled tree on `n >= 2` nodes, via all `n^(n-2)` Prüfer sequences.
pub fn all_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n == 2 {
        return vec![vec![(0, 1)]];
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    (0..total)
        .map(|mut code| {
            let seq: Vec<usize> = (0..len)
                .map(|_| {
                    let d = code % n;
                    code /= n;
                    d
                })
                .collect();
            prufer_decode(&seq, n)
        })
        .collect()
}

pub fn tree_weight(edges: &[(usize, usize)], w: &EdgeWeightVector) -> f64 {
    edges.iter().map(|&(a, b)| w.weight(a, b).unwrap()).sum()
}

/// Exhaustive minimum spanning tree.
pub fn brute_force_mst(w: &EdgeWeightVector, trees: &[Vec<(usize, usize)>]) -> Vec<(usize, usize)> {
    trees
        .iter()
        .min_by(|a, b| tree_weight(a, w).total_cmp(&tree_weight(b, w)))
        .expect("at least one tree")
        .clone()
}

/// Weights drawn uniformly and made pairwise distinct.
pub fn distinct_weights(n: usize, rng: &mut impl Rng) -> EdgeWeightVector {
    let m = n * (n - 1) / 2;
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|p| p[0] < p[1]) {
            return EdgeWeightVector::new(n, v).unwrap();
        }
    }
}

/// Uniform random labeled tree from a random Prüfer sequence.
pub fn random_prufer_tree(n: usize, root: usize, rng: &mut impl Rng) -> SpanningTree {
    let edges = if n == 1 {
        Vec::new()
    } else if n == 2 {
        vec![(0, 1)]
    } else {
        let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
        prufer_decode(&seq, n)
    };
    SpanningTree::from_edges(n, &edges, root).unwrap()
}

/// Checks an Euler tour against its tree without using the library's traversal.
pub fn check_tour(tree: &SpanningTree, tokens: &[usize]) -> Result<(), String> {
    let n = tree.n();
    if tokens.len() != 2 * n - 1 {
        return Err(format!("length {} != {}", tokens.len(), 2 * n - 1));
    }
    if tokens[0] != tree.root() || tokens[tokens.len() - 1] != tree.root() {
        return Err("tour must start and end at the root".into());
    }
    for w in tokens.windows(2) {
        if !tree.contains_edge(w[0], w[1]) {
            return Err(format!("{} and {} are not adjacent", w[0], w[1]));
        }
    }
    let mut seen = vec![false; n];
    tokens.iter().for_each(|&t| seen[t] = true);
    if seen.iter().any(|s| !s) {
        return Err("not every node is visited".into());
    }
    Ok(())
}

/// Weight vector that makes `edges` the unique MST: those edges get small
/// weights, everything else large ones.
pub fn weights_forcing(n: usize, edges: &[(usize, usize)], rng: &mut impl Rng) -> EdgeWeightVector {
    let mut v: Vec<f64> = (0..n * (n - 1) / 2).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
    for &(a, b) in edges {
        v[edge_index(a, b, n).unwrap()] = 0.4 * rng.random::<f64>();
    }
    EdgeWeightVector::new(n, v).unwrap()
}

/// Compact model used by the desk-scale experiments.
pub fn experiment_train_config() -> facetopo::pipeline::TrainConfig {
    facetopo::pipeline::TrainConfig {
        epochs: 50,
        batch_size: 8,
        hidden: 16,
        fusion_dim: 16,
        encoder: facetopo::embedding::EncoderKind::RandomProjection { dim: 16, seed: 17 },
        ..Default::default()
    }
}

/// Weights that make every signal pair an MST edge; other edges random.
pub fn planted_weights(n: usize, pairs: &[(usize, usize)], rng: &mut impl Rng) -> EdgeWeightVector {
    let mut v: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random::<f64>()).collect();
    for &(a, b) in pairs {
        v[edge_index(a, b, n).unwrap()] = 0.0;
    }
    EdgeWeightVector::new(n, v).unwrap()
}
