use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, train_prepared, Prepared, TrainConfig};
use crate::data::DatasetManifest;
use crate::error::{Error, Result};
use crate::graph::preorder_traverse;
use crate::seed;
use crate::topology::{random_tree, Evaluator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub index: usize,
    /// Test RR after full training, percent.
    pub rr: f64,
    /// Validation objective under the topology-search protocol.
    pub j: f64,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

impl BenchReport {
    fn rrs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rr).collect()
    }

    pub fn min_rr(&self) -> f64 {
        self.rrs().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rr(&self) -> f64 {
        self.rrs().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn median_rr(&self) -> f64 {
        median(&self.rrs())
    }

    pub fn spread(&self) -> f64 {
        self.max_rr() - self.min_rr()
    }

    pub fn median_j(&self) -> f64 {
        median(&self.rows.iter().map(|r| r.j).collect::<Vec<_>>())
    }
}

/// Trains one model per random tree with identical budgets. Each tree is
/// also scored by `evaluator`, so its `j` is comparable with search results.
pub fn bench_random_trees(
    train: &DatasetManifest,
    test: &DatasetManifest,
    cfg: &TrainConfig,
    evaluator: &Evaluator,
    k: usize,
    seed_value: u64,
) -> Result<BenchReport> {
    if k == 0 {
        return Err(Error::invalid("benchmark needs at least one tree"));
    }
    let prepared = Prepared::new(train, None, cfg)?;
    let rows = (0..k)
        .into_par_iter()
        .map(|index| {
            let tree = random_tree(train.n_landmarks, evaluator.root(), seed::derive(seed_value, [index as u64]))?;
            let seq = preorder_traverse(&tree);
            let j = evaluator.evaluate_tree(&tree)?.j;
            let model = train_prepared(&prepared, &seq, cfg)?;
            let rr = evaluate(&model, test)?.recognition_rate;
            Ok(BenchRow {
                index,
                rr,
                j,
                edges: tree.edges().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport { rows })
}
