use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{pso_step, Evaluator, ObjectiveReport, Swarm, SwarmConfig};
use crate::data::DatasetManifest;
use crate::error::{Error, Result};
use crate::graph::{EdgeWeightVector, SpanningTree};
use crate::pipeline::TrainConfig;
use crate::seed;

/// Iterations whose best tree is exported as a DOT snapshot.
pub const SNAPSHOT_ITERATIONS: [usize; 4] = [1, 10, 30, 40];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub best_j: f64,
    pub l_fused: f64,
    pub l_structure: Option<f64>,
    pub l_texture: Option<f64>,
    pub root: usize,
    pub edges: Vec<(usize, usize)>,
    /// Distinct trees scored so far.
    pub evaluations: usize,
}

impl HistoryRecord {
    pub fn tree(&self, n: usize) -> Result<SpanningTree> {
        SpanningTree::from_edges(n, &self.edges, self.root)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologyHistory {
    pub records: Vec<HistoryRecord>,
}

impl TopologyHistory {
    pub fn is_nonincreasing(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best_j <= w[0].best_j)
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::to_string(r).expect("history records serialize");
            writeln!(out, "{line}").expect("writing to a String");
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { records })
    }
}

#[derive(Debug, Clone)]
pub struct TopologyResult {
    pub best_weights: EdgeWeightVector,
    pub best: ObjectiveReport,
    pub history: TopologyHistory,
}

/// Global-best PSO over edge weights. Iteration 1 scores the random initial
/// swarm; each further iteration is one [`pso_step`].
pub fn optimize_with(evaluator: &Evaluator, cfg: &SwarmConfig, mut progress: impl FnMut(&HistoryRecord)) -> Result<TopologyResult> {
    cfg.validate()?;
    let mut rng = seed::rng(seed::stream(cfg.seed, "swarm"));
    let mut objective = |ps: &[Vec<f64>]| -> Result<Vec<f64>> {
        Ok(evaluator.evaluate_batch(ps)?.into_iter().map(|r| r.j).collect())
    };
    let mut swarm = Swarm::initialize(evaluator.dim(), cfg, &mut rng, &mut objective)?;
    let mut history = TopologyHistory::default();
    for iteration in 1..=cfg.iterations {
        if iteration > 1 {
            pso_step(&mut swarm, cfg, &mut rng, &mut objective)?;
        }
        let best = evaluator.evaluate(&EdgeWeightVector::new(evaluator.n(), swarm.best_position.clone())?)?;
        let record = HistoryRecord {
            iteration,
            best_j: best.j,
            l_fused: best.losses.fused,
            l_structure: best.losses.structure,
            l_texture: best.losses.texture,
            root: best.tree.root(),
            edges: best.tree.edges().to_vec(),
            evaluations: evaluator.unique_evaluations(),
        };
        progress(&record);
        history.records.push(record);
    }
    let best_weights = EdgeWeightVector::new(evaluator.n(), swarm.best_position)?;
    let best = evaluator.evaluate(&best_weights)?;
    Ok(TopologyResult {
        best_weights,
        best,
        history,
    })
}

pub fn optimize_topology(
    dataset: &DatasetManifest,
    swarm: &SwarmConfig,
    train: &TrainConfig,
    root: Option<usize>,
) -> Result<TopologyResult> {
    let evaluator = Evaluator::new(dataset, swarm, train, root)?;
    optimize_with(&evaluator, swarm, |_| {})
}
