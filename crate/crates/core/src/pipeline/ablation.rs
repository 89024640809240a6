use serde::{Deserialize, Serialize};

use super::{evaluate, train_prepared, Prepared, TrainConfig};
use crate::data::DatasetManifest;
use crate::error::Result;
use crate::graph::{preorder_traverse, TraversalSequence};
use crate::neural::{FusionMode, StreamSelection};
use crate::topology::random_tree;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationVariant {
    /// Random tree instead of the learned one.
    NoTreeTopology,
    NoStructureStream,
    NoTextureStream,
    /// Plain concatenation instead of gated fusion.
    NoFusion,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::NoTreeTopology,
        AblationVariant::NoStructureStream,
        AblationVariant::NoTextureStream,
        AblationVariant::NoFusion,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AblationVariant::NoTreeTopology => "no-tree-topology",
            AblationVariant::NoStructureStream => "no-structure-stream",
            AblationVariant::NoTextureStream => "no-texture-stream",
            AblationVariant::NoFusion => "no-fusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub rr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub full_rr: f64,
    pub rows: Vec<AblationRow>,
    /// Edges of the random tree used by the topology ablation.
    pub random_edges: Vec<(usize, usize)>,
}

impl AblationReport {
    /// Full RR minus the row's RR.
    pub fn drop(&self, row: &AblationRow) -> f64 {
        self.full_rr - row.rr
    }
}

/// Trains the full model and four ablated variants with the same seed and
/// budget, and reports test RR for each. The stream and fusion ablations
/// reuse `learned`; only the topology ablation swaps in a random tree.
pub fn ablate(
    train: &DatasetManifest,
    val: Option<&DatasetManifest>,
    test: &DatasetManifest,
    learned: &TraversalSequence,
    cfg: &TrainConfig,
) -> Result<AblationReport> {
    let full_streams = StreamSelection { structure: true, texture: true };
    let full_cfg = TrainConfig { streams: full_streams, ..cfg.clone() };
    let prepared = Prepared::new(train, val, &full_cfg)?;
    let run = |seq: &TraversalSequence, c: &TrainConfig| -> Result<f64> {
        let model = train_prepared(&prepared, seq, c)?;
        Ok(evaluate(&model, test)?.recognition_rate)
    };
    let full_rr = run(learned, &full_cfg)?;
    let tree = random_tree(train.n_landmarks, learned.root(), seed::stream(cfg.seed, "ablation"))?;
    let random_seq = preorder_traverse(&tree);
    let mut rows = Vec::with_capacity(4);
    for variant in AblationVariant::ALL {
        let rr = match variant {
            AblationVariant::NoTreeTopology => run(&random_seq, &full_cfg)?,
            AblationVariant::NoStructureStream | AblationVariant::NoTextureStream => {
                let streams = StreamSelection {
                    structure: variant == AblationVariant::NoTextureStream,
                    texture: variant == AblationVariant::NoStructureStream,
                };
                run(learned, &TrainConfig { streams, fusion: FusionMode::Concat, ..full_cfg.clone() })?
            }
            AblationVariant::NoFusion => run(learned, &TrainConfig { fusion: FusionMode::Concat, ..full_cfg.clone() })?,
        };
        rows.push(AblationRow { variant, rr });
    }
    Ok(AblationReport {
        full_rr,
        rows,
        random_edges: tree.edges().to_vec(),
    })
}
