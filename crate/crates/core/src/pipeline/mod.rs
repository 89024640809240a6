//! Training, prediction, evaluation, ablation and the random-tree benchmark.

mod ablation;
mod bench;
mod metrics;
pub mod report;
mod train;

pub use ablation::{ablate, AblationReport, AblationRow, AblationVariant};
pub use bench::{bench_random_trees, median, BenchReport, BenchRow};
pub use metrics::{argmax, one_vs_all_f1, ClassMetrics, EvalReport};
pub use train::{
    fit, mean_layout, mean_layout_root, mean_loss, preprocess, Normalization, sample_input, split_or_all, train, train_prepared, EpochRecord,
    Prepared, PreparedSplit, SampleFeatures, TextureFeatures, TrainConfig, TrainedModel,
};

use crate::data::DatasetManifest;
use crate::error::Result;
use crate::graph::TraversalSequence;
use crate::neural::Checkpoint;

/// Fused-head argmax against the dataset labels.
pub fn evaluate(model: &TrainedModel, dataset: &DatasetManifest) -> Result<EvalReport> {
    let probs: Vec<Vec<f64>> = model.predict(dataset)?.into_iter().map(|p| p.fused).collect();
    EvalReport::from_probabilities(&dataset.labels(), &probs, dataset.classes)
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(&self.model, self.sequence.tokens(), &self.preprocessing)
    }

    /// Restores a model; the training history is not stored and comes back empty.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            model: ck.to_model()?,
            preprocessing: ck.preprocessing.clone(),
            sequence: TraversalSequence::from_tokens(ck.sequence.clone())?,
            history: Vec::new(),
        })
    }
}
