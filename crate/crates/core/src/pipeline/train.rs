use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetManifest, Split};
use crate::embedding::{
    encode_all, gather_rows, landmark_coords, patches_for_landmarks, EncoderKind, FeatureNormalizer, Patch,
    PatchConfig, PatchEncoder, Preprocessing, TinyConv,
};
use crate::error::{Error, Result};
use crate::graph::{medoid_root, LandmarkSet, TraversalSequence};
use crate::neural::{
    AdamConfig, AdamState, FocalLossConfig, FusionMode, LossTerms, ModelConfig, Parameters, Prediction,
    SampleInput, StreamSelection, TextureInput, TwoStreamModel,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub focal: FocalLossConfig,
    pub seed: u64,
    /// LSTM hidden width `d_h`.
    pub hidden: usize,
    /// Fusion encoder width `d_f`.
    pub fusion_dim: usize,
    pub patch: PatchConfig,
    pub encoder: EncoderKind,
    pub streams: StreamSelection,
    pub fusion: FusionMode,
    pub structure_norm: Normalization,
    pub texture_norm: Normalization,
    /// Stop after this many epochs without a validation improvement and
    /// restore the best parameters. Ignored without a validation set.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig::default(),
            focal: FocalLossConfig::default(),
            seed: 7,
            hidden: 32,
            fusion_dim: 32,
            patch: PatchConfig::default(),
            encoder: EncoderKind::default(),
            streams: StreamSelection::default(),
            fusion: FusionMode::Gated,
            structure_norm: Normalization::Pooled,
            texture_norm: Normalization::Pooled,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 || self.fusion_dim == 0 {
            return Err(Error::invalid("epochs, batch_size, hidden and fusion_dim must be positive"));
        }
        if self.patience == Some(0) {
            return Err(Error::invalid("patience must be positive"));
        }
        match self.encoder {
            EncoderKind::RandomProjection { dim: 0, .. } | EncoderKind::TinyConv { filters: 0, .. } => {
                return Err(Error::invalid("encoder width must be positive"))
            }
            _ => {}
        }
        self.adam.validate()?;
        self.focal.validate()?;
        self.patch.validate()?;
        self.model_config(2).validate()
    }

    pub fn texture_dim(&self) -> usize {
        match self.encoder {
            EncoderKind::Flatten => self.patch.size * self.patch.size,
            EncoderKind::RandomProjection { dim, .. } => dim,
            EncoderKind::TinyConv { filters, .. } => filters,
        }
    }

    pub fn model_config(&self, classes: usize) -> ModelConfig {
        ModelConfig {
            classes,
            hidden: self.hidden,
            fusion_dim: self.fusion_dim,
            structure_dim: 2,
            texture_dim: self.texture_dim(),
            streams: self.streams,
            fusion: self.fusion,
            focal: self.focal,
        }
    }
}

/// How input features are standardized before entering a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// One mean and scale per feature, shared by all landmarks.
    #[default]
    Pooled,
    /// Separate statistics per landmark. Removes the layout, so tokens
    /// become indistinguishable apart from their order.
    PerLandmark,
}

impl Normalization {
    fn fit<'a>(&self, samples: impl IntoIterator<Item = &'a Array2<f64>>) -> Result<FeatureNormalizer> {
        match self {
            Normalization::Pooled => FeatureNormalizer::fit_pooled(samples),
            Normalization::PerLandmark => FeatureNormalizer::fit(samples),
        }
    }
}

/// Per-landmark texture features of one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum TextureFeatures {
    /// `n x d` output of a fixed encoder.
    Encoded(Array2<f64>),
    /// Raw patches for a trainable encoder.
    Patches(Vec<Patch>),
}

/// Per-landmark features of one sample, independent of any traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFeatures {
    /// `n x 2`
    pub structure: Array2<f64>,
    pub texture: Option<TextureFeatures>,
}

fn raw_features(manifest: &DatasetManifest, cfg: &TrainConfig, encoder: &PatchEncoder) -> Result<Vec<SampleFeatures>> {
    let texture = cfg.streams.texture;
    if texture && !manifest.has_images() {
        return Err(Error::invalid("texture stream enabled but samples have no images"));
    }
    manifest
        .samples
        .par_iter()
        .map(|s| {
            let structure = landmark_coords(&s.landmarks);
            let texture = if texture {
                let image = s.image.as_ref().expect("checked above");
                let patches = patches_for_landmarks(image, manifest.image_points(s), &cfg.patch)?;
                Some(match encoder {
                    PatchEncoder::TinyConv(_) => TextureFeatures::Patches(patches),
                    fixed => TextureFeatures::Encoded(encode_all(&patches, fixed)?),
                })
            } else {
                None
            };
            Ok(SampleFeatures { structure, texture })
        })
        .collect()
}

fn normalize(features: &mut [SampleFeatures], prep: &Preprocessing) -> Result<()> {
    for f in features {
        f.structure = prep.structure.apply(&f.structure)?;
        if let (Some(TextureFeatures::Encoded(m)), Some(norm)) = (&mut f.texture, &prep.texture) {
            *m = norm.apply(m)?;
        }
    }
    Ok(())
}

/// Features of `manifest` under an already fitted preprocessing.
pub fn preprocess(manifest: &DatasetManifest, prep: &Preprocessing, cfg: &TrainConfig) -> Result<Vec<SampleFeatures>> {
    let encoder = prep.encoder.build(prep.patch.size);
    let mut features = raw_features(manifest, cfg, &encoder)?;
    normalize(&mut features, prep)?;
    Ok(features)
}

/// Normalized features with labels.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub features: Vec<SampleFeatures>,
    pub labels: Vec<usize>,
}

impl PreparedSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Stream inputs for a frozen traversal, one per sample.
    pub fn inputs(&self, seq: &TraversalSequence) -> Result<Vec<(SampleInput, usize)>> {
        self.features
            .iter()
            .zip(&self.labels)
            .map(|(f, &label)| Ok((sample_input(f, seq)?, label)))
            .collect()
    }
}

pub fn sample_input(f: &SampleFeatures, seq: &TraversalSequence) -> Result<SampleInput> {
    let texture = match &f.texture {
        None => None,
        Some(TextureFeatures::Encoded(m)) => Some(TextureInput::Encoded(gather_rows(m, seq)?)),
        Some(TextureFeatures::Patches(p)) => Some(TextureInput::Patches {
            patches: p.clone(),
            tokens: seq.tokens().to_vec(),
        }),
    };
    Ok(SampleInput {
        structure: Some(gather_rows(&f.structure, seq)?),
        texture,
    })
}

/// Training data with normalizers fitted on the training split only.
/// Reused across candidate topologies since nothing here depends on the tree.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub classes: usize,
    pub n_landmarks: usize,
    pub preprocessing: Preprocessing,
    pub train: PreparedSplit,
    pub val: Option<PreparedSplit>,
    /// Medoid of the mean training layout.
    pub default_root: usize,
}

impl Prepared {
    pub fn new(train: &DatasetManifest, val: Option<&DatasetManifest>, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::invalid("empty training set"));
        }
        if let Some(v) = val {
            if v.n_landmarks != train.n_landmarks || v.classes != train.classes {
                return Err(Error::invalid("validation set differs in landmarks or classes"));
            }
        }
        let encoder = cfg.encoder.build(cfg.patch.size);
        let mut train_f = raw_features(train, cfg, &encoder)?;
        let structure = cfg.structure_norm.fit(train_f.iter().map(|f| &f.structure))?;
        let texture = match train_f.first().and_then(|f| f.texture.as_ref()) {
            Some(TextureFeatures::Encoded(_)) => Some(cfg.texture_norm.fit(train_f.iter().map(|f| match &f.texture {
                Some(TextureFeatures::Encoded(m)) => m,
                _ => unreachable!("all samples share one encoder"),
            }))?),
            _ => None,
        };
        let preprocessing = Preprocessing {
            patch: cfg.patch,
            encoder: cfg.encoder,
            structure,
            texture,
        };
        normalize(&mut train_f, &preprocessing)?;
        let val = match val {
            Some(v) if !v.is_empty() => Some(PreparedSplit {
                features: preprocess(v, &preprocessing, cfg)?,
                labels: v.labels(),
            }),
            _ => None,
        };
        Ok(Self {
            classes: train.classes,
            n_landmarks: train.n_landmarks,
            preprocessing,
            train: PreparedSplit {
                features: train_f,
                labels: train.labels(),
            },
            val,
            default_root: mean_layout_root(train)?,
        })
    }
}

/// Per-landmark mean position over a dataset.
pub fn mean_layout(manifest: &DatasetManifest) -> Result<LandmarkSet> {
    let mut mean = vec![(0.0, 0.0); manifest.n_landmarks];
    let m = manifest.len().max(1) as f64;
    for s in &manifest.samples {
        for (acc, (x, y)) in mean.iter_mut().zip(s.landmarks.coords()) {
            acc.0 += x / m;
            acc.1 += y / m;
        }
    }
    LandmarkSet::from_coords(&mean)
}

/// Medoid of the mean layout.
pub fn mean_layout_root(manifest: &DatasetManifest) -> Result<usize> {
    medoid_root(&mean_layout(manifest)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's batches, measured before each update.
    pub train: LossTerms,
    pub val: Option<LossTerms>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: TwoStreamModel,
    pub preprocessing: Preprocessing,
    pub sequence: TraversalSequence,
    pub history: Vec<EpochRecord>,
}

/// Mean loss terms over a set, evaluated in parallel and reduced in order.
pub fn mean_loss(model: &TwoStreamModel, data: &[(SampleInput, usize)]) -> Result<LossTerms> {
    if data.is_empty() {
        return Err(Error::invalid("cannot average a loss over zero samples"));
    }
    let terms: Vec<LossTerms> = data
        .par_iter()
        .map(|(input, label)| model.loss(input, *label))
        .collect::<Result<_>>()?;
    Ok(LossTerms::mean(&terms))
}

/// Minibatch ADAM over `train`. Batches are reshuffled each epoch from a
/// seed derived from `cfg.seed`.
pub fn fit(
    model: &mut TwoStreamModel,
    train: &[(SampleInput, usize)],
    val: Option<&[(SampleInput, usize)]>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let val = val.filter(|v| !v.is_empty());
    let mut params = model.to_flat();
    let mut adam = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0;
    let shuffle_seed = seed::stream(cfg.seed, "shuffle");
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::derive(shuffle_seed, [epoch as u64])));
        let mut batch_terms = Vec::new();
        let mut weights = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&SampleInput, usize)> = chunk.iter().map(|&i| (&train[i].0, train[i].1)).collect();
            let (terms, grads) = model.batch_loss_and_grad(&batch)?;
            adam.step(&mut params, &grads, &cfg.adam)?;
            model.set_flat(&params);
            batch_terms.push(terms);
            weights.push(chunk.len());
        }
        let train_terms = weighted_mean(&batch_terms, &weights);
        let val_terms = val.map(|v| mean_loss(model, v)).transpose()?;
        history.push(EpochRecord {
            epoch,
            train: train_terms,
            val: val_terms,
        });
        if let (Some(patience), Some(v)) = (cfg.patience, val_terms) {
            let j = v.objective();
            if best.as_ref().is_none_or(|(b, _)| j < *b) {
                best = Some((j, params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    if let Some((_, p)) = best {
        model.set_flat(&p);
    }
    Ok(history)
}

fn weighted_mean(terms: &[LossTerms], weights: &[usize]) -> LossTerms {
    let expanded: Vec<LossTerms> = terms
        .iter()
        .zip(weights)
        .flat_map(|(t, &w)| std::iter::repeat_n(*t, w))
        .collect();
    LossTerms::mean(&expanded)
}

/// Trains a fresh model on an already prepared split for one frozen sequence.
pub fn train_prepared(prepared: &Prepared, seq: &TraversalSequence, cfg: &TrainConfig) -> Result<TrainedModel> {
    check_sequence(seq, prepared.n_landmarks)?;
    let train = prepared.train.inputs(seq)?;
    let val = prepared.val.as_ref().map(|v| v.inputs(seq)).transpose()?;
    let encoder = match cfg.encoder {
        EncoderKind::TinyConv { filters, seed } if cfg.streams.texture => {
            Some(TinyConv::new(cfg.patch.size, filters, seed))
        }
        _ => None,
    };
    let mut model = TwoStreamModel::new(
        cfg.model_config(prepared.classes),
        encoder,
        seed::stream(cfg.seed, "model"),
    )?;
    let history = fit(&mut model, &train, val.as_deref(), cfg)?;
    Ok(TrainedModel {
        model,
        preprocessing: prepared.preprocessing.clone(),
        sequence: seq.clone(),
        history,
    })
}

/// Fits normalizers on `train`, then trains jointly on all heads.
pub fn train(
    train: &DatasetManifest,
    val: Option<&DatasetManifest>,
    seq: &TraversalSequence,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let prepared = Prepared::new(train, val, cfg)?;
    train_prepared(&prepared, seq, cfg)
}

fn check_sequence(seq: &TraversalSequence, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &t in seq.tokens() {
        if t >= n {
            return Err(Error::invalid(format!("token {t} out of range for {n} landmarks")));
        }
        seen[t] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::invalid("sequence does not visit every landmark"));
    }
    Ok(())
}

impl TrainedModel {
    /// The config that reproduces this model's architecture and preprocessing.
    fn feature_config(&self) -> TrainConfig {
        TrainConfig {
            patch: self.preprocessing.patch,
            encoder: self.preprocessing.encoder,
            streams: self.model.config.streams,
            ..TrainConfig::default()
        }
    }

    /// Fused and per-stream probabilities for every sample.
    pub fn predict(&self, manifest: &DatasetManifest) -> Result<Vec<Prediction>> {
        let n = self.preprocessing.structure.mean.nrows();
        if manifest.n_landmarks != n {
            return Err(Error::invalid(format!(
                "model expects {n} landmarks, dataset has {}",
                manifest.n_landmarks
            )));
        }
        let features = preprocess(manifest, &self.preprocessing, &self.feature_config())?;
        features
            .par_iter()
            .map(|f| self.model.predict(&sample_input(f, &self.sequence)?))
            .collect()
    }

    pub fn train_curve(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.train.objective()).collect()
    }
}

/// Samples of the given split, or all samples when no sample carries a tag.
pub fn split_or_all(manifest: &DatasetManifest, split: Split) -> DatasetManifest {
    if manifest.splits.iter().all(Option::is_none) {
        manifest.clone()
    } else {
        manifest.subset_of(split)
    }
}
