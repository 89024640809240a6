//! The two-stream classifier: structure and texture attention-LSTM streams,
//! each with its own auxiliary head, joined by a fusion head.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    attention_backward, attention_forward, focal_loss, lstm_backward, lstm_forward, loss::softmax,
    AttentionOutput, AttentionParams, Dense, FocalLossConfig, FusionForward, FusionMode, FusionParams, Init,
    LstmCache, LstmParams, Parameters, ParamVisitor, ParamVisitorMut,
};
use crate::embedding::{Patch, TinyConv, TinyConvCache};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSelection {
    pub structure: bool,
    pub texture: bool,
}

impl Default for StreamSelection {
    fn default() -> Self {
        Self {
            structure: true,
            texture: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub classes: usize,
    pub hidden: usize,
    pub fusion_dim: usize,
    pub structure_dim: usize,
    pub texture_dim: usize,
    pub streams: StreamSelection,
    pub fusion: FusionMode,
    pub focal: FocalLossConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        if self.hidden == 0 || self.fusion_dim == 0 || self.structure_dim == 0 || self.texture_dim == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !self.streams.structure && !self.streams.texture {
            return Err(Error::invalid("at least one stream must be enabled"));
        }
        if self.fusion == FusionMode::Gated && !(self.streams.structure && self.streams.texture) {
            return Err(Error::invalid("gated fusion needs both streams"));
        }
        self.focal.validate()
    }

    fn head_count(&self) -> usize {
        1 + usize::from(self.streams.structure) + usize::from(self.streams.texture)
    }
}

/// One stream: LSTM, attention and an auxiliary classifier on the attention summary.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamModel {
    pub lstm: LstmParams,
    pub attention: AttentionParams,
    pub head: Dense,
}

struct StreamTrace {
    hidden: Array2<f64>,
    lstm: LstmCache,
    attention: AttentionOutput,
    probs: Vec<f64>,
}

impl StreamModel {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, init: &mut Init) -> Self {
        Self {
            lstm: LstmParams::new(input_dim, hidden, init),
            attention: AttentionParams::new(hidden, init),
            head: Dense::new(hidden, classes, init),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            lstm: self.lstm.zeros_like(),
            attention: self.attention.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    fn forward(&self, inputs: Array2<f64>) -> Result<StreamTrace> {
        let (hidden, lstm) = lstm_forward(&self.lstm, &inputs)?;
        let attention = attention_forward(&hidden, &self.attention)?;
        let probs = softmax(self.head.forward(attention.context.view()).as_slice().unwrap());
        Ok(StreamTrace {
            hidden,
            lstm,
            attention,
            probs,
        })
    }

    /// `d_context` is the gradient reaching the attention summary from outside
    /// the stream (the fusion block); `d_logits` is the auxiliary head's.
    fn backward(
        &self,
        trace: &StreamTrace,
        mut d_context: Array1<f64>,
        d_logits: &[f64],
        grads: &mut StreamModel,
    ) -> Array2<f64> {
        let d_logits = Array1::from(d_logits.to_vec());
        d_context += &self
            .head
            .backward(trace.attention.context.view(), d_logits.view(), &mut grads.head);
        let d_hidden = attention_backward(
            &self.attention,
            &trace.hidden,
            &trace.attention,
            &d_context,
            &mut grads.attention,
        );
        lstm_backward(&self.lstm, &trace.lstm, &d_hidden, &mut grads.lstm)
    }
}

impl Parameters for StreamModel {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>) {
        self.lstm.visit(&format!("{prefix}.lstm"), f);
        self.attention.visit(&format!("{prefix}.attention"), f);
        self.head.visit(&format!("{prefix}.head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>) {
        self.lstm.visit_mut(&format!("{prefix}.lstm"), f);
        self.attention.visit_mut(&format!("{prefix}.attention"), f);
        self.head.visit_mut(&format!("{prefix}.head"), f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fusion {
    Gated(FusionParams),
    /// Head over the concatenated stream summaries (texture first).
    Concat(Dense),
}

/// Texture stream input for one sample.
#[derive(Debug, Clone)]
pub enum TextureInput {
    /// Pre-encoded rows in token order, `T x d`.
    Encoded(Array2<f64>),
    /// Raw per-landmark patches, encoded by the model's trainable encoder and
    /// gathered by `tokens`.
    Patches { patches: Vec<Patch>, tokens: Vec<usize> },
}

#[derive(Debug, Clone, Default)]
pub struct SampleInput {
    /// `T x structure_dim`
    pub structure: Option<Array2<f64>>,
    pub texture: Option<TextureInput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub fused: Vec<f64>,
    pub structure: Option<Vec<f64>>,
    pub texture: Option<Vec<f64>>,
}

/// Per-head focal losses for one sample or averaged over a set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub fused: f64,
    pub structure: Option<f64>,
    pub texture: Option<f64>,
}

impl LossTerms {
    /// Mean over the active heads.
    pub fn objective(&self) -> f64 {
        let mut total = self.fused;
        let mut count = 1.0;
        for v in [self.structure, self.texture].into_iter().flatten() {
            total += v;
            count += 1.0;
        }
        total / count
    }

    pub fn mean(terms: &[LossTerms]) -> LossTerms {
        let m = terms.len() as f64;
        let avg = |f: &dyn Fn(&LossTerms) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = terms.iter().map(f).collect();
            vals.map(|v| v.iter().sum::<f64>() / m)
        };
        LossTerms {
            fused: terms.iter().map(|t| t.fused).sum::<f64>() / m,
            structure: avg(&|t| t.structure),
            texture: avg(&|t| t.texture),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamModel {
    pub config: ModelConfig,
    pub structure: Option<StreamModel>,
    pub texture: Option<StreamModel>,
    pub fusion: Fusion,
    /// Present when the texture stream trains its own patch encoder.
    pub encoder: Option<TinyConv>,
}

struct ForwardTrace {
    structure: Option<StreamTrace>,
    texture: Option<StreamTrace>,
    fusion: FusionTrace,
}

enum FusionTrace {
    Gated(FusionForward),
    Concat { input: Array1<f64>, probs: Vec<f64> },
}

impl FusionTrace {
    fn probs(&self) -> &[f64] {
        match self {
            FusionTrace::Gated(f) => &f.probs,
            FusionTrace::Concat { probs, .. } => probs,
        }
    }
}

impl TwoStreamModel {
    /// Fresh model with seeded initialization. `encoder` is the trainable
    /// patch encoder, if the texture stream uses one; its output width must
    /// equal `config.texture_dim`.
    pub fn new(config: ModelConfig, encoder: Option<TinyConv>, seed: u64) -> Result<Self> {
        config.validate()?;
        if let Some(enc) = &encoder {
            if enc.filters() != config.texture_dim {
                return Err(Error::invalid("encoder width differs from texture_dim"));
            }
        }
        let mut init = Init::new(seed);
        let (h, c) = (config.hidden, config.classes);
        let structure = config
            .streams
            .structure
            .then(|| StreamModel::new(config.structure_dim, h, c, &mut init));
        let texture = config
            .streams
            .texture
            .then(|| StreamModel::new(config.texture_dim, h, c, &mut init));
        let fusion = match config.fusion {
            FusionMode::Gated => Fusion::Gated(FusionParams::new(h, config.fusion_dim, c, &mut init)),
            FusionMode::Concat => {
                let width = h * (usize::from(config.streams.structure) + usize::from(config.streams.texture));
                Fusion::Concat(Dense::new(width, c, &mut init))
            }
        };
        let encoder = if config.streams.texture { encoder } else { None };
        Ok(Self {
            config,
            structure,
            texture,
            fusion,
            encoder,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            structure: self.structure.as_ref().map(StreamModel::zeros_like),
            texture: self.texture.as_ref().map(StreamModel::zeros_like),
            fusion: match &self.fusion {
                Fusion::Gated(p) => Fusion::Gated(p.zeros_like()),
                Fusion::Concat(d) => Fusion::Concat(d.zeros_like()),
            },
            encoder: self.encoder.as_ref().map(TinyConv::zeros_like),
        }
    }

    /// Sets the fused head's weights and bias to zero.
    pub fn zero_fused_head(&mut self) {
        let head = match &mut self.fusion {
            Fusion::Gated(p) => &mut p.head,
            Fusion::Concat(d) => d,
        };
        head.w.fill(0.0);
        head.b.fill(0.0);
    }

    fn texture_rows(&self, input: &TextureInput) -> Result<(Array2<f64>, Option<Vec<TinyConvCache>>)> {
        match (input, &self.encoder) {
            (TextureInput::Encoded(rows), None) => Ok((rows.clone(), None)),
            (TextureInput::Patches { patches, tokens }, Some(enc)) => {
                let mut per_landmark = Array2::zeros((patches.len(), enc.filters()));
                let mut caches = Vec::with_capacity(patches.len());
                for (mut row, patch) in per_landmark.rows_mut().into_iter().zip(patches) {
                    let (code, cache) = enc.forward(patch);
                    row.assign(&code);
                    caches.push(cache);
                }
                if let Some(t) = tokens.iter().find(|&&t| t >= patches.len()) {
                    return Err(Error::invalid(format!("token {t} has no patch")));
                }
                Ok((per_landmark.select(Axis(0), tokens), Some(caches)))
            }
            (TextureInput::Encoded(_), Some(_)) => {
                Err(Error::invalid("model has a trainable encoder; pass raw patches"))
            }
            (TextureInput::Patches { .. }, None) => {
                Err(Error::invalid("model has no patch encoder; pass encoded rows"))
            }
        }
    }

    fn trace(&self, input: &SampleInput) -> Result<(ForwardTrace, Option<Vec<TinyConvCache>>)> {
        let structure = match &self.structure {
            Some(stream) => {
                let rows = input
                    .structure
                    .as_ref()
                    .ok_or_else(|| Error::invalid("sample lacks structure input"))?;
                Some(stream.forward(rows.clone())?)
            }
            None => None,
        };
        let (texture, conv_caches) = match &self.texture {
            Some(stream) => {
                let tex = input
                    .texture
                    .as_ref()
                    .ok_or_else(|| Error::invalid("sample lacks texture input"))?;
                let (rows, caches) = self.texture_rows(tex)?;
                (Some(stream.forward(rows)?), caches)
            }
            None => (None, None),
        };
        let fusion = match &self.fusion {
            Fusion::Gated(params) => {
                let (t, s) = (texture.as_ref().unwrap(), structure.as_ref().unwrap());
                FusionTrace::Gated(params.forward(t.attention.context.view(), s.attention.context.view())?)
            }
            Fusion::Concat(head) => {
                let parts: Vec<_> = [&texture, &structure]
                    .into_iter()
                    .flatten()
                    .map(|t| t.attention.context.view())
                    .collect();
                let input = concatenate(Axis(0), &parts).unwrap();
                let probs = softmax(head.forward(input.view()).as_slice().unwrap());
                FusionTrace::Concat { input, probs }
            }
        };
        Ok((
            ForwardTrace {
                structure,
                texture,
                fusion,
            },
            conv_caches,
        ))
    }

    pub fn predict(&self, input: &SampleInput) -> Result<Prediction> {
        let (trace, _) = self.trace(input)?;
        Ok(Prediction {
            fused: trace.fusion.probs().to_vec(),
            structure: trace.structure.map(|t| t.probs),
            texture: trace.texture.map(|t| t.probs),
        })
    }

    /// Focal losses of every active head for one labeled sample.
    pub fn loss(&self, input: &SampleInput, label: usize) -> Result<LossTerms> {
        let p = self.predict(input)?;
        let focal = &self.config.focal;
        Ok(LossTerms {
            fused: focal_loss(&p.fused, label, focal)?.loss,
            structure: p.structure.map(|q| focal_loss(&q, label, focal).map(|o| o.loss)).transpose()?,
            texture: p.texture.map(|q| focal_loss(&q, label, focal).map(|o| o.loss)).transpose()?,
        })
    }

    /// Losses and exact gradients of `LossTerms::objective` for one sample.
    pub fn loss_and_grad(&self, input: &SampleInput, label: usize) -> Result<(LossTerms, TwoStreamModel)> {
        let (trace, conv_caches) = self.trace(input)?;
        let focal = &self.config.focal;
        let scale = 1.0 / self.config.head_count() as f64;
        let scaled = |mut g: Vec<f64>| {
            g.iter_mut().for_each(|v| *v *= scale);
            g
        };

        let fused = focal_loss(trace.fusion.probs(), label, focal)?;
        let s_out = trace
            .structure
            .as_ref()
            .map(|t| focal_loss(&t.probs, label, focal))
            .transpose()?;
        let t_out = trace
            .texture
            .as_ref()
            .map(|t| focal_loss(&t.probs, label, focal))
            .transpose()?;
        let terms = LossTerms {
            fused: fused.loss,
            structure: s_out.as_ref().map(|o| o.loss),
            texture: t_out.as_ref().map(|o| o.loss),
        };

        let mut grads = self.zeros_like();
        let d_fused = Array1::from(scaled(fused.grad_logits));
        let h = self.config.hidden;
        let (d_ctx_texture, d_ctx_structure) = match (&self.fusion, &trace.fusion, &mut grads.fusion) {
            (Fusion::Gated(p), FusionTrace::Gated(fwd), Fusion::Gated(g)) => {
                let (t, s) = (trace.texture.as_ref().unwrap(), trace.structure.as_ref().unwrap());
                let (dt, ds) = p.backward(
                    t.attention.context.view(),
                    s.attention.context.view(),
                    fwd,
                    d_fused.view(),
                    g,
                );
                (Some(dt), Some(ds))
            }
            (Fusion::Concat(head), FusionTrace::Concat { input, .. }, Fusion::Concat(g)) => {
                let d_in = head.backward(input.view(), d_fused.view(), g);
                let mut offset = 0;
                let mut take = |present: bool| {
                    present.then(|| {
                        let part = d_in.slice(s![offset..offset + h]).to_owned();
                        offset += h;
                        part
                    })
                };
                let dt = take(trace.texture.is_some());
                let ds = take(trace.structure.is_some());
                (dt, ds)
            }
            _ => unreachable!("fusion trace matches fusion parameters"),
        };

        if let (Some(stream), Some(tr), Some(out), Some(g)) =
            (&self.structure, &trace.structure, s_out, grads.structure.as_mut())
        {
            stream.backward(tr, d_ctx_structure.unwrap(), &scaled(out.grad_logits), g);
        }
        if let (Some(stream), Some(tr), Some(out), Some(g)) =
            (&self.texture, &trace.texture, t_out, grads.texture.as_mut())
        {
            let d_rows = stream.backward(tr, d_ctx_texture.unwrap(), &scaled(out.grad_logits), g);
            if let (Some(enc), Some(caches), Some(TextureInput::Patches { patches, tokens })) =
                (&self.encoder, &conv_caches, &input.texture)
            {
                let mut per_landmark = Array2::<f64>::zeros((patches.len(), enc.filters()));
                for (row, &tok) in d_rows.rows().into_iter().zip(tokens) {
                    let mut acc = per_landmark.row_mut(tok);
                    acc += &row;
                }
                let genc = grads.encoder.as_mut().unwrap();
                for ((patch, cache), d) in patches.iter().zip(caches).zip(per_landmark.rows()) {
                    enc.backward(patch, cache, d.as_slice().unwrap(), genc);
                }
            }
        }
        Ok((terms, grads))
    }

    /// Mean loss terms and mean flat gradient over a batch.
    ///
    /// Samples are processed in parallel; the reduction runs in input order so
    /// the result does not depend on the thread count.
    pub fn batch_loss_and_grad(&self, batch: &[(&SampleInput, usize)]) -> Result<(LossTerms, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let per_sample: Vec<(LossTerms, Vec<f64>)> = batch
            .par_iter()
            .map(|(input, label)| self.loss_and_grad(input, *label).map(|(l, g)| (l, g.to_flat())))
            .collect::<Result<_>>()?;
        let inv = 1.0 / batch.len() as f64;
        let mut total = vec![0.0; self.num_params()];
        let mut terms = Vec::with_capacity(per_sample.len());
        for (l, g) in per_sample {
            for (t, v) in total.iter_mut().zip(&g) {
                *t += v;
            }
            terms.push(l);
        }
        total.iter_mut().for_each(|v| *v *= inv);
        Ok((LossTerms::mean(&terms), total))
    }
}

impl Parameters for TwoStreamModel {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>) {
        let p = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
        if let Some(s) = &self.structure {
            s.visit(&p("structure"), f);
        }
        if let Some(t) = &self.texture {
            t.visit(&p("texture"), f);
        }
        match &self.fusion {
            Fusion::Gated(g) => g.visit(&p("fusion"), f),
            Fusion::Concat(d) => d.visit(&p("fusion.head"), f),
        }
        if let Some(e) = &self.encoder {
            e.visit(&p("encoder"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>) {
        let p = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
        if let Some(s) = &mut self.structure {
            s.visit_mut(&p("structure"), f);
        }
        if let Some(t) = &mut self.texture {
            t.visit_mut(&p("texture"), f);
        }
        match &mut self.fusion {
            Fusion::Gated(g) => g.visit_mut(&p("fusion"), f),
            Fusion::Concat(d) => d.visit_mut(&p("fusion.head"), f),
        }
        if let Some(e) = &mut self.encoder {
            e.visit_mut(&p("encoder"), f);
        }
    }
}
