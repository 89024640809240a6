//! Per-token inputs for the two streams.
//!
//! Both streams see one row per traversal token. Features are computed once per
//! landmark and then gathered in token order, so a landmark revisited on the
//! way back up the tree contributes an identical row every time.

mod encoder;
mod normalize;
mod patch;

pub use encoder::{EncoderKind, PatchEncode, PatchEncoder, TinyConv, TinyConvCache};
pub use normalize::FeatureNormalizer;
pub use patch::{extract_patch, landmark_pixel, patches_for_landmarks, GrayImage, Patch, PatchConfig};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LandmarkSet, TraversalSequence};

/// Everything needed to turn a raw sample into stream inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub patch: PatchConfig,
    pub encoder: EncoderKind,
    pub structure: FeatureNormalizer,
    /// Absent for trainable encoders, whose outputs are used as-is.
    pub texture: Option<FeatureNormalizer>,
}

/// `T x 2` landmark coordinates in token order.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureEmbedding(pub Array2<f64>);

/// `T x d` patch encodings in token order.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureEmbedding(pub Array2<f64>);

fn check_tokens(seq: &TraversalSequence, n: usize) -> Result<()> {
    match seq.tokens().iter().find(|&&t| t >= n) {
        Some(t) => Err(Error::invalid(format!(
            "token {t} out of range for {n} landmarks"
        ))),
        None => Ok(()),
    }
}

/// Per-landmark feature rows as an `n x 2` matrix.
pub fn landmark_coords(landmarks: &LandmarkSet) -> Array2<f64> {
    let mut m = Array2::zeros((landmarks.len(), 2));
    for (mut row, (x, y)) in m.rows_mut().into_iter().zip(landmarks.coords()) {
        row[0] = x;
        row[1] = y;
    }
    m
}

/// Gathers per-landmark rows (`n x d`) into token order (`T x d`).
pub fn gather_rows(per_landmark: &Array2<f64>, seq: &TraversalSequence) -> Result<Array2<f64>> {
    check_tokens(seq, per_landmark.nrows())?;
    Ok(per_landmark.select(Axis(0), seq.tokens()))
}

pub fn structure_embed(seq: &TraversalSequence, landmarks: &LandmarkSet) -> Result<StructureEmbedding> {
    gather_rows(&landmark_coords(landmarks), seq).map(StructureEmbedding)
}

/// Encodes each landmark's patch exactly once, then stacks encodings by token.
pub fn texture_embed<E: PatchEncode + ?Sized>(
    seq: &TraversalSequence,
    patches: &[Patch],
    encoder: &E,
) -> Result<TextureEmbedding> {
    let n = seq.tokens().iter().max().map_or(0, |&m| m + 1);
    if patches.len() < n {
        return Err(Error::invalid(format!(
            "sequence references landmark {} but only {} patches given",
            n - 1,
            patches.len()
        )));
    }
    let encoded = encode_all(patches, encoder)?;
    gather_rows(&encoded, seq).map(TextureEmbedding)
}

/// Encodes every patch into an `n x d` matrix.
pub fn encode_all<E: PatchEncode + ?Sized>(patches: &[Patch], encoder: &E) -> Result<Array2<f64>> {
    let d = encoder.output_dim();
    let mut out = Array2::zeros((patches.len(), d));
    for (mut row, patch) in out.rows_mut().into_iter().zip(patches) {
        let code = encoder.encode(patch)?;
        row.assign(&ndarray::ArrayView1::from(&code[..]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn seq(tokens: &[usize]) -> TraversalSequence {
        TraversalSequence::from_tokens(tokens.to_vec()).unwrap()
    }

    #[test]
    fn structure_rows_follow_tokens() {
        let lm = LandmarkSet::from_coords(&[(0.1, 0.2), (0.9, 0.8)]).unwrap();
        let e = structure_embed(&seq(&[0, 1, 0]), &lm).unwrap().0;
        assert_eq!(e, ndarray::array![[0.1, 0.2], [0.9, 0.8], [0.1, 0.2]]);
    }

    #[test]
    fn single_token_structure() {
        let lm = LandmarkSet::from_coords(&[(0.5, 0.5)]).unwrap();
        let e = structure_embed(&seq(&[0]), &lm).unwrap().0;
        assert_eq!(e.dim(), (1, 2));
    }

    #[test]
    fn figure_sequence_has_nineteen_rows() {
        let coords: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 / 10.0, 0.5)).collect();
        let lm = LandmarkSet::from_coords(&coords).unwrap();
        let tokens = [0, 1, 2, 1, 0, 3, 4, 5, 4, 3, 0, 6, 7, 8, 7, 9, 7, 6, 0];
        let e = structure_embed(&seq(&tokens), &lm).unwrap().0;
        assert_eq!(e.dim(), (19, 2));
    }

    #[test]
    fn out_of_range_token_rejected() {
        let lm = LandmarkSet::from_coords(&[(0.1, 0.2), (0.9, 0.8)]).unwrap();
        assert!(structure_embed(&seq(&[0, 2, 0]), &lm).is_err());
    }

    struct Counting<'a> {
        inner: PatchEncoder,
        calls: &'a Cell<usize>,
    }

    impl PatchEncode for Counting<'_> {
        fn output_dim(&self) -> usize {
            self.inner.output_dim()
        }
        fn encode(&self, patch: &Patch) -> Result<Vec<f64>> {
            self.calls.set(self.calls.get() + 1);
            self.inner.encode(patch)
        }
    }

    fn ramp_patches(n: usize, size: usize) -> Vec<Patch> {
        (0..n)
            .map(|k| {
                let px = (0..size * size).map(|i| ((i + k) % 7) as f64 / 7.0).collect();
                Patch::new(size, px).unwrap()
            })
            .collect()
    }

    #[test]
    fn texture_encodes_each_landmark_once() {
        let calls = Cell::new(0);
        let enc = Counting {
            inner: PatchEncoder::flatten(17),
            calls: &calls,
        };
        let patches = ramp_patches(3, 17);
        let e = texture_embed(&seq(&[0, 1, 0, 2, 0]), &patches, &enc).unwrap().0;
        assert_eq!(calls.get(), 3);
        assert_eq!(e.dim(), (5, 289));
        assert_eq!(e.row(0), e.row(2));
        assert_eq!(e.row(0), e.row(4));
    }

    #[test]
    fn identical_patches_give_identical_rows() {
        let p = Patch::new(5, vec![0.25; 25]).unwrap();
        let enc = PatchEncoder::random_projection(5, 8, 3);
        let e = texture_embed(&seq(&[0, 1, 2, 1, 0]), &vec![p; 3], &enc).unwrap().0;
        for r in e.rows() {
            assert_eq!(r, e.row(0));
        }
    }

    #[test]
    fn random_projection_is_deterministic() {
        let patches = ramp_patches(2, 17);
        let s = seq(&[0, 1, 0]);
        let a = texture_embed(&s, &patches, &PatchEncoder::random_projection(17, 64, 11)).unwrap();
        let b = texture_embed(&s, &patches, &PatchEncoder::random_projection(17, 64, 11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_patch_rejected() {
        let patches = ramp_patches(2, 5);
        assert!(texture_embed(&seq(&[0, 2, 0]), &patches, &PatchEncoder::flatten(5)).is_err());
    }
}
