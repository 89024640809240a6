//! Datasets: in-memory manifests, CSV formats, stratified splits and the
//! synthetic planted-topology generator.

mod csv_io;
mod dir;
mod split;
mod synth;

pub use csv_io::{
    attach_images, load_fer_csv, load_landmark_csv, parse_landmark_csv, write_fer_csv, write_landmark_csv,
    FerRow, RawLandmarkTable, FER_SIDE,
};
pub use dir::{load_dataset_dir, write_dataset_dir, DatasetFiles, DATASET_FORMAT};
pub use split::{split, stratified_partition};
pub use synth::{synth_generate, SynthConfig};

use serde::{Deserialize, Serialize};

use crate::embedding::GrayImage;
use crate::error::{Error, Result};
use crate::graph::LandmarkSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    /// Accepts both the short names and FER2013's usage tags.
    pub fn parse(s: &str) -> Option<Split> {
        match s.trim() {
            "train" | "Training" => Some(Split::Train),
            "val" | "PublicTest" => Some(Split::Val),
            "test" | "PrivateTest" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Normalized coordinates, see [`DatasetManifest::frame`].
    pub landmarks: LandmarkSet,
    pub image: Option<GrayImage>,
    pub label: usize,
}

/// Axis-aligned box that maps normalized coordinates back to image-fraction
/// units: `raw = min + norm * (max - min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub const UNIT: BoundingBox = BoundingBox {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn enclosing(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Self> {
        points.into_iter().fold(None, |acc, (x, y)| {
            Some(match acc {
                None => BoundingBox {
                    x_min: x,
                    x_max: x,
                    y_min: y,
                    y_max: y,
                },
                Some(b) => BoundingBox {
                    x_min: b.x_min.min(x),
                    x_max: b.x_max.max(x),
                    y_min: b.y_min.min(y),
                    y_max: b.y_max.max(y),
                },
            })
        })
    }

    fn axis(v: f64, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    pub fn normalize(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            Self::axis(x, self.x_min, self.x_max),
            Self::axis(y, self.y_min, self.y_max),
        )
    }

    pub fn denormalize(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            self.x_min + x * (self.x_max - self.x_min),
            self.y_min + y * (self.y_max - self.y_min),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub classes: usize,
    pub n_landmarks: usize,
    pub samples: Vec<Sample>,
    /// Split tag per sample, index-aligned with `samples`.
    pub splits: Vec<Option<Split>>,
    /// Maps normalized landmark coordinates to image-fraction units.
    pub frame: BoundingBox,
}

impl DatasetManifest {
    pub fn new(classes: usize, n_landmarks: usize, samples: Vec<Sample>, frame: BoundingBox) -> Result<Self> {
        if classes == 0 {
            return Err(Error::invalid("dataset needs at least one class"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.landmarks.len() != n_landmarks {
                return Err(Error::invalid(format!(
                    "sample {i} has {} landmarks, expected {n_landmarks}",
                    s.landmarks.len()
                )));
            }
            if s.label >= classes {
                return Err(Error::invalid(format!("sample {i} label {} >= {classes}", s.label)));
            }
        }
        let splits = vec![None; samples.len()];
        Ok(Self {
            classes,
            n_landmarks,
            samples,
            splits,
            frame,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn has_images(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.image.is_some())
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == Some(split)).collect()
    }

    /// New manifest with the selected samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> DatasetManifest {
        DatasetManifest {
            classes: self.classes,
            n_landmarks: self.n_landmarks,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            splits: indices.iter().map(|&i| self.splits[i]).collect(),
            frame: self.frame,
        }
    }

    pub fn subset_of(&self, split: Split) -> DatasetManifest {
        self.subset(&self.indices_of(split))
    }

    /// Landmark coordinates of a sample in image-fraction units.
    pub fn image_points(&self, sample: &Sample) -> Vec<(f64, f64)> {
        sample
            .landmarks
            .coords()
            .map(|p| {
                let (x, y) = self.frame.denormalize(p);
                (x.clamp(0.0, 1.0), y.clamp(0.0, 1.0))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounding_box_roundtrip() {
        let b = BoundingBox::enclosing([(0.2, 0.1), (0.6, 0.9), (0.4, 0.5)]).unwrap();
        let n = b.normalize((0.4, 0.5));
        assert!((n.0 - 0.5).abs() < 1e-15 && (n.1 - 0.5).abs() < 1e-15);
        let r = b.denormalize(n);
        assert!((r.0 - 0.4).abs() < 1e-15 && (r.1 - 0.5).abs() < 1e-15);
        assert_eq!(b.normalize((0.2, 0.1)), (0.0, 0.0));
        assert_eq!(b.normalize((0.6, 0.9)), (1.0, 1.0));
    }

    #[test]
    fn split_names_parse() {
        assert_eq!(Split::parse("Training"), Some(Split::Train));
        assert_eq!(Split::parse("PublicTest"), Some(Split::Val));
        assert_eq!(Split::parse("test"), Some(Split::Test));
        assert_eq!(Split::parse("other"), None);
    }
}
