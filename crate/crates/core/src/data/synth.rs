use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{BoundingBox, DatasetManifest, Sample};
use crate::embedding::GrayImage;
use crate::error::{Error, Result};
use crate::graph::LandmarkSet;
use crate::seed;

/// Synthetic faces with a planted topology: the class is encoded only in the
/// relative displacement of each signal pair `(a, b)`. Both members of a pair
/// share a random per-sample offset, so absolute positions carry little of
/// the signal while the difference `b - a` carries all of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub classes: usize,
    pub landmarks: usize,
    pub samples_per_class: usize,
    /// Empty means `[(0, n-1), (1, n-2)]`.
    pub signal_pairs: Vec<(usize, usize)>,
    /// Gaussian noise on every coordinate.
    pub noise: f64,
    /// Extra noise on landmarks outside every signal pair. Carrying a value
    /// across these tokens costs a sequence model more than reading it from
    /// an adjacent one.
    pub distractor_noise: f64,
    /// Std of the offset shared by both members of a signal pair.
    pub pair_jitter: f64,
    /// Length of the class displacement applied to `b`.
    pub signal_offset: f64,
    /// Class-dependent blob brightness change at signal landmarks.
    pub texture_amplitude: f64,
    /// Zero disables images.
    pub image_size: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            landmarks: 10,
            samples_per_class: 200,
            signal_pairs: Vec::new(),
            noise: 0.02,
            distractor_noise: 0.05,
            pair_jitter: 0.08,
            signal_offset: 0.08,
            texture_amplitude: 0.3,
            image_size: 48,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        if self.signal_pairs.is_empty() {
            let n = self.landmarks;
            if n >= 4 {
                vec![(0, n - 1), (1, n - 2)]
            } else {
                vec![(0, n.saturating_sub(1))]
            }
        } else {
            self.signal_pairs.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 classes"));
        }
        if self.landmarks < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 landmarks"));
        }
        if self.samples_per_class == 0 {
            return Err(Error::invalid("samples_per_class must be positive"));
        }
        for &(a, b) in &self.pairs() {
            if a == b || a >= self.landmarks || b >= self.landmarks {
                return Err(Error::invalid(format!("bad signal pair ({a}, {b})")));
            }
        }
        for (name, v) in [
            ("noise", self.noise),
            ("distractor_noise", self.distractor_noise),
            ("pair_jitter", self.pair_jitter),
            ("signal_offset", self.signal_offset),
            ("texture_amplitude", self.texture_amplitude),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if self.noise == 0.0 {
            return Err(Error::invalid("noise must be positive"));
        }
        if self.image_size != 0 && self.image_size < 8 {
            return Err(Error::invalid("image_size must be 0 or at least 8"));
        }
        Ok(())
    }

    /// Class displacement for `b` in each signal pair.
    pub fn displacement(&self, class: usize) -> (f64, f64) {
        let theta = std::f64::consts::TAU * class as f64 / self.classes as f64;
        (self.signal_offset * theta.cos(), self.signal_offset * theta.sin())
    }

    /// Mean landmark layout: a jittered grid inside `[0.15, 0.85]^2`.
    pub fn base_layout(&self) -> Vec<(f64, f64)> {
        let n = self.landmarks;
        let g = (n as f64).sqrt().ceil() as usize;
        let cell = 0.7 / g as f64;
        let mut rng = seed::rng(seed::stream(self.seed, "layout"));
        let jitter = Uniform::new_inclusive(-0.25 * cell, 0.25 * cell).expect("valid range");
        (0..n)
            .map(|k| {
                let cx = 0.15 + cell * ((k % g) as f64 + 0.5);
                let cy = 0.15 + cell * ((k / g) as f64 + 0.5);
                (cx + jitter.sample(&mut rng), cy + jitter.sample(&mut rng))
            })
            .collect()
    }
}

fn render(cfg: &SynthConfig, points: &[(f64, f64)], bright: &[f64], rng: &mut impl Rng) -> Result<GrayImage> {
    let side = cfg.image_size;
    let sigma = side as f64 / 32.0;
    let grain = Normal::new(0.0, 0.03).expect("valid std");
    // A smooth shading gradient makes patches location-dependent, as on real faces.
    let span = (side - 1) as f64;
    let mut px: Vec<f64> = (0..side * side)
        .map(|i| 0.05 + 0.2 * (i % side) as f64 / span + 0.1 * (i / side) as f64 / span)
        .collect();
    for (&(x, y), &b) in points.iter().zip(bright) {
        let (cx, cy) = (x * (side - 1) as f64, y * (side - 1) as f64);
        for (i, v) in px.iter_mut().enumerate() {
            let (r, c) = ((i / side) as f64, (i % side) as f64);
            let d2 = (r - cy).powi(2) + (c - cx).powi(2);
            *v += b * (-d2 / (2.0 * sigma * sigma)).exp();
        }
    }
    for v in &mut px {
        // 8-bit quantization keeps images exact through the CSV format.
        *v = ((*v + grain.sample(rng)).clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
    GrayImage::new(side, side, px)
}

/// Generates `classes * samples_per_class` samples, ordered by class.
/// Landmarks are normalized with the bounding box of the whole set, like
/// data loaded from disk.
pub fn synth_generate(cfg: &SynthConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let base = cfg.base_layout();
    let pairs = cfg.pairs();
    let noise = Normal::new(0.0, cfg.noise).expect("valid std");
    let distract = Normal::new(0.0, cfg.distractor_noise).expect("valid std");
    let is_signal: Vec<bool> = (0..cfg.landmarks).map(|k| pairs.iter().any(|&(a, b)| a == k || b == k)).collect();
    let shared = Normal::new(0.0, cfg.pair_jitter.max(f64::MIN_POSITIVE)).expect("valid std");
    let mut raw = Vec::new();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for class in 0..cfg.classes {
        let (dx, dy) = cfg.displacement(class);
        let level = if cfg.classes > 1 { class as f64 / (cfg.classes - 1) as f64 - 0.5 } else { 0.0 };
        for k in 0..cfg.samples_per_class {
            let mut rng = seed::rng(seed::derive(cfg.seed, [class as u64, k as u64]));
            let mut pts: Vec<(f64, f64)> = base
                .iter()
                .map(|&(x, y)| (x + noise.sample(&mut rng), y + noise.sample(&mut rng)))
                .collect();
            for (k, p) in pts.iter_mut().enumerate() {
                if !is_signal[k] && cfg.distractor_noise > 0.0 {
                    p.0 += distract.sample(&mut rng);
                    p.1 += distract.sample(&mut rng);
                }
            }
            let mut bright = vec![0.5; cfg.landmarks];
            for &(a, b) in &pairs {
                let (sx, sy) = if cfg.pair_jitter > 0.0 {
                    (shared.sample(&mut rng), shared.sample(&mut rng))
                } else {
                    (0.0, 0.0)
                };
                pts[a].0 += sx;
                pts[a].1 += sy;
                pts[b].0 += sx + dx;
                pts[b].1 += sy + dy;
                bright[b] = 0.5 + 2.0 * cfg.texture_amplitude * level;
            }
            for p in &mut pts {
                *p = (p.0.clamp(0.0, 1.0), p.1.clamp(0.0, 1.0));
            }
            if cfg.image_size > 0 {
                images.push(Some(render(cfg, &pts, &bright, &mut rng)?));
            } else {
                images.push(None);
            }
            raw.push(pts);
            labels.push(class);
        }
    }
    let frame = BoundingBox::enclosing(raw.iter().flatten().copied()).unwrap_or(BoundingBox::UNIT);
    let samples = raw
        .into_iter()
        .zip(images)
        .zip(labels)
        .map(|((pts, image), label)| {
            let coords: Vec<(f64, f64)> = pts.into_iter().map(|p| frame.normalize(p)).collect();
            Ok(Sample { landmarks: LandmarkSet::normalized(&coords)?, image, label })
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetManifest::new(cfg.classes, cfg.landmarks, samples, frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { samples_per_class: 60, image_size: 0, ..SynthConfig::default() }
    }

    fn raw(m: &DatasetManifest, s: &Sample, k: usize) -> (f64, f64) {
        m.frame.denormalize(s.landmarks.coords().nth(k).unwrap())
    }

    #[test]
    fn class_mean_offset_matches_displacement() {
        let cfg = small();
        let m = synth_generate(&cfg).unwrap();
        let base = cfg.base_layout();
        for (a, b) in cfg.pairs() {
            let expect_rel = (base[b].0 - base[a].0, base[b].1 - base[a].1);
            for c in 0..cfg.classes {
                let members: Vec<&Sample> = m.samples.iter().filter(|s| s.label == c).collect();
                let k = members.len() as f64;
                let (mut mx, mut my) = (0.0, 0.0);
                for s in &members {
                    let (pa, pb) = (raw(&m, s, a), raw(&m, s, b));
                    mx += (pb.0 - pa.0 - expect_rel.0) / k;
                    my += (pb.1 - pa.1 - expect_rel.1) / k;
                }
                let d = cfg.displacement(c);
                let tol = 3.0 * cfg.noise * 2f64.sqrt() / k.sqrt();
                assert!((mx - d.0).abs() < tol && (my - d.1).abs() < tol, "class {c}: ({mx}, {my}) vs {d:?}");
            }
        }
    }

    #[test]
    fn noiseless_pairs_separate_by_nearest_centroid() {
        let cfg = SynthConfig { classes: 2, noise: 1e-9, ..small() };
        let m = synth_generate(&cfg).unwrap();
        let (a, b) = cfg.pairs()[0];
        let offset = |s: &Sample| {
            let (pa, pb) = (raw(&m, s, a), raw(&m, s, b));
            (pb.0 - pa.0, pb.1 - pa.1)
        };
        let mut centroids = [(0.0, 0.0); 2];
        for s in &m.samples {
            let o = offset(s);
            centroids[s.label].0 += o.0 / 60.0;
            centroids[s.label].1 += o.1 / 60.0;
        }
        for s in &m.samples {
            let o = offset(s);
            let d: Vec<f64> = centroids.iter().map(|c| (o.0 - c.0).hypot(o.1 - c.1)).collect();
            let pred = if d[0] <= d[1] { 0 } else { 1 };
            assert_eq!(pred, s.label);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = synth_generate(&small()).unwrap();
        let b = synth_generate(&small()).unwrap();
        let c = synth_generate(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn images_are_quantized() {
        let cfg = SynthConfig { samples_per_class: 2, ..SynthConfig::default() };
        let m = synth_generate(&cfg).unwrap();
        let img = m.samples[0].image.as_ref().unwrap();
        assert_eq!(img.width(), 48);
        assert!(img.pixels().iter().all(|&p| (p * 255.0 - (p * 255.0).round()).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_pairs() {
        let cfg = SynthConfig { signal_pairs: vec![(2, 2)], ..small() };
        assert!(synth_generate(&cfg).is_err());
        let cfg = SynthConfig { signal_pairs: vec![(0, 10)], ..small() };
        assert!(synth_generate(&cfg).is_err());
    }
}
