use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{BoundingBox, DatasetManifest, Sample, Split};
use crate::embedding::GrayImage;
use crate::error::{Error, Result};
use crate::graph::LandmarkSet;

/// Side length of FER2013-style images.
pub const FER_SIDE: usize = 48;

/// Landmark table as read from disk, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLandmarkTable {
    pub n_landmarks: usize,
    pub labels: Vec<usize>,
    /// Image-fraction coordinates, one row per sample.
    pub rows: Vec<Vec<(f64, f64)>>,
}

impl RawLandmarkTable {
    /// Normalizes every sample with the bounding box of the whole table.
    pub fn into_manifest(self, classes: Option<usize>) -> Result<DatasetManifest> {
        let inferred = self.labels.iter().max().map_or(1, |&m| m + 1);
        let classes = classes.unwrap_or(inferred);
        let frame = BoundingBox::enclosing(self.rows.iter().flatten().copied()).unwrap_or(BoundingBox::UNIT);
        let samples = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(row, &label)| {
                let coords: Vec<(f64, f64)> = row.iter().map(|&p| frame.normalize(p)).collect();
                Ok(Sample {
                    landmarks: LandmarkSet::normalized(&coords)?,
                    image: None,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DatasetManifest::new(classes, self.n_landmarks, samples, frame)
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::format(line, format!("expected {expected_len} fields, found {len}"))
        }
        _ => Error::format(line, e.to_string()),
    }
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(Error::format(Some(1), "empty landmark file"));
    }
    if header[0].trim() != "label" {
        return Err(Error::format(Some(1), "first column must be `label`"));
    }
    if header.len() < 3 || header.len().is_multiple_of(2) {
        return Err(Error::format(Some(1), "expected `label` followed by x,y column pairs"));
    }
    let n = (header.len() - 1) / 2;
    for i in 0..n {
        let (x, y) = (header[1 + 2 * i].trim(), header[2 + 2 * i].trim());
        if x != format!("x{i}") || y != format!("y{i}") {
            return Err(Error::format(Some(1), format!("columns {} and {} must be x{i},y{i}", 2 + 2 * i, 3 + 2 * i)));
        }
    }
    Ok(n)
}

/// Parses `label,x0,y0,...,x{n-1},y{n-1}` with one face per row.
pub fn parse_landmark_csv<R: Read>(input: R) -> Result<RawLandmarkTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    let n = check_header(&header)?;
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let label = record[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse { line, message: format!("bad label `{}`", &record[0]) })?;
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let parse = |s: &str| -> Result<f64> {
                match s.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Parse { line, message: format!("bad coordinate `{s}` for landmark {i}") }),
                }
            };
            row.push((parse(&record[1 + 2 * i])?, parse(&record[2 + 2 * i])?));
        }
        labels.push(label);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(None, "landmark file has no samples"));
    }
    Ok(RawLandmarkTable { n_landmarks: n, labels, rows })
}

pub fn load_landmark_csv(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_landmark_csv(file)?.into_manifest(None)
}

/// Writes coordinates in image-fraction units, so a reload reproduces the
/// same frame.
pub fn write_landmark_csv<W: Write>(manifest: &DatasetManifest, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    for i in 0..manifest.n_landmarks {
        header.push(format!("x{i}"));
        header.push(format!("y{i}"));
    }
    w.write_record(&header).map_err(csv_error)?;
    for s in &manifest.samples {
        let mut rec = vec![s.label.to_string()];
        for p in s.landmarks.coords() {
            let (x, y) = manifest.frame.denormalize(p);
            rec.push(x.to_string());
            rec.push(y.to_string());
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::format(None, e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FerRow {
    pub label: usize,
    pub image: GrayImage,
    pub usage: Option<Split>,
}

/// Parses `label,pixels,usage` rows where `pixels` holds `side * side`
/// space-separated 8-bit values. A header row is detected and skipped; the
/// usage column may be omitted.
pub fn load_fer_csv<R: Read>(input: R, side: usize) -> Result<Vec<FerRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && record.get(0).is_some_and(|f| f.trim().parse::<usize>().is_err()) {
            continue;
        }
        if record.len() < 2 || record.len() > 3 {
            return Err(Error::format(Some(line), format!("expected 2 or 3 fields, found {}", record.len())));
        }
        let label = record[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse { line, message: format!("bad label `{}`", &record[0]) })?;
        let pixels = record[1]
            .split_whitespace()
            .map(|t| match t.parse::<u8>() {
                Ok(v) => Ok(f64::from(v) / 255.0),
                Err(_) => Err(Error::Parse { line, message: format!("bad pixel `{t}`") }),
            })
            .collect::<Result<Vec<f64>>>()?;
        if pixels.len() != side * side {
            return Err(Error::format(
                Some(line),
                format!("expected {} pixels, found {}", side * side, pixels.len()),
            ));
        }
        let usage = match record.get(2).map(str::trim) {
            None | Some("") => None,
            Some(tag) => Some(Split::parse(tag).ok_or_else(|| Error::Parse { line, message: format!("unknown usage `{tag}`") })?),
        };
        rows.push(FerRow { label, image: GrayImage::new(side, side, pixels)?, usage });
    }
    Ok(rows)
}

pub fn write_fer_csv<W: Write>(manifest: &DatasetManifest, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "pixels", "usage"]).map_err(csv_error)?;
    for (s, split) in manifest.samples.iter().zip(&manifest.splits) {
        let image = s
            .image
            .as_ref()
            .ok_or_else(|| Error::invalid("cannot write images for a sample without one"))?;
        let pixels: Vec<String> = image
            .pixels()
            .iter()
            .map(|&p| ((p * 255.0).round() as u8).to_string())
            .collect();
        let usage = split.map_or("", |s| s.name());
        w.write_record([s.label.to_string(), pixels.join(" "), usage.to_string()])
            .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::format(None, e.to_string()))
}

/// Pairs images with landmark rows by position. Labels must agree; usage
/// tags become split assignments.
pub fn attach_images(manifest: &DatasetManifest, rows: Vec<FerRow>) -> Result<DatasetManifest> {
    if rows.len() != manifest.len() {
        return Err(Error::invalid(format!(
            "{} images for {} landmark rows",
            rows.len(),
            manifest.len()
        )));
    }
    let mut out = manifest.clone();
    for (i, row) in rows.into_iter().enumerate() {
        if row.label != out.samples[i].label {
            return Err(Error::invalid(format!(
                "sample {i}: image label {} differs from landmark label {}",
                row.label, out.samples[i].label
            )));
        }
        out.samples[i].image = Some(row.image);
        out.splits[i] = row.usage;
    }
    Ok(out)
}
