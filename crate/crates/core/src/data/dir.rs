use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{attach_images, load_fer_csv, parse_landmark_csv, write_fer_csv, write_landmark_csv, DatasetManifest};
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "facetopo-dataset/v1";

/// Contents of `manifest.toml` in a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFiles {
    pub format: String,
    pub classes: usize,
    pub landmarks: usize,
    pub landmark_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_file: Option<String>,
    #[serde(default = "default_side")]
    pub image_side: usize,
}

fn default_side() -> usize {
    super::FER_SIDE
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `manifest.toml`, `landmarks.csv` and, when every sample has an
/// image, `images.csv` (whose usage column carries the split tags).
pub fn write_dataset_dir(manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let side = manifest.samples.first().and_then(|s| s.image.as_ref()).map_or(default_side(), |i| i.width());
    let files = DatasetFiles {
        format: DATASET_FORMAT.to_string(),
        classes: manifest.classes,
        landmarks: manifest.n_landmarks,
        landmark_file: "landmarks.csv".to_string(),
        image_file: manifest.has_images().then(|| "images.csv".to_string()),
        image_side: side,
    };
    write_landmark_csv(manifest, create(&dir.join(&files.landmark_file))?)?;
    if let Some(name) = &files.image_file {
        write_fer_csv(manifest, create(&dir.join(name))?)?;
    }
    let toml = toml::to_string(&files).map_err(|e| Error::format(None, e.to_string()))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, toml).map_err(|e| Error::io(path, e))
}

pub fn load_dataset_dir(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.toml");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let files: DatasetFiles = toml::from_str(&text).map_err(|e| Error::format(None, format!("{}: {e}", path.display())))?;
    if files.format != DATASET_FORMAT {
        return Err(Error::format(None, format!("unsupported dataset format `{}`", files.format)));
    }
    let lpath = dir.join(&files.landmark_file);
    let table = parse_landmark_csv(File::open(&lpath).map_err(|e| Error::io(&lpath, e))?)?;
    if table.n_landmarks != files.landmarks {
        return Err(Error::format(
            None,
            format!("manifest declares {} landmarks, file has {}", files.landmarks, table.n_landmarks),
        ));
    }
    let manifest = table.into_manifest(Some(files.classes))?;
    match &files.image_file {
        None => Ok(manifest),
        Some(name) => {
            let ipath = dir.join(name);
            let rows = load_fer_csv(File::open(&ipath).map_err(|e| Error::io(&ipath, e))?, files.image_side)?;
            attach_images(&manifest, rows)
        }
    }
}
