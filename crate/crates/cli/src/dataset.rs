//! Directory scanning and filename-stem pairing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Extensions considered image files. JPEG is listed so that such files
/// are reported and rejected at read time rather than ignored.
const IMAGE_EXTENSIONS: &[&str] = &["png", "bmp", "tif", "tiff", "pgm", "ppm", "pnm", "pbm", "jpg", "jpeg"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files of `dir` keyed by stem (minus `strip_suffix` when present),
/// sorted by key. Two files with the same key are an error.
pub fn list_images(dir: &Path, strip_suffix: &str) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if !path.is_file() || !is_image(&path) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let key = stem.strip_suffix(strip_suffix).filter(|k| !k.is_empty()).unwrap_or(stem).to_owned();
        if let Some(prev) = out.insert(key.clone(), path.clone()) {
            return Err(CliError::Data(format!(
                "ambiguous stem {key:?}: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub stem: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

/// Image/mask pairs matched by stem, plus everything left unmatched.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetIndex {
    pub pairs: Vec<Pair>,
    pub unmatched_images: Vec<PathBuf>,
    pub unmatched_masks: Vec<PathBuf>,
}

impl DatasetIndex {
    pub fn build(images: &Path, masks: &Path) -> CliResult<Self> {
        Self::build_with_suffix(images, "", masks)
    }

    /// Pairs files in `images` (stems optionally ending in `image_suffix`)
    /// with files in `masks`.
    pub fn build_with_suffix(images: &Path, image_suffix: &str, masks: &Path) -> CliResult<Self> {
        let imgs = list_images(images, image_suffix)?;
        let mut msks = list_images(masks, "")?;
        let mut index = DatasetIndex::default();
        for (stem, image) in imgs {
            match msks.remove(&stem) {
                Some(mask) => index.pairs.push(Pair { stem, image, mask }),
                None => index.unmatched_images.push(image),
            }
        }
        index.unmatched_masks = msks.into_values().collect();
        Ok(index)
    }

    pub fn unmatched(&self) -> usize {
        self.unmatched_images.len() + self.unmatched_masks.len()
    }

    /// One warning line per unmatched file.
    pub fn warnings(&self) -> Vec<String> {
        let mut w: Vec<String> = self
            .unmatched_images
            .iter()
            .map(|p| format!("warning: {} has no matching mask", p.display()))
            .collect();
        w.extend(
            self.unmatched_masks
                .iter()
                .map(|p| format!("warning: {} has no matching image", p.display())),
        );
        w
    }
}
