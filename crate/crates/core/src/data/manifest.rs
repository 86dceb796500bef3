//! Dataset manifests: a JSON document listing each video's feature file,
//! annotation file, frame rate and cohort.
//!
//! ```json
//! {
//!   "feature_dim": 2048,
//!   "videos": [
//!     {"video_id": "001-001", "features": "feat/001-001.ctcn",
//!      "annotations": "ann/001-001.csv", "fps": 25.0, "cohort": "001",
//!      "fold_tags": []}
//!   ]
//! }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_features, parse_annotations, rasterize, segments_for, FeatureSequence};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoEntry {
    pub video_id: String,
    pub features: PathBuf,
    pub annotations: PathBuf,
    pub fps: f64,
    pub cohort: String,
    #[serde(default)]
    pub fold_tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub feature_dim: usize,
    pub videos: Vec<VideoEntry>,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(path, format!("manifest: {e}")))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::data("feature_dim must be positive"));
        }
        let mut ids: Vec<&str> = self.videos.iter().map(|v| v.video_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::data(format!("duplicate video id {}", w[0])));
        }
        if let Some(v) = self.videos.iter().find(|v| !(v.fps > 0.0)) {
            return Err(Error::data(format!("video {}: fps must be positive", v.video_id)));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn entry(&self, video_id: &str) -> Option<&VideoEntry> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    /// Loads one video's features and rasterized labels at its original rate.
    pub fn load_video(&self, entry: &VideoEntry) -> Result<FeatureSequence> {
        let feat_path = self.resolve(&entry.features);
        let file = load_features(&feat_path)?;
        if file.features.cols() != self.feature_dim {
            return Err(Error::format(
                &feat_path,
                format!("feature dimension {} differs from the manifest's {}", file.features.cols(), self.feature_dim),
            ));
        }
        if (file.fps as f64 - entry.fps).abs() > 1e-3 * entry.fps {
            return Err(Error::format(
                &feat_path,
                format!("file fps {} differs from the manifest's {}", file.fps, entry.fps),
            ));
        }
        let ann_path = self.resolve(&entry.annotations);
        let text = std::fs::read_to_string(&ann_path).map_err(|e| Error::io(&ann_path, e))?;
        let all = parse_annotations(&text).map_err(|e| Error::format(&ann_path, e.to_string()))?;
        let segs = segments_for(&all, &entry.video_id);
        if segs.is_empty() {
            return Err(Error::format(&ann_path, format!("no segments for video {}", entry.video_id)));
        }
        let labels = rasterize(&segs, file.features.rows())
            .map_err(|e| Error::format(&ann_path, format!("video {}: {e}", entry.video_id)))?;
        FeatureSequence::new(entry.video_id.clone(), entry.fps, file.features, labels)
    }

    pub fn load_all(&self) -> Result<Vec<FeatureSequence>> {
        self.videos.iter().map(|v| self.load_video(v)).collect()
    }
}
