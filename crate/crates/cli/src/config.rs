use std::path::{Path, PathBuf};

use colontcn::data::SyntheticSpec;
use colontcn::loss::LossConfig;
use colontcn::model::ModelConfig;
use colontcn::train::{FoldScheme, OptimConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

/// Experiment description read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub augment: bool,
    #[serde(default = "yes")]
    pub class_weighting: bool,
    /// Output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub fold: FoldConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub manifest: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub scheme: FoldScheme,
    /// Fold trained by `train`.
    pub index: usize,
    /// Seed of the 5-fold shuffle.
    pub seed: u64,
    /// Precomputed fold document; overrides `scheme` and `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { scheme: FoldScheme::FiveFold, index: 0, seed: 0, file: None }
    }
}

fn yes() -> bool {
    true
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub fold: Option<usize>,
}

fn anchor(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Reads `path` (defaults when absent), applies overrides and anchors
    /// relative paths at the file's directory.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, Failure> {
        let (mut cfg, base) = match path {
            Some(p) => (read_toml::<RunConfig>(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (toml::from_str("").expect("empty config parses"), PathBuf::new()),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(f) = overrides.fold {
            cfg.fold.index = f;
        }
        cfg.out = cfg.out.map(|o| anchor(&base, &o));
        if let Some(o) = &overrides.out {
            cfg.out = Some(o.clone());
        }
        if let Some(d) = &mut cfg.data {
            d.manifest = anchor(&base, &d.manifest);
        }
        if let Some(m) = &overrides.manifest {
            cfg.data = Some(DataConfig { manifest: m.clone() });
        }
        cfg.fold.file = cfg.fold.file.map(|f| anchor(&base, &f));
        cfg.train_config().validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            model: self.model.clone(),
            loss: self.loss.clone(),
            optim: self.optim.clone(),
            seed: self.seed,
            augment: self.augment,
            class_weighting: self.class_weighting,
        }
    }

    pub fn manifest(&self) -> Result<&Path, Failure> {
        self.data
            .as_ref()
            .map(|d| d.manifest.as_path())
            .ok_or_else(|| Failure::Config("no [data] manifest given".into()))
    }

    pub fn out_dir(&self) -> Result<&Path, Failure> {
        self.out.as_deref().ok_or_else(|| Failure::Config("no output directory given (--out or `out`)".into()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

pub fn synthetic_spec(path: Option<&Path>, seed: Option<u64>) -> Result<SyntheticSpec, Failure> {
    let mut spec = match path {
        Some(p) => read_toml::<SyntheticSpec>(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(spec)
}
