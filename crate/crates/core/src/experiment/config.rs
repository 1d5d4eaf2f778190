use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    apply_label_noise, inject_white_noise_points, load_idx, synth_mixture, CorruptionConfig,
    DatasetBundle,
};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, OptimizerConfig};
use crate::trainer::{IrreducibleModelConfig, TrainLoopConfig};
use crate::AcquisitionKind;

fn one() -> usize {
    1
}

/// Gaussian blobs per class, clamped to the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub num_classes: usize,
    /// Blobs per class; more than one makes the classes non-convex.
    #[serde(default = "one")]
    pub modes_per_class: usize,
    pub input_dim: usize,
    pub n_per_class: usize,
    pub spread: f64,
}

/// IDX image/label pair (MNIST layout). Relative paths resolve against the
/// config file's directory. Pixels are scaled to [0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub num_classes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource<'a> {
    Synthetic(&'a SyntheticSource),
    Idx(&'a IdxSource),
}

/// Exactly one of `synthetic` and `idx` must be given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Train, validation and test sizes.
    pub splits: [usize; 3],
    /// Seeds generation and splitting; independent of the run seed so that
    /// several training seeds share one dataset.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx: Option<IdxSource>,
}

impl DatasetConfig {
    pub fn source(&self) -> Result<DataSource<'_>> {
        match (&self.synthetic, &self.idx) {
            (Some(s), None) => Ok(DataSource::Synthetic(s)),
            (None, Some(i)) => Ok(DataSource::Idx(i)),
            _ => Err(Error::Config(
                "[dataset] needs exactly one of [dataset.synthetic] and [dataset.idx]".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub dropout_rate: f64,
}

impl NetConfig {
    pub fn spec(&self, input_dim: usize, num_classes: usize) -> Result<ModelSpec> {
        ModelSpec::new(
            input_dim,
            self.hidden_dims.clone(),
            num_classes,
            self.dropout_rate,
        )
        .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrreducibleSection {
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub dropout_rate: f64,
    #[serde(default = "irr_defaults::max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "irr_defaults::patience")]
    pub patience: usize,
    #[serde(default = "irr_defaults::tolerance")]
    pub tolerance: f64,
    #[serde(default = "irr_defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

mod irr_defaults {
    pub use crate::trainer::irreducible_defaults::*;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub kind: AcquisitionKind,
    pub large_batch_size: usize,
    pub batch_size: usize,
    pub total_steps: u64,
    pub eval_every: u64,
    pub bald_samples: usize,
    pub bald_warmup: u64,
    /// Steps between large-batch score dumps; defaults to `eval_every`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_dump_every: Option<u64>,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let d = TrainLoopConfig::default();
        SelectionSection {
            kind: d.kind,
            large_batch_size: d.large_batch_size,
            batch_size: d.batch_size,
            total_steps: d.total_steps,
            eval_every: d.eval_every,
            bald_samples: d.bald_samples,
            bald_warmup: d.bald_warmup,
            score_dump_every: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Relative to the config file's directory; defaults to `out/<config name>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write SVG line charts next to the CSV files.
    pub charts: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            charts: true,
        }
    }
}

/// A complete experiment description, as read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub corruption: CorruptionConfig,
    /// Required by kinds that use irreducible losses, and by score probing
    /// during replay.
    #[serde(default)]
    pub irreducible: Option<IrreducibleSection>,
    pub model: NetConfig,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Model trained by `replay`; defaults to `model`.
    #[serde(default)]
    pub replay: Option<NetConfig>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory the config was read from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// File name of the config without extension, if read from disk.
    #[serde(skip)]
    pub name: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::from_toml(&text, dir)?;
        cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.output.dir {
            Some(d) => self.base_dir.join(d),
            None => self
                .base_dir
                .join("out")
                .join(self.name.as_deref().unwrap_or("run")),
        }
    }

    /// Canonical TOML with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        let [n_train, _, n_test] = self.dataset.splits;
        if n_train == 0 || n_test == 0 {
            return Err(Error::Config(
                "train and test splits must be non-empty".into(),
            ));
        }
        if let DataSource::Synthetic(s) = self.dataset.source()? {
            if !(s.spread >= 0.0 && s.spread.is_finite()) {
                return Err(Error::Config(format!(
                    "spread must be finite and non-negative, got {}",
                    s.spread
                )));
            }
        }
        self.corruption.validate().map_err(cfg)?;
        self.optimizer.validate().map_err(cfg)?;
        let s = &self.selection;
        if s.large_batch_size <= s.batch_size {
            return Err(Error::Config(format!(
                "large_batch_size ({}) must exceed batch_size ({})",
                s.large_batch_size, s.batch_size
            )));
        }
        self.train_loop_config().validate().map_err(cfg)?;
        let (k, d) = self.dims_hint()?;
        self.model.spec(d, k)?;
        if let Some(r) = &self.replay {
            r.spec(d, k)?;
        }
        if s.kind == AcquisitionKind::Bald && self.model.dropout_rate <= 0.0 {
            return Err(Error::Config(
                "bald selection needs model.dropout_rate > 0".into(),
            ));
        }
        match &self.irreducible {
            Some(irr) => self
                .irreducible_config(d, k, irr)?
                .validate()
                .map_err(cfg)?,
            None if s.kind.needs_irreducible() => {
                return Err(Error::Config(format!(
                    "selection kind {} needs an [irreducible] section",
                    s.kind
                )))
            }
            None => {}
        }
        if let DataSource::Idx(i) = self.dataset.source()? {
            for p in [&i.images, &i.labels] {
                let full = self.base_dir.join(p);
                if !full.is_file() {
                    return Err(Error::Config(format!(
                        "dataset file {} does not exist",
                        full.display()
                    )));
                }
            }
        }
        if n_train < s.batch_size {
            return Err(Error::Config(format!(
                "{n_train} training points cannot fill a batch of {}",
                s.batch_size
            )));
        }
        Ok(())
    }

    /// (num_classes, input_dim) as far as they are known without loading data;
    /// IDX input width is checked once the files are read.
    fn dims_hint(&self) -> Result<(usize, usize)> {
        Ok(match self.dataset.source()? {
            DataSource::Synthetic(s) => (s.num_classes, s.input_dim),
            DataSource::Idx(i) => (i.num_classes, 1),
        })
    }

    pub fn train_loop_config(&self) -> TrainLoopConfig {
        let s = &self.selection;
        TrainLoopConfig {
            large_batch_size: s.large_batch_size,
            batch_size: s.batch_size,
            total_steps: s.total_steps,
            kind: s.kind,
            optimizer: self.optimizer.clone(),
            eval_every: s.eval_every,
            seed: self.seed,
            bald_samples: s.bald_samples,
            bald_warmup: s.bald_warmup,
            score_dump_every: s.score_dump_every.unwrap_or(s.eval_every),
        }
    }

    pub fn model_spec(&self, bundle: &DatasetBundle) -> Result<ModelSpec> {
        self.model.spec(bundle.input_dim(), bundle.num_classes())
    }

    pub fn replay_spec(&self, bundle: &DatasetBundle) -> Result<ModelSpec> {
        self.replay
            .as_ref()
            .unwrap_or(&self.model)
            .spec(bundle.input_dim(), bundle.num_classes())
    }

    fn irreducible_config(
        &self,
        input_dim: usize,
        num_classes: usize,
        s: &IrreducibleSection,
    ) -> Result<IrreducibleModelConfig> {
        let spec = NetConfig {
            hidden_dims: s.hidden_dims.clone(),
            dropout_rate: s.dropout_rate,
        }
        .spec(input_dim, num_classes)?;
        Ok(IrreducibleModelConfig {
            spec,
            max_epochs: s.max_epochs,
            patience: s.patience,
            tolerance: s.tolerance,
            batch_size: s.batch_size,
            optimizer: s.optimizer.clone(),
        })
    }

    pub fn irreducible_model_config(
        &self,
        bundle: &DatasetBundle,
    ) -> Result<Option<IrreducibleModelConfig>> {
        self.irreducible
            .as_ref()
            .map(|s| self.irreducible_config(bundle.input_dim(), bundle.num_classes(), s))
            .transpose()
    }

    pub fn build_dataset(&self) -> Result<DatasetBundle> {
        build_dataset(&self.dataset, &self.corruption, &self.base_dir)
    }
}

/// Generates or loads the records, splits them, then applies label noise to
/// the training split (and validation if asked) and appends white-noise
/// points to the training split.
pub fn build_dataset(
    dataset: &DatasetConfig,
    corruption: &CorruptionConfig,
    base_dir: &Path,
) -> Result<DatasetBundle> {
    corruption.validate()?;
    let (records, num_classes, input_dim) = match dataset.source()? {
        DataSource::Synthetic(s) => {
            let records = synth_mixture(
                s.num_classes,
                s.modes_per_class,
                s.input_dim,
                s.n_per_class,
                s.spread,
                dataset.seed,
            )?;
            (records, s.num_classes, s.input_dim)
        }
        DataSource::Idx(i) => {
            let records = load_idx(base_dir.join(&i.images), base_dir.join(&i.labels))?;
            let input_dim = records.first().map_or(0, |r| r.features.len());
            (records, i.num_classes, input_dim)
        }
    };
    let [a, b, c] = dataset.splits;
    let bundle = DatasetBundle::split(records, (a, b, c), num_classes, input_dim, dataset.seed)?;
    let max_id = bundle.max_id().unwrap_or(0);
    let (mut train, mut val, test) = bundle.into_splits();
    apply_label_noise(
        &mut train,
        corruption.label_noise_rate,
        num_classes,
        corruption.seed,
    )?;
    if corruption.corrupt_validation {
        // A distinct seed keeps validation noise independent of training noise.
        apply_label_noise(
            &mut val,
            corruption.label_noise_rate,
            num_classes,
            corruption.seed ^ 0x7a11_da7e,
        )?;
    }
    if corruption.white_noise_fraction > 0.0 {
        let f = corruption.white_noise_fraction;
        let added = inject_white_noise_points(
            &mut train,
            f,
            num_classes,
            input_dim,
            max_id + 1,
            corruption.seed,
        )?;
        if corruption.white_noise_validation {
            let first = max_id + 1 + added as u32;
            inject_white_noise_points(
                &mut val,
                f,
                num_classes,
                input_dim,
                first,
                corruption.seed ^ 0x7a11_da7e,
            )?;
        }
    }
    DatasetBundle::new(train, val, test, num_classes, input_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SMALL: &str = r#"
seed = 4

[dataset]
splits = [80, 20, 20]

[dataset.synthetic]
num_classes = 3
input_dim = 5
n_per_class = 40
spread = 0.2

[corruption]
label_noise_rate = 0.1
white_noise_fraction = 0.2

[irreducible]
hidden_dims = [8]
max_epochs = 3

[model]
hidden_dims = [8]

[selection]
kind = "reducible"
large_batch_size = 20
batch_size = 4
total_steps = 10
eval_every = 5
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(SMALL, ".").unwrap();
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
        assert_eq!(cfg.selection.bald_samples, 10);
        assert_eq!(cfg.train_loop_config().score_dump_every, 5);
        assert_eq!(cfg.irreducible.as_ref().unwrap().patience, 5);
        let again = ExperimentConfig::from_toml(&cfg.to_toml(), ".").unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn dataset_has_noise_and_white_noise() {
        let cfg = ExperimentConfig::from_toml(SMALL, ".").unwrap();
        let b = cfg.build_dataset().unwrap();
        assert_eq!(b.train().len(), 100);
        assert_eq!(b.train().iter().filter(|r| r.white_noise).count(), 20);
        assert!(b.validation().iter().all(|r| !r.corrupted));
        assert_eq!(b.fingerprint(), cfg.build_dataset().unwrap().fingerprint());
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            SMALL.replace("large_batch_size = 20", "large_batch_size = 4"),
            SMALL.replace("[irreducible]\nhidden_dims = [8]\nmax_epochs = 3\n", ""),
            SMALL.replace("kind = \"reducible\"", "kind = \"bald\""),
            SMALL.replace("spread = 0.2", "spread = -1.0"),
            SMALL.replace("seed = 4", "seed = 4\nunknown = 1"),
            SMALL.replace("label_noise_rate = 0.1", "label_noise_rate = 1.5"),
            SMALL.replace("[dataset.synthetic]", "[dataset.other]"),
            SMALL.replace("[dataset.synthetic]\nnum_classes = 3\ninput_dim = 5\nn_per_class = 40\nspread = 0.2", "[dataset.idx]\nimages = \"missing-images\"\nlabels = \"missing-labels\"\nnum_classes = 3"),
            format!("{SMALL}\n[dataset.idx]\nimages = \"a\"\nlabels = \"b\"\nnum_classes = 3\n"),
            SMALL.replace("kind = \"reducible\"", "kind = \"mystery\""),
        ];
        for text in cases {
            assert!(
                matches!(
                    ExperimentConfig::from_toml(&text, "."),
                    Err(Error::Config(_))
                ),
                "{text}"
            );
        }
    }
}
