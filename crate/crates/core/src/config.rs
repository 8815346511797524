//! Experiment configuration: TOML file layout, presets and command-line
//! overrides.
//!
//! ```toml
//! [experiment]
//! clients = 10
//! rounds = 20
//!
//! [channel]
//! snr = 3.0
//! rate = 0.6
//!
//! [data]
//! source = "mnist"
//! path = "data/mnist-5k"
//! classes_per_client = 1
//! ```
//!
//! Every key has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{db_to_linear, ChannelParams};
use crate::fl::{gaussian_mixture, load_mnist, Dataset, PartitionScheme, TrainingHyperparams};
use crate::galois::FieldSpec;
use crate::protocol::Method;
use crate::rng::{stream, Purpose};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {}: {message}", path.display())]
    Read { path: PathBuf, message: String },
    #[error("invalid config {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("unknown preset '{0}' (available: {presets})", presets = PRESETS.join(", "))]
    UnknownPreset(String),
    #[error("cannot load data: {0}")]
    Data(String),
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

pub const PRESETS: [&str; 3] = ["paper-v", "paper-v-5class", "paper-v-1class"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub clients: usize,
    pub rounds: usize,
    pub local_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden width of the MLP.
    pub hidden: usize,
    pub methods: Vec<Method>,
    pub trials: usize,
    /// Master seed; trial `i` uses `seed + i`.
    pub seed: u64,
    /// Maximum communication attempts per round, counting the first.
    pub retry_limit: usize,
    /// Record wall-clock time per round. Off by default so outputs are
    /// byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            clients: 10,
            rounds: 20,
            local_steps: 5,
            batch_size: 1024,
            learning_rate: 0.01,
            hidden: 32,
            methods: Method::ALL.to_vec(),
            trials: 5,
            seed: 20_240_601,
            retry_limit: 10,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Linear average SNR.
    pub snr: f64,
    /// SNR in dB; takes precedence over `snr` when set.
    pub snr_db: Option<f64>,
    pub rate: f64,
    pub sigma2: f64,
    /// Per-link outage probability; bypasses the fading model when set.
    pub outage: Option<f64>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { snr: 3.0, snr_db: None, rate: 0.6, sigma2: 1.0, outage: None }
    }
}

impl ChannelSection {
    pub fn params(&self) -> Result<ChannelParams, ConfigError> {
        let snr = self.snr_db.map_or(self.snr, db_to_linear);
        ChannelParams::new(snr, self.rate, self.sigma2).map_err(|e| invalid("channel", e.to_string()))
    }

    /// The per-link outage probability used by the simulator.
    pub fn outage_probability(&self) -> Result<f64, ConfigError> {
        let p = match self.outage {
            Some(p) => p,
            None => self.params()?.outage(),
        };
        if !(0.0..1.0).contains(&p) {
            return Err(invalid("channel.outage", format!("{p} is not in [0, 1)")));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerMode {
    Stochastic,
    /// Raw `f64` bits; isolates the network code from quantization error.
    Lossless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSection {
    pub mode: QuantizerMode,
    pub bits: u32,
    /// Symmetric clipping range `[-range, range]`. When unset it is derived
    /// per trial from a dry-run round at the initial model.
    pub range: Option<f64>,
    /// Multiplier applied to the largest dry-run coordinate.
    pub headroom: f64,
}

impl Default for QuantizerSection {
    fn default() -> Self {
        QuantizerSection { mode: QuantizerMode::Stochastic, bits: 8, range: None, headroom: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSection {
    pub field: FieldSpec,
}

impl Default for CodeSection {
    fn default() -> Self {
        CodeSection { field: FieldSpec::GF256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    /// Directory holding the IDX files.
    pub path: PathBuf,
    /// Number of training samples kept (all when unset).
    pub subset_size: Option<usize>,
    /// Number of test samples kept (all when unset).
    pub test_size: Option<usize>,
    /// `"iid"` or the number of classes per client.
    pub classes_per_client: PartitionScheme,
    pub synthetic_train: usize,
    pub synthetic_test: usize,
    pub synthetic_dim: usize,
    pub synthetic_classes: usize,
    pub synthetic_separation: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSource::Synthetic,
            path: PathBuf::from("data/mnist-5k"),
            subset_size: None,
            test_size: None,
            classes_per_client: PartitionScheme::Iid,
            synthetic_train: 2000,
            synthetic_test: 1000,
            synthetic_dim: 20,
            synthetic_classes: 10,
            synthetic_separation: 1.0,
        }
    }
}

/// Train and test sets for one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: Dataset,
    pub test: Dataset,
}

impl DataSection {
    /// Loads or generates the data. Synthetic data depends only on `seed`.
    pub fn load(&self, seed: u64) -> Result<ExperimentData, ConfigError> {
        match self.source {
            DataSource::Mnist => {
                let (train, test) = load_mnist(&self.path, self.subset_size, self.test_size)
                    .map_err(|e| ConfigError::Data(e.to_string()))?;
                Ok(ExperimentData { train, test })
            }
            DataSource::Synthetic => {
                // Train and test come from one draw so they share cluster centres.
                let total = self.synthetic_train + self.synthetic_test;
                let mut rng = stream(seed, Purpose::Dataset, &[]);
                let all = gaussian_mixture(
                    total,
                    self.synthetic_dim,
                    self.synthetic_classes,
                    self.synthetic_separation,
                    &mut rng,
                )
                .map_err(|e| ConfigError::Data(e.to_string()))?;
                let (train, test) = split(&all, self.synthetic_train).map_err(|e| ConfigError::Data(e.to_string()))?;
                let train = train.truncate(self.subset_size.unwrap_or(usize::MAX));
                let test = test.truncate(self.test_size.unwrap_or(usize::MAX));
                Ok(ExperimentData { train, test })
            }
        }
    }
}

fn split(all: &Dataset, at: usize) -> Result<(Dataset, Dataset), crate::fl::FlError> {
    let part = |range: std::ops::Range<usize>| {
        let features = range.clone().flat_map(|i| all.features(i).iter().copied()).collect();
        let labels = range.map(|i| all.label(i)).collect();
        Dataset::new(all.dim(), all.classes(), features, labels)
    };
    Ok((part(0..at)?, part(at..all.len())?))
}

/// A complete, validated-on-demand experiment description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub channel: ChannelSection,
    pub quantizer: QuantizerSection,
    pub code: CodeSection,
    pub data: DataSection,
}

impl ExperimentConfig {
    /// Settings used in the reference evaluation: 10 clients, 20 rounds of 5
    /// local steps with batch 1024 and step 0.01, 8-bit quantization, rate
    /// 0.6 at SNR 3, on the bundled MNIST subset.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let partition = match name {
            "paper-v" => PartitionScheme::Iid,
            "paper-v-5class" => PartitionScheme::ClassesPerClient(5),
            "paper-v-1class" => PartitionScheme::ClassesPerClient(1),
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        };
        let mut c = ExperimentConfig::default();
        c.data.source = DataSource::Mnist;
        c.data.subset_size = Some(2000);
        c.data.test_size = Some(1000);
        c.data.classes_per_client = partition;
        Ok(c)
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let c: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.experiment;
        if e.clients == 0 {
            return Err(invalid("experiment.clients", "must be at least 1"));
        }
        if e.rounds == 0 {
            return Err(invalid("experiment.rounds", "must be at least 1"));
        }
        if e.local_steps == 0 || e.batch_size == 0 || e.hidden == 0 {
            return Err(invalid("experiment", "local_steps, batch_size and hidden must be positive"));
        }
        if !(e.learning_rate > 0.0 && e.learning_rate.is_finite()) {
            return Err(invalid("experiment.learning_rate", format!("{} is not a positive number", e.learning_rate)));
        }
        if e.trials == 0 {
            return Err(invalid("experiment.trials", "must be at least 1"));
        }
        if e.retry_limit == 0 {
            return Err(invalid("experiment.retry_limit", "must be at least 1"));
        }
        if e.methods.is_empty() {
            return Err(invalid("experiment.methods", "no methods selected"));
        }
        self.channel.outage_probability()?;
        let q = &self.quantizer;
        if q.mode == QuantizerMode::Stochastic && !(1..=32).contains(&q.bits) {
            return Err(invalid("quantizer.bits", format!("{} is not in 1..=32", q.bits)));
        }
        if let Some(r) = q.range {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid("quantizer.range", format!("{r} is not a positive number")));
            }
        }
        if !(q.headroom > 0.0 && q.headroom.is_finite()) {
            return Err(invalid("quantizer.headroom", format!("{} is not a positive number", q.headroom)));
        }
        crate::galois::GaloisField::new(self.code.field).map_err(|e| invalid("code.field", e.to_string()))?;
        Ok(())
    }

    pub fn training(&self) -> TrainingHyperparams {
        TrainingHyperparams {
            local_steps: self.experiment.local_steps,
            batch_size: self.experiment.batch_size,
            learning_rate: self.experiment.learning_rate,
        }
    }

    /// Applies overrides, then re-validates.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        let e = &mut self.experiment;
        if let Some(v) = o.clients {
            e.clients = v;
        }
        if let Some(v) = o.rounds {
            e.rounds = v;
        }
        if let Some(v) = o.trials {
            e.trials = v;
        }
        if let Some(v) = o.seed {
            e.seed = v;
        }
        if let Some(v) = o.learning_rate {
            e.learning_rate = v;
        }
        if let Some(v) = &o.methods {
            e.methods = v.clone();
        }
        if let Some(v) = o.snr {
            self.channel.snr = v;
            self.channel.snr_db = None;
            self.channel.outage = None;
        }
        if let Some(v) = o.snr_db {
            self.channel.snr_db = Some(v);
            self.channel.outage = None;
        }
        if let Some(v) = o.outage {
            self.channel.outage = Some(v);
        }
        if let Some(v) = &o.data_path {
            self.data.path = v.clone();
        }
        if let Some(v) = o.partition {
            self.data.classes_per_client = v;
        }
        self.validate()
    }
}

/// Command-line overrides; `None` leaves the configured value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub clients: Option<usize>,
    pub rounds: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub methods: Option<Vec<Method>>,
    pub snr: Option<f64>,
    pub snr_db: Option<f64>,
    pub outage: Option<f64>,
    pub data_path: Option<PathBuf>,
    pub partition: Option<PartitionScheme>,
}

/// Reads `path` (or starts from `preset`), then applies `overrides`.
pub fn parse_config(
    path: Option<&Path>,
    preset: Option<&str>,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match (path, preset) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::Read { path: p.to_path_buf(), message: e.to_string() })?;
            let mut c = ExperimentConfig::from_toml_str(&text, p)?;
            if let Some(name) = preset {
                // A preset underneath a file: file keys win.
                let base = ExperimentConfig::preset(name)?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| ConfigError::Parse { path: p.to_path_buf(), message: e.to_string() })?;
                c = merge(base, table, p)?;
            }
            c
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    config.apply(overrides)?;
    Ok(config)
}

fn merge(base: ExperimentConfig, patch: toml::Table, origin: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut merged: toml::Table = toml::from_str(&base.to_toml_string()).expect("round-trips");
    for (section, value) in patch {
        match (merged.get_mut(&section), value) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => dst.extend(src),
            (_, value) => {
                merged.insert(section, value);
            }
        }
    }
    let text = toml::to_string(&merged).expect("table serializes");
    ExperimentConfig::from_toml_str(&text, origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_matches_the_reference_setup() {
        let c = ExperimentConfig::preset("paper-v").unwrap();
        let e = &c.experiment;
        assert_eq!((e.clients, e.rounds, e.local_steps, e.batch_size), (10, 20, 5, 1024));
        assert_eq!(e.learning_rate, 0.01);
        assert_eq!(c.quantizer.bits, 8);
        assert_eq!(c.channel.rate, 0.6);
        assert_eq!(c.data.classes_per_client, PartitionScheme::Iid);
        assert_eq!(
            ExperimentConfig::preset("paper-v-1class").unwrap().data.classes_per_client,
            PartitionScheme::ClassesPerClient(1)
        );
        assert!(matches!(ExperimentConfig::preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn snr_override_changes_only_the_snr() {
        let base = ExperimentConfig::preset("paper-v").unwrap();
        let mut c = base.clone();
        c.apply(&Overrides { snr: Some(5.0), ..Default::default() }).unwrap();
        assert_eq!(c.channel.snr, 5.0);
        let mut back = c.clone();
        back.channel.snr = base.channel.snr;
        assert_eq!(back, base);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = parse_config(Some(Path::new("/no/such/dir/exp.toml")), None, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("/no/such/dir/exp.toml"), "{err}");
    }

    #[test]
    fn toml_round_trip_and_field_errors() {
        let c = ExperimentConfig::preset("paper-v-5class").unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string(), Path::new("x")).unwrap();
        assert_eq!(back, c);
        let err = ExperimentConfig::from_toml_str("[experiment]\nclients = 0\n", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("experiment.clients"), "{err}");
        let err = ExperimentConfig::from_toml_str("[experiment]\nclient = 3\n", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("client"), "{err}");
    }

    #[test]
    fn partition_keys_accept_counts_and_iid() {
        let c = ExperimentConfig::from_toml_str("[data]\nclasses_per_client = 1\n", Path::new("x")).unwrap();
        assert_eq!(c.data.classes_per_client, PartitionScheme::ClassesPerClient(1));
        let c = ExperimentConfig::from_toml_str("[data]\nclasses_per_client = \"iid\"\n", Path::new("x")).unwrap();
        assert_eq!(c.data.classes_per_client, PartitionScheme::Iid);
    }

    #[test]
    fn file_over_preset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[experiment]\nrounds = 3\n").unwrap();
        let c = parse_config(Some(&p), Some("paper-v-1class"), &Overrides::default()).unwrap();
        assert_eq!(c.experiment.rounds, 3);
        assert_eq!(c.data.classes_per_client, PartitionScheme::ClassesPerClient(1));
    }

    #[test]
    fn synthetic_data_depends_only_on_the_seed() {
        let d = DataSection { synthetic_train: 50, synthetic_test: 20, ..Default::default() };
        let a = d.load(1).unwrap();
        let b = d.load(1).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!((a.train.len(), a.test.len()), (50, 20));
        assert_ne!(d.load(2).unwrap().train, a.train);
    }

    #[test]
    fn outage_resolution() {
        let ch = ChannelSection::default();
        assert!((ch.outage_probability().unwrap() - 0.194_452_239).abs() < 1e-9);
        let ch = ChannelSection { outage: Some(0.0), ..Default::default() };
        assert_eq!(ch.outage_probability().unwrap(), 0.0);
        assert!(ChannelSection { outage: Some(1.0), ..Default::default() }.outage_probability().is_err());
    }
}
