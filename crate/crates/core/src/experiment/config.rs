//! Experiment configuration file (TOML, schema version 1).
//!
//! ```toml
//! version = 1
//! master_seed = 7
//! out_dir = "results"
//! experiments = ["centralized_lr", "federated_lr_smote"]
//!
//! [data.synthetic]          # or: [data] oulad_dir = "/path/to/oulad"
//! n_modules = 7
//! signal_strength = 1.5
//!
//! [split]
//! test_fraction = 0.2
//!
//! [overrides.federated_lr_smote]
//! rounds = 10
//! epochs = 3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::balance::SmoteConfig;
use crate::dataset::{FeatureOptions, SyntheticCorpusConfig};
use crate::federation::FederationConfig;
use crate::models::{ModelFamily, TrainConfig};
use crate::seed;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    CentralizedLr,
    CentralizedDnn,
    FederatedLrSmote,
    FederatedDnn,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 4] = [
        ExperimentName::CentralizedLr,
        ExperimentName::CentralizedDnn,
        ExperimentName::FederatedLrSmote,
        ExperimentName::FederatedDnn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::CentralizedLr => "centralized_lr",
            ExperimentName::CentralizedDnn => "centralized_dnn",
            ExperimentName::FederatedLrSmote => "federated_lr_smote",
            ExperimentName::FederatedDnn => "federated_dnn",
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            ExperimentName::CentralizedLr | ExperimentName::FederatedLrSmote => ModelFamily::Lr,
            ExperimentName::CentralizedDnn | ExperimentName::FederatedDnn => ModelFamily::Mlp,
        }
    }

    pub fn is_federated(&self) -> bool {
        matches!(
            self,
            ExperimentName::FederatedLrSmote | ExperimentName::FederatedDnn
        )
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|n| n.as_str()).collect();
                format!(
                    "unknown experiment '{s}' (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

/// Synthetic corpus settings; a missing seed is derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSource {
    pub n_modules: usize,
    pub students_per_module: usize,
    pub fail_rate: f64,
    pub signal_strength: f64,
    pub seed: Option<u64>,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        let d = SyntheticCorpusConfig::default();
        Self {
            n_modules: d.n_modules,
            students_per_module: d.students_per_module,
            fail_rate: d.fail_rate,
            signal_strength: d.signal_strength,
            seed: None,
        }
    }
}

impl SyntheticSource {
    pub fn corpus_config(&self, master_seed: u64) -> SyntheticCorpusConfig {
        SyntheticCorpusConfig {
            n_modules: self.n_modules,
            students_per_module: self.students_per_module,
            fail_rate: self.fail_rate,
            signal_strength: self.signal_strength,
            seed: self
                .seed
                .unwrap_or_else(|| seed::derive(master_seed, &[seed::CORPUS])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    OuladDir(PathBuf),
    Synthetic(SyntheticSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            stratified: true,
        }
    }
}

/// Per-experiment hyperparameter overrides. `epochs` is the local epoch
/// count E for federated experiments. `smote` toggles oversampling for the
/// LR experiments.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub l2_lambda: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub rounds: Option<usize>,
    pub participation: Option<f64>,
    pub smote: Option<bool>,
    pub smote_k: Option<usize>,
    pub smote_target_ratio: Option<f64>,
    pub weight_post_smote: Option<bool>,
}

impl Overrides {
    fn apply_train(&self, t: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { t.$field = v; } )* };
        }
        set!(
            learning_rate,
            epochs,
            batch_size,
            l2_lambda,
            adam_beta1,
            adam_beta2,
            adam_epsilon
        );
    }

    fn smote_config(&self, default_on: bool, seed: u64) -> Option<SmoteConfig> {
        if !self.smote.unwrap_or(default_on) {
            return None;
        }
        let d = SmoteConfig::default();
        Some(SmoteConfig {
            k_neighbors: self.smote_k.unwrap_or(d.k_neighbors),
            target_ratio: self.smote_target_ratio.unwrap_or(d.target_ratio),
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub data: DataSource,
    pub split: SplitSettings,
    pub experiments: Vec<ExperimentName>,
    pub overrides: BTreeMap<ExperimentName, Overrides>,
    pub include_demographics: bool,
    pub early_clicks_only: bool,
    pub window_days: i64,
    /// Decision threshold for accuracy, precision, recall and F1.
    pub threshold: f64,
    /// Not part of the reproducibility echo.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub master_seed: u64,
    /// Write per-round parameter checkpoints for federated experiments.
    pub checkpoints: bool,
    /// Run the experiments concurrently; results do not depend on it.
    #[serde(skip_serializing)]
    pub parallel_experiments: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            data: DataSource::Synthetic(SyntheticSource::default()),
            split: SplitSettings::default(),
            experiments: ExperimentName::ALL.to_vec(),
            overrides: BTreeMap::new(),
            include_demographics: false,
            early_clicks_only: false,
            window_days: 90,
            threshold: 0.5,
            out_dir: PathBuf::from("fedrisk-out"),
            master_seed: 0,
            checkpoints: false,
            parallel_experiments: false,
        }
    }
}

/// Fully resolved settings of one experiment, seeds included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedExperiment {
    Centralized {
        family: ModelFamily,
        train: TrainConfig,
        init_seed: u64,
        smote: Option<SmoteConfig>,
        threshold: f64,
    },
    Federated(FederationConfig),
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let s = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&s).map_err(|e| match e {
            ExperimentError::Config(m) => {
                ExperimentError::Config(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            window_days: self.window_days,
            early_clicks_only: self.early_clicks_only,
            include_demographics: self.include_demographics,
        }
    }

    pub fn split_seed(&self) -> u64 {
        seed::derive(self.master_seed, &[seed::SPLIT])
    }

    /// Hyperparameters and seeds for `name`, defaults plus overrides.
    pub fn resolve(&self, name: ExperimentName) -> Result<ResolvedExperiment, ExperimentError> {
        let family = name.family();
        let root = seed::derive(self.master_seed, &[name.as_str()]);
        let ov = self.overrides.get(&name).cloned().unwrap_or_default();
        let smote_seed = seed::derive(root, &[seed::SMOTE]);
        let shuffle_seed = seed::derive(root, &[seed::SHUFFLE]);
        let invalid = |e: String| ExperimentError::Config(format!("{name}: {e}"));

        let resolved = if name.is_federated() {
            if ov.smote == Some(true) && family == ModelFamily::Mlp {
                return Err(invalid("smote applies to logistic regression only".into()));
            }
            let mut f = FederationConfig::default_for(family);
            ov.apply_train(&mut f.local_train);
            f.local_train.shuffle_seed = shuffle_seed;
            f.rounds = ov.rounds.unwrap_or(f.rounds);
            f.participation = ov.participation.unwrap_or(f.participation);
            f.smote = ov.smote_config(family == ModelFamily::Lr, smote_seed);
            f.weight_post_smote = ov.weight_post_smote.unwrap_or(false);
            f.seed = root;
            f.threshold = self.threshold;
            f.validate().map_err(|e| invalid(e.to_string()))?;
            ResolvedExperiment::Federated(f)
        } else {
            if ov.rounds.is_some() || ov.participation.is_some() || ov.weight_post_smote.is_some() {
                return Err(invalid(
                    "rounds, participation and weight_post_smote are federated settings".into(),
                ));
            }
            if ov.smote == Some(true) && family == ModelFamily::Mlp {
                return Err(invalid("smote applies to logistic regression only".into()));
            }
            let mut train = TrainConfig::default_for(family);
            ov.apply_train(&mut train);
            train.shuffle_seed = shuffle_seed;
            train.validate().map_err(|e| invalid(e.to_string()))?;
            let smote = ov.smote_config(false, smote_seed);
            if let Some(s) = &smote {
                s.validate().map_err(invalid)?;
            }
            ResolvedExperiment::Centralized {
                family,
                train,
                init_seed: seed::derive(root, &[seed::INIT]),
                smote,
                threshold: self.threshold,
            }
        };
        Ok(resolved)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if self.experiments.is_empty() {
            return bad("experiments must list at least one experiment".into());
        }
        let mut seen = self.experiments.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.experiments.len() {
            return bad("experiments contains duplicates".into());
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad(format!(
                "split.test_fraction must be in (0, 1), got {}",
                self.split.test_fraction
            ));
        }
        if self.window_days <= 0 {
            return bad(format!(
                "window_days must be positive, got {}",
                self.window_days
            ));
        }
        if !self.threshold.is_finite() {
            return bad(format!("threshold must be finite, got {}", self.threshold));
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.corpus_config(self.master_seed)
                .validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        for name in &self.experiments {
            self.resolve(*name)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            version = 1
            master_seed = 7
            out_dir = "results"
            experiments = ["centralized_lr", "federated_lr_smote"]

            [data.synthetic]
            n_modules = 7
            signal_strength = 1.5

            [split]
            test_fraction = 0.2

            [overrides.federated_lr_smote]
            rounds = 10
            epochs = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.experiments.len(), 2);
        assert_eq!(cfg.out_dir, PathBuf::from("results"));
        match cfg.resolve(ExperimentName::FederatedLrSmote).unwrap() {
            ResolvedExperiment::Federated(f) => {
                assert_eq!((f.rounds, f.local_train.epochs), (10, 3));
                assert!(f.smote.is_some());
                assert_eq!(f.participation, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oulad_source() {
        let cfg = ExperimentConfig::from_toml_str("[data]\noulad_dir = \"/data/oulad\"\n").unwrap();
        assert_eq!(cfg.data, DataSource::OuladDir(PathBuf::from("/data/oulad")));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "experiments = []",
            "version = 2",
            "experiments = [\"centralized_lr\", \"centralized_lr\"]",
            "experiments = [\"nope\"]",
            "unknown_key = 1",
            "[overrides.centralized_lr]\nrounds = 3",
            "[overrides.federated_dnn]\nsmote = true",
            "[overrides.federated_lr_smote]\nparticipation = 0.0",
            "[split]\ntest_fraction = 1.0",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn defaults_resolve() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        match cfg.resolve(ExperimentName::CentralizedDnn).unwrap() {
            ResolvedExperiment::Centralized { train, smote, .. } => {
                assert_eq!(train.epochs, 20);
                assert!(smote.is_none());
            }
            other => panic!("unexpected {other:?}"),
        }
        match cfg.resolve(ExperimentName::FederatedDnn).unwrap() {
            ResolvedExperiment::Federated(f) => {
                assert_eq!((f.rounds, f.local_train.epochs), (20, 5));
                assert!(f.smote.is_none());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seeds_are_per_experiment() {
        let cfg = ExperimentConfig::default();
        let a = cfg.resolve(ExperimentName::CentralizedLr).unwrap();
        let b = cfg.resolve(ExperimentName::CentralizedDnn).unwrap();
        let seed_of = |r: &ResolvedExperiment| match r {
            ResolvedExperiment::Centralized { train, .. } => train.shuffle_seed,
            ResolvedExperiment::Federated(f) => f.local_train.shuffle_seed,
        };
        assert_ne!(seed_of(&a), seed_of(&b));
    }
}
