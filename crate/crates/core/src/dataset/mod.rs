//! OULAD ingestion, target definition and feature engineering.

mod demographics;
mod features;
mod synthetic;
mod tables;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use demographics::{summarize_demographics, DemographicCount};
pub use features::{
    assemble_dataset, build_dataset, early_performance_features, engagement_quality_features,
    engagement_volume_features, feature_rows, label_students, EarlyPerformance, EngagementVolume,
    FeatureOptions, FeatureRow, BASE_FEATURES, UNKNOWN_ACTIVITY,
};
pub use synthetic::{generate_synthetic_corpus, module_code, SyntheticCorpusConfig};
pub use tables::{
    load_oulad, module_codes, write_oulad, AssessmentMetaRow, Diagnostics, RawTables,
    RegistrationKey, StudentAssessmentRow, StudentInfoRow, StudentVleRow, VleMetaRow, ASSESSMENTS,
    DEMOGRAPHIC_COLUMNS, STUDENT_ASSESSMENT, STUDENT_INFO, STUDENT_VLE, VLE,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing OULAD file {file} (looked at {path})")]
    MissingFile {
        file: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header mismatch in {table}: required column '{column}' not found")]
    HeaderMismatch { table: String, column: String },
    #[error("malformed CSV in {file}: {message}")]
    Csv { file: String, message: String },
    #[error("duplicate registration {0} in studentInfo.csv")]
    DuplicateRegistration(String),
    #[error("unknown final_result '{0}' (expected Pass, Distinction, Fail or Withdrawn)")]
    UnknownFinalResult(String),
    #[error("window_days must be positive, got {0}")]
    InvalidWindow(i64),
    #[error("no labeled registrations to assemble")]
    EmptyLabels,
    #[error("invalid synthetic corpus config: {0}")]
    InvalidSyntheticConfig(String),
    #[error("inconsistent dataset: {0}")]
    Shape(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Identity of one dataset row.
///
/// Rows created by oversampling carry a `Synthetic` key so they can never be
/// mistaken for, or joined against, a real registration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowKey {
    Registration(RegistrationKey),
    Synthetic {
        code_module: Arc<str>,
        ordinal: usize,
    },
}

impl RowKey {
    pub fn code_module(&self) -> &str {
        match self {
            RowKey::Registration(k) => &k.code_module,
            RowKey::Synthetic { code_module, .. } => code_module,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, RowKey::Synthetic { .. })
    }
}

impl From<RegistrationKey> for RowKey {
    fn from(k: RegistrationKey) -> Self {
        RowKey::Registration(k)
    }
}

/// Dense row-major feature matrix with binary labels (1 = at risk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    feature_names: Vec<String>,
    x: Vec<f64>,
    y: Vec<u8>,
    keys: Vec<RowKey>,
}

impl LabeledDataset {
    pub fn new(
        feature_names: Vec<String>,
        x: Vec<f64>,
        y: Vec<u8>,
        keys: Vec<RowKey>,
    ) -> Result<Self, DatasetError> {
        let d = feature_names.len();
        if y.len() != keys.len() || x.len() != y.len() * d {
            return Err(DatasetError::Shape(format!(
                "{} features, {} values, {} labels, {} keys",
                d,
                x.len(),
                y.len(),
                keys.len()
            )));
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(DatasetError::Shape(format!("label {bad} is not binary")));
        }
        Ok(Self {
            feature_names,
            x,
            y,
            keys,
        })
    }

    pub fn empty(feature_names: Vec<String>) -> Self {
        Self {
            feature_names,
            x: Vec::new(),
            y: Vec::new(),
            keys: Vec::new(),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.x[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero width
        let d = self.n_features().max(1);
        self.x.chunks_exact(d).take(self.n_rows())
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn label(&self, i: usize) -> u8 {
        self.y[i]
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.positive_count() as f64 / self.n_rows() as f64
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let d = self.n_features();
        let mut x = Vec::with_capacity(indices.len() * d);
        let mut y = Vec::with_capacity(indices.len());
        let mut keys = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
            keys.push(self.keys[i].clone());
        }
        Self {
            feature_names: self.feature_names.clone(),
            x,
            y,
            keys,
        }
    }

    pub fn push_row(&mut self, row: &[f64], label: u8, key: RowKey) -> Result<(), DatasetError> {
        if row.len() != self.n_features() || label > 1 {
            return Err(DatasetError::Shape(format!(
                "row of width {} (label {label}) pushed into {}-feature dataset",
                row.len(),
                self.n_features()
            )));
        }
        self.x.extend_from_slice(row);
        self.y.push(label);
        self.keys.push(key);
        Ok(())
    }

    /// Concatenates datasets with identical feature names, in order.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<Self, DatasetError> {
        let Some(first) = parts.first() else {
            return Err(DatasetError::Shape("nothing to concatenate".into()));
        };
        let mut out = Self::empty(first.feature_names.clone());
        for p in parts {
            if p.feature_names != out.feature_names {
                return Err(DatasetError::Shape("feature names differ".into()));
            }
            out.x.extend_from_slice(&p.x);
            out.y.extend_from_slice(&p.y);
            out.keys.extend(p.keys.iter().cloned());
        }
        Ok(out)
    }

    /// Row count, positive fraction and feature count.
    pub fn fingerprint(&self) -> DatasetFingerprint {
        DatasetFingerprint {
            rows: self.n_rows(),
            positive_fraction: self.positive_fraction(),
            features: self.n_features(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub rows: usize,
    pub positive_fraction: f64,
    pub features: usize,
}
