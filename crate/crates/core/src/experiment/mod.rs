//! The four-way experiment matrix: centralized and federated LR and MLP.

mod config;
mod report;
mod runner;

use thiserror::Error;

pub use config::{
    DataSource, ExperimentConfig, ExperimentName, Overrides, ResolvedExperiment, SplitSettings,
    SyntheticSource, CONFIG_VERSION,
};
pub use report::{
    correlation_report, emit_reports, FeatureCorrelation, SUMMARY_FILE, TIMINGS_FILE,
};
pub use runner::{
    prepare_data, run_experiment, run_matrix, run_prepared, scaler_gap, ExperimentReport,
    ExperimentRun, MatrixOutput, PreparedData,
};

use crate::dataset::DatasetError;
use crate::federation::FederationError;
use crate::metrics::MetricsError;
use crate::models::ModelError;
use crate::preprocess::PreprocessError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error("inconsistent preprocessing: {0}")]
    Consistency(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("{experiment}: {stage}: {source}")]
    Model {
        experiment: String,
        stage: &'static str,
        #[source]
        source: ModelError,
    },
    #[error("{experiment}: {source}")]
    Federation {
        experiment: String,
        #[source]
        source: FederationError,
    },
    #[error("{experiment}: evaluation: {source}")]
    Metrics {
        experiment: String,
        #[source]
        source: MetricsError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Machine-readable failure class, also used for the CLI exit code.
    pub fn category(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Dataset(
                DatasetError::Io { .. } | DatasetError::MissingFile { .. },
            )
            | ExperimentError::Io { .. } => "io",
            ExperimentError::Dataset(_)
            | ExperimentError::Preprocess(_)
            | ExperimentError::Consistency(_) => "data",
            ExperimentError::Model { .. } => "training",
            ExperimentError::Federation { source, .. } => match source {
                FederationError::InvalidConfig(_) => "config",
                FederationError::Io { .. } => "io",
                FederationError::Evaluation { .. } => "evaluation",
                FederationError::FeatureMismatch { .. } | FederationError::TestLeak { .. } => {
                    "data"
                }
                _ => "training",
            },
            ExperimentError::Metrics { .. } => "evaluation",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "data" => 3,
            "training" => 4,
            "evaluation" => 5,
            "io" => 6,
            _ => 1,
        }
    }
}
