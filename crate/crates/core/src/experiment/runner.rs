use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, ExperimentName, ResolvedExperiment};
use super::report::{correlation_report, FeatureCorrelation};
use super::ExperimentError;
use crate::balance::smote_oversample;
use crate::dataset::{
    build_dataset, generate_synthetic_corpus, load_oulad, summarize_demographics,
    DatasetFingerprint, DemographicCount, Diagnostics, LabeledDataset, SyntheticCorpusConfig,
};
use crate::federation::{run_federation, RoundResult};
use crate::metrics::{evaluate, MetricBundle, RocCurve};
use crate::models::{init_params, predict, train, ParamVector};
use crate::preprocess::{
    apply_scaler, federated_fit_scaler, fit_scaler, partition_by_module, split_train_test,
    ClientPartition, ScalerParams, SplitConfig,
};

/// Everything the four experiments share: one split, and scaler
/// statistics that agree between the pooled and the federated computation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Unscaled, before splitting.
    pub full: LabeledDataset,
    /// Pooled training rows, scaled with `scaler`.
    pub train: LabeledDataset,
    /// Test rows scaled with `scaler`, for centralized experiments.
    pub test: LabeledDataset,
    /// Training rows grouped by module and scaled with `federated_scaler`.
    pub partitions: Vec<ClientPartition>,
    /// Test rows scaled with `federated_scaler`.
    pub federated_test: LabeledDataset,
    /// Fitted on the pooled training rows.
    pub scaler: ScalerParams,
    /// Aggregated from per-module moments.
    pub federated_scaler: ScalerParams,
    pub diagnostics: Diagnostics,
    pub demographics: Vec<DemographicCount>,
    /// Resolved corpus settings when the data is synthetic.
    pub corpus: Option<SyntheticCorpusConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: ExperimentName,
    pub config: ResolvedExperiment,
    pub metrics: MetricBundle,
    pub roc_file: String,
    pub rounds_file: Option<String>,
    pub dataset: DatasetFingerprint,
    pub train: DatasetFingerprint,
    pub test: DatasetFingerprint,
    /// Centralized runs: last epoch's training objective.
    pub final_train_loss: Option<f64>,
    /// Centralized runs: rows added by SMOTE.
    pub n_synthetic: usize,
    /// Excluded from `summary.json`; see `timings.json`.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

/// A report with the artifacts it refers to.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub roc: RocCurve,
    pub rounds: Vec<RoundResult>,
    pub params: ParamVector,
}

#[derive(Debug, Clone)]
pub struct MatrixOutput {
    pub config: ExperimentConfig,
    pub data: PreparedData,
    pub correlations: Vec<FeatureCorrelation>,
    pub runs: Vec<ExperimentRun>,
    pub prepare_seconds: f64,
}

/// Load or generate, engineer features, split, and scale: pooled statistics
/// for centralized training, per-module moments for federated training.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, ExperimentError> {
    let (tables, mut diagnostics, corpus) = match &cfg.data {
        DataSource::OuladDir(dir) => {
            info!("loading OULAD tables from {}", dir.display());
            let (t, d) = load_oulad(dir)?;
            (t, d, None)
        }
        DataSource::Synthetic(s) => {
            let corpus = s.corpus_config(cfg.master_seed);
            info!(
                "generating synthetic corpus: {} modules x {} students, signal {}",
                corpus.n_modules, corpus.students_per_module, corpus.signal_strength
            );
            (
                generate_synthetic_corpus(&corpus)?,
                Diagnostics::default(),
                Some(corpus),
            )
        }
    };
    let full = build_dataset(&tables, &cfg.feature_options(), &mut diagnostics)?;
    for (table, reason, n) in diagnostics.iter() {
        warn!("{table}: skipped {n} row(s): {reason}");
    }
    info!(
        "dataset: {} rows, {} features, positive fraction {:.4}",
        full.n_rows(),
        full.n_features(),
        full.positive_fraction()
    );
    let split = SplitConfig {
        test_fraction: cfg.split.test_fraction,
        stratified: cfg.split.stratified,
        seed: cfg.split_seed(),
    };
    let (train_raw, test_raw) = split_train_test(&full, &split)?;
    let raw_partitions = partition_by_module(&train_raw);
    let scaler = fit_scaler(&train_raw)?;
    let federated_scaler = federated_fit_scaler(&raw_partitions)?;
    let gap = scaler_gap(&scaler, &federated_scaler);
    if gap > SCALER_TOLERANCE {
        return Err(ExperimentError::Consistency(format!(
            "pooled and federated scaler statistics differ by {gap:e} (relative)"
        )));
    }
    let partitions = raw_partitions
        .iter()
        .map(|p| Ok(p.with_data(apply_scaler(&federated_scaler, &p.data)?)))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(PreparedData {
        train: apply_scaler(&scaler, &train_raw)?,
        test: apply_scaler(&scaler, &test_raw)?,
        federated_test: apply_scaler(&federated_scaler, &test_raw)?,
        full,
        partitions,
        scaler,
        federated_scaler,
        diagnostics,
        demographics: summarize_demographics(&tables.student_info),
        corpus,
    })
}

const SCALER_TOLERANCE: f64 = 1e-9;

/// Largest elementwise relative difference between two scalers.
pub fn scaler_gap(a: &ScalerParams, b: &ScalerParams) -> f64 {
    a.mean
        .iter()
        .zip(&b.mean)
        .chain(a.std.iter().zip(&b.std))
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Runs one experiment against already prepared data.
pub fn run_prepared(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    name: ExperimentName,
) -> Result<ExperimentRun, ExperimentError> {
    let started = Instant::now();
    let resolved = cfg.resolve(name)?;
    let experiment = name.as_str().to_string();
    let model_err = |stage: &'static str| {
        let experiment = experiment.clone();
        move |source| ExperimentError::Model {
            experiment: experiment.clone(),
            stage,
            source,
        }
    };
    info!("running {name}");

    let mut final_train_loss = None;
    let mut n_synthetic = 0;
    let mut rounds = Vec::new();
    let mut test = &data.test;
    let (params, threshold) = match &resolved {
        ResolvedExperiment::Centralized {
            family,
            train: train_cfg,
            init_seed,
            smote,
            threshold,
        } => {
            let oversampled;
            let mut local = &data.train;
            if let Some(s) = smote {
                oversampled = smote_oversample(local, s);
                if let Some(w) = &oversampled.warning {
                    warn!("{name}: {w}");
                }
                n_synthetic = oversampled.n_synthetic;
                local = &oversampled.data;
            }
            let init =
                init_params(*family, local.n_features(), *init_seed).map_err(model_err("init"))?;
            let out = train(*family, local, train_cfg, &init).map_err(model_err("training"))?;
            final_train_loss = out.epoch_losses.last().copied();
            (out.params, *threshold)
        }
        ResolvedExperiment::Federated(f) => {
            test = &data.federated_test;
            rounds = run_federation(&data.partitions, test, f).map_err(|source| {
                ExperimentError::Federation {
                    experiment: experiment.clone(),
                    source,
                }
            })?;
            let last = rounds.last().expect("at least one round");
            (last.global_params.clone(), f.threshold)
        }
    };

    let scores = predict(&params, test).map_err(model_err("prediction"))?;
    let (metrics, roc) =
        evaluate(test.labels(), &scores, threshold).map_err(|source| ExperimentError::Metrics {
            experiment: experiment.clone(),
            source,
        })?;
    info!(
        "{name}: auc {:.4} accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4}",
        metrics.roc_auc, metrics.accuracy, metrics.precision, metrics.recall, metrics.f1
    );
    let report = ExperimentReport {
        name,
        config: resolved,
        metrics,
        roc_file: format!("roc_{name}.csv"),
        rounds_file: name.is_federated().then(|| format!("rounds_{name}.csv")),
        dataset: data.full.fingerprint(),
        train: data.train.fingerprint(),
        test: data.test.fingerprint(),
        final_train_loss,
        n_synthetic,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(ExperimentRun {
        report,
        roc,
        rounds,
        params,
    })
}

/// Prepares the data and runs a single experiment.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    name: ExperimentName,
) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    Ok(run_prepared(cfg, &data, name)?.report)
}

/// Prepares the data once and runs every configured experiment on it.
pub fn run_matrix(cfg: &ExperimentConfig) -> Result<MatrixOutput, ExperimentError> {
    cfg.validate()?;
    let started = Instant::now();
    let data = prepare_data(cfg)?;
    let correlations = correlation_report(&data.full)?;
    let prepare_seconds = started.elapsed().as_secs_f64();
    let runs = if cfg.parallel_experiments {
        cfg.experiments
            .par_iter()
            .map(|n| run_prepared(cfg, &data, *n))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        cfg.experiments
            .iter()
            .map(|n| run_prepared(cfg, &data, *n))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(MatrixOutput {
        config: cfg.clone(),
        data,
        correlations,
        runs,
        prepare_seconds,
    })
}
