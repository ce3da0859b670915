//! Simulated FedAvg: one client per course module, a synchronous server
//! loop, and evaluation of every global model on the held-out test set.

use std::collections::HashSet;
use std::path::Path;

use log::{debug, info, warn};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{is_imbalanced, smote_oversample, SmoteConfig};
use crate::dataset::{LabeledDataset, RowKey};
use crate::metrics::{evaluate, MetricBundle, MetricsError};
use crate::models::{
    init_params, predict, train, Layout, ModelError, ModelFamily, ParamVector, TrainConfig,
};
use crate::preprocess::ClientPartition;
use crate::seed;

/// Local epochs per round when not configured.
pub const DEFAULT_LOCAL_EPOCHS: usize = 5;

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("invalid federation config: {0}")]
    InvalidConfig(String),
    #[error("federation needs at least one partition")]
    NoPartitions,
    #[error("nothing to aggregate")]
    NoUpdates,
    #[error("institution {institution}: {source}")]
    Institution {
        institution: String,
        #[source]
        source: ModelError,
    },
    #[error("institution {institution} sends layout {found}, expected {expected}")]
    LayoutMismatch {
        institution: String,
        expected: String,
        found: String,
    },
    #[error("institution {0} reports zero samples")]
    ZeroWeight(String),
    #[error("institution {institution} has features that differ from the test set")]
    FeatureMismatch { institution: String },
    #[error("{count} test row(s) also appear in institution {institution}'s training data")]
    TestLeak { institution: String, count: usize },
    #[error("evaluating round {round}: {source}")]
    Evaluation {
        round: usize,
        #[source]
        source: MetricsError,
    },
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub rounds: usize,
    /// Fraction C of institutions selected each round, in (0, 1].
    pub participation: f64,
    /// Local training per round; `epochs` is E.
    pub local_train: TrainConfig,
    /// Applied to LR clients whose local data is imbalanced.
    pub smote: Option<SmoteConfig>,
    pub model_family: ModelFamily,
    /// Drives initialization and client selection.
    pub seed: u64,
    /// Weight clients by their post-SMOTE row count instead of n_k.
    #[serde(default)]
    pub weight_post_smote: bool,
    pub threshold: f64,
}

impl FederationConfig {
    pub fn default_for(family: ModelFamily) -> Self {
        Self {
            rounds: 20,
            participation: 1.0,
            local_train: TrainConfig {
                epochs: DEFAULT_LOCAL_EPOCHS,
                ..TrainConfig::default_for(family)
            },
            smote: None,
            model_family: family,
            seed: 0,
            weight_post_smote: false,
            threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), FederationError> {
        let bad = |m: String| Err(FederationError::InvalidConfig(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return bad(format!(
                "participation must be in (0, 1], got {}",
                self.participation
            ));
        }
        if !self.threshold.is_finite() {
            return bad(format!("threshold must be finite, got {}", self.threshold));
        }
        self.local_train.validate()?;
        if let Some(s) = &self.smote {
            s.validate().map_err(FederationError::InvalidConfig)?;
        }
        Ok(())
    }
}

/// One institution's contribution to a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub institution_id: String,
    /// Aggregation weight: pre-SMOTE row count unless configured otherwise.
    pub n_k: usize,
    pub params: ParamVector,
    pub n_synthetic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: usize,
    pub global_params: ParamVector,
    pub metrics: MetricBundle,
    pub participating: Vec<String>,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Number of institutions picked per round: `max(1, round(C * n))`.
pub fn selection_size(n: usize, participation: f64) -> usize {
    round_half_up(participation * n as f64).clamp(1, n.max(1))
}

/// Samples `selection_size` ids without replacement and returns them sorted.
pub fn select_institutions(
    all: &[String],
    participation: f64,
    rng: &mut impl rand::Rng,
) -> Vec<String> {
    let k = selection_size(all.len(), participation);
    let mut chosen: Vec<String> = if k >= all.len() {
        all.to_vec()
    } else {
        index::sample(rng, all.len(), k)
            .into_iter()
            .map(|i| all[i].clone())
            .collect()
    };
    chosen.sort();
    chosen
}

/// Local work of one institution in round `round`, starting from `global`.
///
/// SMOTE runs first when configured, the family is LR and the local data is
/// imbalanced. Its seed and the shuffle seed are derived from the round and
/// the institution id.
pub fn institution_update(
    k: &ClientPartition,
    global: &ParamVector,
    cfg: &FederationConfig,
    round: usize,
) -> Result<ClientUpdate, FederationError> {
    let id = &k.institution_id;
    let expected = Layout::new(cfg.model_family, k.data.n_features());
    if global.layout() != expected {
        return Err(FederationError::LayoutMismatch {
            institution: id.clone(),
            expected: expected.tag(),
            found: global.layout_tag(),
        });
    }
    let unchanged = ClientUpdate {
        institution_id: id.clone(),
        n_k: k.n_k,
        params: global.clone(),
        n_synthetic: 0,
    };
    if cfg.local_train.epochs == 0 {
        return Ok(unchanged);
    }

    let mut n_synthetic = 0;
    let oversampled;
    let mut local = &k.data;
    if let Some(smote) = &cfg.smote {
        if cfg.model_family == ModelFamily::Lr && is_imbalanced(local, smote.target_ratio) {
            let s = SmoteConfig {
                seed: seed::round_seed(smote.seed, round, id),
                ..smote.clone()
            };
            oversampled = smote_oversample(local, &s);
            if let Some(w) = &oversampled.warning {
                warn!("round {round}, institution {id}: {w}");
            }
            n_synthetic = oversampled.n_synthetic;
            local = &oversampled.data;
        }
    }

    let train_cfg = TrainConfig {
        shuffle_seed: seed::round_seed(cfg.local_train.shuffle_seed, round, id),
        ..cfg.local_train.clone()
    };
    let out = train(cfg.model_family, local, &train_cfg, global).map_err(|source| {
        FederationError::Institution {
            institution: id.clone(),
            source,
        }
    })?;
    Ok(ClientUpdate {
        n_k: if cfg.weight_post_smote {
            local.n_rows()
        } else {
            k.n_k
        },
        params: out.params,
        n_synthetic,
        ..unchanged
    })
}

/// `Σ (n_k / Σ n) · w_k`, accumulated in ascending institution id order.
///
/// The accumulator starts from the first weighted term, so a single update
/// comes back bit-identical.
pub fn fedavg_aggregate(updates: &[ClientUpdate]) -> Result<ParamVector, FederationError> {
    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by(|a, b| a.institution_id.cmp(&b.institution_id));
    let first = *ordered.first().ok_or(FederationError::NoUpdates)?;
    let layout = first.params.layout();
    for u in &ordered {
        if u.params.layout() != layout {
            return Err(FederationError::LayoutMismatch {
                institution: u.institution_id.clone(),
                expected: layout.tag(),
                found: u.params.layout_tag(),
            });
        }
        if u.n_k == 0 {
            return Err(FederationError::ZeroWeight(u.institution_id.clone()));
        }
    }
    let total: usize = ordered.iter().map(|u| u.n_k).sum();
    let weight = |u: &ClientUpdate| u.n_k as f64 / total as f64;

    let w0 = weight(first);
    let mut acc: Vec<f64> = first.params.values().iter().map(|v| w0 * v).collect();
    for u in &ordered[1..] {
        let w = weight(u);
        for (a, v) in acc.iter_mut().zip(u.params.values()) {
            *a += w * v;
        }
    }
    Ok(ParamVector::new(layout, acc)?)
}

fn registration_keys(ds: &LabeledDataset) -> HashSet<&RowKey> {
    ds.keys().iter().filter(|k| !k.is_synthetic()).collect()
}

fn check_partitions(
    partitions: &[ClientPartition],
    test: &LabeledDataset,
) -> Result<(), FederationError> {
    if partitions.is_empty() {
        return Err(FederationError::NoPartitions);
    }
    let test_keys = registration_keys(test);
    for p in partitions {
        if p.data.feature_names() != test.feature_names() {
            return Err(FederationError::FeatureMismatch {
                institution: p.institution_id.clone(),
            });
        }
        let count = p
            .data
            .keys()
            .iter()
            .filter(|k| test_keys.contains(k))
            .count();
        if count > 0 {
            return Err(FederationError::TestLeak {
                institution: p.institution_id.clone(),
                count,
            });
        }
    }
    Ok(())
}

/// Test-set metrics of one parameter vector.
pub fn evaluate_params(
    params: &ParamVector,
    test: &LabeledDataset,
    threshold: f64,
    round: usize,
) -> Result<MetricBundle, FederationError> {
    let scores = predict(params, test)?;
    evaluate(test.labels(), &scores, threshold)
        .map(|(bundle, _)| bundle)
        .map_err(|source| FederationError::Evaluation { round, source })
}

/// The server loop: initialize, then per round select, update in parallel,
/// aggregate and evaluate. Returns one result per round.
pub fn run_federation(
    partitions: &[ClientPartition],
    test: &LabeledDataset,
    cfg: &FederationConfig,
) -> Result<Vec<RoundResult>, FederationError> {
    cfg.validate()?;
    check_partitions(partitions, test)?;
    let mut global = init_params(
        cfg.model_family,
        test.n_features(),
        seed::derive(cfg.seed, &[seed::INIT]),
    )?;
    let ids: Vec<String> = partitions
        .iter()
        .map(|p| p.institution_id.clone())
        .collect();
    let mut results = Vec::with_capacity(cfg.rounds);

    for round in 1..=cfg.rounds {
        let mut rng = seed::rng(seed::derive(
            cfg.seed,
            &[seed::SELECTION, &round.to_string()],
        ));
        let selected = select_institutions(&ids, cfg.participation, &mut rng);
        let chosen: Vec<&ClientPartition> = partitions
            .iter()
            .filter(|p| selected.binary_search(&p.institution_id).is_ok())
            .collect();
        let updates = chosen
            .par_iter()
            .map(|p| institution_update(p, &global, cfg, round))
            .collect::<Result<Vec<_>, _>>()?;
        for u in &updates {
            debug!(
                "round {round}: {} n_k={} synthetic={}",
                u.institution_id, u.n_k, u.n_synthetic
            );
        }
        global = fedavg_aggregate(&updates)?;
        let metrics = evaluate_params(&global, test, cfg.threshold, round)?;
        info!(
            "round {round}/{}: auc {:.4} recall {:.4}",
            cfg.rounds, metrics.roc_auc, metrics.recall
        );
        results.push(RoundResult {
            round,
            global_params: global.clone(),
            metrics,
            participating: selected,
        });
    }
    Ok(results)
}

/// Round history as CSV, one row per round.
pub fn write_round_history(results: &[RoundResult], path: &Path) -> Result<(), FederationError> {
    let io = |source: std::io::Error| FederationError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record([
        "round",
        "institutions",
        "accuracy",
        "precision",
        "recall",
        "f1",
        "roc_auc",
        "threshold",
        "support_pos",
        "support_neg",
        "tp",
        "fp",
        "tn",
        "fn",
    ])
    .map_err(|e| io(e.into()))?;
    for r in results {
        let m = &r.metrics;
        let c = &m.confusion;
        w.write_record([
            r.round.to_string(),
            r.participating.join(";"),
            m.accuracy.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.roc_auc.to_string(),
            m.threshold.to_string(),
            m.support_pos.to_string(),
            m.support_neg.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.tn.to_string(),
            c.fn_.to_string(),
        ])
        .map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

/// Writes `round_<t>.json` for every round's global parameters.
pub fn write_checkpoints(results: &[RoundResult], dir: &Path) -> Result<(), FederationError> {
    std::fs::create_dir_all(dir).map_err(|source| FederationError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for r in results {
        r.global_params
            .write_checkpoint(&dir.join(format!("round_{:03}.json", r.round)))?;
    }
    Ok(())
}
