//! Train/test splitting, standardization and per-module partitioning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabeledDataset;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("test_fraction must be in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("stratified split impossible: class {class} has {count} row(s), need at least 2")]
    StratifyImpossible { class: u8, count: usize },
    #[error("feature count mismatch: scaler has {expected}, dataset has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot fit a scaler on an empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            stratified: true,
            seed: 0,
        }
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Per-class test quotas by largest remainder, summing to
/// `round_half_up(fraction * N)`. Ties go to the lower class label.
fn stratified_quotas(class_sizes: [usize; 2], fraction: f64) -> [usize; 2] {
    let n: usize = class_sizes.iter().sum();
    let total = round_half_up(fraction * n as f64);
    let exact = class_sizes.map(|c| fraction * c as f64);
    let mut quotas = exact.map(|e| e.floor() as usize);
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total.saturating_sub(quotas.iter().sum());
    for &c in order.iter().cycle().take(2 * order.len()) {
        if left == 0 {
            break;
        }
        if quotas[c] < class_sizes[c] {
            quotas[c] += 1;
            left -= 1;
        }
    }
    quotas
}

/// Splits `ds` into `(train, test)` with `|test| = round_half_up(f * N)`.
///
/// Both halves keep the original row order. With `stratified` set, each
/// class contributes its largest-remainder share of the test rows.
pub fn split_train_test(
    ds: &LabeledDataset,
    cfg: &SplitConfig,
) -> Result<(LabeledDataset, LabeledDataset), PreprocessError> {
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(PreprocessError::InvalidFraction(cfg.test_fraction));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut test_idx = Vec::new();
    if cfg.stratified {
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &y) in ds.labels().iter().enumerate() {
            by_class[usize::from(y)].push(i);
        }
        for (class, rows) in by_class.iter().enumerate() {
            if rows.len() < 2 {
                return Err(PreprocessError::StratifyImpossible {
                    class: class as u8,
                    count: rows.len(),
                });
            }
        }
        let quotas = stratified_quotas([by_class[0].len(), by_class[1].len()], cfg.test_fraction);
        for (rows, quota) in by_class.iter_mut().zip(quotas) {
            rows.shuffle(&mut rng);
            test_idx.extend_from_slice(&rows[..quota]);
        }
    } else {
        let mut all: Vec<usize> = (0..ds.n_rows()).collect();
        all.shuffle(&mut rng);
        let total = round_half_up(cfg.test_fraction * ds.n_rows() as f64).min(ds.n_rows());
        test_idx.extend_from_slice(&all[..total]);
    }
    test_idx.sort_unstable();
    let mut is_test = vec![false; ds.n_rows()];
    for &i in &test_idx {
        is_test[i] = true;
    }
    let train_idx: Vec<usize> = (0..ds.n_rows()).filter(|&i| !is_test[i]).collect();
    Ok((ds.select(&train_idx), ds.select(&test_idx)))
}

/// Per-feature standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1 for (numerically) constant columns.
    pub std: Vec<f64>,
}

/// First and centered second moments of one client's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMoments {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from `mean`, per feature.
    pub m2: Vec<f64>,
}

impl ClientMoments {
    pub fn of(ds: &LabeledDataset) -> Self {
        let d = ds.n_features();
        let n = ds.n_rows();
        let mut mean = vec![0.0; d];
        for row in ds.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        if n > 0 {
            mean.iter_mut().for_each(|m| *m /= n as f64);
        }
        let mut m2 = vec![0.0; d];
        for row in ds.rows() {
            for ((s, v), m) in m2.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        Self { n, mean, m2 }
    }
}

fn finish(n: usize, mean: Vec<f64>, m2: &[f64]) -> ScalerParams {
    let std = mean
        .iter()
        .zip(m2)
        .map(|(m, s)| {
            let sd = (s / n as f64).sqrt();
            // Rounding in the mean leaves ~1e-17 residue on constant columns.
            if sd <= 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                sd
            }
        })
        .collect();
    ScalerParams { mean, std }
}

/// Mean and population standard deviation of every column of `train`.
pub fn fit_scaler(train: &LabeledDataset) -> Result<ScalerParams, PreprocessError> {
    if train.is_empty() {
        return Err(PreprocessError::EmptyDataset);
    }
    let d = train.n_features();
    let n = train.n_rows() as f64;
    let mut mean = vec![0.0; d];
    for row in train.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut m2 = vec![0.0; d];
    for row in train.rows() {
        for ((s, v), m) in m2.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    Ok(finish(train.n_rows(), mean, &m2))
}

/// Combines per-client moments into global scaler statistics without
/// pooling rows: `mean = Σ (n_k/N) mean_k`,
/// `M2 = Σ [M2_k + n_k (mean_k - mean)²]`.
pub fn aggregate_moments(moments: &[ClientMoments]) -> Result<ScalerParams, PreprocessError> {
    let total: usize = moments.iter().map(|m| m.n).sum();
    if total == 0 {
        return Err(PreprocessError::EmptyDataset);
    }
    let d = moments[0].mean.len();
    if let Some(bad) = moments.iter().find(|m| m.mean.len() != d) {
        return Err(PreprocessError::DimensionMismatch {
            expected: d,
            found: bad.mean.len(),
        });
    }
    let mut mean = vec![0.0; d];
    for m in moments.iter().filter(|m| m.n > 0) {
        let w = m.n as f64 / total as f64;
        for (g, v) in mean.iter_mut().zip(&m.mean) {
            *g += w * v;
        }
    }
    let mut m2 = vec![0.0; d];
    for m in moments.iter().filter(|m| m.n > 0) {
        for (j, s) in m2.iter_mut().enumerate() {
            let delta = m.mean[j] - mean[j];
            *s += m.m2[j] + m.n as f64 * delta * delta;
        }
    }
    Ok(finish(total, mean, &m2))
}

/// Scaler statistics from client moments; equal to [`fit_scaler`] on the
/// pooled rows up to rounding.
pub fn federated_fit_scaler(
    partitions: &[ClientPartition],
) -> Result<ScalerParams, PreprocessError> {
    let moments: Vec<ClientMoments> = partitions
        .iter()
        .map(|p| ClientMoments::of(&p.data))
        .collect();
    aggregate_moments(&moments)
}

/// `(x - mean) / std` elementwise; labels, keys and row order untouched.
pub fn apply_scaler(
    params: &ScalerParams,
    ds: &LabeledDataset,
) -> Result<LabeledDataset, PreprocessError> {
    if params.mean.len() != ds.n_features() {
        return Err(PreprocessError::DimensionMismatch {
            expected: params.mean.len(),
            found: ds.n_features(),
        });
    }
    let mut out = ds.clone();
    let d = ds.n_features();
    if d > 0 {
        for row in out.values_mut().chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&params.mean).zip(&params.std) {
                *v = (*v - m) / s;
            }
        }
    }
    Ok(out)
}

/// One institution's local training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientPartition {
    pub institution_id: String,
    pub data: LabeledDataset,
    pub n_k: usize,
}

impl ClientPartition {
    pub fn new(institution_id: impl Into<String>, data: LabeledDataset) -> Self {
        let n_k = data.n_rows();
        Self {
            institution_id: institution_id.into(),
            data,
            n_k,
        }
    }

    /// Same institution with its data replaced (e.g. after scaling).
    pub fn with_data(&self, data: LabeledDataset) -> Self {
        Self::new(self.institution_id.clone(), data)
    }
}

/// Groups rows by module code; partitions sorted by institution id.
pub fn partition_by_module(train: &LabeledDataset) -> Vec<ClientPartition> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, key) in train.keys().iter().enumerate() {
        groups.entry(key.code_module()).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(id, rows)| ClientPartition::new(id, train.select(&rows)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{RegistrationKey, RowKey};

    fn dataset(rows: &[(&str, f64, u8)]) -> LabeledDataset {
        let x = rows.iter().map(|r| r.1).collect();
        let y = rows.iter().map(|r| r.2).collect();
        let keys = rows
            .iter()
            .enumerate()
            .map(|(i, r)| RowKey::Registration(RegistrationKey::new(i as i64, r.0, "2013J")))
            .collect();
        LabeledDataset::new(vec!["f".into()], x, y, keys).unwrap()
    }

    fn balanced(n: usize) -> LabeledDataset {
        let rows: Vec<_> = (0..n).map(|i| ("AAA", i as f64, (i % 2) as u8)).collect();
        dataset(&rows)
    }

    #[test]
    fn quotas_use_largest_remainder() {
        assert_eq!(stratified_quotas([5, 5], 0.2), [1, 1]);
        // 0.2 * 22437 = 4487.4 -> 4487
        let q = stratified_quotas([15385, 7052], 0.2);
        assert_eq!(q.iter().sum::<usize>(), 4487);
        assert_eq!(q, [3077, 1410]);
    }

    #[test]
    fn exact_stratification_on_ten_rows() {
        let (train, test) = split_train_test(&balanced(10), &SplitConfig::default()).unwrap();
        assert_eq!(test.n_rows(), 2);
        assert_eq!(test.positive_count(), 1);
        assert_eq!(train.n_rows(), 8);
    }

    #[test]
    fn split_is_seeded() {
        let ds = balanced(200);
        let cfg = SplitConfig::default();
        let a = split_train_test(&ds, &cfg).unwrap();
        let b = split_train_test(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        let c = split_train_test(&ds, &SplitConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.1.keys(), c.1.keys());
    }

    #[test]
    fn unstratified_split_size() {
        let cfg = SplitConfig {
            stratified: false,
            ..Default::default()
        };
        let (train, test) = split_train_test(&balanced(101), &cfg).unwrap();
        assert_eq!(test.n_rows(), 20);
        assert_eq!(train.n_rows(), 81);
    }

    #[test]
    fn stratify_needs_two_rows_per_class() {
        let ds = dataset(&[("AAA", 0.0, 0), ("AAA", 1.0, 0), ("AAA", 2.0, 1)]);
        let err = split_train_test(&ds, &SplitConfig::default()).unwrap_err();
        assert_eq!(
            err,
            PreprocessError::StratifyImpossible { class: 1, count: 1 }
        );
        assert!(err.to_string().contains("class 1"));
    }

    #[test]
    fn invalid_fraction_rejected() {
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            let cfg = SplitConfig {
                test_fraction: f,
                ..Default::default()
            };
            assert!(split_train_test(&balanced(10), &cfg).is_err());
        }
    }

    #[test]
    fn scaler_uses_population_std() {
        let p = fit_scaler(&dataset(&[("AAA", 1.0, 0), ("AAA", 3.0, 1)])).unwrap();
        assert_eq!(p.mean, vec![2.0]);
        assert_eq!(p.std, vec![1.0]);
        let x = dataset(&[("AAA", 3.0, 0)]);
        assert_eq!(apply_scaler(&p, &x).unwrap().row(0), &[1.0]);
    }

    #[test]
    fn constant_column_gets_unit_std() {
        let p = fit_scaler(&dataset(&[
            ("AAA", 5.0, 0),
            ("AAA", 5.0, 1),
            ("AAA", 5.0, 0),
        ]))
        .unwrap();
        assert_eq!(p.mean, vec![5.0]);
        assert_eq!(p.std, vec![1.0]);
        let p = fit_scaler(&dataset(&[("AAA", 0.1, 0); 7])).unwrap();
        assert_eq!(p.std, vec![1.0]);
    }

    #[test]
    fn identity_scaler_is_identity_and_double_scaling_is_not() {
        let ds = dataset(&[("AAA", 1.0, 0), ("AAA", 4.0, 1), ("AAA", 10.0, 0)]);
        let id = ScalerParams {
            mean: vec![0.0],
            std: vec![1.0],
        };
        assert_eq!(apply_scaler(&id, &ds).unwrap(), ds);
        let p = ScalerParams {
            mean: vec![2.0],
            std: vec![3.0],
        };
        let once = apply_scaler(&p, &ds).unwrap();
        let twice = apply_scaler(&p, &once).unwrap();
        assert_ne!(once.values(), twice.values());
    }

    #[test]
    fn scaler_dimension_mismatch() {
        let p = ScalerParams {
            mean: vec![0.0, 0.0],
            std: vec![1.0, 1.0],
        };
        assert_eq!(
            apply_scaler(&p, &balanced(4)).unwrap_err(),
            PreprocessError::DimensionMismatch {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn empty_scaler_fit_rejected() {
        assert_eq!(
            fit_scaler(&LabeledDataset::empty(vec!["f".into()])).unwrap_err(),
            PreprocessError::EmptyDataset
        );
    }

    #[test]
    fn partitions_follow_module_codes() {
        let ds = dataset(&[
            ("BBB", 0.0, 0),
            ("AAA", 1.0, 1),
            ("BBB", 2.0, 1),
            ("CCC", 3.0, 0),
        ]);
        let parts = partition_by_module(&ds);
        let ids: Vec<_> = parts.iter().map(|p| p.institution_id.as_str()).collect();
        assert_eq!(ids, ["AAA", "BBB", "CCC"]);
        assert_eq!(parts[1].n_k, 2);
        assert_eq!(parts[1].data.column(0), vec![0.0, 2.0]);
        assert!(parts.iter().all(|p| p
            .data
            .keys()
            .iter()
            .all(|k| k.code_module() == p.institution_id)));
        assert_eq!(parts.iter().map(|p| p.n_k).sum::<usize>(), 4);
    }

    #[test]
    fn single_module_and_empty_partitioning() {
        let parts = partition_by_module(&balanced(6));
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].n_k, 6);
        assert!(partition_by_module(&LabeledDataset::empty(vec!["f".into()])).is_empty());
    }

    #[test]
    fn federated_scaler_weighted_mean() {
        let a = ClientPartition::new("AAA", dataset(&[("AAA", 0.0, 0), ("AAA", 0.0, 1)]));
        let b = ClientPartition::new("BBB", dataset(&[("BBB", 2.0, 0), ("BBB", 2.0, 1)]));
        let p = federated_fit_scaler(&[a, b]).unwrap();
        assert_eq!(p.mean, vec![1.0]);
        assert_eq!(p.std, vec![1.0]);
    }

    #[test]
    fn federated_scaler_single_partition_is_exact() {
        let ds = dataset(&[("AAA", 0.3, 0), ("AAA", 1.7, 1), ("AAA", -2.2, 0)]);
        let fed = federated_fit_scaler(&[ClientPartition::new("AAA", ds.clone())]).unwrap();
        assert_eq!(fed, fit_scaler(&ds).unwrap());
    }
}
