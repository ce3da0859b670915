//! SMOTE oversampling of one client's local training data.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, RowKey};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority ratio after balancing, in (0, 1].
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_neighbors == 0 {
            return Err("k_neighbors must be at least 1".into());
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(format!(
                "target_ratio must be in (0, 1], got {}",
                self.target_ratio
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oversampled {
    /// Input rows in their original positions, followed by synthetic rows.
    pub data: LabeledDataset,
    pub n_synthetic: usize,
    /// Set when balancing was needed but could not be done.
    pub warning: Option<String>,
}

/// Minority label, minority count and majority count.
fn class_balance(ds: &LabeledDataset) -> (u8, usize, usize) {
    let pos = ds.positive_count();
    let neg = ds.n_rows() - pos;
    if pos <= neg {
        (1, pos, neg)
    } else {
        (0, neg, pos)
    }
}

/// True when minority/majority falls below `target_ratio`.
pub fn is_imbalanced(ds: &LabeledDataset, target_ratio: f64) -> bool {
    let (_, minority, majority) = class_balance(ds);
    majority > 0 && (minority as f64) < target_ratio * majority as f64
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` rows of the query's class nearest to it in Euclidean distance,
/// excluding the query; ties go to the lower row index. Fewer than `k`
/// candidates returns them all.
pub fn knn_minority(ds: &LabeledDataset, query_index: usize, k: usize) -> Vec<usize> {
    let label = ds.label(query_index);
    let candidates: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| i != query_index && ds.label(i) == label)
        .collect();
    nearest(ds, query_index, &candidates, k)
}

fn nearest(ds: &LabeledDataset, query: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let q = ds.row(query);
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&i| i != query)
        .map(|&i| (squared_distance(q, ds.row(i)), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Appends synthetic minority rows until the minority count reaches
/// `floor(target_ratio * majority)`.
///
/// Synthetic row `s` takes minority row `s mod m` as its parent (round
/// robin), a uniformly chosen neighbour among the parent's `k` nearest
/// minority rows, and interpolates `x + u (x_nn - x)` with a fresh
/// `u ~ U[0, 1)`. `k` shrinks to `m - 1` for small minorities; a single
/// minority row cannot be interpolated, so balancing is skipped with a
/// warning.
pub fn smote_oversample(ds: &LabeledDataset, cfg: &SmoteConfig) -> Oversampled {
    let unchanged = |warning: Option<String>| Oversampled {
        data: ds.clone(),
        n_synthetic: 0,
        warning,
    };
    if !is_imbalanced(ds, cfg.target_ratio) {
        return unchanged(None);
    }
    let (minority_label, minority, majority) = class_balance(ds);
    let target = (cfg.target_ratio * majority as f64).floor() as usize;
    let n_synthetic = target.saturating_sub(minority);
    if n_synthetic == 0 {
        return unchanged(None);
    }
    if minority < 2 {
        let msg =
            format!("SMOTE skipped: {minority} minority row(s), need at least 2 to interpolate");
        log::warn!("{msg}");
        return unchanged(Some(msg));
    }

    let minority_rows: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| ds.label(i) == minority_label)
        .collect();
    let k = cfg.k_neighbors.min(minority - 1).max(1);
    let neighbours: Vec<Vec<usize>> = minority_rows
        .par_iter()
        .map(|&i| nearest(ds, i, &minority_rows, k))
        .collect();

    let mut rng = seed::rng(cfg.seed);
    let mut out = ds.clone();
    let mut synthetic = vec![0.0; ds.n_features()];
    for s in 0..n_synthetic {
        let p = s % minority_rows.len();
        let parent = ds.row(minority_rows[p]);
        let nn = &neighbours[p];
        let other = ds.row(nn[rng.random_range(0..nn.len())]);
        let u: f64 = rng.random();
        for ((out, a), b) in synthetic.iter_mut().zip(parent).zip(other) {
            *out = a + u * (b - a);
        }
        let key = RowKey::Synthetic {
            code_module: Arc::from(ds.keys()[minority_rows[p]].code_module()),
            ordinal: s,
        };
        out.push_row(&synthetic, minority_label, key)
            .expect("synthetic row has the dataset's width");
    }
    Oversampled {
        data: out,
        n_synthetic,
        warning: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RegistrationKey;

    fn ds(rows: &[(Vec<f64>, u8)]) -> LabeledDataset {
        let d = rows[0].0.len();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let x = rows.iter().flat_map(|r| r.0.clone()).collect();
        let y = rows.iter().map(|r| r.1).collect();
        let keys = (0..rows.len())
            .map(|i| RowKey::Registration(RegistrationKey::new(i as i64, "AAA", "2013J")))
            .collect();
        LabeledDataset::new(names, x, y, keys).unwrap()
    }

    #[test]
    fn balanced_input_is_untouched() {
        let d = ds(&[
            (vec![0.0], 0),
            (vec![1.0], 1),
            (vec![2.0], 0),
            (vec![3.0], 1),
        ]);
        let out = smote_oversample(&d, &SmoteConfig::default());
        assert_eq!(out.data, d);
        assert_eq!(out.n_synthetic, 0);
    }

    #[test]
    fn two_point_interpolation_stays_on_segment() {
        let d = ds(&[
            (vec![0.0, 0.0], 1),
            (vec![1.0, 1.0], 1),
            (vec![5.0, 5.0], 0),
            (vec![6.0, 5.0], 0),
            (vec![7.0, 5.0], 0),
        ]);
        let cfg = SmoteConfig {
            k_neighbors: 1,
            ..Default::default()
        };
        let out = smote_oversample(&d, &cfg);
        assert_eq!(out.n_synthetic, 1);
        let row = out.data.row(5);
        assert_eq!(row[0], row[1]);
        assert!((0.0..=1.0).contains(&row[0]));
        assert_eq!(out.data.label(5), 1);
        assert!(out.data.keys()[5].is_synthetic());
    }

    #[test]
    fn ten_to_four_becomes_ten_to_ten() {
        let mut rows: Vec<_> = (0..10).map(|i| (vec![i as f64, 0.0], 0u8)).collect();
        rows.extend((0..4).map(|i| (vec![i as f64, 10.0], 1u8)));
        let out = smote_oversample(&ds(&rows), &SmoteConfig::default());
        assert_eq!(out.n_synthetic, 6);
        assert_eq!(out.data.n_rows(), 20);
        assert_eq!(out.data.positive_count(), 10);
    }

    #[test]
    fn majority_positive_class_is_handled() {
        let mut rows: Vec<_> = (0..6).map(|i| (vec![i as f64], 1u8)).collect();
        rows.extend((0..3).map(|i| (vec![-(i as f64)], 0u8)));
        let out = smote_oversample(&ds(&rows), &SmoteConfig::default());
        assert_eq!(out.data.n_rows() - out.data.positive_count(), 6);
        for i in 9..out.data.n_rows() {
            assert_eq!(out.data.label(i), 0);
            assert!(out.data.row(i)[0] <= 0.0 && out.data.row(i)[0] >= -2.0);
        }
    }

    #[test]
    fn single_minority_row_warns() {
        let d = ds(&[(vec![0.0], 1), (vec![1.0], 0), (vec![2.0], 0)]);
        let out = smote_oversample(&d, &SmoteConfig::default());
        assert_eq!(out.data, d);
        assert!(out.warning.is_some());
    }

    #[test]
    fn target_ratio_below_one() {
        let mut rows: Vec<_> = (0..10).map(|i| (vec![i as f64], 0u8)).collect();
        rows.extend((0..2).map(|i| (vec![i as f64 + 20.0], 1u8)));
        let cfg = SmoteConfig {
            target_ratio: 0.55,
            ..Default::default()
        };
        let out = smote_oversample(&ds(&rows), &cfg);
        assert_eq!(out.data.positive_count(), 5);
        // already at the ratio: no-op
        let cfg = SmoteConfig {
            target_ratio: 0.2,
            ..Default::default()
        };
        assert_eq!(smote_oversample(&ds(&rows), &cfg).n_synthetic, 0);
    }

    #[test]
    fn knn_examples() {
        let d = ds(&[
            (vec![0.0], 1),
            (vec![1.0], 1),
            (vec![5.0], 1),
            (vec![0.5], 0),
        ]);
        assert_eq!(knn_minority(&d, 0, 1), vec![1]);
        assert_eq!(knn_minority(&d, 0, 10), vec![1, 2]);
        let ties = ds(&[
            (vec![0.0], 1),
            (vec![1.0], 1),
            (vec![-1.0], 1),
            (vec![1.0], 1),
        ]);
        assert_eq!(knn_minority(&ties, 0, 1), vec![1]);
        assert_eq!(knn_minority(&ties, 0, 3), vec![1, 2, 3]);
    }

    #[test]
    fn config_validation() {
        assert!(SmoteConfig::default().validate().is_ok());
        assert!(SmoteConfig {
            k_neighbors: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SmoteConfig {
            target_ratio: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SmoteConfig {
            target_ratio: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
