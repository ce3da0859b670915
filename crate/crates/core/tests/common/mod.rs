#![allow(dead_code)]

pub mod tables;

use fedrisk::dataset::{LabeledDataset, RegistrationKey, RowKey};

/// Dataset with columns `f0..`, registration keys in module `module`
/// numbered from `first_id`.
pub fn dataset_in(module: &str, first_id: i64, rows: &[Vec<f64>], labels: &[u8]) -> LabeledDataset {
    let d = rows.first().map_or(0, Vec::len);
    LabeledDataset::new(
        (0..d).map(|j| format!("f{j}")).collect(),
        rows.concat(),
        labels.to_vec(),
        (0..rows.len())
            .map(|i| {
                RowKey::Registration(RegistrationKey::new(first_id + i as i64, module, "2013J"))
            })
            .collect(),
    )
    .unwrap()
}

pub fn dataset(rows: &[Vec<f64>], labels: &[u8]) -> LabeledDataset {
    dataset_in("AAA", 0, rows, labels)
}

/// Mann-Whitney pair count: P(score_pos > score_neg) with ties as 1/2.
pub fn pair_count_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
