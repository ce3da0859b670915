//! Target labels and the three engineered feature families.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tables::{
    AssessmentMetaRow, Diagnostics, RawTables, RegistrationKey, StudentAssessmentRow,
    StudentInfoRow, StudentVleRow, VleMetaRow, DEMOGRAPHIC_COLUMNS, STUDENT_ASSESSMENT,
};
use super::{DatasetError, LabeledDataset, RowKey};

/// Leading columns of every assembled dataset, in order.
pub const BASE_FEATURES: [&str; 4] = [
    "average_early_score",
    "early_assessments_count",
    "total_clicks",
    "distinct_days_active",
];

/// Activity bucket for clicks on sites missing from `vle.csv`.
pub const UNKNOWN_ACTIVITY: &str = "unknown";

/// Numeric demographic columns; the rest are one-hot encoded.
const NUMERIC_DEMOGRAPHICS: [&str; 2] = ["num_of_prev_attempts", "studied_credits"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyPerformance {
    pub average_early_score: f64,
    pub early_assessments_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementVolume {
    pub total_clicks: u64,
    pub distinct_days_active: u32,
}

/// All engineered features of one registration, before flattening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub key: RegistrationKey,
    pub average_early_score: f64,
    pub early_assessments_count: u32,
    pub total_clicks: u64,
    pub distinct_days_active: u32,
    pub clicks_by_activity: BTreeMap<String, u64>,
}

/// Fail → 1, Pass/Distinction → 0, Withdrawn → excluded.
pub fn label_students(
    student_info: &[StudentInfoRow],
) -> Result<BTreeMap<RegistrationKey, u8>, DatasetError> {
    let mut labels = BTreeMap::new();
    for row in student_info {
        let label = match row.final_result.trim() {
            "Fail" => 1,
            "Pass" | "Distinction" => 0,
            "Withdrawn" => continue,
            other => return Err(DatasetError::UnknownFinalResult(other.to_string())),
        };
        labels.insert(row.key.clone(), label);
    }
    Ok(labels)
}

/// Mean score and count of submissions made on or before `window_days`.
///
/// The submission day is `date_submitted`, falling back to the assessment
/// deadline when absent; submissions with neither, or without a score, are
/// ignored. Registrations without any early submission are absent.
pub fn early_performance_features(
    assessments_meta: &[AssessmentMetaRow],
    student_assessment: &[StudentAssessmentRow],
    window_days: i64,
    diagnostics: &mut Diagnostics,
) -> Result<BTreeMap<RegistrationKey, EarlyPerformance>, DatasetError> {
    if window_days <= 0 {
        return Err(DatasetError::InvalidWindow(window_days));
    }
    let meta: HashMap<i64, &AssessmentMetaRow> = assessments_meta
        .iter()
        .map(|m| (m.id_assessment, m))
        .collect();

    let mut acc: BTreeMap<RegistrationKey, (f64, u32)> = BTreeMap::new();
    for sub in student_assessment {
        let Some(m) = meta.get(&sub.id_assessment) else {
            diagnostics.record(
                STUDENT_ASSESSMENT,
                "early features: unresolved id_assessment",
            );
            continue;
        };
        let Some(day) = sub.date_submitted.or(m.date) else {
            continue;
        };
        let Some(score) = sub.score else {
            continue;
        };
        if day > window_days {
            continue;
        }
        let key = RegistrationKey {
            id_student: sub.id_student,
            code_module: m.code_module.clone(),
            code_presentation: m.code_presentation.clone(),
        };
        let entry = acc.entry(key).or_insert((0.0, 0));
        entry.0 += score;
        entry.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(k, (sum, n))| {
            (
                k,
                EarlyPerformance {
                    average_early_score: sum / f64::from(n),
                    early_assessments_count: n,
                },
            )
        })
        .collect())
}

/// Total clicks and number of distinct active days per registration.
pub fn engagement_volume_features(
    student_vle: &[StudentVleRow],
) -> BTreeMap<RegistrationKey, EngagementVolume> {
    let mut acc: BTreeMap<&RegistrationKey, (u64, BTreeSet<i64>)> = BTreeMap::new();
    for row in student_vle {
        let entry = acc.entry(&row.key).or_default();
        entry.0 += row.sum_click;
        entry.1.insert(row.date);
    }
    acc.into_iter()
        .map(|(k, (clicks, days))| {
            (
                k.clone(),
                EngagementVolume {
                    total_clicks: clicks,
                    distinct_days_active: days.len() as u32,
                },
            )
        })
        .collect()
}

/// Clicks per activity type; unmapped sites go to [`UNKNOWN_ACTIVITY`].
pub fn engagement_quality_features(
    student_vle: &[StudentVleRow],
    vle_meta: &[VleMetaRow],
) -> BTreeMap<RegistrationKey, BTreeMap<String, u64>> {
    let site_type: HashMap<i64, &str> = vle_meta
        .iter()
        .map(|m| (m.id_site, m.activity_type.as_str()))
        .collect();
    let mut acc: BTreeMap<&RegistrationKey, BTreeMap<&str, u64>> = BTreeMap::new();
    for row in student_vle {
        let activity = site_type
            .get(&row.id_site)
            .copied()
            .unwrap_or(UNKNOWN_ACTIVITY);
        *acc.entry(&row.key)
            .or_default()
            .entry(activity)
            .or_insert(0) += row.sum_click;
    }
    acc.into_iter()
        .map(|(k, m)| {
            (
                k.clone(),
                m.into_iter().map(|(a, n)| (a.to_string(), n)).collect(),
            )
        })
        .collect()
}

/// One zero-imputed [`FeatureRow`] per labeled registration, in key order.
pub fn feature_rows(
    labels: &BTreeMap<RegistrationKey, u8>,
    early_perf: &BTreeMap<RegistrationKey, EarlyPerformance>,
    volume: &BTreeMap<RegistrationKey, EngagementVolume>,
    quality: &BTreeMap<RegistrationKey, BTreeMap<String, u64>>,
) -> Vec<FeatureRow> {
    labels
        .keys()
        .map(|key| {
            let early = early_perf.get(key);
            let vol = volume.get(key);
            FeatureRow {
                key: key.clone(),
                average_early_score: early.map_or(0.0, |e| e.average_early_score),
                early_assessments_count: early.map_or(0, |e| e.early_assessments_count),
                total_clicks: vol.map_or(0, |v| v.total_clicks),
                distinct_days_active: vol.map_or(0, |v| v.distinct_days_active),
                clicks_by_activity: quality.get(key).cloned().unwrap_or_default(),
            }
        })
        .collect()
}

/// Merges labels and feature families into a dense dataset.
///
/// Columns are [`BASE_FEATURES`] followed by `clicks_on_<type>` for every
/// activity type seen in `quality`, sorted. Missing entries are zero.
pub fn assemble_dataset(
    labels: &BTreeMap<RegistrationKey, u8>,
    early_perf: &BTreeMap<RegistrationKey, EarlyPerformance>,
    volume: &BTreeMap<RegistrationKey, EngagementVolume>,
    quality: &BTreeMap<RegistrationKey, BTreeMap<String, u64>>,
) -> Result<LabeledDataset, DatasetError> {
    if labels.is_empty() {
        return Err(DatasetError::EmptyLabels);
    }
    let activities: BTreeSet<&str> = quality
        .values()
        .flat_map(|m| m.keys().map(String::as_str))
        .collect();
    let mut names: Vec<String> = BASE_FEATURES.iter().map(|s| s.to_string()).collect();
    names.extend(activities.iter().map(|a| format!("clicks_on_{a}")));

    let rows = feature_rows(labels, early_perf, volume, quality);
    let mut x = Vec::with_capacity(rows.len() * names.len());
    let mut y = Vec::with_capacity(rows.len());
    let mut keys = Vec::with_capacity(rows.len());
    for row in rows {
        x.push(row.average_early_score);
        x.push(f64::from(row.early_assessments_count));
        x.push(row.total_clicks as f64);
        x.push(f64::from(row.distinct_days_active));
        for a in &activities {
            x.push(row.clicks_by_activity.get(*a).copied().unwrap_or(0) as f64);
        }
        y.push(labels[&row.key]);
        keys.push(RowKey::Registration(row.key));
    }
    LabeledDataset::new(names, x, y, keys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    pub window_days: i64,
    /// Restrict click features to the early window too.
    pub early_clicks_only: bool,
    /// Append demographic columns (one-hot for categorical ones).
    pub include_demographics: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            window_days: 90,
            early_clicks_only: false,
            include_demographics: false,
        }
    }
}

/// Full pipeline from raw tables to a model-ready dataset.
pub fn build_dataset(
    tables: &RawTables,
    opts: &FeatureOptions,
    diagnostics: &mut Diagnostics,
) -> Result<LabeledDataset, DatasetError> {
    let labels = label_students(&tables.student_info)?;
    let early = early_performance_features(
        &tables.assessments_meta,
        &tables.student_assessment,
        opts.window_days,
        diagnostics,
    )?;
    let early_clicks: Vec<StudentVleRow>;
    let clicks: &[StudentVleRow] = if opts.early_clicks_only {
        early_clicks = tables
            .student_vle
            .iter()
            .filter(|r| r.date <= opts.window_days)
            .cloned()
            .collect();
        &early_clicks
    } else {
        &tables.student_vle
    };
    let volume = engagement_volume_features(clicks);
    let quality = engagement_quality_features(clicks, &tables.vle_meta);
    let ds = assemble_dataset(&labels, &early, &volume, &quality)?;
    if opts.include_demographics {
        append_demographics(ds, &tables.student_info)
    } else {
        Ok(ds)
    }
}

/// Appends `demo_<column>=<category>` one-hot columns (categories sorted)
/// and the numeric demographic columns as `demo_<column>`.
fn append_demographics(
    ds: LabeledDataset,
    student_info: &[StudentInfoRow],
) -> Result<LabeledDataset, DatasetError> {
    let by_key: HashMap<&RegistrationKey, &StudentInfoRow> =
        student_info.iter().map(|r| (&r.key, r)).collect();
    let info_for = |k: &RowKey| match k {
        RowKey::Registration(k) => by_key.get(k).copied(),
        RowKey::Synthetic { .. } => None,
    };

    enum Encoding {
        OneHot(usize, Vec<String>),
        Numeric(usize),
    }
    let mut encodings = Vec::new();
    let mut names = ds.feature_names().to_vec();
    for (col, name) in DEMOGRAPHIC_COLUMNS.iter().enumerate() {
        if NUMERIC_DEMOGRAPHICS.contains(name) {
            names.push(format!("demo_{name}"));
            encodings.push(Encoding::Numeric(col));
        } else {
            let cats: BTreeSet<String> = ds
                .keys()
                .iter()
                .filter_map(|k| info_for(k).and_then(|r| r.demographics[col].clone()))
                .collect();
            names.extend(cats.iter().map(|c| format!("demo_{name}={c}")));
            encodings.push(Encoding::OneHot(col, cats.into_iter().collect()));
        }
    }

    let mut x = Vec::with_capacity(ds.n_rows() * names.len());
    for (i, key) in ds.keys().iter().enumerate() {
        x.extend_from_slice(ds.row(i));
        let info = info_for(key);
        for enc in &encodings {
            match enc {
                Encoding::Numeric(col) => x.push(
                    info.and_then(|r| r.demographics[*col].as_deref())
                        .and_then(|v| v.parse::<f64>().ok())
                        .unwrap_or(0.0),
                ),
                Encoding::OneHot(col, cats) => {
                    let value = info.and_then(|r| r.demographics[*col].as_deref());
                    x.extend(
                        cats.iter()
                            .map(|c| f64::from(u8::from(Some(c.as_str()) == value))),
                    );
                }
            }
        }
    }
    LabeledDataset::new(names, x, ds.labels().to_vec(), ds.keys().to_vec())
}
