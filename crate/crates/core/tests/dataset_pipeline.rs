//! Raw tables to labeled dataset: labels, feature families, imputation,
//! column order and the synthetic corpus round trip.

mod common;

use common::tables::{info, key, small_tables, submission};
use fedrisk::dataset::{
    build_dataset, early_performance_features, engagement_quality_features,
    engagement_volume_features, generate_synthetic_corpus, label_students, load_oulad,
    module_codes, summarize_demographics, write_oulad, Diagnostics, FeatureOptions, StudentInfoRow,
    SyntheticCorpusConfig, BASE_FEATURES, DEMOGRAPHIC_COLUMNS,
};

#[test]
fn withdrawn_registrations_are_excluded() {
    let labels = label_students(&small_tables().student_info).unwrap();
    assert_eq!(labels.len(), 4);
    assert!(!labels.contains_key(&key(3)));
    assert_eq!(
        (labels[&key(2)], labels[&key(4)], labels[&key(1)]),
        (1, 0, 0)
    );

    let ds = build_dataset(
        &small_tables(),
        &FeatureOptions::default(),
        &mut Diagnostics::default(),
    )
    .unwrap();
    assert_eq!(ds.n_rows(), 4);
    assert!(!ds
        .keys()
        .iter()
        .any(|k| matches!(k, fedrisk::dataset::RowKey::Registration(r) if r.id_student == 3)));

    let all_withdrawn: Vec<StudentInfoRow> = (1..4).map(|i| info(i, "Withdrawn")).collect();
    assert!(label_students(&all_withdrawn).unwrap().is_empty());
    assert!(label_students(&[info(1, "Incomplete")])
        .unwrap_err()
        .to_string()
        .contains("Incomplete"));
}

#[test]
fn early_window_is_inclusive_at_day_90() {
    let t = small_tables();
    let early = early_performance_features(
        &t.assessments_meta,
        &t.student_assessment,
        90,
        &mut Diagnostics::default(),
    )
    .unwrap();
    // days 10, 45, 89 → mean of 80, 60, 70; day 150 outside
    let s1 = early[&key(1)];
    assert_eq!(
        (s1.average_early_score, s1.early_assessments_count),
        (70.0, 3)
    );
    // exactly day 90 counts
    let s2 = early[&key(2)];
    assert_eq!(
        (s2.average_early_score, s2.early_assessments_count),
        (55.0, 1)
    );
    // day 91 does not; the undated submission falls back to its deadline (day 90)
    let s4 = early[&key(4)];
    assert_eq!(
        (s4.average_early_score, s4.early_assessments_count),
        (40.0, 1)
    );

    let only_91 = [submission(1, 7, Some(91), 50.0)];
    let e = early_performance_features(
        &t.assessments_meta,
        &only_91,
        90,
        &mut Diagnostics::default(),
    )
    .unwrap();
    assert!(e.is_empty());
}

#[test]
fn engagement_examples() {
    let t = small_tables();
    let v = engagement_volume_features(&t.student_vle);
    assert_eq!(
        (v[&key(1)].total_clicks, v[&key(1)].distinct_days_active),
        (10, 2)
    );
    assert_eq!(
        (v[&key(2)].total_clicks, v[&key(2)].distinct_days_active),
        (1, 1)
    );
    assert!(!v.contains_key(&key(5)));

    let q = engagement_quality_features(&t.student_vle, &t.vle_meta);
    assert_eq!(q[&key(1)]["quiz"], 8);
    assert_eq!(q[&key(1)]["forum"], 2);
    assert_eq!(q[&key(4)]["unknown"], 4);
}

#[test]
fn missing_families_are_zero_imputed() {
    let ds = build_dataset(
        &small_tables(),
        &FeatureOptions::default(),
        &mut Diagnostics::default(),
    )
    .unwrap();
    let row = ds
        .keys()
        .iter()
        .position(|k| matches!(k, fedrisk::dataset::RowKey::Registration(r) if r.id_student == 5))
        .unwrap();
    assert!(ds.row(row).iter().all(|&v| v == 0.0));
    assert!(ds.values().iter().all(|v| v.is_finite()));
}

#[test]
fn column_order_is_fixed() {
    let ds = build_dataset(
        &small_tables(),
        &FeatureOptions::default(),
        &mut Diagnostics::default(),
    )
    .unwrap();
    let expected: Vec<String> = BASE_FEATURES
        .iter()
        .map(|s| s.to_string())
        .chain(["forum", "oucontent", "quiz", "unknown"].map(|a| format!("clicks_on_{a}")))
        .collect();
    assert_eq!(ds.feature_names(), expected.as_slice());

    // reversing every input table changes nothing
    let mut reversed = small_tables();
    reversed.student_info.reverse();
    reversed.student_vle.reverse();
    reversed.vle_meta.reverse();
    reversed.assessments_meta.reverse();
    reversed.student_assessment.reverse();
    let again = build_dataset(
        &reversed,
        &FeatureOptions::default(),
        &mut Diagnostics::default(),
    )
    .unwrap();
    assert_eq!(again, ds);
}

#[test]
fn quality_columns_sum_to_total_clicks() {
    let tables = generate_synthetic_corpus(&SyntheticCorpusConfig {
        students_per_module: 40,
        ..SyntheticCorpusConfig::default()
    })
    .unwrap();
    let ds = build_dataset(
        &tables,
        &FeatureOptions::default(),
        &mut Diagnostics::default(),
    )
    .unwrap();
    let total = ds
        .feature_names()
        .iter()
        .position(|n| n == "total_clicks")
        .unwrap();
    let click_cols: Vec<usize> = (0..ds.n_features())
        .filter(|&j| ds.feature_names()[j].starts_with("clicks_on_"))
        .collect();
    assert!(!ds.feature_names().iter().any(|n| n == "clicks_on_unknown"));
    for row in ds.rows() {
        assert_eq!(click_cols.iter().map(|&j| row[j]).sum::<f64>(), row[total]);
    }
}

#[test]
fn longer_window_never_counts_fewer_assessments() {
    let tables = generate_synthetic_corpus(&SyntheticCorpusConfig {
        students_per_module: 40,
        ..SyntheticCorpusConfig::default()
    })
    .unwrap();
    let mut d = Diagnostics::default();
    let short = early_performance_features(
        &tables.assessments_meta,
        &tables.student_assessment,
        90,
        &mut d,
    )
    .unwrap();
    let long = early_performance_features(
        &tables.assessments_meta,
        &tables.student_assessment,
        180,
        &mut d,
    )
    .unwrap();
    for (k, e) in &short {
        assert!(e.early_assessments_count <= long[k].early_assessments_count);
    }
}

#[test]
fn synthetic_corpus_shape_and_determinism() {
    let cfg = SyntheticCorpusConfig {
        n_modules: 7,
        students_per_module: 100,
        fail_rate: 0.3,
        signal_strength: 1.0,
        seed: 3,
    };
    let t = generate_synthetic_corpus(&cfg).unwrap();
    assert_eq!(t.student_info.len(), 700);
    assert_eq!(module_codes(&t).len(), 7);
    assert_eq!(generate_synthetic_corpus(&cfg).unwrap(), t);
}

#[test]
fn synthetic_csvs_are_byte_identical_and_reload_to_the_same_dataset() {
    let cfg = SyntheticCorpusConfig {
        students_per_module: 30,
        seed: 11,
        ..SyntheticCorpusConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_oulad(&generate_synthetic_corpus(&cfg).unwrap(), a.path()).unwrap();
    write_oulad(&generate_synthetic_corpus(&cfg).unwrap(), b.path()).unwrap();
    for file in [
        "studentInfo.csv",
        "studentVle.csv",
        "vle.csv",
        "assessments.csv",
        "studentAssessment.csv",
    ] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    let (loaded, diag) = load_oulad(a.path()).unwrap();
    assert!(diag.is_empty(), "{diag:?}");
    let opts = FeatureOptions::default();
    let direct = build_dataset(
        &generate_synthetic_corpus(&cfg).unwrap(),
        &opts,
        &mut Diagnostics::default(),
    )
    .unwrap();
    let reloaded = build_dataset(&loaded, &opts, &mut Diagnostics::default()).unwrap();
    assert_eq!(direct, reloaded);
}

#[test]
fn zero_signal_positive_fraction_matches_fail_rate() {
    for seed in 0..3 {
        let cfg = SyntheticCorpusConfig {
            signal_strength: 0.0,
            seed,
            ..SyntheticCorpusConfig::default()
        };
        let ds = build_dataset(
            &generate_synthetic_corpus(&cfg).unwrap(),
            &FeatureOptions::default(),
            &mut Diagnostics::default(),
        )
        .unwrap();
        let n = ds.n_rows() as f64;
        let r = cfg.fail_rate;
        let bound = 3.0 * (r * (1.0 - r) / n).sqrt();
        assert!(
            (ds.positive_fraction() - r).abs() <= bound,
            "seed {seed}: {}",
            ds.positive_fraction()
        );
    }
}

#[test]
fn demographic_percentages_sum_to_100() {
    let t = generate_synthetic_corpus(&SyntheticCorpusConfig::default()).unwrap();
    let summary = summarize_demographics(&t.student_info);
    for col in DEMOGRAPHIC_COLUMNS {
        let rows: Vec<_> = summary.iter().filter(|d| d.column == col).collect();
        assert!(!rows.is_empty(), "{col}");
        let pct: f64 = rows.iter().map(|d| d.percentage).sum();
        let count: usize = rows.iter().map(|d| d.count).sum();
        assert!((pct - 100.0).abs() <= 0.01);
        assert_eq!(count, t.student_info.len());
    }
    assert!(summarize_demographics(&[]).is_empty());
}
