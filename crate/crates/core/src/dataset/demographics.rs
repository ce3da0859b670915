use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tables::{StudentInfoRow, DEMOGRAPHIC_COLUMNS};

/// Category label used for missing demographic values.
const MISSING: &str = "(missing)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicCount {
    pub column: String,
    pub category: String,
    pub count: usize,
    pub percentage: f64,
}

/// Per-column category counts over every row of `studentInfo`.
///
/// Columns appear in file order, categories sorted within a column.
pub fn summarize_demographics(student_info: &[StudentInfoRow]) -> Vec<DemographicCount> {
    if student_info.is_empty() {
        return Vec::new();
    }
    let total = student_info.len() as f64;
    let mut out = Vec::new();
    for (col, name) in DEMOGRAPHIC_COLUMNS.iter().enumerate() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for row in student_info {
            let cat = row.demographics[col].as_deref().unwrap_or(MISSING);
            *counts.entry(cat).or_insert(0) += 1;
        }
        out.extend(counts.into_iter().map(|(cat, n)| DemographicCount {
            column: name.to_string(),
            category: cat.to_string(),
            count: n,
            percentage: 100.0 * n as f64 / total,
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RegistrationKey;

    fn row(id: i64, gender: &str) -> StudentInfoRow {
        let mut demographics = vec![None; DEMOGRAPHIC_COLUMNS.len()];
        demographics[0] = Some(gender.to_string());
        StudentInfoRow {
            key: RegistrationKey::new(id, "AAA", "2013J"),
            demographics,
            final_result: "Pass".into(),
        }
    }

    #[test]
    fn two_genders_split_evenly() {
        let s = summarize_demographics(&[row(1, "M"), row(2, "F")]);
        let gender: Vec<_> = s.iter().filter(|c| c.column == "gender").collect();
        assert_eq!(gender.len(), 2);
        for c in gender {
            assert_eq!(c.count, 1);
            assert_eq!(c.percentage, 50.0);
        }
        // missing values form their own category
        let region: Vec<_> = s.iter().filter(|c| c.column == "region").collect();
        assert_eq!(region.len(), 1);
        assert_eq!(region[0].category, MISSING);
        assert_eq!(region[0].count, 2);
    }

    #[test]
    fn empty_table_gives_empty_summary() {
        assert!(summarize_demographics(&[]).is_empty());
    }

    #[test]
    fn percentages_sum_to_hundred_per_column() {
        let rows: Vec<_> = (0..7)
            .map(|i| row(i, ["M", "F", "X"][i as usize % 3]))
            .collect();
        let s = summarize_demographics(&rows);
        for col in DEMOGRAPHIC_COLUMNS {
            let sum: f64 = s
                .iter()
                .filter(|c| c.column == col)
                .map(|c| c.percentage)
                .sum();
            let n: usize = s.iter().filter(|c| c.column == col).map(|c| c.count).sum();
            assert!((sum - 100.0).abs() < 0.01);
            assert_eq!(n, 7);
        }
    }
}
