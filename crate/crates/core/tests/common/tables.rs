//! Hand-built raw tables for one module, AAA/2013J.

use std::sync::Arc;

use fedrisk::dataset::{
    AssessmentMetaRow, RawTables, RegistrationKey, StudentAssessmentRow, StudentInfoRow,
    StudentVleRow, VleMetaRow, DEMOGRAPHIC_COLUMNS,
};

pub fn key(id: i64) -> RegistrationKey {
    RegistrationKey::new(id, "AAA", "2013J")
}

pub fn info(id: i64, result: &str) -> StudentInfoRow {
    StudentInfoRow {
        key: key(id),
        demographics: vec![Some("F".into()); DEMOGRAPHIC_COLUMNS.len()],
        final_result: result.into(),
    }
}

pub fn click(id: i64, site: i64, date: i64, n: u64) -> StudentVleRow {
    StudentVleRow {
        key: key(id),
        id_site: site,
        date,
        sum_click: n,
    }
}

pub fn site(id_site: i64, activity: &str) -> VleMetaRow {
    VleMetaRow {
        id_site,
        code_module: Arc::from("AAA"),
        code_presentation: Arc::from("2013J"),
        activity_type: activity.into(),
    }
}

pub fn assessment(id: i64, deadline: Option<i64>) -> AssessmentMetaRow {
    AssessmentMetaRow {
        id_assessment: id,
        code_module: Arc::from("AAA"),
        code_presentation: Arc::from("2013J"),
        assessment_type: "TMA".into(),
        date: deadline,
        weight: Some(10.0),
    }
}

pub fn submission(
    assessment: i64,
    student: i64,
    day: Option<i64>,
    score: f64,
) -> StudentAssessmentRow {
    StudentAssessmentRow {
        id_assessment: assessment,
        id_student: student,
        date_submitted: day,
        is_banked: false,
        score: Some(score),
    }
}

/// Five registrations: Pass, Fail, Withdrawn, Distinction, and a Fail
/// with no activity at all. Student 4 clicks on a site missing from `vle`.
pub fn small_tables() -> RawTables {
    RawTables {
        student_info: vec![
            info(1, "Pass"),
            info(2, "Fail"),
            info(3, "Withdrawn"),
            info(4, "Distinction"),
            info(5, "Fail"),
        ],
        student_vle: vec![
            click(1, 10, 1, 5),
            click(1, 10, 1, 3),
            click(1, 11, 2, 2),
            click(2, 12, 0, 1),
            click(3, 10, 4, 9),
            click(4, 99, 7, 4),
        ],
        vle_meta: vec![site(10, "quiz"), site(11, "forum"), site(12, "oucontent")],
        assessments_meta: (1..=4).map(|i| assessment(i, Some(30 * i))).collect(),
        student_assessment: vec![
            submission(1, 1, Some(10), 80.0),
            submission(2, 1, Some(45), 60.0),
            submission(3, 1, Some(89), 70.0),
            submission(4, 1, Some(150), 10.0),
            submission(1, 2, Some(90), 55.0),
            submission(2, 4, Some(91), 99.0),
            submission(3, 4, None, 40.0),
        ],
    }
}
