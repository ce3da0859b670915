//! Synthetic OULAD-shaped corpora with a planted at-risk signal.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tables::{
    AssessmentMetaRow, RawTables, RegistrationKey, StudentAssessmentRow, StudentInfoRow,
    StudentVleRow, VleMetaRow,
};
use super::DatasetError;
use crate::seed;

const PRESENTATIONS: [&str; 2] = ["2013J", "2014J"];
const TMA_DEADLINES: [i64; 5] = [19, 54, 89, 124, 159];
const EXAM_DAY: i64 = 230;
const ACTIVITIES: [(&str, f64); 8] = [
    ("forum", 0.20),
    ("homepage", 0.15),
    ("oucontent", 0.30),
    ("ouwiki", 0.03),
    ("quiz", 0.10),
    ("resource", 0.10),
    ("subpage", 0.07),
    ("url", 0.05),
];
const SITES_PER_ACTIVITY: usize = 2;

/// Mean and spread of a student's latent score level.
const SCORE_MEAN: f64 = 65.0;
const SCORE_SD: f64 = 15.0;
/// Per-assessment noise around the student's level.
const SCORE_NOISE_SD: f64 = 8.0;
const BASE_ACTIVE_DAYS: f64 = 40.0;
const ENGAGEMENT_SCALE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub n_modules: usize,
    pub students_per_module: usize,
    pub fail_rate: f64,
    /// Downward shift, in standard deviations, of at-risk students' latent
    /// score level and engagement.
    pub signal_strength: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            n_modules: 7,
            students_per_module: 300,
            fail_rate: 0.3,
            signal_strength: 1.5,
            seed: 0,
        }
    }
}

impl SyntheticCorpusConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidSyntheticConfig(m));
        if self.n_modules == 0 {
            return bad("n_modules must be at least 1".into());
        }
        if self.students_per_module < 10 {
            return bad(format!(
                "students_per_module must be at least 10, got {}",
                self.students_per_module
            ));
        }
        if !(self.fail_rate > 0.0 && self.fail_rate < 1.0) {
            return bad(format!(
                "fail_rate must be in (0, 1), got {}",
                self.fail_rate
            ));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad(format!(
                "signal_strength must be finite and non-negative, got {}",
                self.signal_strength
            ));
        }
        Ok(())
    }
}

/// `AAA`, `BBB`, ... for the first 26 modules, then `M026`, `M027`, ...
pub fn module_code(i: usize) -> String {
    if i < 26 {
        let c = char::from(b'A' + i as u8);
        std::iter::repeat_n(c, 3).collect()
    } else {
        format!("M{i:03}")
    }
}

fn pick<'a, R: Rng>(rng: &mut R, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

fn demographics<R: Rng>(rng: &mut R) -> Vec<Option<String>> {
    let imd = if rng.random::<f64>() < 0.03 {
        None
    } else {
        Some(pick(
            rng,
            &[
                "0-10%", "10-20", "20-30%", "30-40%", "40-50%", "50-60%", "60-70%", "70-80%",
                "80-90%", "90-100%",
            ],
        ))
    };
    vec![
        Some(pick(rng, &["F", "M"])),
        Some(pick(
            rng,
            &[
                "East Anglian Region",
                "London Region",
                "Scotland",
                "South Region",
                "Wales",
            ],
        )),
        Some(pick(
            rng,
            &[
                "A Level or Equivalent",
                "HE Qualification",
                "Lower Than A Level",
                "No Formal quals",
            ],
        )),
        imd,
        Some(pick(rng, &["0-35", "0-35", "35-55", "55<="])),
        Some(pick(rng, &["0", "0", "0", "1", "2"])),
        Some(pick(rng, &["60", "90", "120"])),
        Some(pick(rng, &["N", "N", "N", "Y"])),
    ]
    .into_iter()
    .map(|v| v.map(str::to_string))
    .collect()
}

fn draw_activity<R: Rng>(rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, (_, w)) in ACTIVITIES.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    ACTIVITIES.len() - 1
}

/// Generates an internally consistent five-table corpus.
///
/// Every registration's latent score level is `N(65 - 15*s*y, 15)` and its
/// engagement level `N(-s*y, 1)`, where `s` is `signal_strength` and `y` the
/// at-risk label; with `s = 0` both classes share one distribution.
pub fn generate_synthetic_corpus(cfg: &SyntheticCorpusConfig) -> Result<RawTables, DatasetError> {
    cfg.validate()?;
    let mut rng = seed::rng(seed::derive(cfg.seed, &[seed::CORPUS]));
    let mut t = RawTables::default();
    let mut next_student = 100_000i64;
    let mut next_assessment = 1_000i64;
    let mut next_site = 500_000i64;

    for m in 0..cfg.n_modules {
        let code: Arc<str> = Arc::from(module_code(m));
        // (presentation, assessment ids with deadlines, site ids per activity)
        let mut layouts = Vec::new();
        for p in PRESENTATIONS {
            let pres: Arc<str> = Arc::from(p);
            let mut assessments = Vec::new();
            for &deadline in &TMA_DEADLINES {
                t.assessments_meta.push(AssessmentMetaRow {
                    id_assessment: next_assessment,
                    code_module: code.clone(),
                    code_presentation: pres.clone(),
                    assessment_type: "TMA".into(),
                    date: Some(deadline),
                    weight: Some(20.0),
                });
                assessments.push((next_assessment, deadline));
                next_assessment += 1;
            }
            t.assessments_meta.push(AssessmentMetaRow {
                id_assessment: next_assessment,
                code_module: code.clone(),
                code_presentation: pres.clone(),
                assessment_type: "Exam".into(),
                date: None,
                weight: Some(100.0),
            });
            assessments.push((next_assessment, EXAM_DAY));
            next_assessment += 1;

            let mut sites = Vec::new();
            for (activity, _) in ACTIVITIES {
                let ids: Vec<i64> = (0..SITES_PER_ACTIVITY)
                    .map(|_| {
                        t.vle_meta.push(VleMetaRow {
                            id_site: next_site,
                            code_module: code.clone(),
                            code_presentation: pres.clone(),
                            activity_type: activity.to_string(),
                        });
                        next_site += 1;
                        next_site - 1
                    })
                    .collect();
                sites.push(ids);
            }
            layouts.push((pres, assessments, sites));
        }

        for j in 0..cfg.students_per_module {
            let (pres, assessments, sites) = &layouts[j % PRESENTATIONS.len()];
            let id_student = next_student;
            next_student += 1;
            let key = RegistrationKey {
                id_student,
                code_module: code.clone(),
                code_presentation: pres.clone(),
            };

            let at_risk = rng.random::<f64>() < cfg.fail_rate;
            let final_result = if at_risk {
                "Fail"
            } else if rng.random::<f64>() < 0.15 {
                "Distinction"
            } else {
                "Pass"
            };
            let shift = if at_risk { cfg.signal_strength } else { 0.0 };
            t.student_info.push(StudentInfoRow {
                key: key.clone(),
                demographics: demographics(&mut rng),
                final_result: final_result.to_string(),
            });

            let z: f64 = rng.sample(StandardNormal);
            let level = SCORE_MEAN + SCORE_SD * (z - shift);
            for &(id_assessment, deadline) in assessments {
                if rng.random::<f64>() >= 0.9 {
                    continue;
                }
                let noise: f64 = rng.sample(StandardNormal);
                let score = (level + SCORE_NOISE_SD * noise).round().clamp(0.0, 100.0);
                let offset = if deadline == EXAM_DAY {
                    rng.random_range(0..=5)
                } else {
                    rng.random_range(-7..=2)
                };
                t.student_assessment.push(StudentAssessmentRow {
                    id_assessment,
                    id_student,
                    date_submitted: Some(deadline + offset),
                    is_banked: false,
                    score: Some(score),
                });
            }

            let e: f64 = rng.sample(StandardNormal);
            let engagement = e - shift;
            let n_days = (BASE_ACTIVE_DAYS * (ENGAGEMENT_SCALE * engagement).exp())
                .round()
                .clamp(1.0, 230.0) as usize;
            let mut days: Vec<i64> = index::sample(&mut rng, 250, n_days)
                .into_iter()
                .map(|d| d as i64 - 10)
                .collect();
            days.sort_unstable();
            for day in days {
                let rows = rng.random_range(1..=3);
                for _ in 0..rows {
                    let activity = draw_activity(&mut rng);
                    let id_site = sites[activity][rng.random_range(0..SITES_PER_ACTIVITY)];
                    let g: f64 = rng.sample(StandardNormal);
                    let sum_click = (1.0 + 0.5 * g).exp().round().max(1.0) as u64;
                    t.student_vle.push(StudentVleRow {
                        key: key.clone(),
                        id_site,
                        date: day,
                        sum_click,
                    });
                }
            }
        }
    }
    Ok(t)
}
