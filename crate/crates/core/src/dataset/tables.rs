//! The five OULAD tables: row types, CSV ingestion and CSV output.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const STUDENT_INFO: &str = "studentInfo.csv";
pub const STUDENT_VLE: &str = "studentVle.csv";
pub const VLE: &str = "vle.csv";
pub const ASSESSMENTS: &str = "assessments.csv";
pub const STUDENT_ASSESSMENT: &str = "studentAssessment.csv";

/// Demographic columns of `studentInfo.csv`, in file order.
pub const DEMOGRAPHIC_COLUMNS: [&str; 8] = [
    "gender",
    "region",
    "highest_education",
    "imd_band",
    "age_band",
    "num_of_prev_attempts",
    "studied_credits",
    "disability",
];

const STUDENT_INFO_HEADER: [&str; 12] = [
    "code_module",
    "code_presentation",
    "id_student",
    "gender",
    "region",
    "highest_education",
    "imd_band",
    "age_band",
    "num_of_prev_attempts",
    "studied_credits",
    "disability",
    "final_result",
];
const STUDENT_VLE_HEADER: [&str; 6] = [
    "code_module",
    "code_presentation",
    "id_student",
    "id_site",
    "date",
    "sum_click",
];
const VLE_HEADER: [&str; 6] = [
    "id_site",
    "code_module",
    "code_presentation",
    "activity_type",
    "week_from",
    "week_to",
];
const ASSESSMENTS_HEADER: [&str; 6] = [
    "code_module",
    "code_presentation",
    "id_assessment",
    "assessment_type",
    "date",
    "weight",
];
const STUDENT_ASSESSMENT_HEADER: [&str; 5] = [
    "id_assessment",
    "id_student",
    "date_submitted",
    "is_banked",
    "score",
];

/// One registration: a student taking one presentation of one module.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegistrationKey {
    pub id_student: i64,
    pub code_module: Arc<str>,
    pub code_presentation: Arc<str>,
}

impl RegistrationKey {
    pub fn new(id_student: i64, code_module: &str, code_presentation: &str) -> Self {
        Self {
            id_student,
            code_module: Arc::from(code_module),
            code_presentation: Arc::from(code_presentation),
        }
    }
}

impl std::fmt::Display for RegistrationKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.code_module, self.code_presentation, self.id_student
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentInfoRow {
    pub key: RegistrationKey,
    /// Aligned with [`DEMOGRAPHIC_COLUMNS`]; `None` where the file has a missing value.
    pub demographics: Vec<Option<String>>,
    pub final_result: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentVleRow {
    pub key: RegistrationKey,
    pub id_site: i64,
    /// Days relative to module start; may be negative.
    pub date: i64,
    pub sum_click: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VleMetaRow {
    pub id_site: i64,
    pub code_module: Arc<str>,
    pub code_presentation: Arc<str>,
    pub activity_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentMetaRow {
    pub id_assessment: i64,
    pub code_module: Arc<str>,
    pub code_presentation: Arc<str>,
    pub assessment_type: String,
    /// Deadline day; OULAD leaves exam deadlines blank.
    pub date: Option<i64>,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentAssessmentRow {
    pub id_assessment: i64,
    pub id_student: i64,
    pub date_submitted: Option<i64>,
    pub is_banked: bool,
    /// In `[0, 100]` when present.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawTables {
    pub student_info: Vec<StudentInfoRow>,
    pub student_vle: Vec<StudentVleRow>,
    pub vle_meta: Vec<VleMetaRow>,
    pub assessments_meta: Vec<AssessmentMetaRow>,
    pub student_assessment: Vec<StudentAssessmentRow>,
}

/// Counts of skipped or unresolved rows, keyed by table and reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl Diagnostics {
    pub fn record(&mut self, table: &str, reason: &str) {
        self.record_n(table, reason, 1);
    }

    pub fn record_n(&mut self, table: &str, reason: &str, n: usize) {
        if n == 0 {
            return;
        }
        *self
            .counts
            .entry(table.to_string())
            .or_default()
            .entry(reason.to_string())
            .or_insert(0) += n;
    }

    pub fn count(&self, table: &str, reason: &str) -> usize {
        self.counts
            .get(table)
            .and_then(|m| m.get(reason))
            .copied()
            .unwrap_or(0)
    }

    pub fn table_total(&self, table: &str) -> usize {
        self.counts
            .get(table)
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        for (table, reasons) in &other.counts {
            for (reason, n) in reasons {
                self.record_n(table, reason, *n);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, usize)> {
        self.counts
            .iter()
            .flat_map(|(t, m)| m.iter().map(move |(r, n)| (t.as_str(), r.as_str(), *n)))
    }
}

/// Interns module and presentation codes so ten million click rows share a
/// handful of allocations.
#[derive(Default)]
struct Interner(HashMap<String, Arc<str>>);

impl Interner {
    fn get(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.0.get(s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s);
        self.0.insert(s.to_string(), a.clone());
        a
    }
}

/// Column lookup for one table, validated against the canonical header.
struct Columns {
    table: &'static str,
    index: Vec<usize>,
}

impl Columns {
    fn resolve(
        table: &'static str,
        headers: &csv::StringRecord,
        required: &[&str],
    ) -> Result<Self, DatasetError> {
        let found: Vec<&str> = headers
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}'))
            .collect();
        let index = required
            .iter()
            .map(|col| {
                found
                    .iter()
                    .position(|h| h == col)
                    .ok_or_else(|| DatasetError::HeaderMismatch {
                        table: table.to_string(),
                        column: col.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { table, index })
    }

    /// Trimmed field value; empty strings and `?` are missing.
    fn get<'r>(&self, record: &'r csv::StringRecord, col: usize) -> Option<&'r str> {
        record
            .get(self.index[col])
            .map(str::trim)
            .filter(|v| !v.is_empty() && *v != "?")
    }
}

enum Field<T> {
    Ok(T),
    Missing,
    Invalid,
}

fn parse_field<T: std::str::FromStr>(raw: Option<&str>) -> Field<T> {
    match raw {
        None => Field::Missing,
        Some(v) => match v.parse() {
            Ok(x) => Field::Ok(x),
            Err(_) => Field::Invalid,
        },
    }
}

/// Parses a required column or records why the row is skipped.
macro_rules! required {
    ($cols:expr, $rec:expr, $idx:expr, $name:expr, $diag:expr) => {
        match parse_field($cols.get($rec, $idx)) {
            Field::Ok(v) => v,
            Field::Missing => {
                $diag.record($cols.table, concat!("missing ", $name));
                continue;
            }
            Field::Invalid => {
                $diag.record($cols.table, concat!("invalid ", $name));
                continue;
            }
        }
    };
}

/// Parses an optional column; invalid values skip the row.
macro_rules! optional {
    ($cols:expr, $rec:expr, $idx:expr, $name:expr, $diag:expr) => {
        match parse_field($cols.get($rec, $idx)) {
            Field::Ok(v) => Some(v),
            Field::Missing => None,
            Field::Invalid => {
                $diag.record($cols.table, concat!("invalid ", $name));
                continue;
            }
        }
    };
}

fn open_table(dir: &Path, name: &'static str) -> Result<csv::Reader<Box<dyn Read>>, DatasetError> {
    let path = dir.join(name);
    let file = File::open(&path).map_err(|source| DatasetError::MissingFile {
        file: name.to_string(),
        path: path.clone(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(Box::new(std::io::BufReader::new(file)) as Box<dyn Read>))
}

fn columns(
    reader: &mut csv::Reader<Box<dyn Read>>,
    name: &'static str,
    required: &[&str],
) -> Result<Columns, DatasetError> {
    let headers = reader.headers().map_err(|e| DatasetError::Csv {
        file: name.to_string(),
        message: e.to_string(),
    })?;
    Columns::resolve(name, headers, required)
}

/// I/O failures are fatal; malformed rows (bad UTF-8 and the like) become an
/// empty record that the field parsers count as skipped.
fn record(
    rec: csv::Result<csv::StringRecord>,
    name: &'static str,
) -> Result<csv::StringRecord, DatasetError> {
    match rec {
        Ok(r) => Ok(r),
        Err(e) if e.is_io_error() => Err(DatasetError::Csv {
            file: name.to_string(),
            message: e.to_string(),
        }),
        Err(_) => Ok(csv::StringRecord::new()),
    }
}

/// Loads the five OULAD tables from `dir`.
///
/// Row-level problems (unparseable or out-of-range values, missing required
/// fields) skip the row and are counted in the returned [`Diagnostics`].
/// Click rows whose `id_site` is not in `vle.csv`, and submissions whose
/// `id_assessment` is not in `assessments.csv`, are kept but counted as
/// unresolved so downstream feature code can decide what to do with them.
pub fn load_oulad(dir: &Path) -> Result<(RawTables, Diagnostics), DatasetError> {
    // Open everything first so a missing file fails before any parsing work.
    let mut info_rdr = open_table(dir, STUDENT_INFO)?;
    let mut svle_rdr = open_table(dir, STUDENT_VLE)?;
    let mut vle_rdr = open_table(dir, VLE)?;
    let mut ass_rdr = open_table(dir, ASSESSMENTS)?;
    let mut sa_rdr = open_table(dir, STUDENT_ASSESSMENT)?;

    let mut diag = Diagnostics::default();
    let mut interner = Interner::default();
    let mut tables = RawTables::default();

    let cols = columns(&mut info_rdr, STUDENT_INFO, &STUDENT_INFO_HEADER)?;
    let mut seen = HashSet::new();
    for rec in info_rdr.records() {
        let rec = &record(rec, STUDENT_INFO)?;
        let code_module: String = required!(cols, rec, 0, "code_module", diag);
        let code_presentation: String = required!(cols, rec, 1, "code_presentation", diag);
        let id_student: i64 = required!(cols, rec, 2, "id_student", diag);
        let final_result: String = required!(cols, rec, 11, "final_result", diag);
        let demographics = (3..11)
            .map(|i| cols.get(rec, i).map(str::to_string))
            .collect();
        let key = RegistrationKey {
            id_student,
            code_module: interner.get(&code_module),
            code_presentation: interner.get(&code_presentation),
        };
        if !seen.insert(key.clone()) {
            return Err(DatasetError::DuplicateRegistration(key.to_string()));
        }
        tables.student_info.push(StudentInfoRow {
            key,
            demographics,
            final_result,
        });
    }

    let cols = columns(&mut vle_rdr, VLE, &VLE_HEADER)?;
    for rec in vle_rdr.records() {
        let rec = &record(rec, VLE)?;
        let id_site: i64 = required!(cols, rec, 0, "id_site", diag);
        let code_module: String = required!(cols, rec, 1, "code_module", diag);
        let code_presentation: String = required!(cols, rec, 2, "code_presentation", diag);
        let activity_type: String = required!(cols, rec, 3, "activity_type", diag);
        tables.vle_meta.push(VleMetaRow {
            id_site,
            code_module: interner.get(&code_module),
            code_presentation: interner.get(&code_presentation),
            activity_type,
        });
    }

    let cols = columns(&mut svle_rdr, STUDENT_VLE, &STUDENT_VLE_HEADER)?;
    for rec in svle_rdr.records() {
        let rec = &record(rec, STUDENT_VLE)?;
        let code_module: String = required!(cols, rec, 0, "code_module", diag);
        let code_presentation: String = required!(cols, rec, 1, "code_presentation", diag);
        let id_student: i64 = required!(cols, rec, 2, "id_student", diag);
        let id_site: i64 = required!(cols, rec, 3, "id_site", diag);
        let date: i64 = required!(cols, rec, 4, "date", diag);
        let sum_click: i64 = required!(cols, rec, 5, "sum_click", diag);
        if sum_click < 0 {
            diag.record(STUDENT_VLE, "negative sum_click");
            continue;
        }
        tables.student_vle.push(StudentVleRow {
            key: RegistrationKey {
                id_student,
                code_module: interner.get(&code_module),
                code_presentation: interner.get(&code_presentation),
            },
            id_site,
            date,
            sum_click: sum_click as u64,
        });
    }

    let cols = columns(&mut ass_rdr, ASSESSMENTS, &ASSESSMENTS_HEADER)?;
    for rec in ass_rdr.records() {
        let rec = &record(rec, ASSESSMENTS)?;
        let code_module: String = required!(cols, rec, 0, "code_module", diag);
        let code_presentation: String = required!(cols, rec, 1, "code_presentation", diag);
        let id_assessment: i64 = required!(cols, rec, 2, "id_assessment", diag);
        let assessment_type: String = required!(cols, rec, 3, "assessment_type", diag);
        let date: Option<i64> = optional!(cols, rec, 4, "date", diag);
        let weight: Option<f64> = optional!(cols, rec, 5, "weight", diag);
        tables.assessments_meta.push(AssessmentMetaRow {
            id_assessment,
            code_module: interner.get(&code_module),
            code_presentation: interner.get(&code_presentation),
            assessment_type,
            date,
            weight,
        });
    }

    let cols = columns(&mut sa_rdr, STUDENT_ASSESSMENT, &STUDENT_ASSESSMENT_HEADER)?;
    for rec in sa_rdr.records() {
        let rec = &record(rec, STUDENT_ASSESSMENT)?;
        let id_assessment: i64 = required!(cols, rec, 0, "id_assessment", diag);
        let id_student: i64 = required!(cols, rec, 1, "id_student", diag);
        let date_submitted: Option<i64> = optional!(cols, rec, 2, "date_submitted", diag);
        let is_banked: Option<i64> = optional!(cols, rec, 3, "is_banked", diag);
        let score: Option<f64> = optional!(cols, rec, 4, "score", diag);
        if let Some(s) = score {
            if !(0.0..=100.0).contains(&s) {
                diag.record(STUDENT_ASSESSMENT, "score out of range");
                continue;
            }
        }
        tables.student_assessment.push(StudentAssessmentRow {
            id_assessment,
            id_student,
            date_submitted,
            is_banked: is_banked.unwrap_or(0) != 0,
            score,
        });
    }

    let sites: HashSet<i64> = tables.vle_meta.iter().map(|r| r.id_site).collect();
    let unresolved_sites = tables
        .student_vle
        .iter()
        .filter(|r| !sites.contains(&r.id_site))
        .count();
    diag.record_n(STUDENT_VLE, "unresolved id_site", unresolved_sites);

    let assessments: HashSet<i64> = tables
        .assessments_meta
        .iter()
        .map(|r| r.id_assessment)
        .collect();
    let unresolved_assessments = tables
        .student_assessment
        .iter()
        .filter(|r| !assessments.contains(&r.id_assessment))
        .count();
    diag.record_n(
        STUDENT_ASSESSMENT,
        "unresolved id_assessment",
        unresolved_assessments,
    );

    Ok((tables, diag))
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn write_table<I, R>(dir: &Path, name: &str, header: &[&str], rows: I) -> Result<(), DatasetError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let path = dir.join(name);
    let io_err = |source: std::io::Error| DatasetError::Io {
        path: path.clone(),
        source,
    };
    let file = File::create(&path).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_err = |e: csv::Error| DatasetError::Csv {
        file: name.to_string(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(csv_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| DatasetError::Csv {
        file: name.to_string(),
        message: e.to_string(),
    })?;
    inner.flush().map_err(io_err)
}

/// Writes the tables as the five canonical OULAD CSV files.
pub fn write_oulad(tables: &RawTables, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_table(
        dir,
        STUDENT_INFO,
        &STUDENT_INFO_HEADER,
        tables.student_info.iter().map(|r| {
            let mut out = vec![
                r.key.code_module.to_string(),
                r.key.code_presentation.to_string(),
                r.key.id_student.to_string(),
            ];
            out.extend(r.demographics.iter().map(opt));
            out.push(r.final_result.clone());
            out
        }),
    )?;
    write_table(
        dir,
        STUDENT_VLE,
        &STUDENT_VLE_HEADER,
        tables.student_vle.iter().map(|r| {
            vec![
                r.key.code_module.to_string(),
                r.key.code_presentation.to_string(),
                r.key.id_student.to_string(),
                r.id_site.to_string(),
                r.date.to_string(),
                r.sum_click.to_string(),
            ]
        }),
    )?;
    write_table(
        dir,
        VLE,
        &VLE_HEADER,
        tables.vle_meta.iter().map(|r| {
            vec![
                r.id_site.to_string(),
                r.code_module.to_string(),
                r.code_presentation.to_string(),
                r.activity_type.clone(),
                String::new(),
                String::new(),
            ]
        }),
    )?;
    write_table(
        dir,
        ASSESSMENTS,
        &ASSESSMENTS_HEADER,
        tables.assessments_meta.iter().map(|r| {
            vec![
                r.code_module.to_string(),
                r.code_presentation.to_string(),
                r.id_assessment.to_string(),
                r.assessment_type.clone(),
                opt(&r.date),
                opt(&r.weight),
            ]
        }),
    )?;
    write_table(
        dir,
        STUDENT_ASSESSMENT,
        &STUDENT_ASSESSMENT_HEADER,
        tables.student_assessment.iter().map(|r| {
            vec![
                r.id_assessment.to_string(),
                r.id_student.to_string(),
                opt(&r.date_submitted),
                u8::from(r.is_banked).to_string(),
                opt(&r.score),
            ]
        }),
    )?;
    Ok(())
}

/// Distinct module codes in `student_info`, sorted.
pub fn module_codes(tables: &RawTables) -> BTreeSet<String> {
    tables
        .student_info
        .iter()
        .map(|r| r.key.code_module.to_string())
        .collect()
}
