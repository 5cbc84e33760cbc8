//! CSV readers and writers for the historical inputs and batch predictions.
//!
//! All files carry a header row, comma delimiters and `.` decimals. Optional
//! columns may be omitted from the header or left blank per row.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::domain::{ActivationRecord, HistoricalStudy, SiteGroup};
use crate::error::{Error, Result};

struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = ReaderBuilder::new().trim(Trim::All).from_reader(file);
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let headers = reader.headers().map_err(csv_err)?.clone();
        let columns: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        // An empty file has no header at all; treat it as an empty table.
        let empty = headers.is_empty() || (headers.len() == 1 && headers[0].is_empty());
        if !empty {
            for &name in required {
                if !columns.contains_key(name) {
                    return Err(Error::Parse {
                        file: path.to_path_buf(),
                        line: 1,
                        column: name.to_string(),
                        message: "missing required column in header".into(),
                    });
                }
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, record));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn error(&self, line: u64, column: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.path.clone(),
            line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn raw<'r>(&self, line: u64, record: &'r StringRecord, column: &str) -> Result<Option<&'r str>> {
        match self.columns.get(column) {
            None => Ok(None),
            Some(&i) => match record.get(i) {
                None => Err(self.error(line, column, "row is shorter than the header")),
                Some("") => Ok(None),
                Some(v) => Ok(Some(v)),
            },
        }
    }

    fn text(&self, line: u64, record: &StringRecord, column: &str) -> Result<String> {
        self.raw(line, record, column)?
            .map(str::to_string)
            .ok_or_else(|| self.error(line, column, "value is required"))
    }

    fn parse_opt<T: FromStr>(&self, line: u64, record: &StringRecord, column: &str, what: &str) -> Result<Option<T>> {
        self.raw(line, record, column)?
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| self.error(line, column, format!("expected {what}, got `{v}`")))
            })
            .transpose()
    }

    fn parse<T: FromStr>(&self, line: u64, record: &StringRecord, column: &str, what: &str) -> Result<T> {
        self.parse_opt(line, record, column, what)?
            .ok_or_else(|| self.error(line, column, "value is required"))
    }

    fn month(&self, line: u64, record: &StringRecord, column: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parse_opt(line, record, column, "a number of months")?;
        match v {
            Some(m) if !m.is_finite() || m < 0.0 => {
                Err(self.error(line, column, format!("must be a non-negative number, got {m}")))
            }
            other => Ok(other),
        }
    }
}

/// Reads `studies.csv` and `study_site_groups.csv` and joins them by study id.
///
/// Studies keep the order of the studies file; groups keep file order
/// within each study.
pub fn load_historical_studies(studies_path: &Path, site_groups_path: &Path) -> Result<Vec<HistoricalStudy>> {
    let studies = Table::read(studies_path, &["study_id", "n_subjects", "duration_months"])?;
    let groups = Table::read(site_groups_path, &["study_id", "country", "n_sites"])?;

    struct Row {
        line: u64,
        study_id: String,
        n_subjects: u64,
        duration: f64,
        offset: Option<f64>,
        groups: Vec<SiteGroup>,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(studies.rows.len());
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line, rec) in &studies.rows {
        let line = *line;
        let study_id = studies.text(line, rec, "study_id")?;
        let n_subjects = studies.parse::<u64>(line, rec, "n_subjects", "a non-negative integer")?;
        let duration = studies
            .month(line, rec, "duration_months")?
            .ok_or_else(|| studies.error(line, "duration_months", "value is required"))?;
        if duration <= 0.0 {
            return Err(studies.error(line, "duration_months", "must be positive"));
        }
        let offset = studies.month(line, rec, "offset_override")?;
        if index.insert(study_id.clone(), rows.len()).is_some() {
            return Err(studies.error(line, "study_id", format!("duplicate study `{study_id}`")));
        }
        rows.push(Row {
            line,
            study_id,
            n_subjects,
            duration,
            offset,
            groups: Vec::new(),
        });
    }

    for (line, rec) in &groups.rows {
        let line = *line;
        let study_id = groups.text(line, rec, "study_id")?;
        let country = groups.text(line, rec, "country")?;
        let n_sites = groups.parse::<u32>(line, rec, "n_sites", "a positive integer")?;
        if n_sites == 0 {
            return Err(groups.error(line, "n_sites", "must be at least 1"));
        }
        let open = groups.month(line, rec, "group_open_month")?;
        let &i = index.get(&study_id).ok_or_else(|| Error::OrphanStudy {
            file: groups.path.clone(),
            line,
            study_id: study_id.clone(),
        })?;
        let group = SiteGroup::new(country, n_sites, open).map_err(|e| groups.error(line, "country", e.to_string()))?;
        rows[i].groups.push(group);
    }

    rows.into_iter()
        .map(|r| {
            HistoricalStudy::new(r.study_id, r.n_subjects, r.duration, r.groups, r.offset).map_err(|e| Error::Parse {
                file: studies.path.clone(),
                line: r.line,
                column: e.field().unwrap_or("study_id").to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads `activations.csv`, one row per activated site, into one record per
/// (study, country) in order of first appearance.
pub fn load_activation_records(path: &Path) -> Result<Vec<ActivationRecord>> {
    let table = Table::read(path, &["study_id", "country", "activation_month"])?;
    let mut groups: Vec<(String, String, Vec<f64>)> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for (line, rec) in &table.rows {
        let line = *line;
        let study_id = table.text(line, rec, "study_id")?;
        let country = table.text(line, rec, "country")?;
        let month = table
            .month(line, rec, "activation_month")?
            .ok_or_else(|| table.error(line, "activation_month", "value is required"))?;
        let key = (study_id, country);
        let i = match index.get(&key) {
            Some(&i) => i,
            None => {
                index.insert(key.clone(), groups.len());
                groups.push((key.0, key.1, Vec::new()));
                groups.len() - 1
            }
        };
        groups[i].2.push(month);
    }
    groups
        .into_iter()
        .map(|(study, country, months)| ActivationRecord::new(study, country, months))
        .collect()
}

/// One line of a batch predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub study_id: String,
    pub actual_months: f64,
    pub predicted_months: f64,
    pub pi_low: f64,
    pub pi_high: f64,
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let cols = ["study_id", "actual_months", "predicted_months", "pi_low", "pi_high"];
    let table = Table::read(path, &cols)?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let line = *line;
        let num = |c: &str| -> Result<f64> {
            let v: f64 = table.parse(line, rec, c, "a number of months")?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(table.error(line, c, "must be finite"))
            }
        };
        out.push(PredictionRecord {
            study_id: table.text(line, rec, "study_id")?,
            actual_months: num("actual_months")?,
            predicted_months: num("predicted_months")?,
            pi_low: num("pi_low")?,
            pi_high: num("pi_high")?,
        });
    }
    Ok(out)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(body.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s != s.trim() {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `studies.csv` and `study_site_groups.csv`; floats use the shortest
/// representation that parses back to the same value.
pub fn write_historical_studies(
    studies: &[HistoricalStudy],
    studies_path: &Path,
    site_groups_path: &Path,
) -> Result<()> {
    let mut s = String::from("study_id,n_subjects,duration_months,offset_override\n");
    let mut g = String::from("study_id,country,n_sites,group_open_month\n");
    for study in studies {
        s.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(study.study_id()),
            study.n_subjects(),
            study.duration_months(),
            opt(study.offset_override())
        ));
        for group in study.site_groups() {
            g.push_str(&format!(
                "{},{},{},{}\n",
                csv_field(study.study_id()),
                csv_field(group.country()),
                group.n_sites(),
                opt(group.group_open_month())
            ));
        }
    }
    write_file(studies_path, &s)?;
    write_file(site_groups_path, &g)
}

pub fn write_activation_records(records: &[ActivationRecord], path: &Path) -> Result<()> {
    let mut s = String::from("study_id,country,activation_month\n");
    for r in records {
        for m in r.activation_months() {
            s.push_str(&format!(
                "{},{},{}\n",
                csv_field(r.study_id()),
                csv_field(r.country()),
                m
            ));
        }
    }
    write_file(path, &s)
}

pub fn write_predictions(records: &[PredictionRecord], path: &Path) -> Result<()> {
    let mut s = String::from("study_id,actual_months,predicted_months,pi_low,pi_high\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&r.study_id),
            r.actual_months,
            r.predicted_months,
            r.pi_low,
            r.pi_high
        ));
    }
    write_file(path, &s)
}
