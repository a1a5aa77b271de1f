use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, OutcomeMode, Snapshot, TimeSeriesRecord};
use crate::error::{Error, Result};

/// Column layout of a long-format CSV: one row per (patient, timestep).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub id_column: String,
    pub time_column: String,
    pub label_column: String,
    /// `None` takes every remaining column, in header order.
    pub feature_columns: Option<Vec<String>>,
    pub mode: OutcomeMode,
    pub delimiter: char,
    /// Cell value treated as missing, in addition to the empty cell.
    pub missing_token: String,
    /// `None` infers `max label + 1`.
    pub num_classes: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id_column: "id".into(),
            time_column: "time".into(),
            label_column: "label".into(),
            feature_columns: None,
            mode: OutcomeMode::Static,
            delimiter: ',',
            missing_token: "NA".into(),
            num_classes: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

struct Row {
    line: usize,
    time: f64,
    label: Option<usize>,
    features: Vec<f64>,
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let delimiter = u8::try_from(schema.delimiter)
        .map_err(|_| Error::InvalidArgument("delimiter must be a single-byte character".into()))?;
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let id_col = find(&schema.id_column)?;
    let time_col = find(&schema.time_column)?;
    let label_col = find(&schema.label_column)?;
    let feature_names: Vec<String> = match &schema.feature_columns {
        Some(cols) => cols.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| ![id_col, time_col, label_col].contains(i))
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    let feature_cols = feature_names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let is_missing = |cell: &str| cell.trim().is_empty() || cell.trim() == schema.missing_token;
    let mut groups: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    let mut max_label = None::<usize>;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { row: line, message };
        let id = rec.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        let time: f64 = rec
            .get(time_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| parse_err("unparseable time".into()))?;
        if !time.is_finite() {
            return Err(parse_err("time must be finite".into()));
        }
        let label_cell = rec.get(label_col).unwrap_or("");
        let label = if is_missing(label_cell) {
            None
        } else {
            let v: usize = label_cell
                .trim()
                .parse()
                .or_else(|_| {
                    label_cell
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|f| f.fract() == 0.0 && *f >= 0.0)
                        .map(|f| f as usize)
                        .ok_or(())
                })
                .map_err(|_| parse_err(format!("label `{label_cell}` is not a class id")))?;
            if let Some(c) = schema.num_classes {
                if v >= c {
                    return Err(parse_err(format!("label {v} outside [0, {c})")));
                }
            }
            max_label = Some(max_label.map_or(v, |m| m.max(v)));
            Some(v)
        };
        let mut features = Vec::with_capacity(feature_cols.len());
        for (&c, name) in feature_cols.iter().zip(&feature_names) {
            let cell = rec.get(c).unwrap_or("");
            if is_missing(cell) {
                features.push(f64::NAN);
            } else {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("feature `{name}` value `{cell}` is not numeric")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("feature `{name}` is not finite")));
                }
                features.push(v);
            }
        }
        groups.entry(id).or_default().push(Row {
            line,
            time,
            label,
            features,
        });
    }

    let num_classes = schema.num_classes.unwrap_or_else(|| max_label.map_or(0, |m| m + 1));
    let mut records = Vec::with_capacity(groups.len());
    for (id, mut rows) in groups {
        rows.sort_by(|a, b| a.time.total_cmp(&b.time));
        for w in rows.windows(2) {
            if w[0].time == w[1].time {
                return Err(Error::Parse {
                    row: w[0].line.max(w[1].line),
                    message: format!("duplicate time {} for patient `{id}`", w[1].time),
                });
            }
        }
        let n = rows.len();
        let mut snapshots = Vec::with_capacity(n);
        for (k, row) in rows.into_iter().enumerate() {
            let last = k + 1 == n;
            let label = match schema.mode {
                OutcomeMode::Dynamic => Some(row.label.ok_or_else(|| Error::Parse {
                    row: row.line,
                    message: "missing label in dynamic mode".into(),
                })?),
                OutcomeMode::Static if last => Some(row.label.ok_or_else(|| Error::Parse {
                    row: row.line,
                    message: format!("missing final label for patient `{id}`"),
                })?),
                OutcomeMode::Static => None,
            };
            snapshots.push(Snapshot {
                step_index: k + 1,
                time: row.time,
                features: row.features,
                label,
                observed_mask: None,
            });
        }
        records.push(TimeSeriesRecord { patient_id: id, snapshots });
    }

    Ok(Dataset {
        records,
        feature_names,
        num_classes,
        mode: schema.mode,
    })
}

/// Writes the dataset in the same long format `read_csv` accepts, with
/// columns `id,time,label,<features…>`. Unknown labels and missing cells are
/// written empty.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let mut header = vec!["id".to_string(), "time".into(), "label".into()];
    header.extend(dataset.feature_names.iter().cloned());
    w.write_record(&header)?;
    for rec in &dataset.records {
        for s in &rec.snapshots {
            let mut row = vec![
                rec.patient_id.clone(),
                s.time.to_string(),
                s.label.map(|l| l.to_string()).unwrap_or_default(),
            ];
            row.extend(s.features.iter().map(|v| if v.is_finite() { v.to_string() } else { String::new() }));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
