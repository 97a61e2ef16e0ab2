//! JSONL evaluation datasets and prediction files.
//!
//! Dataset records, one per line:
//!
//! ```text
//! {"id":"p001","description":"...","gold_ir":{...}}
//! {"id":"p002","description":"...","gold_canonical":{"variables":[...],"rows":[[...]],"objective":[...]}}
//! ```
//!
//! Exactly one of `gold_ir` / `gold_canonical` must be present. Gold IR is
//! validated and canonicalized on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{to_canonical, CanonicalForm};
use crate::ir::{validate_ir, IRModel, Identifier};
use crate::parser::ParseOutcome;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("line {line}: invalid gold formulation: {diagnostic}")]
    GoldInvalid { line: usize, diagnostic: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub id: String,
    pub description: String,
    pub gold_ir: Option<IRModel>,
    pub gold_canonical: CanonicalForm,
}

impl ProblemInstance {
    pub fn gold_variables(&self) -> &[Identifier] {
        &self.gold_canonical.variable_order
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub split_name: String,
    pub problems: Vec<ProblemInstance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRecord {
    id: String,
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_ir: Option<IRModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_canonical: Option<CanonicalForm>,
}

fn open(path: &Path) -> Result<File, DatasetError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DatasetError::FileNotFound(path.to_path_buf()),
        _ => DatasetError::Io(e),
    })
}

/// Loads a dataset; the split name is the file stem.
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let split_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(BufReader::new(open(path)?), &split_name)
}

pub fn read_dataset(reader: impl BufRead, split_name: &str) -> Result<Dataset, DatasetError> {
    let mut problems: Vec<ProblemInstance> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| DatasetError::SchemaError { line: line_no, message };
        let record: ProblemRecord = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if record.description.trim().is_empty() {
            return Err(schema("description is empty".into()));
        }
        if problems.iter().any(|p| p.id == record.id) {
            return Err(schema(format!("duplicate id {:?}", record.id)));
        }
        let gold_canonical = match (&record.gold_ir, record.gold_canonical) {
            (Some(ir), None) => {
                if let Err(e) = ir.check() {
                    return Err(DatasetError::GoldInvalid {
                        line: line_no,
                        diagnostic: e.to_string(),
                    });
                }
                if let Some(d) = validate_ir(ir).into_iter().next() {
                    return Err(DatasetError::GoldInvalid {
                        line: line_no,
                        diagnostic: d.to_string(),
                    });
                }
                to_canonical(ir).map_err(|e| DatasetError::GoldInvalid {
                    line: line_no,
                    diagnostic: e.to_string(),
                })?
            }
            (None, Some(c)) => c,
            (Some(_), Some(_)) => return Err(schema("record has both gold_ir and gold_canonical".into())),
            (None, None) => return Err(schema("record has neither gold_ir nor gold_canonical".into())),
        };
        problems.push(ProblemInstance {
            id: record.id,
            description: record.description,
            gold_ir: record.gold_ir,
            gold_canonical,
        });
    }
    Ok(Dataset {
        split_name: split_name.to_string(),
        problems,
    })
}

/// Writes a dataset in the record format above, preferring gold IR when the
/// instance has it.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(File::create(path)?);
    for p in &dataset.problems {
        let record = ProblemRecord {
            id: p.id.clone(),
            description: p.description.clone(),
            gold_ir: p.gold_ir.clone(),
            gold_canonical: p.gold_ir.is_none().then(|| p.gold_canonical.clone()),
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// One model output and everything derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    /// Completion text exactly as returned by the provider.
    pub raw: String,
    pub outcome: ParseOutcome,
    pub canonical: Option<CanonicalForm>,
    /// Provider or canonicalization failure, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, DatasetError> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| DatasetError::SchemaError {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}
