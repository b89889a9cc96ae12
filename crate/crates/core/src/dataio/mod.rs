//! Reading grouped datasets and writing report artifacts.
//!
//! Dataset CSVs have a header row. The default layout is
//! `group,label,f0,...,fk`, optionally followed by an `eval_groups` column of
//! `;`-separated group names. Text corpora use a single text column that is
//! featurised with [`tfidf`].

pub mod plot;
pub mod tfidf;

pub use plot::{emit_plot, write_plot};
pub use tfidf::{TfidfSpec, TfidfVectorizer};

use crate::dataset::{GroupedDataset, Instance, Task};
use crate::error::{Error, Result};
use crate::group::GroupId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Features {
    /// Numeric feature columns; empty means every remaining column in header order.
    Columns(Vec<String>),
    Text {
        column: String,
        tfidf: TfidfSpec,
    },
}

impl Default for Features {
    fn default() -> Self {
        Features::Columns(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSchema {
    pub group_column: String,
    pub label_column: String,
    pub features: Features,
    /// Column of `;`-separated evaluation groups. Without it every row is
    /// evaluated as a member of its own source group.
    pub eval_groups_column: Option<String>,
    pub task: Task,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            group_column: "group".into(),
            label_column: "label".into(),
            features: Features::default(),
            eval_groups_column: None,
            task: Task::Regression,
        }
    }
}

pub const EVAL_GROUPS_COLUMN: &str = "eval_groups";

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<GroupedDataset> {
    read_csv(std::fs::File::open(path)?, schema)
}

/// Rows are numbered from 1, not counting the header.
pub fn read_csv<R: Read>(input: R, schema: &CsvSchema) -> Result<GroupedDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("column '{name}' not found in header")))
    };
    let group_col = find(&schema.group_column)?;
    let label_col = find(&schema.label_column)?;
    let eval_col = match &schema.eval_groups_column {
        Some(c) => Some(find(c)?),
        None => None,
    };
    let reserved = [Some(group_col), Some(label_col), eval_col];

    enum Cols {
        Numeric(Vec<usize>),
        Text(usize),
    }
    let cols = match &schema.features {
        Features::Columns(names) if names.is_empty() => {
            Cols::Numeric((0..header.len()).filter(|i| !reserved.contains(&Some(*i))).collect())
        }
        Features::Columns(names) => Cols::Numeric(names.iter().map(|n| find(n)).collect::<Result<_>>()?),
        Features::Text { column, .. } => Cols::Text(find(column)?),
    };
    if matches!(&cols, Cols::Numeric(c) if c.is_empty()) {
        return Err(Error::SchemaMismatch("no feature columns".into()));
    }

    let mut rows = Vec::new();
    let mut texts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = |c: usize| -> Result<&str> {
            match record.get(c).map(str::trim) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(Error::Parse {
                    row,
                    column: header[c].clone(),
                    message: "missing value".into(),
                }),
            }
        };
        let number = |c: usize| -> Result<f64> {
            let s = cell(c)?;
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: header[c].clone(),
                    message: format!("'{s}' is not a finite number"),
                })
        };
        let group = GroupId::new(cell(group_col)?);
        let label = number(label_col)?;
        if schema.task == Task::BinaryClassification && label != 0.0 && label != 1.0 {
            return Err(Error::Parse {
                row,
                column: header[label_col].clone(),
                message: format!("classification label must be 0 or 1, got {label}"),
            });
        }
        let features = match &cols {
            Cols::Numeric(c) => c.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?,
            Cols::Text(c) => {
                texts.push(record.get(*c).unwrap_or("").to_owned());
                Vec::new()
            }
        };
        let eval_groups = match eval_col {
            Some(c) => parse_eval_groups(record.get(c).unwrap_or("")),
            None => BTreeSet::from([group.clone()]),
        };
        rows.push(Instance {
            features,
            label,
            source_group: group,
            eval_groups,
        });
    }

    let dim = match (&cols, &schema.features) {
        (Cols::Text(_), Features::Text { tfidf, .. }) => {
            let vectorizer = TfidfVectorizer::fit(&texts, tfidf)?;
            for (inst, text) in rows.iter_mut().zip(&texts) {
                inst.features = vectorizer.transform(text);
            }
            vectorizer.vocabulary().len()
        }
        (Cols::Numeric(c), _) => c.len(),
        _ => unreachable!(),
    };
    GroupedDataset::new(rows, dim, schema.task)
}

fn parse_eval_groups(cell: &str) -> BTreeSet<GroupId> {
    cell.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(GroupId::new)
        .collect()
}

/// Writes `group,label,f0..fk`, adding an `eval_groups` column only when some
/// row is not simply evaluated in its own source group. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(dataset: &GroupedDataset, out: W) -> Result<()> {
    let with_eval = dataset
        .instances()
        .iter()
        .any(|i| i.eval_groups.len() != 1 || !i.eval_groups.contains(&i.source_group));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_owned(), "label".to_owned()];
    header.extend((0..dataset.feature_dim()).map(|j| format!("f{j}")));
    if with_eval {
        header.push(EVAL_GROUPS_COLUMN.into());
    }
    w.write_record(&header)?;
    for inst in dataset.instances() {
        let mut rec = vec![inst.source_group.to_string(), inst.label.to_string()];
        rec.extend(inst.features.iter().map(f64::to_string));
        if with_eval {
            rec.push(
                inst.eval_groups
                    .iter()
                    .map(GroupId::as_str)
                    .collect::<Vec<_>>()
                    .join(";"),
            );
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Schema matching what [`write_csv`] produces for `dataset`.
pub fn schema_for(dataset: &GroupedDataset, with_eval_groups: bool) -> CsvSchema {
    CsvSchema {
        features: Features::Columns((0..dataset.feature_dim()).map(|j| format!("f{j}")).collect()),
        eval_groups_column: with_eval_groups.then(|| EVAL_GROUPS_COLUMN.to_owned()),
        task: dataset.task(),
        ..CsvSchema::default()
    }
}
