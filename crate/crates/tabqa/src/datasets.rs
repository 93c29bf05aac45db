//! Adapters for the benchmark release layouts.
//!
//! * WikiTQ: a TSV question file (`id`, `utterance`, `context`,
//!   `targetValue`) whose `context` column points at table files relative
//!   to the dataset root.
//! * TabFact: a JSON object mapping table file names to
//!   `[statements, labels, caption]`, with `#`-delimited tables in `all_csv/`.
//! * FeTaQA: JSON lines, or a `{"data": [...]}` document, of records with
//!   `table_array`, `question` and `answer`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use tabqa_core::eval::{DatasetKind, Gold, QaInstance};
use tabqa_core::{ColumnOrigin, Table, TableName};

use crate::table_io::{load_table_as, LoadError, TableFormat};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },
    #[error(transparent)]
    Table(#[from] LoadError),
}

pub fn load_dataset(path: &Path, kind: DatasetKind) -> Result<Vec<QaInstance>, DatasetError> {
    match kind {
        DatasetKind::WikiTq => load_wikitq(path),
        DatasetKind::TabFact => load_tabfact(path),
        DatasetKind::FeTaQa => load_fetaqa(path),
    }
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn format_err(path: &Path, detail: impl Into<String>) -> DatasetError {
    DatasetError::Format {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Undoes the WikiTQ field escapes `\n`, `\p` (pipe) and `\\`.
pub fn unescape_wikitq(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('p') => out.push('|'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Splits a `targetValue` field into gold values.
pub fn wikitq_targets(field: &str) -> Vec<String> {
    field.split('|').map(unescape_wikitq).collect()
}

/// Looks for `relative` next to `base` and in each of its ancestors.
fn resolve(base: &Path, relative: &str) -> Option<PathBuf> {
    base.ancestors().map(|dir| dir.join(relative)).find(|p| p.is_file())
}

fn load_wikitq_table(path: &Path) -> Result<Table, DatasetError> {
    let tsv = path.with_extension("tsv");
    if tsv.is_file() && tsv != path {
        return parse_escaped_tsv(&tsv);
    }
    match TableFormat::from_path(path) {
        TableFormat::Tsv => parse_escaped_tsv(path),
        format => Ok(load_table_as(path, format)?),
    }
}

/// Unquoted TSV using the WikiTQ escapes.
fn parse_escaped_tsv(path: &Path) -> Result<Table, DatasetError> {
    let text = read(path)?;
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| format_err(path, "empty table"))?
        .split('\t')
        .map(unescape_wikitq)
        .collect();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split('\t').map(unescape_wikitq).collect()).collect();
    Table::from_raw(TableName::SOURCE, header, ColumnOrigin::Source, rows).map_err(|e| format_err(path, e.to_string()))
}

fn load_wikitq(path: &Path) -> Result<Vec<QaInstance>, DatasetError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .split('\t')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| format_err(path, format!("missing column {name}")))
    };
    let (id, utterance, context, target) = (col("id")?, col("utterance")?, col("context")?, col("targetValue")?);
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        let field = |i: usize| {
            fields
                .get(i)
                .copied()
                .ok_or_else(|| format_err(path, format!("line {} has {} fields", n + 2, fields.len())))
        };
        let table_path = resolve(base, field(context)?)
            .ok_or_else(|| format_err(path, format!("table {} not found", field(context).unwrap_or(""))))?;
        out.push(QaInstance {
            id: field(id)?.to_string(),
            table: load_wikitq_table(&table_path)?,
            question: unescape_wikitq(field(utterance)?),
            gold: Gold::Answers(wikitq_targets(field(target)?)),
        });
    }
    Ok(out)
}

fn load_tabfact(path: &Path) -> Result<Vec<QaInstance>, DatasetError> {
    let text = read(path)?;
    let doc: serde_json::Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (table_name, entry) in &doc {
        let (statements, labels): (Vec<String>, Vec<i64>) = match entry.as_array().map(Vec::as_slice) {
            Some([s, l, ..]) => (
                serde_json::from_value(s.clone()).map_err(|e| format_err(path, e.to_string()))?,
                serde_json::from_value(l.clone()).map_err(|e| format_err(path, e.to_string()))?,
            ),
            _ => {
                return Err(format_err(
                    path,
                    format!("entry {table_name} is not [statements, labels, ...]"),
                ))
            }
        };
        if statements.len() != labels.len() {
            return Err(format_err(
                path,
                format!("entry {table_name}: statement/label count mismatch"),
            ));
        }
        let table_path = resolve(base, &format!("all_csv/{table_name}"))
            .or_else(|| resolve(base, table_name))
            .ok_or_else(|| format_err(path, format!("table {table_name} not found")))?;
        let table = load_table_as(&table_path, TableFormat::Hash)?;
        for (i, (statement, label)) in statements.into_iter().zip(labels).enumerate() {
            out.push(QaInstance {
                id: format!("{table_name}#{i}"),
                table: table.clone(),
                question: statement,
                gold: Gold::Answers(vec![label.to_string()]),
            });
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct FetaRecord {
    feta_id: Value,
    table_array: Vec<Vec<String>>,
    question: String,
    answer: String,
}

fn load_fetaqa(path: &Path) -> Result<Vec<QaInstance>, DatasetError> {
    let text = read(path)?;
    let records: Vec<FetaRecord> = match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(mut doc)) if doc.contains_key("data") => {
            serde_json::from_value(doc.remove("data").unwrap_or_default())
                .map_err(|e| format_err(path, e.to_string()))?
        }
        _ => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| format_err(path, e.to_string()))?,
    };
    records
        .into_iter()
        .map(|r| {
            let mut rows = r.table_array.into_iter();
            let header = rows.next().ok_or_else(|| format_err(path, "empty table_array"))?;
            let table = Table::from_raw(TableName::SOURCE, header, ColumnOrigin::Source, rows)
                .map_err(|e| format_err(path, e.to_string()))?;
            let id = match r.feta_id {
                Value::String(s) => s,
                other => other.to_string(),
            };
            Ok(QaInstance {
                id,
                table,
                question: r.question,
                gold: Gold::Sentence(r.answer),
            })
        })
        .collect()
}
