//! Loading source tables from CSV, TSV and JSON-rows files.

use std::fs;
use std::io;
use std::path::Path;

use serde::Deserialize;
use tabqa_core::{ColumnOrigin, Table, TableError, TableName};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed {format} in {path}: {detail}")]
    Format {
        path: String,
        format: &'static str,
        detail: String,
    },
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Tsv,
    /// `{"header": [..], "rows": [[..], ..]}`
    JsonRows,
    /// Comma-free `#`-delimited files used by TabFact.
    Hash,
}

impl TableFormat {
    pub fn from_path(path: &Path) -> TableFormat {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("tsv") | Some("tab") => TableFormat::Tsv,
            Some("json") => TableFormat::JsonRows,
            _ => TableFormat::Csv,
        }
    }

    fn label(self) -> &'static str {
        match self {
            TableFormat::Csv => "CSV",
            TableFormat::Tsv => "TSV",
            TableFormat::JsonRows => "JSON table",
            TableFormat::Hash => "#-delimited table",
        }
    }
}

#[derive(Deserialize)]
struct JsonRows {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Loads `T0`, picking the format from the file extension.
pub fn load_table(path: &Path) -> Result<Table, LoadError> {
    load_table_as(path, TableFormat::from_path(path))
}

pub fn load_table_as(path: &Path, format: TableFormat) -> Result<Table, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_table(&text, format).map_err(|e| match e {
        LoadError::Format { format, detail, .. } => LoadError::Format {
            path: path.display().to_string(),
            format,
            detail,
        },
        other => other,
    })
}

pub fn parse_table(text: &str, format: TableFormat) -> Result<Table, LoadError> {
    let malformed = |detail: String| LoadError::Format {
        path: String::new(),
        format: format.label(),
        detail,
    };
    let (header, rows) = match format {
        TableFormat::JsonRows => {
            let doc: JsonRows = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
            (doc.header, doc.rows)
        }
        TableFormat::Csv | TableFormat::Tsv | TableFormat::Hash => {
            let delimiter = match format {
                TableFormat::Tsv => b'\t',
                TableFormat::Hash => b'#',
                _ => b',',
            };
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(delimiter)
                .has_headers(false)
                .flexible(true)
                .from_reader(text.as_bytes());
            let mut records = reader.records();
            let header: Vec<String> = match records.next() {
                Some(r) => r
                    .map_err(|e| malformed(e.to_string()))?
                    .iter()
                    .map(str::to_string)
                    .collect(),
                None => return Err(malformed("empty file".into())),
            };
            let rows = records
                .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| malformed(e.to_string()))?;
            (header, rows)
        }
    };
    Ok(Table::from_raw(TableName::SOURCE, header, ColumnOrigin::Source, rows)?)
}
