//! Table data model: cells, columns, prompt serialization and equivalence.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error("invalid table name {0:?}")]
    InvalidName(String),
}

/// Position of a table in a reasoning chain, rendered as `T<index>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct TableName(pub usize);

impl TableName {
    pub const SOURCE: TableName = TableName(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn next(self) -> TableName {
        TableName(self.0 + 1)
    }
}

impl fmt::Display for TableName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

impl FromStr for TableName {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('T')
            .ok_or_else(|| TableError::InvalidName(s.to_string()))?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(TableError::InvalidName(s.to_string()));
        }
        digits
            .parse()
            .map(TableName)
            .map_err(|_| TableError::InvalidName(s.to_string()))
    }
}

impl From<TableName> for String {
    fn from(name: TableName) -> String {
        name.to_string()
    }
}

impl TryFrom<String> for TableName {
    type Error = TableError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

/// Canonical interpretation of a cell's text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellValue {
    Number(f64),
    Text(String),
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    raw: String,
    canonical: CellValue,
}

impl Cell {
    pub fn new(raw: impl Into<String>) -> Cell {
        let raw = raw.into();
        let canonical = canonicalize(&raw);
        Cell { raw, canonical }
    }

    pub fn null() -> Cell {
        Cell::new("NULL")
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn canonical(&self) -> &CellValue {
        &self.canonical
    }

    /// Canonical equality used by [`tables_equivalent`].
    pub fn equivalent(&self, other: &Cell) -> bool {
        match (&self.canonical, &other.canonical) {
            (CellValue::Number(a), CellValue::Number(b)) => a == b,
            (CellValue::Text(a), CellValue::Text(b)) => a.to_lowercase() == b.to_lowercase(),
            (CellValue::Null, CellValue::Null) => true,
            _ => false,
        }
    }
}

impl From<&str> for Cell {
    fn from(raw: &str) -> Cell {
        Cell::new(raw)
    }
}

fn canonicalize(raw: &str) -> CellValue {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("NULL") {
        CellValue::Null
    } else if let Some(n) = parse_decimal(trimmed) {
        CellValue::Number(n)
    } else {
        CellValue::Text(trimmed.to_string())
    }
}

/// Parses a decimal literal, accepting `,` only in well-formed thousands
/// groups (`1,463`, `12,000.5`). Infinities, NaN and hex are rejected.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let s = s.trim();
    let bytes = s.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b',') {
        i += 1;
    }
    let int_part = &s[int_start..i];
    if int_part.contains(',') && !is_grouped(int_part) {
        return None;
    }
    let mut digits = int_part.bytes().filter(u8::is_ascii_digit).count();
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return None;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != bytes.len() {
        return None;
    }
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    cleaned.parse().ok()
}

fn is_grouped(int_part: &str) -> bool {
    let mut groups = int_part.split(',');
    let head = groups.next().unwrap_or("");
    (1..=3).contains(&head.len())
        && head.bytes().all(|b| b.is_ascii_digit())
        && groups.all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()))
}

/// Where a column came from; decides which name the prompt shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ColumnOrigin {
    /// Loaded from a dataset file or parsed from a prompt.
    #[default]
    Source,
    /// A SQL result label such as `COUNT(*)`; shown verbatim.
    Sql,
    /// Produced by the script executor.
    Script,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    original_name: String,
    normalized_name: String,
    origin: ColumnOrigin,
}

impl Column {
    pub fn new(original_name: impl Into<String>, origin: ColumnOrigin) -> Column {
        let original_name = original_name.into();
        let normalized_name = normalize_column_name(&original_name);
        Column {
            original_name,
            normalized_name,
            origin,
        }
    }

    pub fn original_name(&self) -> &str {
        &self.original_name
    }

    pub fn normalized_name(&self) -> &str {
        &self.normalized_name
    }

    pub fn origin(&self) -> ColumnOrigin {
        self.origin
    }

    /// Label used in the `[HEAD]` line of the prompt.
    pub fn prompt_label(&self) -> &str {
        match self.origin {
            ColumnOrigin::Sql => &self.original_name,
            ColumnOrigin::Source | ColumnOrigin::Script => &self.normalized_name,
        }
    }
}

/// Turns an arbitrary header into an identifier: separator runs become a
/// single `_`, leading non-letters and trailing `_` are dropped, the first
/// letter is upper-cased and the rest lower-cased. Empty results yield `Col`.
pub fn normalize_column_name(raw: &str) -> String {
    let mut joined = String::with_capacity(raw.len());
    let mut in_separator = false;
    for c in raw.chars() {
        if c.is_alphanumeric() {
            joined.push(c);
            in_separator = false;
        } else if !in_separator {
            joined.push('_');
            in_separator = true;
        }
    }
    let body = joined
        .trim_start_matches(|c: char| !c.is_alphabetic())
        .trim_end_matches('_');
    let mut chars = body.chars();
    let Some(first) = chars.next() else {
        return "Col".to_string();
    };
    let mut out = String::with_capacity(body.len());
    out.push(single_char_case(first, first.to_uppercase()));
    out.extend(chars.map(|c| single_char_case(c, c.to_lowercase())));
    out
}

/// Applies a case mapping only when it maps to exactly one char, so that
/// ligatures and letters with dotted forms are left alone.
fn single_char_case(c: char, mut mapped: impl Iterator<Item = char>) -> char {
    match (mapped.next(), mapped.next()) {
        (Some(m), None) => m,
        _ => c,
    }
}

/// A named, immutable grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    name: TableName,
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Builds a table from header labels and raw cell text. Duplicate
    /// normalized names are disambiguated with `_2`, `_3`, ...
    pub fn from_raw<H, R, C>(name: TableName, headers: H, origin: ColumnOrigin, rows: R) -> Result<Table, TableError>
    where
        H: IntoIterator,
        H::Item: Into<String>,
        R: IntoIterator<Item = C>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let columns = headers.into_iter().map(|h| Column::new(h, origin)).collect();
        let rows = rows
            .into_iter()
            .map(|row| row.into_iter().map(Cell::new).collect())
            .collect();
        Table::new(name, columns, rows)
    }

    pub fn new(name: TableName, mut columns: Vec<Column>, rows: Vec<Vec<Cell>>) -> Result<Table, TableError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::Malformed(format!(
                    "row {} has {} cells, header has {}",
                    i + 1,
                    row.len(),
                    columns.len()
                )));
            }
        }
        disambiguate(&mut columns);
        Ok(Table { name, columns, rows })
    }

    pub fn name(&self) -> TableName {
        self.name
    }

    pub fn with_name(mut self, name: TableName) -> Table {
        self.name = name;
        self
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.rows.get(row).and_then(|r| r.get(col))
    }

    /// Raw text rows, as exchanged with external executors.
    pub fn raw_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|c| c.raw.clone()).collect())
            .collect()
    }
}

fn disambiguate(columns: &mut [Column]) {
    for i in 1..columns.len() {
        let taken = |name: &str, cols: &[Column]| cols.iter().any(|c| c.normalized_name == name);
        if !taken(&columns[i].normalized_name, &columns[..i]) {
            continue;
        }
        let base = columns[i].normalized_name.clone();
        let mut suffix = 2;
        let unique = loop {
            let candidate = format!("{base}_{suffix}");
            if !taken(&candidate, columns) {
                break candidate;
            }
            suffix += 1;
        };
        columns[i].normalized_name = unique;
    }
}

/// Canonical cell-wise comparison. Column labels are ignored; row order is
/// significant.
pub fn tables_equivalent(a: &Table, b: &Table) -> bool {
    a.column_count() == b.column_count()
        && a.row_count() == b.row_count()
        && a.rows
            .iter()
            .zip(&b.rows)
            .all(|(ra, rb)| ra.iter().zip(rb).all(|(x, y)| x.equivalent(y)))
}

pub const HEAD_MARKER: &str = "[HEAD]:";
pub const SEPARATOR_LINE: &str = "----";
pub const ELLIPSIS_LINE: &str = "...";

/// Renders a table in the line-oriented prompt grammar.
///
/// The source table uses `[HEAD]:label|...` and intermediate tables use
/// `[HEAD]: label|...`, mirroring the layout the few-shot transcripts use.
/// With a row cap `R` and more than `R` rows, the first `R` rows are followed
/// by `...` and the final row under its true index.
pub fn serialize_for_prompt(table: &Table, row_cap: Option<usize>) -> String {
    let mut out = String::from(HEAD_MARKER);
    if table.name != TableName::SOURCE {
        out.push(' ');
    }
    for (i, col) in table.columns.iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        escape_into(&mut out, col.prompt_label());
    }
    out.push('\n');
    out.push_str(SEPARATOR_LINE);

    let total = table.rows.len();
    let shown = match row_cap {
        Some(cap) if total > cap => cap,
        _ => total,
    };
    for (i, row) in table.rows.iter().take(shown).enumerate() {
        push_row(&mut out, i + 1, row);
    }
    if shown < total {
        out.push('\n');
        out.push_str(ELLIPSIS_LINE);
        push_row(&mut out, total, &table.rows[total - 1]);
    }
    out
}

fn push_row(out: &mut String, index: usize, row: &[Cell]) {
    out.push_str(&format!("\n[ROW] {index}: "));
    for (j, cell) in row.iter().enumerate() {
        if j > 0 {
            out.push('|');
        }
        escape_into(out, &cell.raw);
    }
}

// `|` becomes `\|`; a backslash is doubled only where it would otherwise be
// read as an escape (before `|`, before `\`, or at the end of the field).
fn escape_into(out: &mut String, text: &str) {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '|' => out.push_str("\\|"),
            '\\' => {
                let next = chars.get(i + 1).copied();
                if matches!(next, None | Some('|') | Some('\\')) {
                    out.push_str("\\\\");
                } else {
                    out.push('\\');
                }
            }
            '\r' => {
                out.push(' ');
                if chars.get(i + 1) == Some(&'\n') {
                    i += 1;
                }
            }
            '\n' => out.push(' '),
            c => out.push(c),
        }
        i += 1;
    }
}

fn split_fields(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.peek() {
                Some('|') | Some('\\') => current.push(chars.next().unwrap_or('\\')),
                _ => current.push('\\'),
            },
            '|' => fields.push(core::mem::take(&mut current)),
            c => current.push(c),
        }
    }
    fields.push(current);
    fields
}

/// Inverse of [`serialize_for_prompt`] for untruncated tables. The result is
/// named `T0` with [`ColumnOrigin::Source`] columns.
pub fn parse_prompt_table(text: &str) -> Result<Table, TableError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix(HEAD_MARKER))
        .ok_or_else(|| TableError::Malformed("missing [HEAD] line".to_string()))?;
    let header = header.strip_prefix(' ').unwrap_or(header);
    let labels = if header.is_empty() {
        Vec::new()
    } else {
        split_fields(header)
    };
    if lines.next() != Some(SEPARATOR_LINE) {
        return Err(TableError::Malformed("missing ---- separator".to_string()));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line == ELLIPSIS_LINE {
            return Err(TableError::Malformed("table is truncated".to_string()));
        }
        let rest = line
            .strip_prefix("[ROW] ")
            .ok_or_else(|| TableError::Malformed(format!("unexpected line {line:?}")))?;
        let (index, content) = rest
            .split_once(": ")
            .or_else(|| rest.strip_suffix(':').map(|i| (i, "")))
            .ok_or_else(|| TableError::Malformed(format!("bad row line {line:?}")))?;
        if index.parse::<usize>().is_err() {
            return Err(TableError::Malformed(format!("bad row index {index:?}")));
        }
        let cells = if labels.is_empty() && content.is_empty() {
            Vec::new()
        } else {
            split_fields(content)
        };
        rows.push(cells.into_iter().map(Cell::new).collect::<Vec<_>>());
    }
    let columns = labels
        .into_iter()
        .map(|l| Column::new(l, ColumnOrigin::Source))
        .collect();
    Table::new(TableName::SOURCE, columns, rows)
}
