//! Executor abstraction and the pure parts of SQL retry handling.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::table::{Table, TableName};

/// Tables visible to generated code, `T0..Tk` in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionContext {
    tables: Vec<Table>,
    pub sql_only: bool,
}

impl ExecutionContext {
    /// Tables are renamed to match their position.
    pub fn new(tables: Vec<Table>, sql_only: bool) -> ExecutionContext {
        assert!(!tables.is_empty(), "execution context needs at least T0");
        let tables = tables
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.with_name(TableName(i)))
            .collect();
        ExecutionContext { tables, sql_only }
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn latest(&self) -> &Table {
        self.tables.last().expect("non-empty context")
    }

    pub fn table(&self, name: TableName) -> Option<&Table> {
        self.tables.get(name.index())
    }

    pub fn next_table_name(&self) -> TableName {
        next_table_name(&self.tables)
    }
}

/// `T<k+1>` where `Tk` is the highest-index table.
pub fn next_table_name(tables: &[Table]) -> TableName {
    tables
        .iter()
        .map(|t| t.name())
        .max()
        .map(TableName::next)
        .unwrap_or(TableName::SOURCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    SqlError,
    ScriptError,
    SidecarUnavailable,
    Timeout,
    /// Script action while only the SQL executor is enabled.
    ExecutorDisabled,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureKind::SqlError => "sql error",
            FailureKind::ScriptError => "script error",
            FailureKind::SidecarUnavailable => "sidecar unavailable",
            FailureKind::Timeout => "timeout",
            FailureKind::ExecutorDisabled => "executor disabled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecutionOutcome {
    Success(Table),
    Failure { kind: FailureKind, detail: String },
}

impl ExecutionOutcome {
    pub fn failure(kind: FailureKind, detail: impl Into<String>) -> ExecutionOutcome {
        ExecutionOutcome::Failure {
            kind,
            detail: detail.into(),
        }
    }

    pub fn table(&self) -> Option<&Table> {
        match self {
            ExecutionOutcome::Success(t) => Some(t),
            ExecutionOutcome::Failure { .. } => None,
        }
    }
}

/// Runs generated code against a context. Successful tables must be named
/// `ctx.next_table_name()`.
pub trait CodeExecutor {
    fn execute_sql(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome;
    fn execute_script(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome;
}

impl<E: CodeExecutor + ?Sized> CodeExecutor for &E {
    fn execute_sql(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome {
        (**self).execute_sql(code, ctx)
    }

    fn execute_script(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome {
        (**self).execute_script(code, ctx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token<'a> {
    Ident { text: &'a str, start: usize },
    Other,
}

/// Yields bare identifiers outside string literals, quoted identifiers and
/// comments, with their byte offsets.
fn identifiers(sql: &str) -> Vec<Token<'_>> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\'' | b'"' | b'`' => {
                i = skip_quoted(bytes, i, b);
                out.push(Token::Other);
            }
            b'[' => {
                i = bytes[i..]
                    .iter()
                    .position(|&c| c == b']')
                    .map_or(bytes.len(), |p| i + p + 1);
                out.push(Token::Other);
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                i = bytes[i..]
                    .iter()
                    .position(|&c| c == b'\n')
                    .map_or(bytes.len(), |p| i + p);
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i = sql[i + 2..].find("*/").map_or(bytes.len(), |p| i + 2 + p + 2);
            }
            _ if b.is_ascii_alphabetic() || b == b'_' || b >= 0x80 => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] >= 0x80) {
                    i += 1;
                }
                out.push(Token::Ident {
                    text: &sql[start..i],
                    start,
                });
            }
            _ => i += 1,
        }
    }
    out
}

fn skip_quoted(bytes: &[u8], open: usize, quote: u8) -> usize {
    let mut i = open + 1;
    while i < bytes.len() {
        if bytes[i] == quote {
            if bytes.get(i + 1) == Some(&quote) {
                i += 2;
                continue;
            }
            return i + 1;
        }
        i += 1;
    }
    bytes.len()
}

fn as_table_name(ident: &str) -> Option<TableName> {
    let upper = ident.to_ascii_uppercase();
    upper.parse().ok()
}

/// Context tables referenced by bare identifiers in `sql`, in first-use order.
pub fn referenced_tables(sql: &str, ctx: &ExecutionContext) -> Vec<TableName> {
    let mut seen = Vec::new();
    for tok in identifiers(sql) {
        if let Token::Ident { text, .. } = tok {
            if let Some(name) = as_table_name(text) {
                if ctx.table(name).is_some() && !seen.contains(&name) {
                    seen.push(name);
                }
            }
        }
    }
    seen
}

/// Replaces every bare reference to a context table with `target`.
pub fn rewrite_table_refs(sql: &str, ctx: &ExecutionContext, target: TableName) -> String {
    let mut out = String::with_capacity(sql.len());
    let mut last = 0;
    for tok in identifiers(sql) {
        if let Token::Ident { text, start } = tok {
            if as_table_name(text).is_some_and(|n| ctx.table(n).is_some()) {
                out.push_str(&sql[last..start]);
                out.push_str(&target.to_string());
                last = start + text.len();
            }
        }
    }
    out.push_str(&sql[last..]);
    out
}

/// Rewritten queries to try after a missing-column or missing-table failure:
/// `T_{k-1}` down to `T0`, skipping rewrites identical to the original query.
pub fn retry_ladder(sql: &str, ctx: &ExecutionContext) -> Vec<(TableName, String)> {
    let k = ctx.tables().len() - 1;
    let referenced = referenced_tables(sql, ctx);
    (0..k)
        .rev()
        .map(TableName)
        .filter(|rung| referenced.as_slice() != [*rung])
        .map(|rung| (rung, rewrite_table_refs(sql, ctx, rung)))
        .filter(|(_, rewritten)| rewritten != sql)
        .collect()
}

/// True for engine messages reporting an unknown column or table.
pub fn is_missing_name_error(message: &str) -> bool {
    let m = message.to_ascii_lowercase();
    m.contains("no such column") || m.contains("no such table") || m.contains("ambiguous column")
}

pub fn describe(outcome: &ExecutionOutcome) -> String {
    match outcome {
        ExecutionOutcome::Success(t) => {
            alloc::format!("{} ({} rows x {} columns)", t.name(), t.row_count(), t.column_count())
        }
        ExecutionOutcome::Failure { kind, detail } => alloc::format!("{kind}: {detail}"),
    }
}
