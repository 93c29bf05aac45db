//! SQLite execution of generated queries with the table-reference retry
//! ladder.

use std::sync::atomic::{AtomicUsize, Ordering};

use rusqlite::types::{Value, ValueRef};
use rusqlite::Connection;
use tabqa_core::exec::{is_missing_name_error, retry_ladder};
use tabqa_core::{Cell, CellValue, Column, ColumnOrigin, ExecutionContext, ExecutionOutcome, FailureKind, Table};

/// Result of one `execute_sql` call, including how many rewritten queries
/// were tried after the original failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SqlRun {
    pub outcome: ExecutionOutcome,
    pub ladder_attempts: usize,
}

/// Registers the context tables in a fresh in-memory database per call.
#[derive(Debug, Default)]
pub struct SqlExecutor {
    ladder_attempts: AtomicUsize,
}

impl SqlExecutor {
    pub fn new() -> SqlExecutor {
        SqlExecutor::default()
    }

    /// Ladder attempts summed over every call so far.
    pub fn total_ladder_attempts(&self) -> usize {
        self.ladder_attempts.load(Ordering::Relaxed)
    }

    pub fn run(&self, code: &str, ctx: &ExecutionContext) -> SqlRun {
        let conn = match register(ctx) {
            Ok(conn) => conn,
            Err(e) => {
                return SqlRun {
                    outcome: ExecutionOutcome::failure(FailureKind::SqlError, format!("cannot load tables: {e}")),
                    ladder_attempts: 0,
                }
            }
        };
        let first = query(&conn, code, ctx);
        let message = match first {
            Ok(table) => {
                return SqlRun {
                    outcome: ExecutionOutcome::Success(table),
                    ladder_attempts: 0,
                }
            }
            Err(message) => message,
        };
        let mut attempts = 0;
        if is_missing_name_error(&message) {
            for (_, rewritten) in retry_ladder(code, ctx) {
                attempts += 1;
                if let Ok(table) = query(&conn, &rewritten, ctx) {
                    self.ladder_attempts.fetch_add(attempts, Ordering::Relaxed);
                    return SqlRun {
                        outcome: ExecutionOutcome::Success(table),
                        ladder_attempts: attempts,
                    };
                }
            }
        }
        self.ladder_attempts.fetch_add(attempts, Ordering::Relaxed);
        SqlRun {
            outcome: ExecutionOutcome::failure(FailureKind::SqlError, message),
            ladder_attempts: attempts,
        }
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// Whole numbers without a fractional part stay integers so that
/// comparisons and counts behave like the source data.
fn sql_value(cell: &Cell) -> Value {
    match cell.canonical() {
        CellValue::Null => Value::Null,
        CellValue::Text(_) => Value::Text(cell.raw().to_string()),
        CellValue::Number(n) => {
            let raw = cell.raw().trim();
            let integral = !raw.contains(['.', 'e', 'E']) && n.fract() == 0.0 && n.abs() < 9.0e15;
            if integral {
                Value::Integer(*n as i64)
            } else {
                Value::Real(*n)
            }
        }
    }
}

fn register(ctx: &ExecutionContext) -> rusqlite::Result<Connection> {
    let conn = Connection::open_in_memory()?;
    for table in ctx.tables() {
        let name = quote_ident(&table.name().to_string());
        let cols: Vec<String> = table
            .columns()
            .iter()
            .map(|c| quote_ident(c.normalized_name()))
            .collect();
        conn.execute(&format!("CREATE TABLE {name} ({})", cols.join(", ")), [])?;
        if table.column_count() == 0 {
            continue;
        }
        let placeholders = vec!["?"; table.column_count()].join(", ");
        let mut insert = conn.prepare(&format!("INSERT INTO {name} VALUES ({placeholders})"))?;
        for row in table.rows() {
            insert.execute(rusqlite::params_from_iter(row.iter().map(sql_value)))?;
        }
    }
    Ok(conn)
}

fn render(value: ValueRef<'_>) -> String {
    match value {
        ValueRef::Null => "NULL".to_string(),
        ValueRef::Integer(i) => i.to_string(),
        ValueRef::Real(r) if r.fract() == 0.0 && r.abs() < 1e15 => format!("{r:.1}"),
        ValueRef::Real(r) => r.to_string(),
        ValueRef::Text(t) | ValueRef::Blob(t) => String::from_utf8_lossy(t).into_owned(),
    }
}

fn query(conn: &Connection, code: &str, ctx: &ExecutionContext) -> Result<Table, String> {
    let mut stmt = conn.prepare(code).map_err(|e| e.to_string())?;
    if stmt.column_count() == 0 {
        return Err("statement returns no result columns".to_string());
    }
    let columns: Vec<Column> = stmt
        .column_names()
        .into_iter()
        .map(|n| Column::new(n, ColumnOrigin::Sql))
        .collect();
    let width = columns.len();
    let mut rows = Vec::new();
    let mut cursor = stmt.query([]).map_err(|e| e.to_string())?;
    while let Some(row) = cursor.next().map_err(|e| e.to_string())? {
        let mut cells = Vec::with_capacity(width);
        for i in 0..width {
            let v = row.get_ref(i).map_err(|e| e.to_string())?;
            cells.push(Cell::new(render(v)));
        }
        rows.push(cells);
    }
    Table::new(ctx.next_table_name(), columns, rows).map_err(|e| e.to_string())
}
