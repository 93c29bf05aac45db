use tabqa_core::{CodeExecutor, ExecutionContext, ExecutionOutcome, FailureKind};

use crate::sidecar::SidecarPool;
use crate::sql::SqlExecutor;

/// SQLite for SQL actions, an optional sidecar pool for script actions.
pub struct LocalExecutor {
    sql: SqlExecutor,
    sidecar: Option<SidecarPool>,
}

impl LocalExecutor {
    pub fn new(sidecar: Option<SidecarPool>) -> LocalExecutor {
        LocalExecutor {
            sql: SqlExecutor::new(),
            sidecar,
        }
    }

    pub fn sql(&self) -> &SqlExecutor {
        &self.sql
    }
}

impl CodeExecutor for LocalExecutor {
    fn execute_sql(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome {
        self.sql.run(code, ctx).outcome
    }

    fn execute_script(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome {
        match &self.sidecar {
            Some(pool) => pool.execute(code, ctx),
            None => ExecutionOutcome::failure(FailureKind::SidecarUnavailable, "no sidecar command configured"),
        }
    }
}
