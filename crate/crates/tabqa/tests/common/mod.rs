//! Fixtures shared by the integration tests: the cyclist race table, the
//! four model turns that answer the question about it, and an executor whose
//! script path is faked.

#![allow(dead_code)]

use tabqa::core::prompt::{FORCE_ANSWER_SUFFIX, TABLE_INTRO};
use tabqa::core::{
    Cell, CodeExecutor, Column, ColumnOrigin, Completion, CompletionRequest, ExecutionContext, ExecutionOutcome,
    FailureKind, Table, TableName,
};
use tabqa::sql::SqlExecutor;

pub const QUESTION: &str = "which country had the most cyclists finish within the top 10?";

pub const HEADERS: [&str; 5] = ["Rank", "Cyclist", "Team", "Time", "UCI ProTour Points"];

pub const ROWS: [[&str; 5]; 10] = [
    [
        "1",
        "Alejandro Valverde (ESP)",
        "Caisse d'Epargne",
        r#"5h 29' 10\",40""#,
        "NULL",
    ],
    ["2", "Alexandr Kolobnev (RUS)", "Team CSC Saxo Bank", "s.t.", "30.0"],
    ["3", "Davide Rebellin (ITA)", "Gerolsteiner", "s.t.", "25.0"],
    ["4", "Paolo Bettini (ITA)", "Quick Step", "s.t.", "20.0"],
    ["5", "Franco Pellizotti (ITA)", "Liquigas", "s.t.", "15.0"],
    ["6", "Denis Menchov (RUS)", "Rabobank", "s.t.", "11.0"],
    ["7", "Samuel Sánchez (ESP)", "Euskaltel-Euskadi", "s.t.", "7.0"],
    ["8", "Stéphane Goubert (FRA)", "Ag2r-La Mondiale", r#"+ 2""#, "5.0"],
    ["9", "Cadel Evans (AUS)", "Silence-Lotto", r#"+ 2""#, "3.0"],
    ["10", "David Moncoutié (FRA)", "Cofidis", r#"+ 2\",1""#, "NULL"],
];

pub const STEP_SQL_1: &str = " SQL: ``SELECT Cyclist FROM T0 WHERE rank<=10;``.";
pub const STEP_PYTHON: &str = r#" Python: ``
def get_country(s):
    return re.search("\\((.*?)\\)", s).group(1)
T1['Country'] = T1.apply(lambda x: get_country(x['Cyclist']), axis=1)``."#;
pub const STEP_SQL_3: &str =
    " SQL: ``SELECT Country, COUNT(*) FROM T2 GROUP BY Country ORDER\nBY COUNT(*) DESC LIMIT 1;``.";
pub const STEP_ANSWER: &str = " Answer: ``Italy``.";

pub fn cyclists() -> Table {
    Table::from_raw(TableName::SOURCE, HEADERS, ColumnOrigin::Source, ROWS).unwrap()
}

pub fn walkthrough_completions() -> Vec<&'static str> {
    vec![STEP_SQL_1, STEP_PYTHON, STEP_SQL_3, STEP_ANSWER]
}

/// Appends `Country`, the text between the parentheses of `Cyclist`, to the
/// latest table. Stands in for running the generated script.
pub fn add_country(ctx: &ExecutionContext) -> ExecutionOutcome {
    let latest = ctx.latest();
    let Some(col) = latest.columns().iter().position(|c| c.normalized_name() == "Cyclist") else {
        return ExecutionOutcome::failure(FailureKind::ScriptError, "KeyError: 'Cyclist'");
    };
    let mut columns = latest.columns().to_vec();
    columns.push(Column::new("Country", ColumnOrigin::Script));
    let rows = latest
        .rows()
        .iter()
        .map(|row| {
            let raw = row[col].raw();
            let country = raw
                .split_once('(')
                .and_then(|(_, rest)| rest.split_once(')'))
                .map_or("", |(inner, _)| inner);
            let mut row = row.clone();
            row.push(Cell::new(country));
            row
        })
        .collect();
    ExecutionOutcome::Success(Table::new(ctx.next_table_name(), columns, rows).unwrap())
}

type ScriptFn = dyn Fn(&str, &ExecutionContext) -> ExecutionOutcome + Send + Sync;

/// Real SQLite for SQL actions, a closure for script actions.
pub struct FakeExecutor {
    pub sql: SqlExecutor,
    script: Box<ScriptFn>,
}

impl FakeExecutor {
    pub fn new(script: impl Fn(&str, &ExecutionContext) -> ExecutionOutcome + Send + Sync + 'static) -> FakeExecutor {
        FakeExecutor {
            sql: SqlExecutor::new(),
            script: Box::new(script),
        }
    }

    /// Scripts always produce the `Country` column.
    pub fn countries() -> FakeExecutor {
        FakeExecutor::new(|_, ctx| add_country(ctx))
    }

    pub fn sql_only() -> FakeExecutor {
        FakeExecutor::new(|_, _| ExecutionOutcome::failure(FailureKind::SidecarUnavailable, "no script executor"))
    }
}

impl CodeExecutor for FakeExecutor {
    fn execute_sql(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome {
        self.sql.run(code, ctx).outcome
    }

    fn execute_script(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome {
        (self.script)(code, ctx)
    }
}

/// The part of a prompt after the few-shot demonstrations.
pub fn live_part(prompt: &str) -> &str {
    prompt.rfind(TABLE_INTRO).map_or(prompt, |i| &prompt[i..])
}

pub fn is_forced(prompt: &str) -> bool {
    prompt.ends_with(FORCE_ANSWER_SUFFIX)
}

/// Intermediate tables shown in the live part of a prompt.
pub fn shown_tables(prompt: &str) -> usize {
    live_part(prompt).matches("Intermediate table (T").count()
}

/// Answers the cyclist question from the prompt alone, so the same prompt
/// always gets the same turn.
pub fn walkthrough_responder(request: &CompletionRequest) -> Vec<Completion> {
    let text = if is_forced(&request.prompt) {
        "Italy``."
    } else {
        match shown_tables(&request.prompt) {
            0 => STEP_SQL_1,
            1 => STEP_PYTHON,
            2 => STEP_SQL_3,
            _ => STEP_ANSWER,
        }
    };
    vec![Completion::new(text, Some(-0.1)); request.n]
}

/// Cells of a table as raw strings.
pub fn raw(table: &Table) -> Vec<Vec<String>> {
    table.raw_rows()
}

/// A WikiTQ-layout dataset of ten questions over one league table.
pub const LEAGUE_CSV: &str =
    "Team,Wins,Losses\nHawks,12,2\nLions,10,4\nBears,9,5\nWolves,7,7\nEagles,5,9\nSharks,3,11\n";

/// (question, gold targetValue, model turns before the answer, answer).
pub const LEAGUE_PLANS: [(&str, &str, &[&str], &str); 10] = [
    ("q0: which team has the most wins?", "Hawks", &[], "Hawks"),
    (
        "q1: how many teams won more than 8 games?",
        "3",
        &[" SQL: ``SELECT COUNT(*) FROM T0 WHERE Wins > 8``."],
        "3",
    ),
    (
        "q2: which teams lost fewer than 5 games?",
        "Hawks|Lions",
        &[
            " SQL: ``SELECT Team FROM T0 WHERE Losses < 5``.",
            " SQL: ``SELECT Team FROM T1 ORDER BY Team DESC``.",
        ],
        "Lions|Hawks",
    ),
    ("q3: how many losses did the Wolves have?", "7", &[], "7"),
    (
        "q4: which team has the fewest wins?",
        "Sharks",
        &[" SQL: ``SELECT Team, Wins FROM T0``."],
        "Eagles",
    ),
    (
        "q5: how many wins in total?",
        "46",
        &[" SQL: ``SELECT SUM(Wins) FROM T0``."],
        "46",
    ),
    (
        "q6: which team had 9 wins?",
        "Bears",
        &[" Python: ``T0 = T0[T0['Wins'] == 9]``."],
        "Bears",
    ),
    ("q7: how many teams have more losses than wins?", "2", &[], "3"),
    (
        "q8: how many games did the Lions win?",
        "10",
        &[
            " SQL: ``SELECT * FROM T0 WHERE Team = 'Lions'``.",
            " SQL: ``SELECT Wins FROM T1``.",
        ],
        "10.0",
    ),
    (
        "q9: which team won exactly 7 games?",
        "Wolves",
        &[" SQL: ``SELECT Team FROM T0 WHERE Points = 7``."],
        "Wolves",
    ),
];

pub fn write_league_dataset(dir: &std::path::Path) -> std::path::PathBuf {
    std::fs::create_dir_all(dir.join("csv")).unwrap();
    std::fs::create_dir_all(dir.join("data")).unwrap();
    std::fs::write(dir.join("csv/league.csv"), LEAGUE_CSV).unwrap();
    let mut tsv = String::from("id\tutterance\tcontext\ttargetValue\n");
    for (i, (q, gold, _, _)) in LEAGUE_PLANS.iter().enumerate() {
        tsv.push_str(&format!("nt-{i}\t{q}\tcsv/league.csv\t{}\n", gold));
    }
    let path = dir.join("data/dev.tsv");
    std::fs::write(&path, tsv).unwrap();
    path
}

/// Follows the plan of whichever league question the prompt asks.
pub fn league_responder(request: &CompletionRequest) -> Vec<Completion> {
    let live = live_part(&request.prompt);
    let index: usize = live
        .split_once("above: \"q")
        .and_then(|(_, rest)| rest.split_once(':'))
        .and_then(|(digits, _)| digits.parse().ok())
        .expect("prompt asks a league question");
    let (_, _, steps, answer) = LEAGUE_PLANS[index];
    let step = shown_tables(&request.prompt);
    let text = if is_forced(&request.prompt) {
        format!("{answer}``.")
    } else if step < steps.len() {
        steps[step].to_string()
    } else {
        format!(" Answer: ``{answer}``.")
    };
    vec![Completion::new(text, Some(-0.2 - step as f64)); request.n]
}
