//! Prompt template: few-shot demonstrations, the live table and question,
//! and the transcript of executed steps.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::action::{parse_action, ActionKind};
use crate::table::{serialize_for_prompt, Table, TableName};

/// Opens every model turn.
pub const TURN_OPENER: &str = "ReAcTable:";
/// Appended to a prompt's trailing turn opener to constrain the next
/// completion to a direct answer.
pub const FORCE_ANSWER_SUFFIX: &str = " Answer: ``";
pub const TABLE_INTRO: &str = "The database table T0 is shown as follows:";

pub fn instruction(question: &str) -> String {
    format!(
        "Answer the following question based on the data above: \"{question}\". \
         Generate SQL or Python code step-by-step given the question and table to answer the question correctly."
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Maximum rows rendered per table; `None` renders every row.
    pub row_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("demonstration {index}: {reason}")]
    InvalidDemonstration { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Model,
    Executor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoStep {
    pub role: Role,
    pub text: String,
}

/// A static few-shot example, stored as already-rendered text blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    /// Serialized table plus its instruction sentence.
    pub table_block: String,
    pub steps: Vec<DemoStep>,
    pub final_answer: String,
}

impl Demonstration {
    pub fn validate(&self, index: usize) -> Result<(), PromptError> {
        let fail = |reason: &str| PromptError::InvalidDemonstration {
            index,
            reason: reason.to_string(),
        };
        if !self.table_block.contains("[HEAD]:") {
            return Err(fail("table block has no [HEAD] line"));
        }
        for (i, step) in self.steps.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::Model } else { Role::Executor };
            if step.role != expected {
                return Err(fail("steps must alternate model/executor starting with model"));
            }
        }
        let last = self.steps.last().ok_or_else(|| fail("no steps"))?;
        if last.role != Role::Model {
            return Err(fail("last step must be a model answer"));
        }
        match parse_action(&last.text, None).kind {
            ActionKind::Answer(a) if a == self.final_answer.trim() => Ok(()),
            ActionKind::Answer(_) => Err(fail("final answer does not match the last step")),
            _ => Err(fail("last step is not an Answer: turn")),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::from(self.table_block.trim_end());
        out.push_str("\n\n");
        for step in &self.steps {
            match step.role {
                Role::Model => out.push_str(&model_turn(&step.text)),
                Role::Executor => out.push_str(step.text.trim()),
            }
            out.push_str("\n\n");
        }
        out
    }
}

fn model_turn(text: &str) -> String {
    let text = text.trim();
    if text.starts_with(TURN_OPENER) {
        text.to_string()
    } else {
        format!("{TURN_OPENER} {text}")
    }
}

pub fn build_initial_prompt(demos: &[Demonstration], table: &Table, question: &str, options: PromptOptions) -> String {
    let mut out = String::new();
    for demo in demos {
        out.push_str(&demo.render());
    }
    out.push_str(TABLE_INTRO);
    out.push('\n');
    out.push_str(&serialize_for_prompt(table, options.row_cap));
    out.push_str("\n\n");
    out.push_str(&instruction(question));
    out.push_str("\n\n");
    out.push_str(TURN_OPENER);
    out
}

/// Appends an executed model turn and the table it produced, then reopens a
/// model turn.
pub fn extend_prompt(prompt: &str, model_text: &str, result_table: &Table, options: PromptOptions) -> String {
    let base = prompt.strip_suffix(TURN_OPENER).unwrap_or(prompt);
    let mut out = String::from(base);
    if !base.is_empty() && !base.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&model_turn(model_text));
    out.push_str("\n\n");
    out.push_str(&format!("Intermediate table ({}):\n", result_table.name()));
    out.push_str(&serialize_for_prompt(result_table, options.row_cap));
    out.push_str("\n\n");
    out.push_str(TURN_OPENER);
    out
}

pub fn force_answer(prompt: &str) -> String {
    let mut out = String::from(prompt);
    if !out.ends_with(TURN_OPENER) {
        out.push('\n');
        out.push_str(TURN_OPENER);
    }
    out.push_str(FORCE_ANSWER_SUFFIX);
    out
}

pub fn is_forced(prompt: &str) -> bool {
    prompt.ends_with(FORCE_ANSWER_SUFFIX)
}

/// The tables and transcript of one reasoning trajectory, together with the
/// prompt they instantiate.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    question: String,
    tables: Vec<Table>,
    transcript: Vec<(String, String)>,
    prompt: String,
    options: PromptOptions,
}

impl PromptState {
    pub fn new(demos: &[Demonstration], table: Table, question: &str, options: PromptOptions) -> PromptState {
        let table = table.with_name(TableName::SOURCE);
        let prompt = build_initial_prompt(demos, &table, question, options);
        PromptState {
            question: question.to_string(),
            tables: alloc::vec![table],
            transcript: Vec::new(),
            prompt,
            options,
        }
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn transcript(&self) -> &[(String, String)] {
        &self.transcript
    }

    pub fn prompt(&self) -> &str {
        &self.prompt
    }

    pub fn next_table_name(&self) -> TableName {
        TableName(self.tables.len())
    }

    /// Records an executed step. The table is renamed to the next index.
    pub fn push_step(&mut self, model_text: &str, table: Table) {
        let table = table.with_name(self.next_table_name());
        self.prompt = extend_prompt(&self.prompt, model_text, &table, self.options);
        let executor_text = serialize_for_prompt(&table, self.options.row_cap);
        self.transcript.push((model_text.to_string(), executor_text));
        self.tables.push(table);
    }
}
