//! Core of an iterative table question answering agent.
//!
//! A language model is prompted with a serialized table and a question. It
//! answers directly or emits SQL / script code; code is run by an external
//! executor and the resulting intermediate table is appended to the prompt for
//! the next round. Sampled reasoning chains can be aggregated with simple,
//! tree-exploration, or execution-based majority voting.
//!
//! This crate performs no IO. Model backends and code executors are supplied
//! through the [`llm::CompletionBackend`] and [`exec::CodeExecutor`] traits;
//! the `tabqa` crate provides the std implementations.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod action;
pub mod agent;
pub mod eval;
pub mod exec;
pub mod llm;
pub mod prompt;
pub mod table;

pub use action::Action;
pub use agent::{Agent, AgentConfig, AgentError, Chain, Strategy, VoteOutcome};
pub use exec::{CodeExecutor, ExecutionContext, ExecutionOutcome, FailureKind};
pub use llm::{BackendError, Completion, CompletionBackend, CompletionRequest};
pub use prompt::{Demonstration, PromptOptions, PromptState};
pub use table::{Cell, CellValue, Column, ColumnOrigin, Table, TableError, TableName};
