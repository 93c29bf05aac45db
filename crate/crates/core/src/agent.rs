//! The iterative prompt / execute loop and the three voting strategies.

use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::action::{parse_action, parse_forced_answer, Action, ActionKind};
use crate::exec::{CodeExecutor, ExecutionContext, ExecutionOutcome, FailureKind};
use crate::llm::{self, BackendError, Completion, CompletionBackend, CompletionRequest};
use crate::prompt::{force_answer, Demonstration, PromptOptions, PromptState};
use crate::table::{tables_equivalent, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// A single greedy chain.
    None,
    /// `n` independent chains, majority over their answers.
    Simple,
    /// `n` samples at every step, every branch explored.
    Tree,
    /// `n` samples per step grouped by execution result, best log-prob wins.
    Exec,
}

impl core::str::FromStr for Strategy {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Strategy::None),
            "simple" => Ok(Strategy::Simple),
            "tree" => Ok(Strategy::Tree),
            "exec" => Ok(Strategy::Exec),
            other => Err(AgentError::InvalidConfig(alloc::format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no chain produced an answer")]
    EmptyVote,
    #[error("execution-based voting needs log-probabilities, and the backend returned none")]
    NoLogProbBackend,
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub strategy: Strategy,
    pub n: usize,
    pub temperature: f64,
    /// Call `k` of a chain is forced to answer; `None` is unlimited.
    pub max_iterations: Option<usize>,
    pub sql_only: bool,
    /// Total branches tree exploration may create before forcing answers.
    pub tree_branch_budget: usize,
    pub prompt: PromptOptions,
    pub stop: Vec<String>,
    pub max_tokens: usize,
}

impl AgentConfig {
    pub const GREEDY_TEMPERATURE: f64 = 0.0;
    pub const VOTING_TEMPERATURE: f64 = 0.6;
    pub const DEFAULT_SAMPLES: usize = 5;
    pub const DEFAULT_TREE_DEPTH: usize = 5;
    pub const DEFAULT_TREE_BUDGET: usize = 256;

    pub fn new(strategy: Strategy) -> AgentConfig {
        let (n, temperature) = match strategy {
            Strategy::None => (1, Self::GREEDY_TEMPERATURE),
            _ => (Self::DEFAULT_SAMPLES, Self::VOTING_TEMPERATURE),
        };
        AgentConfig {
            strategy,
            n,
            temperature,
            max_iterations: None,
            sql_only: false,
            tree_branch_budget: Self::DEFAULT_TREE_BUDGET,
            prompt: PromptOptions::default(),
            stop: llm::DEFAULT_STOP.iter().map(|s| s.to_string()).collect(),
            max_tokens: llm::DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.n == 0 {
            return Err(AgentError::InvalidConfig("n must be at least 1".into()));
        }
        if self.temperature < 0.0 {
            return Err(AgentError::InvalidConfig("temperature must be non-negative".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(AgentError::InvalidConfig("iteration limit must be positive".into()));
        }
        if self.tree_branch_budget == 0 {
            return Err(AgentError::InvalidConfig("tree branch budget must be positive".into()));
        }
        Ok(())
    }

    fn tree_depth(&self) -> usize {
        self.max_iterations.unwrap_or(Self::DEFAULT_TREE_DEPTH)
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig::new(Strategy::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub kind: FailureKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    pub action: Action,
    /// Present for code steps that executed successfully.
    pub table: Option<Table>,
    pub failure: Option<StepFailure>,
    pub forced: bool,
}

/// One reasoning trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub question: String,
    pub steps: Vec<ChainStep>,
    pub answer: Option<String>,
    pub llm_calls: usize,
    /// Why the chain ended without an answer.
    pub failure: Option<String>,
    /// The final prompt sent to the backend.
    pub last_prompt: String,
}

impl Chain {
    fn new(question: &str) -> Chain {
        Chain {
            question: question.to_string(),
            steps: Vec::new(),
            answer: None,
            llm_calls: 0,
            failure: None,
            last_prompt: String::new(),
        }
    }

    /// Intermediate tables produced along the chain, `T1..Tk`.
    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.steps.iter().filter_map(|s| s.table.as_ref())
    }

    fn finish(&mut self, action: Action, forced: bool) {
        let answer = action.answer().unwrap_or_default().to_string();
        if answer.is_empty() {
            self.failure = Some("model produced an empty answer".into());
        } else {
            self.answer = Some(answer);
        }
        self.steps.push(ChainStep {
            action,
            table: None,
            failure: None,
            forced,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ballot {
    pub answer: String,
    /// LLM calls along the chain that produced this answer.
    pub iterations: usize,
}

/// Result of running a strategy on one question.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteOutcome {
    pub answer: String,
    pub ballots: Vec<Ballot>,
    /// Requests issued to the backend.
    pub llm_calls: usize,
    /// Modal chain length among ballots for the winning answer.
    pub iterations_used: usize,
    /// A chain that reached the winning answer.
    pub trace: Chain,
    /// Per-step result logs of execution-based voting.
    pub exec_log: Vec<ResultLog>,
}

/// Vote key: the answer-value normalization used by the evaluator, so that
/// case, spacing, quotes and trailing punctuation do not split votes.
pub fn normalize_vote_key(answer: &str) -> String {
    crate::eval::normalize(answer)
}

/// Most frequent answer under [`normalize_vote_key`], returned in its
/// first-seen raw form. Ties go to the class seen first.
pub fn get_majority<S: AsRef<str>>(answers: &[S]) -> Result<String, AgentError> {
    let mut classes: Vec<(String, &str, usize)> = Vec::new();
    for a in answers {
        let key = normalize_vote_key(a.as_ref());
        match classes.iter_mut().find(|(k, _, _)| *k == key) {
            Some(class) => class.2 += 1,
            None => classes.push((key, a.as_ref(), 1)),
        }
    }
    let mut best: Option<&(String, &str, usize)> = None;
    for class in &classes {
        if best.is_none_or(|b| class.2 > b.2) {
            best = Some(class);
        }
    }
    best.map(|(_, raw, _)| raw.to_string()).ok_or(AgentError::EmptyVote)
}

/// What a sampled prediction is grouped by in execution-based voting.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupKey {
    Table(Table),
    Answer(String),
}

impl GroupKey {
    fn matches(&self, other: &GroupKey) -> bool {
        match (self, other) {
            (GroupKey::Table(a), GroupKey::Table(b)) => tables_equivalent(a, b),
            (GroupKey::Answer(a), GroupKey::Answer(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultGroup {
    pub key: GroupKey,
    pub best_log_prob: f64,
    /// Highest-scoring member.
    pub representative: Action,
    pub members: usize,
}

/// Equivalence classes of one sampling step, scored by their best member.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultLog {
    pub groups: Vec<ResultGroup>,
    /// Predictions whose code failed to execute.
    pub discarded: usize,
}

impl ResultLog {
    pub fn new() -> ResultLog {
        ResultLog::default()
    }

    pub fn update(&mut self, key: GroupKey, action: Action, log_prob: f64) {
        match self.groups.iter_mut().find(|g| g.key.matches(&key)) {
            Some(group) => {
                group.members += 1;
                if log_prob > group.best_log_prob {
                    group.best_log_prob = log_prob;
                    group.representative = action;
                }
            }
            None => self.groups.push(ResultGroup {
                key,
                best_log_prob: log_prob,
                representative: action,
                members: 1,
            }),
        }
    }

    /// Group with the highest score; the earliest wins ties.
    pub fn best(&self) -> Option<&ResultGroup> {
        let mut best: Option<&ResultGroup> = None;
        for g in &self.groups {
            if best.is_none_or(|b| g.best_log_prob > b.best_log_prob) {
                best = Some(g);
            }
        }
        best
    }
}

/// Drives the loop for one question.
pub struct Agent<'a> {
    backend: &'a dyn CompletionBackend,
    executor: &'a dyn CodeExecutor,
    demos: &'a [Demonstration],
    config: AgentConfig,
}

struct Branch {
    state: PromptState,
    chain: Chain,
    depth: usize,
    force: bool,
}

impl<'a> Agent<'a> {
    pub fn new(
        backend: &'a dyn CompletionBackend,
        executor: &'a dyn CodeExecutor,
        demos: &'a [Demonstration],
        config: AgentConfig,
    ) -> Result<Agent<'a>, AgentError> {
        config.validate()?;
        Ok(Agent {
            backend,
            executor,
            demos,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    /// Runs the configured strategy.
    pub fn run(&self, table: &Table, question: &str) -> Result<VoteOutcome, AgentError> {
        match self.config.strategy {
            Strategy::None => {
                let chain = self.run_chain(table, question)?;
                outcome_from_chains(vec![chain], 0)
            }
            Strategy::Simple => self.run_simple_vote(table, question),
            Strategy::Tree => self.run_tree_vote(table, question),
            Strategy::Exec => self.run_exec_vote(table, question),
        }
    }

    fn sample(&self, prompt: &str, n: usize) -> Result<Vec<Completion>, AgentError> {
        let request = CompletionRequest {
            prompt: prompt.to_string(),
            temperature: self.config.temperature,
            n,
            stop: self.config.stop.clone(),
            max_tokens: self.config.max_tokens,
        };
        Ok(llm::complete(self.backend, &request)?)
    }

    fn at_limit(&self, call: usize, limit: Option<usize>) -> bool {
        limit.is_some_and(|k| call >= k)
    }

    fn parse(&self, completion: &Completion, forced: bool) -> Action {
        if forced {
            parse_forced_answer(&completion.text, completion.log_prob)
        } else {
            parse_action(&completion.text, completion.log_prob)
        }
    }

    fn execute(&self, action: &Action, tables: &[Table]) -> ExecutionOutcome {
        let ctx = ExecutionContext::new(tables.to_vec(), self.config.sql_only);
        let outcome = match &action.kind {
            ActionKind::Sql(code) => self.executor.execute_sql(code, &ctx),
            ActionKind::Script(_) if self.config.sql_only => {
                ExecutionOutcome::failure(FailureKind::ExecutorDisabled, "only the SQL executor is enabled")
            }
            ActionKind::Script(code) => self.executor.execute_script(code, &ctx),
            ActionKind::Answer(_) => unreachable!("answers are not executed"),
        };
        match outcome {
            ExecutionOutcome::Success(t) => ExecutionOutcome::Success(t.with_name(ctx.next_table_name())),
            failure => failure,
        }
    }

    fn code_step(action: Action, outcome: &ExecutionOutcome, forced: bool) -> ChainStep {
        match outcome {
            ExecutionOutcome::Success(t) => ChainStep {
                action,
                table: Some(t.clone()),
                failure: None,
                forced,
            },
            ExecutionOutcome::Failure { kind, detail } => ChainStep {
                action,
                table: None,
                failure: Some(StepFailure {
                    kind: *kind,
                    detail: detail.clone(),
                }),
                forced,
            },
        }
    }

    /// One trajectory with a single sample per call. After an execution
    /// failure, or on call `k` of a `k`-limited run, the prompt is forced to
    /// answer.
    pub fn run_chain(&self, table: &Table, question: &str) -> Result<Chain, AgentError> {
        let mut state = PromptState::new(self.demos, table.clone(), question, self.config.prompt);
        let mut chain = Chain::new(question);
        let mut force = false;
        loop {
            let forced = force || self.at_limit(chain.llm_calls + 1, self.config.max_iterations);
            let prompt = if forced {
                force_answer(state.prompt())
            } else {
                state.prompt().to_string()
            };
            let completion = self.sample(&prompt, 1)?.remove(0);
            chain.llm_calls += 1;
            chain.last_prompt = prompt;
            let action = self.parse(&completion, forced);
            if !action.is_code() {
                chain.finish(action, forced);
                return Ok(chain);
            }
            let outcome = self.execute(&action, state.tables());
            if let ExecutionOutcome::Success(t) = &outcome {
                state.push_step(&action.raw, t.clone());
            } else {
                force = true;
            }
            chain.steps.push(Self::code_step(action, &outcome, forced));
        }
    }

    /// Majority over `n` independent chains. Chains without an answer do not
    /// vote.
    pub fn run_simple_vote(&self, table: &Table, question: &str) -> Result<VoteOutcome, AgentError> {
        let chains = (0..self.config.n)
            .map(|_| self.run_chain(table, question))
            .collect::<Result<Vec<_>, _>>()?;
        outcome_from_chains(chains, 0)
    }

    /// Breadth-first exploration with fanout `n`. Each branch is limited to
    /// `max_iterations` calls (default 5); once the branch budget is spent,
    /// every remaining branch is forced to answer.
    pub fn run_tree_vote(&self, table: &Table, question: &str) -> Result<VoteOutcome, AgentError> {
        let depth_limit = Some(self.config.tree_depth());
        let mut queue = VecDeque::new();
        queue.push_back(Branch {
            state: PromptState::new(self.demos, table.clone(), question, self.config.prompt),
            chain: Chain::new(question),
            depth: 0,
            force: false,
        });
        let mut created = 1;
        let mut calls = 0;
        let mut finished = Vec::new();

        while let Some(branch) = queue.pop_front() {
            let call = branch.depth + 1;
            let forced = branch.force || self.at_limit(call, depth_limit) || created >= self.config.tree_branch_budget;
            let prompt = if forced {
                force_answer(branch.state.prompt())
            } else {
                branch.state.prompt().to_string()
            };
            let completions = self.sample(&prompt, self.config.n)?;
            calls += 1;
            for completion in &completions {
                let action = self.parse(completion, forced);
                let mut chain = branch.chain.clone();
                chain.llm_calls = call;
                chain.last_prompt = prompt.clone();
                if !action.is_code() {
                    chain.finish(action, forced);
                    finished.push(chain);
                    continue;
                }
                let outcome = self.execute(&action, branch.state.tables());
                let mut state = branch.state.clone();
                let failed = match &outcome {
                    ExecutionOutcome::Success(t) => {
                        state.push_step(&action.raw, t.clone());
                        false
                    }
                    ExecutionOutcome::Failure { .. } => true,
                };
                chain.steps.push(Self::code_step(action, &outcome, forced));
                created += 1;
                queue.push_back(Branch {
                    state,
                    chain,
                    depth: call,
                    force: failed,
                });
            }
        }
        outcome_from_chains(finished, calls)
    }

    /// Per step, samples `n` predictions, groups code by equivalent result
    /// tables and answers by normalized text, and commits the group with the
    /// highest member log-probability.
    pub fn run_exec_vote(&self, table: &Table, question: &str) -> Result<VoteOutcome, AgentError> {
        let mut state = PromptState::new(self.demos, table.clone(), question, self.config.prompt);
        let mut chain = Chain::new(question);
        let mut logs = Vec::new();
        let mut force = false;
        loop {
            let forced = force || self.at_limit(chain.llm_calls + 1, self.config.max_iterations);
            let prompt = if forced {
                force_answer(state.prompt())
            } else {
                state.prompt().to_string()
            };
            let completions = self.sample(&prompt, self.config.n)?;
            chain.llm_calls += 1;
            chain.last_prompt = prompt;
            if completions.iter().any(|c| c.log_prob.is_none()) {
                return Err(AgentError::NoLogProbBackend);
            }

            let mut log = ResultLog::new();
            for completion in &completions {
                let log_prob = completion.log_prob.unwrap_or(f64::NEG_INFINITY);
                let action = self.parse(completion, forced);
                match &action.kind {
                    ActionKind::Answer(a) if a.is_empty() => log.discarded += 1,
                    ActionKind::Answer(a) => {
                        let key = GroupKey::Answer(normalize_vote_key(a));
                        log.update(key, action, log_prob);
                    }
                    _ => match self.execute(&action, state.tables()) {
                        ExecutionOutcome::Success(t) => log.update(GroupKey::Table(t), action, log_prob),
                        ExecutionOutcome::Failure { .. } => log.discarded += 1,
                    },
                }
            }

            let selected = log.best().map(|g| (g.key.clone(), g.representative.clone()));
            logs.push(log);
            match selected {
                None if forced => {
                    chain.failure = Some("every forced prediction was empty".into());
                    return Err(AgentError::EmptyVote);
                }
                None => force = true,
                Some((GroupKey::Table(t), action)) => {
                    state.push_step(&action.raw, t.clone());
                    chain.steps.push(ChainStep {
                        action,
                        table: Some(t),
                        failure: None,
                        forced,
                    });
                }
                Some((GroupKey::Answer(_), action)) => {
                    chain.finish(action, forced);
                    let mut outcome = outcome_from_chains(vec![chain], 0)?;
                    outcome.exec_log = logs;
                    return Ok(outcome);
                }
            }
        }
    }
}

fn outcome_from_chains(chains: Vec<Chain>, calls: usize) -> Result<VoteOutcome, AgentError> {
    let llm_calls = if calls > 0 {
        calls
    } else {
        chains.iter().map(|c| c.llm_calls).sum()
    };
    let ballots: Vec<Ballot> = chains
        .iter()
        .filter_map(|c| {
            c.answer.as_ref().map(|a| Ballot {
                answer: a.clone(),
                iterations: c.llm_calls,
            })
        })
        .collect();
    let answers: Vec<&str> = ballots.iter().map(|b| b.answer.as_str()).collect();
    let answer = get_majority(&answers)?;
    let key = normalize_vote_key(&answer);
    let iterations_used = modal_iterations(
        ballots
            .iter()
            .filter(|b| normalize_vote_key(&b.answer) == key)
            .map(|b| b.iterations),
    );
    let trace = chains
        .into_iter()
        .find(|c| c.answer.as_deref().is_some_and(|a| normalize_vote_key(a) == key))
        .expect("winning answer comes from a chain");
    Ok(VoteOutcome {
        answer,
        ballots,
        llm_calls,
        iterations_used,
        trace,
        exec_log: Vec::new(),
    })
}

/// Most common value; the smallest wins ties.
fn modal_iterations(values: impl Iterator<Item = usize>) -> usize {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for v in values {
        match counts.iter_mut().find(|(x, _)| *x == v) {
            Some(entry) => entry.1 += 1,
            None => counts.push((v, 1)),
        }
    }
    counts.sort_unstable();
    let mut best = (0, 0);
    for (v, c) in counts {
        if c > best.1 {
            best = (v, c);
        }
    }
    best.0
}
