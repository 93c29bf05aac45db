//! Benchmark runs: every instance through the configured strategy, scored
//! with the dataset's metric, on a fixed pool of worker threads.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use tabqa_core::eval::{score_instance, DatasetKind, EvalReport, InstanceResult, QaInstance};
use tabqa_core::{Agent, AgentConfig, AgentError, CodeExecutor, CompletionBackend, Demonstration};

pub struct BenchInputs<'a> {
    pub kind: DatasetKind,
    pub instances: &'a [QaInstance],
    pub config: &'a AgentConfig,
    pub demos: &'a [Demonstration],
    pub backend: &'a (dyn CompletionBackend + Sync),
    pub executor: &'a (dyn CodeExecutor + Sync),
    pub workers: usize,
}

fn run_one(inputs: &BenchInputs<'_>, instance: &QaInstance) -> InstanceResult {
    let agent = Agent::new(inputs.backend, inputs.executor, inputs.demos, inputs.config.clone())
        .expect("configuration validated before the run");
    let (predicted, iterations_used, llm_calls, failure) = match agent.run(&instance.table, &instance.question) {
        Ok(out) => (Some(out.answer), out.iterations_used, out.llm_calls, None),
        Err(e) => (None, 0, 0, Some(e.to_string())),
    };
    let (correct, rouge) = score_instance(inputs.kind, instance, predicted.as_deref());
    InstanceResult {
        id: instance.id.clone(),
        predicted,
        correct,
        rouge,
        iterations_used,
        llm_calls,
        failure,
    }
}

/// Per-instance failures are recorded in the report; only an invalid
/// configuration or an empty dataset aborts.
pub fn run_benchmark(inputs: &BenchInputs<'_>) -> Result<EvalReport, AgentError> {
    inputs.config.validate()?;
    if inputs.instances.is_empty() {
        return Err(AgentError::InvalidConfig("dataset has no instances".into()));
    }
    let workers = inputs.workers.clamp(1, inputs.instances.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<InstanceResult>>> = Mutex::new(vec![None; inputs.instances.len()]);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(instance) = inputs.instances.get(i) else { break };
                let result = run_one(inputs, instance);
                slots.lock().expect("result slots poisoned")[i] = Some(result);
            });
        }
    });
    let results = slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every instance was evaluated"))
        .collect();
    Ok(EvalReport::aggregate(inputs.kind, results))
}

pub fn report_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset      {}", report.kind);
    let _ = writeln!(out, "instances    {}", report.total);
    if let Some(acc) = report.accuracy {
        let _ = writeln!(out, "correct      {}", report.correct);
        let _ = writeln!(out, "accuracy     {acc:.4}");
    }
    for (label, v) in [
        ("rouge-1", report.rouge_1),
        ("rouge-2", report.rouge_2),
        ("rouge-l", report.rouge_l),
    ] {
        if let Some(v) = v {
            let _ = writeln!(out, "{label:<12} {v:.4}");
        }
    }
    let _ = writeln!(out, "\niterations   questions   share");
    for (it, count) in &report.iteration_histogram {
        let label = if *it == 0 { "failed".to_string() } else { it.to_string() };
        let share = *count as f64 / report.total as f64;
        let _ = writeln!(out, "{label:<12} {count:<11} {share:.3}");
    }
    let _ = writeln!(out, "\nid\tverdict\titerations\tpredicted");
    for r in &report.per_instance {
        let verdict = match (r.correct, &r.rouge) {
            (Some(true), _) => "correct".to_string(),
            (Some(false), _) => "wrong".to_string(),
            (None, Some(s)) => format!("rouge-l {:.3}", s.rouge_l),
            (None, None) => "-".to_string(),
        };
        let predicted = r.predicted.as_deref().unwrap_or("<none>").replace(['\n', '\t'], " ");
        let _ = writeln!(out, "{}\t{verdict}\t{}\t{predicted}", r.id, r.iterations_used);
    }
    out
}
