use std::collections::VecDeque;
use std::sync::Mutex;

use tabqa_core::{BackendError, Completion, CompletionBackend, CompletionRequest};

/// Serves a fixed sequence of completions regardless of the prompt, and
/// remembers every prompt it was asked.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<Completion>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    pub fn new(completions: impl IntoIterator<Item = Completion>) -> ScriptedBackend {
        ScriptedBackend {
            queue: Mutex::new(completions.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> ScriptedBackend {
        ScriptedBackend::new(texts.into_iter().map(|t| Completion::new(t, None)))
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("script poisoned").len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        self.prompts
            .lock()
            .expect("prompt log poisoned")
            .push(request.prompt.clone());
        let mut queue = self.queue.lock().expect("script poisoned");
        if queue.len() < request.n {
            return Err(BackendError::Other(format!(
                "script exhausted: {} completions left, {} requested",
                queue.len(),
                request.n
            )));
        }
        Ok(queue.drain(..request.n).collect())
    }
}

/// Computes completions from the request with a closure.
pub struct FnBackend<F>(pub F);

impl<F> CompletionBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<Vec<Completion>, BackendError>,
{
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        (self.0)(request)
    }
}
