//! Few-shot demonstration fixtures.

use std::fs;
use std::path::Path;

use tabqa_core::eval::DatasetKind;
use tabqa_core::prompt::PromptError;
use tabqa_core::Demonstration;

const WIKITQ: &str = include_str!("../demos/wikitq.json");
const TABFACT: &str = include_str!("../demos/tabfact.json");
const FETAQA: &str = include_str!("../demos/fetaqa.json");

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("cannot read demonstrations {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed demonstrations {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Invalid(#[from] PromptError),
}

fn parse(text: &str, path: &str) -> Result<Vec<Demonstration>, DemoError> {
    let demos: Vec<Demonstration> = serde_json::from_str(text).map_err(|source| DemoError::Json {
        path: path.to_string(),
        source,
    })?;
    for (i, d) in demos.iter().enumerate() {
        d.validate(i)?;
    }
    Ok(demos)
}

/// Loads and validates a JSON list of demonstrations.
pub fn load_demos(path: &Path) -> Result<Vec<Demonstration>, DemoError> {
    let label = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DemoError::Io {
        path: label.clone(),
        source,
    })?;
    parse(&text, &label)
}

/// The demonstrations shipped with the crate for a dataset kind.
pub fn default_demos(kind: DatasetKind) -> Vec<Demonstration> {
    let (text, name) = match kind {
        DatasetKind::WikiTq => (WIKITQ, "demos/wikitq.json"),
        DatasetKind::TabFact => (TABFACT, "demos/tabfact.json"),
        DatasetKind::FeTaQa => (FETAQA, "demos/fetaqa.json"),
    };
    parse(text, name).expect("bundled demonstrations are valid")
}
