//! Problem files: JSON in the library's problem schema, optionally with a
//! `run` section holding default run options.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spocb::{build_problem, Error as CoreError, Problem, ProblemConfig, Reduced, ReducedProblem};
use thiserror::Error;

/// Run options stored in a problem file. Command-line flags override them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Minimum steps per boundary layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    /// Replaces the file's ε for single-point commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// ε grid for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct ProblemFile {
    #[serde(default)]
    run: RunOptions,
    #[serde(flatten)]
    problem: ProblemConfig,
    /// Keys neither schema claims. Flattening disables the schema's own
    /// unknown-field check, so it is repeated here.
    #[serde(flatten)]
    unknown: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed JSON that does not describe a valid instance.
    #[error("{}: schema error: {source}", path.display())]
    Schema {
        path: PathBuf,
        #[source]
        source: CoreError,
    },
    /// The instance is well formed but a standing assumption fails.
    #[error("{}: {source}", path.display())]
    Assumption {
        path: PathBuf,
        #[source]
        source: CoreError,
    },
}

/// A loaded instance. Files with `dims.n = 0` hold a reduced problem.
#[derive(Clone, Debug)]
pub enum Instance {
    Full(Problem),
    Reduced(Reduced),
}

fn classify(path: &Path, e: CoreError) -> LoadError {
    let path = path.to_path_buf();
    match e.root() {
        CoreError::NotPositiveDefinite { assumption: Some(_), .. }
        | CoreError::AssumptionViolated(..)
        | CoreError::NotPsd(_) => LoadError::Assumption { path, source: e },
        _ => LoadError::Schema { path, source: e },
    }
}

/// 1-based line and column of the first occurrence of `needle`.
fn position_of(text: &str, needle: &str) -> (usize, usize) {
    let at = text.find(needle).unwrap_or(0);
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses problem-file text. `path` is only used in diagnostics.
pub fn parse_problem(text: &str, path: &Path) -> Result<(ProblemConfig, RunOptions), LoadError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if let Some(key) = file.unknown.keys().next() {
        let (line, column) = position_of(text, &format!("\"{key}\""));
        return Err(LoadError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: format!("unknown field `{key}`"),
        });
    }
    Ok((file.problem, file.run))
}

/// Reads a problem file, full or reduced, with its run options.
pub fn load_instance(path: &Path) -> Result<(Instance, RunOptions), LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (cfg, run) = parse_problem(&text, path)?;
    let instance = if cfg.dims.n == 0 {
        Instance::Reduced(ReducedProblem::from_config(&cfg).map_err(|e| classify(path, e))?)
    } else {
        Instance::Full(build_problem(&cfg).map_err(|e| classify(path, e))?)
    };
    Ok((instance, run))
}

/// Reads a full problem file.
pub fn load_problem_file(path: &Path) -> Result<Problem, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (cfg, _) = parse_problem(&text, path)?;
    build_problem(&cfg).map_err(|e| classify(path, e))
}

/// Pretty JSON in the problem schema, without run options.
pub fn export_config(cfg: &ProblemConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("problem configs always serialize");
    s.push('\n');
    s
}
