use std::path::PathBuf;

use thiserror::Error;

use crate::panel::Rejection;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] prodisp::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("scenario {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("panel is missing required columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("{count} rows rejected, above the ceiling of {ceiling}; first: {}", summarize(.first))]
    TooManyRejections {
        count: usize,
        ceiling: usize,
        first: Vec<Rejection>,
    },
    #[error("scenario is missing blocks required by `{command}`: {}", .missing.join(", "))]
    MissingBlocks {
        command: String,
        missing: Vec<String>,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("stage `{stage}` failed (partial artifacts kept in {}): {source}", artifacts.display())]
    Stage {
        stage: String,
        artifacts: PathBuf,
        #[source]
        source: Box<CliError>,
    },
}

fn summarize(rows: &[Rejection]) -> String {
    rows.iter()
        .map(|r| format!("line {}: {}", r.line, r.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
