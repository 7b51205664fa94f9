use std::path::PathBuf;

use crate::numcore::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("netlist line {line}: {message}")]
    Netlist { line: usize, message: String },
    #[error("graph: {0}")]
    Graph(String),
    #[error("model: {0}")]
    Model(String),
    #[error("synthesis: {0}")]
    Synth(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("training: {0}")]
    Training(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
