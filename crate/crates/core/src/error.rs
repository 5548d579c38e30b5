use thiserror::Error;

use crate::answerer::{AnswerError, BackendError};
use crate::classify::ClassifyError;
use crate::clozegen::ClozeError;
use crate::dataset::DatasetError;
use crate::tagger::TagError;
use crate::tokenizer::VocabError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Cloze(#[from] ClozeError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Answer(#[from] AnswerError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Coarse failure class, mapped onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or missing inputs (exit 1).
    Config,
    /// Inputs or responses that violate a contract (exit 2).
    Data,
    /// Unreachable services after retries (exit 3).
    Transport,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Transport => 3,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Vocab(VocabError::Io { .. }) => ErrorKind::Config,
            Error::Classify(ClassifyError::InvalidPhi(..) | ClassifyError::InvalidObjective(_)) => ErrorKind::Config,
            Error::Tag(TagError::Transport(_)) => ErrorKind::Transport,
            Error::Answer(AnswerError::Backend(BackendError::Transport(_))) => ErrorKind::Transport,
            _ => ErrorKind::Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}

impl From<BackendError> for Error {
    fn from(e: BackendError) -> Self {
        Error::Answer(AnswerError::Backend(e))
    }
}
