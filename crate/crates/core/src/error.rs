//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Problems with user-supplied data (files, malformed tables, bad indices).
    #[error("input error: {0}")]
    Input(String),
    /// Invalid run configuration (hyperparameters, iteration counts, query specs).
    #[error("config error: {0}")]
    Config(String),
    /// Violated internal contract (e.g. applying an invalid operator).
    #[error("logic error: {0}")]
    Logic(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn logic(msg: impl Into<String>) -> Self {
        Error::Logic(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
