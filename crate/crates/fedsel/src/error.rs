use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// The exact knapsack solver refused an instance larger than its work bound.
    #[error("dp work bound exceeded: {items} items x {capacity_units} capacity units > {bound}")]
    WorkBoundExceeded {
        items: usize,
        capacity_units: u64,
        bound: u64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
