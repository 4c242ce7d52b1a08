use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate contact id {0}")]
    DuplicateContact(u32),

    #[error("line {line}: contact starts at {start} but ends at {end}")]
    InvertedInterval { line: usize, start: u64, end: u64 },

    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),

    #[error("contact {0} is not available at t={1}")]
    UnavailableContact(u32, u64),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("source and destination are both `{0}`")]
    SameEndpoints(String),

    #[error("K must be at least 1")]
    ZeroK,

    #[error("EDT component {component} = {value} does not fit below omega = {omega}")]
    EdtOverflow {
        component: &'static str,
        value: u128,
        omega: u128,
    },

    #[error("transmission opportunity at {eto} is past the end of the first hop ({end})")]
    InfeasibleRoute { eto: f64, end: u64 },

    #[error("invalid constellation constraints: {0}")]
    Constraints(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("bundle {bundle} references unknown node `{node}`")]
    BundleNode { bundle: u64, node: String },

    #[error("task file line {line}: {msg}")]
    TaskFile { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
