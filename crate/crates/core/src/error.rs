use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{name}`; valid names: {}", valid.join(", "))]
    UnknownModel { name: String, valid: Vec<String> },

    #[error("{coordinate} = {value} lies outside the declared domain")]
    Domain { coordinate: &'static str, value: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite state on path {path} at step {step}")]
    BlowUp { path: usize, step: usize },

    #[error("degenerate coefficient: {0}")]
    Degenerate(String),

    #[error("frozen fast process at x = {x} is not positive recurrent: {detail}")]
    NotPositiveRecurrent { x: f64, detail: String },

    #[error("moment of order {order} is infinite (tail does not decay)")]
    InfiniteMoment { order: u32 },

    #[error("average at x = {x} diverges: {detail}")]
    InfiniteAverage { x: f64, detail: String },

    #[error("measure has {atoms} atoms, above the transport cap of {cap}; coarsen first")]
    Resolution { atoms: usize, cap: usize },

    #[error("mass drift {drift:e} exceeds the conservation tolerance")]
    Conservation { drift: f64 },

    #[error("averaged-model node {index} (x = {x}) failed: {source}")]
    Node {
        index: usize,
        x: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
