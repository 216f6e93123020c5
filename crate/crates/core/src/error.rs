use thiserror::Error;

/// Malformed message, trace line or scenario value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ParseError {
    message: String,
}

impl ParseError {
    pub fn new(message: impl Into<String>) -> Self {
        ParseError {
            message: message.into(),
        }
    }

    pub fn at_line(self, line: usize) -> Self {
        ParseError {
            message: format!("line {line}: {}", self.message),
        }
    }
}

/// Rejected simulation configuration.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("n = {n} must exceed 3f = {}", 3 * f)]
    TooManyFaults { n: usize, f: usize },
    #[error("{count} byzantine nodes exceed the fault bound f = {f}")]
    ByzantineOverBound { count: usize, f: usize },
    #[error("node {0} is out of range")]
    UnknownNode(u32),
    #[error("expected {expected} initial values, got {got}")]
    InitialValues { expected: usize, got: usize },
    #[error("post-GST delay {delay} must lie in 1..=delta_bound ({bound})")]
    DelayOutOfBound { delay: u64, bound: u64 },
    #[error("{0}")]
    Invalid(String),
    #[error("scenario file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A suggest/proof record that no well-behaved node could have produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("previous vote present without a highest vote")]
    PrevWithoutVote,
    #[error("previous vote is not below the highest vote")]
    PrevNotLower,
    #[error("previous vote repeats the highest vote's value")]
    PrevSameValue,
    #[error("reported vote is not from an earlier view")]
    FromFuture,
}
