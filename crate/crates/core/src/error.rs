use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("dataset has no observations")]
    EmptyDataset,

    #[error("need at least {required} samples, found {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("probability mass must lie strictly between 0 and 1, got {0}")]
    InvalidMass(f64),

    #[error("log density is not finite")]
    NonFinite,

    #[error("non-finite log-likelihood at draw {draw}, observation {obs}")]
    NonFiniteLogLik { draw: usize, obs: usize },

    #[error("diagnostic undefined: {0}")]
    Diagnostic(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("chains failed: {}", format_chain_failures(.0))]
    Chains(Vec<(usize, String)>),

    #[error("{0}")]
    Evidence(String),
}

fn format_chain_failures(failures: &[(usize, String)]) -> String {
    let mut out = String::new();
    for (i, (chain, msg)) in failures.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&alloc::format!("chain {chain}: {msg}"));
    }
    out
}
