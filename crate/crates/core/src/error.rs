use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("SL density is singular at x = 0 for dimension {dim} (only d = 1 is bounded there)")]
    Singular { dim: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("loss `{loss}` does not provide {capability}")]
    Capability { loss: String, capability: &'static str },

    #[error("data error: {0}")]
    Data(String),

    #[error("objective is not finite at theta = {theta:?}")]
    NonFinite { theta: Vec<f64> },

    #[error("inference error: {0}")]
    Inference(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parameter { .. } | Error::Data(_) | Error::Capability { .. } | Error::Infeasible(_)
        )
    }
}
