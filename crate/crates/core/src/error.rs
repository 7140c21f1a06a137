use thiserror::Error;

use crate::certificate::CertificateError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("support of size {size} exceeds the limit of {limit}")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("not a member: {0}")]
    NotMember(String),

    #[error("certificate rejected: {0}")]
    Certificate(#[from] CertificateError),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("construction failed: {0}")]
    Construction(String),
}

impl Error {
    /// Short stable code used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Malformed(_) => "E_JSON",
            Error::InvalidParams(_) => "E_PARAMS",
            Error::InvalidVector(_) => "E_VECTOR",
            Error::InvalidArgument(_) => "E_ARGUMENT",
            Error::SupportTooLarge { .. } => "E_SUPPORT",
            Error::Budget(_) => "E_BUDGET",
            Error::NotMember(_) => "E_NOT_MEMBER",
            Error::Certificate(_) => "E_CERTIFICATE",
            Error::Precondition(_) => "E_PRECONDITION",
            Error::Construction(_) => "E_CONSTRUCTION",
        }
    }
}
