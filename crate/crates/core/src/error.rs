use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("AP ({stripe}, {ap}): {source}")]
    AtAp {
        stripe: usize,
        ap: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches the 1-based (stripe, AP) index to an error.
    pub fn at_ap(self, stripe: usize, ap: usize) -> Self {
        match self {
            e @ Error::AtAp { .. } => e,
            e => Error::AtAp {
                stripe,
                ap,
                source: Box::new(e),
            },
        }
    }

    /// Fills in the stripe of an [`Error::AtAp`] raised with stripe 0,
    /// i.e. by code that only knows the position along the stripe.
    pub fn in_stripe(self, stripe: usize) -> Self {
        match self {
            Error::AtAp {
                stripe: 0,
                ap,
                source,
            } => Error::AtAp { stripe, ap, source },
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
