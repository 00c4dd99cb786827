//! Command line front end for `homharm`: space-spec files, analysis
//! reports, metric sweeps and randomized oracle verification.

pub mod numfmt;
pub mod report;
pub mod rng;
pub mod run;
pub mod spec;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}:{column}: {message}")]
    Schema {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const DISAGREEMENT: i32 = 1;
    pub const INVALID: i32 = 2;
}
