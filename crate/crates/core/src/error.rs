//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Coefficient outside the model's admissible box.
    #[error("coefficient outside admissible box: {0}")]
    Domain(String),

    /// Malformed or non-finite input.
    #[error("invalid input: {0}")]
    Input(String),

    /// Flux value above the peak of the flux; no `p` maps to it.
    #[error("no preimage: flux value {h} exceeds peak {peak} at a={a}, g={g}")]
    NoPreimage { h: f64, peak: f64, a: f64, g: f64 },

    /// Flux value below the guarded range of the flux.
    #[error("flux value {h} below guarded range (H at p-guard {p_guard} is {floor}) at a={a}, g={g}")]
    Range {
        h: f64,
        floor: f64,
        p_guard: f64,
        a: f64,
        g: f64,
    },

    /// Interface Riemann problem with no feasible grid pair.
    #[error(
        "unsolvable interface Riemann problem: left flux range [{left_lo}, {left_hi}], \
         right flux range [{right_lo}, {right_hi}] share no value within tolerance"
    )]
    Unsolvable {
        left_lo: f64,
        left_hi: f64,
        right_lo: f64,
        right_hi: f64,
    },

    /// Failure while setting up a tracker run.
    #[error("initialization failed at x={x}: {reason}")]
    Init { x: f64, reason: String },

    /// Failure during a tracker run, with a dump of the current state.
    #[error("run failed at t={t}: {reason}\nstate dump:\n{dump}")]
    Run { t: f64, reason: String, dump: String },

    /// The per-run event fuse tripped.
    #[error("event fuse exceeded after {events} events at t={t}")]
    Fuse { events: u64, t: f64 },

    /// Configuration error, reported with the offending field path.
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    /// Expression parse or evaluation error.
    #[error("expression error: {0}")]
    Expr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
