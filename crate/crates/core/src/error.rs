//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A grid case failed validation. The message names the offending entry.
    #[error("case validation: {0}")]
    CaseValidation(String),

    /// Case file could not be parsed.
    #[error("case parse: {0}")]
    CaseParse(String),

    /// Model construction failed (e.g. a singular inertia matrix).
    #[error("model: {0}")]
    Model(String),

    /// Descriptor-to-reduced reduction failed; lists the offending load buses.
    #[error("reduction: singular load-bus block{}: {reason}", buses_suffix(.buses))]
    Reduction { buses: Vec<usize>, reason: String },

    /// A caller-supplied parameter violated a contract.
    #[error("parameter: {0}")]
    Parameter(String),

    /// Scenario or subsystem configuration is inconsistent.
    #[error("config: {0}")]
    Config(String),

    /// The simulated state left the finite range; the scenario is unstable.
    #[error("divergence at t={time_s} s")]
    Divergence { time_s: f64 },

    /// A channel contract was violated (e.g. polling with a regressing clock).
    #[error("channel: {0}")]
    Channel(String),

    /// Offline data is not persistently excited at the required order.
    #[error("persistent excitation: {0}")]
    PersistentExcitation(String),
}

fn buses_suffix(buses: &[usize]) -> String {
    if buses.is_empty() {
        String::new()
    } else {
        format!(
            " (buses {})",
            buses
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )
    }
}
