use thiserror::Error;

use crate::types::ReducedState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("unphysical reduced state: population of {basis} is {value}")]
    UnphysicalState { basis: &'static str, value: f64 },

    #[error("exponential saturation in rate evaluation (zeta = {zeta}); parameters outside model validity")]
    Saturation { zeta: f64 },

    #[error("no self-consistent rate: rhs(Gamma) - Gamma has no sign change on [0, {upper}] (a = {a}, x = {x}, delta = {delta})")]
    NoRoot {
        a: f64,
        x: f64,
        delta: f64,
        upper: f64,
    },

    #[error("ambiguous self-consistent rate: {} brackets {brackets:?}", brackets.len())]
    AmbiguousRoot { brackets: Vec<(f64, f64)> },

    #[error("rate solve failed at delta' = {delta_prime}: {source}")]
    SpectrumPoint {
        delta_prime: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("rate solver failure at t = {t}, state {state:?}: {source}")]
    SolverFailure {
        t: f64,
        state: ReducedState,
        #[source]
        source: Box<Error>,
    },

    #[error("step size underflow at t = {t} (h = {h}); problem is too stiff for the current max_step")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { t: f64, max_steps: usize },

    #[error("oracle integrity violated at t = {t}: {detail}")]
    OracleIntegrity { t: f64, detail: String },

    #[error("eigensolver did not converge: {0}")]
    Eigensolver(String),

    #[error("trajectory has {0} samples, at least 3 required")]
    TooFewSamples(usize),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}
