//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transition row {row} is not stochastic (sum {sum})")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("sdf entry ({row}, {col}) = {value} must be strictly positive on reachable transitions")]
    NonPositiveSdf { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state {state} out of range for {n_states} states")]
    StateOutOfRange { state: usize, n_states: usize },

    #[error("growth entry ({row}, {col}) = {value} must be strictly positive on reachable transitions")]
    NonPositiveGrowth { row: usize, col: usize, value: f64 },

    #[error("chain is reducible on positive state-price entries")]
    ReducibleChain,

    #[error(
        "power iteration stopped after {iterations} iterations with residual {residual} > {tol}"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("eigen solution inconsistent with model: {0}")]
    InvalidSolution(String),

    #[error("eigen-measure chain fails the recurrence check")]
    NotRecurrent,

    #[error("eigen-measure chain is not aperiodic (second eigenvalue modulus {modulus})")]
    PeriodicChain { modulus: f64 },

    #[error("horizon {t} precedes certificate start t0 = {t0}")]
    HorizonTooShort { t: usize, t0: usize },

    #[error("pricing bound violated at state {state}: gap {gap} exceeds bound {bound}")]
    BoundViolated { state: usize, gap: f64, bound: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("horizon must be positive")]
    HorizonZero,

    #[error("horizon order violated: t = {t} must not exceed T = {horizon}")]
    HorizonOrder { t: usize, horizon: usize },

    #[error("exact enumeration needs {required:.0} paths, above the {limit:.0} cap")]
    EnumerationTooLarge { required: f64, limit: f64 },

    #[error("discount curve unsuitable: {0}")]
    CurveTooShort(String),

    #[error("curve price at tenor {tenor} is {price}, must be strictly positive")]
    NonPositivePrice { tenor: f64, price: f64 },

    #[error("curve decay class is not power-type")]
    NotPowerDecay,

    #[error("growth-indexed chain is reducible")]
    ReducibleGrowthChain,

    #[error("cash flow entry {index} = {value} must be strictly positive and finite")]
    NonPositiveCashFlow { index: usize, value: f64 },

    #[error("path bundle is empty")]
    EmptyBundle,

    #[error("simulation horizon {horizon} exceeds forward-system maturity {maturity}")]
    HorizonExceedsT { horizon: usize, maturity: usize },

    #[error("discounted bond not stabilized at tau_max = {tau_max} (relative oscillation {oscillation:.3e})")]
    NotStabilized { tau_max: usize, oscillation: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}
