//! Long-horizon analysis of pricing kernels on finite-state Markov models.
//!
//! The library decomposes a stochastic discount factor into a deterministic
//! yield, a transitory eigenfunction ratio, and a martingale, then uses the
//! mixing rate of the martingale's measure change to certify convergence of
//! forward measures, long bonds, and yield curves to their long-horizon
//! limits. A companion module fits the asymptotic yield and decay class of
//! tabulated discount curves without any model attached.

pub mod error;
pub mod fixtures;
pub mod model;
pub mod eigen;
pub mod longterm;
pub mod yields;
pub mod montecarlo;
pub(crate) mod sampling;

pub use error::{Error, Result};
pub use model::{CashFlowSpec, DiscountCurve, GrowthSpec, MarkovPricingModel};
pub use eigen::{
    certify_ergodicity, eigen_measure, hs_martingale, long_term_pricing_check, principal_eigen,
    recurrence_check, EigenSolution, ErgodicityCertificate, MartingaleTrack, PricingBoundCheck,
};
pub use longterm::{
    burkholder_check, convergence_report, factorization_check, forward_martingale, long_bond,
    rollover_value, BurkholderCheck, BurkholderConfig, ConvergenceConfig, ConvergenceReport,
    FactorizationCheck, ForwardSystem,
};
pub use yields::{
    exp_yield, growth_yield, growth_zero_yield, karamata_fit, power_yield, yield_sweep,
    zero_coupon_rate, zero_rate_limit, DecayClass, KaramataFit, PowerYieldInput, YieldReport,
};
pub use montecarlo::{
    aj_check, estimate, long_forward_weights, parse_binary_bundle, simulate, AjCheckReport,
    MeasureTag, PathBundle, SimulationMeasure,
};
