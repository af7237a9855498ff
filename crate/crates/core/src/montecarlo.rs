//! Seeded path simulation under the base, long-forward, and maturity-T
//! forward measures, estimator scaffolding with standard errors, and the
//! dominated-discounting check that licenses the long-horizon limits.

use serde::Serialize;

use crate::eigen::{hs_martingale, EigenSolution};
use crate::error::{Error, Result};
use crate::longterm::ForwardSystem;
use crate::model::MarkovPricingModel;
use crate::sampling::{sample_states, GENERATOR_ID};

/// Magic bytes of the binary path dump.
pub const BUNDLE_MAGIC: &[u8; 4] = b"LRPB";

/// Version written into binary path dumps.
pub const BUNDLE_VERSION: u32 = 1;

/// Relative-oscillation threshold under which the discounted bond is
/// considered stabilized.
pub const AJ_OSCILLATION_TOL: f64 = 1e-6;

/// Safety factor on the dominating-variable envelope.
const AJ_ENVELOPE_MARGIN: f64 = 1.01;

/// Which probability measure a bundle of paths was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeasureTag {
    /// The base transition law.
    #[serde(rename = "P")]
    Base,
    /// The long-forward law driven by the eigen-measure transition matrix.
    #[serde(rename = "L")]
    LongForward,
    /// The maturity-T forward law with its time-dependent transitions.
    #[serde(rename = "QT")]
    Forward(usize),
}

impl std::fmt::Display for MeasureTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasureTag::Base => write!(f, "P"),
            MeasureTag::LongForward => write!(f, "L"),
            MeasureTag::Forward(t) => write!(f, "QT({t})"),
        }
    }
}

/// A measure to simulate under, bundled with the data that defines it.
pub enum SimulationMeasure<'a> {
    Base(&'a MarkovPricingModel),
    LongForward(&'a EigenSolution),
    Forward(&'a ForwardSystem),
}

impl SimulationMeasure<'_> {
    pub fn tag(&self) -> MeasureTag {
        match self {
            SimulationMeasure::Base(_) => MeasureTag::Base,
            SimulationMeasure::LongForward(_) => MeasureTag::LongForward,
            SimulationMeasure::Forward(sys) => MeasureTag::Forward(sys.maturity()),
        }
    }

    fn n_states(&self) -> usize {
        match self {
            SimulationMeasure::Base(model) => model.n_states(),
            SimulationMeasure::LongForward(sol) => sol.n_states(),
            SimulationMeasure::Forward(sys) => sys.n_states(),
        }
    }
}

/// Simulated state paths, all from one start state under one measure.
///
/// Optional weights turn estimation under the sampled measure into
/// estimation under another; they must be positive with mean statistically
/// consistent with one, since a change-of-measure density integrates to one.
#[derive(Debug, Clone)]
pub struct PathBundle {
    seed: u64,
    measure_tag: MeasureTag,
    horizon: usize,
    x0: usize,
    states: Vec<u32>,
    weights: Option<Vec<f64>>,
}

impl PathBundle {
    /// Assembles a bundle from raw parts, enforcing layout and weight
    /// invariants. Zero paths are representable; estimators refuse them.
    pub fn from_parts(
        measure_tag: MeasureTag,
        seed: u64,
        x0: usize,
        horizon: usize,
        states: Vec<u32>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let width = horizon + 1;
        if !states.len().is_multiple_of(width) {
            return Err(Error::DimensionMismatch(format!(
                "state buffer of {} entries is not a multiple of path width {width}",
                states.len()
            )));
        }
        let n_paths = states.len() / width;
        if states.iter().step_by(width).any(|&s| s != x0 as u32) {
            return Err(Error::InvalidPath(format!(
                "every path must start at the configured state {x0}"
            )));
        }
        let bundle = PathBundle {
            seed,
            measure_tag,
            horizon,
            x0,
            states,
            weights: None,
        };
        match weights {
            Some(w) => {
                if w.len() != n_paths {
                    return Err(Error::DimensionMismatch(format!(
                        "{} weights for {} paths",
                        w.len(),
                        n_paths
                    )));
                }
                bundle.with_weights(w)
            }
            None => Ok(bundle),
        }
    }

    /// Attaches change-of-measure weights, validating positivity and that
    /// the weight mean is within three standard errors of one.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_paths() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} paths",
                weights.len(),
                self.n_paths()
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(Error::Validation(
                "importance weights must be strictly positive and finite".into(),
            ));
        }
        let n = weights.len() as f64;
        let mean = weights.iter().sum::<f64>() / n;
        let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>()
            / if weights.len() > 1 { n - 1.0 } else { 1.0 };
        let se = (var / n).sqrt();
        if (mean - 1.0).abs() > 3.0 * se {
            return Err(Error::Validation(format!(
                "weight mean {mean} is inconsistent with a probability density (se {se})"
            )));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn measure_tag(&self) -> MeasureTag {
        self.measure_tag
    }

    pub fn n_paths(&self) -> usize {
        self.states.len() / (self.horizon + 1)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn path(&self, i: usize) -> &[u32] {
        let width = self.horizon + 1;
        &self.states[i * width..(i + 1) * width]
    }

    /// Identifier of the generator scheme that produced the states.
    pub fn generator_id(&self) -> &'static str {
        GENERATOR_ID
    }

    /// Binary dump: magic, version, path count, step count, then the states
    /// row-major as little-endian 32-bit indices. Weights and provenance
    /// stay in the JSON metadata, not in the dump.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.states.len());
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_paths() as u32).to_le_bytes());
        out.extend_from_slice(&(self.horizon as u32).to_le_bytes());
        for s in &self.states {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }
}

/// Parses a binary path dump into (version, n_paths, n_steps, states).
pub fn parse_binary_bundle(bytes: &[u8]) -> Result<(u32, usize, usize, Vec<u32>)> {
    if bytes.len() < 16 {
        return Err(Error::Parse(format!(
            "path dump truncated: {} bytes, header needs 16",
            bytes.len()
        )));
    }
    if &bytes[0..4] != BUNDLE_MAGIC {
        return Err(Error::Parse("path dump does not start with LRPB".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != BUNDLE_VERSION {
        return Err(Error::Parse(format!(
            "unsupported path dump version {version}"
        )));
    }
    let n_paths = word(8) as usize;
    let n_steps = word(12) as usize;
    let expected = 16 + 4 * n_paths * (n_steps + 1);
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "path dump has {} bytes, dims imply {expected}",
            bytes.len()
        )));
    }
    let states = bytes[16..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((version, n_paths, n_steps, states))
}

/// Draws a bundle of paths under the given measure. Identical inputs give
/// bit-identical bundles regardless of thread count.
pub fn simulate(
    measure: &SimulationMeasure,
    x0: usize,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    let n = measure.n_states();
    if x0 >= n {
        return Err(Error::StateOutOfRange { state: x0, n_states: n });
    }
    if horizon == 0 {
        return Err(Error::HorizonZero);
    }
    if n_paths == 0 {
        return Err(Error::Validation("n_paths must be at least 1".into()));
    }
    let states = match measure {
        SimulationMeasure::Base(model) => {
            let p = model.transition();
            sample_states(n, x0, n_paths, horizon, seed, |_, x, y| p[(x, y)])
        }
        SimulationMeasure::LongForward(sol) => {
            let q = &sol.eigen_transition;
            sample_states(n, x0, n_paths, horizon, seed, |_, x, y| q[(x, y)])
        }
        SimulationMeasure::Forward(sys) => {
            if horizon > sys.maturity() {
                return Err(Error::HorizonExceedsT {
                    horizon,
                    maturity: sys.maturity(),
                });
            }
            let steps = sys.steps();
            sample_states(n, x0, n_paths, horizon, seed, |u, x, y| steps[u][(x, y)])
        }
    };
    Ok(PathBundle {
        seed,
        measure_tag: measure.tag(),
        horizon,
        x0,
        states,
        weights: None,
    })
}

/// Terminal values of the long-horizon martingale along each path of a
/// base-measure bundle: the density that turns base-measure sampling into
/// long-forward estimation.
pub fn long_forward_weights(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    bundle: &PathBundle,
) -> Result<Vec<f64>> {
    if bundle.measure_tag() != MeasureTag::Base {
        return Err(Error::Validation(format!(
            "long-forward weights require a base-measure bundle, got {}",
            bundle.measure_tag()
        )));
    }
    let mut weights = Vec::with_capacity(bundle.n_paths());
    let mut path = vec![0usize; bundle.horizon() + 1];
    for i in 0..bundle.n_paths() {
        for (slot, &s) in path.iter_mut().zip(bundle.path(i)) {
            *slot = s as usize;
        }
        let track = hs_martingale(model, sol, &path)?;
        weights.push(*track.values.last().unwrap());
    }
    Ok(weights)
}

/// Sample mean and standard error of a path functional over a bundle.
/// With weights attached the mean is the self-normalized weighted mean and
/// the standard error comes from the delta method for that ratio.
pub fn estimate<F>(bundle: &PathBundle, functional: F) -> Result<(f64, f64)>
where
    F: Fn(&[u32]) -> f64,
{
    let n = bundle.n_paths();
    if n == 0 {
        return Err(Error::EmptyBundle);
    }
    let values: Vec<f64> = (0..n).map(|i| functional(bundle.path(i))).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "path functional produced a non-finite value".into(),
        ));
    }
    match bundle.weights() {
        None => {
            let nf = n as f64;
            let mean = values.iter().sum::<f64>() / nf;
            if n == 1 {
                return Ok((mean, 0.0));
            }
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
            Ok((mean, (var / nf).sqrt()))
        }
        Some(weights) => {
            let total: f64 = weights.iter().sum();
            let mean = values
                .iter()
                .zip(weights)
                .map(|(v, w)| v * w)
                .sum::<f64>()
                / total;
            let spread = values
                .iter()
                .zip(weights)
                .map(|(v, w)| {
                    let dev = w * (v - mean);
                    dev * dev
                })
                .sum::<f64>();
            Ok((mean, spread.sqrt() / total))
        }
    }
}

/// Stabilization evidence for the discounted bond and the per-state
/// envelopes that dominate the discounted kernel-times-bond process.
#[derive(Debug, Clone, Serialize)]
pub struct AjCheckReport {
    pub lambda_used: f64,
    pub t_grid: Vec<usize>,
    /// Envelope value per (t, x): the time-t dominating variable evaluated
    /// at each state, `sup_discounted_bond[i][x]` for `t = t_grid[i]`.
    pub sup_discounted_bond: Vec<Vec<f64>>,
    pub dominating_integrable: bool,
    pub limit_exists: bool,
    pub tau_grid_max: usize,
    /// Worst relative oscillation of the discounted bond over the trailing
    /// half of the grid, across states.
    pub max_oscillation: f64,
}

/// Checks that e^{lambda tau} P(tau, x) stabilizes on the trailing half of
/// the tau-grid and builds finite per-(t, x) envelopes for the discounted
/// kernel-bond product. A grid too short to have burned off the transient
/// fails with NotStabilized: inconclusive, not false.
pub fn aj_check(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    t_grid: &[usize],
    tau_max: usize,
) -> Result<AjCheckReport> {
    if !model.is_irreducible() {
        return Err(Error::ReducibleChain);
    }
    if sol.n_states() != model.n_states() {
        return Err(Error::InvalidSolution(format!(
            "solution has {} states, model has {}",
            sol.n_states(),
            model.n_states()
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::Validation("t_grid is empty".into()));
    }
    if tau_max < 2 {
        return Err(Error::Validation(format!(
            "tau_max = {tau_max} leaves no trailing half to test"
        )));
    }
    let n = model.n_states();
    let bonds = model.bond_table(tau_max);
    let discounted: Vec<Vec<f64>> = (1..=tau_max)
        .map(|tau| {
            (0..n)
                .map(|x| (sol.lambda * tau as f64).exp() * bonds[tau][x])
                .collect()
        })
        .collect();

    let tail_from = tau_max / 2;
    let mut max_oscillation = 0.0f64;
    #[allow(clippy::needless_range_loop)]
    for x in 0..n {
        let tail: Vec<f64> = (tail_from..tau_max).map(|i| discounted[i][x]).collect();
        let lo = tail.iter().cloned().fold(f64::MAX, f64::min);
        let hi = tail.iter().cloned().fold(f64::MIN, f64::max);
        let mut sorted = tail.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        max_oscillation = max_oscillation.max((hi - lo) / median.abs().max(1e-300));
    }
    if max_oscillation > AJ_OSCILLATION_TOL {
        return Err(Error::NotStabilized {
            tau_max,
            oscillation: max_oscillation,
        });
    }

    // Per-state peak of the discounted bond over the whole grid.
    let peak: Vec<f64> = (0..n)
        .map(|x| (0..tau_max).map(|i| discounted[i][x]).fold(0.0f64, f64::max))
        .collect();

    // Envelope of the kernel to time t: max product of sdf factors along any
    // positive-probability path of length t ending at each state.
    let sdf = model.sdf();
    let transition = model.transition();
    let max_kernel_to = |t: usize| -> Vec<f64> {
        let mut d = vec![1.0f64; n];
        for _ in 0..t {
            let mut next = vec![0.0f64; n];
            for x in 0..n {
                for y in 0..n {
                    if transition[(x, y)] > 0.0 {
                        next[y] = next[y].max(d[x] * sdf[(x, y)]);
                    }
                }
            }
            d = next;
        }
        d
    };

    let mut sup_discounted_bond = Vec::with_capacity(t_grid.len());
    let mut dominating_integrable = true;
    for &t in t_grid {
        let kernel_env = max_kernel_to(t);
        let row: Vec<f64> = (0..n)
            .map(|x| {
                AJ_ENVELOPE_MARGIN * (sol.lambda * t as f64).exp() * kernel_env[x] * peak[x]
            })
            .collect();
        if row.iter().any(|v| !v.is_finite()) {
            dominating_integrable = false;
        }
        sup_discounted_bond.push(row);
    }

    Ok(AjCheckReport {
        lambda_used: sol.lambda,
        t_grid: t_grid.to_vec(),
        sup_discounted_bond,
        dominating_integrable,
        limit_exists: true,
        tau_grid_max: tau_max,
        max_oscillation,
    })
}
