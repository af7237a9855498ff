//! Maturity-T forward machinery, roll-over numeraires, the long bond, and
//! convergence diagnostics between the T-forward and long-horizon measures.
//!
//! The central objects are the martingale that reprices under the T-forward
//! measure, its long-horizon counterpart built from the principal eigenpair,
//! and a report measuring how fast the former approaches the latter in L1,
//! total variation, uniformly on a window, and against a family of bounded
//! trading strategies.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eigen::{hs_martingale, EigenSolution};
use crate::error::{Error, Result};
use crate::model::MarkovPricingModel;
use crate::sampling::sample_states;

/// Row-sum tolerance for forward transition matrices.
pub const FORWARD_ROW_TOL: f64 = 1e-10;

/// Cap on the number of atoms the exact enumeration is willing to touch.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// Longest window for which every deterministic sign strategy is tried.
const STRATEGY_FULL_MAX_T: usize = 10;

/// Work cap (strategies x paths x steps) before switching to a sampled
/// strategy family.
const STRATEGY_BUDGET: f64 = 5e7;

/// Number of random sign strategies when the full family is too large.
const STRATEGY_SAMPLE: usize = 256;

/// Time-inhomogeneous dynamics of the state under the maturity-T forward
/// measure, together with the bond table that defines them.
///
/// Step u carries the transition from time u to u+1; its rows are the
/// state-price entries reweighted by the ratio of remaining bond prices, so
/// every row sums to one up to rounding in the bond recursion.
#[derive(Debug, Clone)]
pub struct ForwardSystem {
    maturity: usize,
    n_states: usize,
    bonds: Vec<DVector<f64>>,
    steps: Vec<DMatrix<f64>>,
}

impl ForwardSystem {
    pub fn new(model: &MarkovPricingModel, maturity: usize) -> Result<Self> {
        if maturity == 0 {
            return Err(Error::HorizonZero);
        }
        let n = model.n_states();
        let a = model.state_price();
        let bonds = model.bond_table(maturity);
        let mut steps = Vec::with_capacity(maturity);
        for u in 0..maturity {
            let mut q = DMatrix::zeros(n, n);
            for x in 0..n {
                let denom = bonds[maturity - u][x];
                for y in 0..n {
                    q[(x, y)] = a[(x, y)] * bonds[maturity - u - 1][y] / denom;
                }
                let sum: f64 = q.row(x).iter().sum();
                if !sum.is_finite() || (sum - 1.0).abs() > FORWARD_ROW_TOL {
                    return Err(Error::Numerical(format!(
                        "forward transition row (u={u}, x={x}) sums to {sum}"
                    )));
                }
            }
            steps.push(q);
        }
        Ok(ForwardSystem {
            maturity,
            n_states: n,
            bonds,
            steps,
        })
    }

    pub fn maturity(&self) -> usize {
        self.maturity
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Transition matrix from time u to u+1; defined for u < maturity.
    pub fn step(&self, u: usize) -> Result<&DMatrix<f64>> {
        self.steps.get(u).ok_or(Error::HorizonOrder {
            t: u + 1,
            horizon: self.maturity,
        })
    }

    pub fn steps(&self) -> &[DMatrix<f64>] {
        &self.steps
    }

    /// Bond prices P(t, .) for time-to-maturity t <= maturity.
    pub fn bond(&self, t: usize) -> Result<&DVector<f64>> {
        self.bonds.get(t).ok_or(Error::HorizonOrder {
            t,
            horizon: self.maturity,
        })
    }

    /// Probability of a realized path under the forward measure: the product
    /// of the per-step transition entries. Paths may be shorter than the
    /// maturity window but not longer.
    pub fn path_probability(&self, path: &[usize]) -> Result<f64> {
        if path.is_empty() {
            return Err(Error::InvalidPath("path has no states".into()));
        }
        if path.len() > self.maturity + 1 {
            return Err(Error::HorizonOrder {
                t: path.len() - 1,
                horizon: self.maturity,
            });
        }
        for &x in path {
            if x >= self.n_states {
                return Err(Error::StateOutOfRange {
                    state: x,
                    n_states: self.n_states,
                });
            }
        }
        let mut p = 1.0;
        for u in 0..path.len() - 1 {
            p *= self.steps[u][(path[u], path[u + 1])];
        }
        Ok(p)
    }
}

/// Value at time `t` of the martingale that changes measure to the
/// maturity-T forward measure: the kernel along the path times the ratio of
/// remaining to initial T-bond prices.
pub fn forward_martingale(
    model: &MarkovPricingModel,
    maturity: usize,
    path: &[usize],
    t: usize,
) -> Result<f64> {
    if maturity == 0 {
        return Err(Error::HorizonZero);
    }
    if t > maturity {
        return Err(Error::HorizonOrder {
            t,
            horizon: maturity,
        });
    }
    let kernel = model.kernel_along_path(path, t)?;
    let bonds = model.bond_table(maturity);
    Ok(kernel * bonds[maturity - t][path[t]] / bonds[maturity][path[0]])
}

/// Wealth at time `t` of the self-financing strategy that puts one unit into
/// the maturity-T bond and reinvests the principal into a fresh T-bond at
/// every maturity date. Horizons beyond T are reached by compounding
/// completed legs; within a leg the value is the current holding marked to
/// the bond table.
pub fn rollover_value(
    model: &MarkovPricingModel,
    maturity: usize,
    path: &[usize],
    t: usize,
) -> Result<f64> {
    if maturity == 0 {
        return Err(Error::HorizonZero);
    }
    model.check_path(path, t)?;
    let legs = t / maturity;
    let table = model.bond_table((legs + 1) * maturity);
    let mut purchase_cost = 1.0;
    for i in 0..=legs {
        purchase_cost *= table[maturity][path[i * maturity]];
    }
    Ok(table[(legs + 1) * maturity - t][path[t]] / purchase_cost)
}

/// Wealth of the long-horizon numeraire along a path: exponential growth at
/// the principal eigenvalue, modulated by the eigenfunction ratio.
pub fn long_bond(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    path: &[usize],
    t: usize,
) -> Result<f64> {
    model.check_path(path, t)?;
    if sol.n_states() != model.n_states() {
        return Err(Error::InvalidSolution(format!(
            "solution has {} states, model has {}",
            sol.n_states(),
            model.n_states()
        )));
    }
    Ok((sol.lambda * t as f64).exp() * sol.pi[path[t]] / sol.pi[path[0]])
}

/// Both sides of the kernel factorization along one path: the direct kernel
/// product against discount times eigenfunction ratio times martingale.
#[derive(Debug, Clone)]
pub struct FactorizationCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Relative gap |lhs - rhs| / lhs.
    pub gap: f64,
}

/// Evaluates the factorization identity pathwise. The two sides are the same
/// product in different association orders, so the gap measures nothing but
/// accumulated rounding.
pub fn factorization_check(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    path: &[usize],
    t: usize,
) -> Result<FactorizationCheck> {
    let lhs = model.kernel_along_path(path, t)?;
    let track = hs_martingale(model, sol, &path[..=t])?;
    let rhs = (-sol.lambda * t as f64).exp() * (sol.pi[path[0]] / sol.pi[path[t]])
        * track.values[t];
    let gap = (lhs - rhs).abs() / lhs;
    Ok(FactorizationCheck { lhs, rhs, gap })
}

/// Inputs for a convergence report.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceConfig {
    /// Initial state the diagnostics condition on.
    pub x0: usize,
    /// The sigma-field horizon every distance is evaluated at.
    pub t_fixed: usize,
    /// Bond maturities T the forward objects are built from.
    pub horizons: Vec<usize>,
    /// Paths for the Monte Carlo entries.
    pub n_paths: usize,
    pub seed: u64,
}

/// Distances between the maturity-T objects and their long-horizon limits,
/// one entry per requested horizon.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub horizons: Vec<usize>,
    /// E|M_t^T - M_t^inf| at t = t_fixed; exact when enumeration is feasible.
    #[serde(rename = "l1_M")]
    pub l1_m: Vec<f64>,
    /// Monte Carlo E[1 ^ sup_{s<=t} |B_s^T - B_s^inf|].
    #[serde(rename = "ucp_B")]
    pub ucp_b: Vec<f64>,
    /// Best value of E[1 ^ |sum eta dB|] over the sign-strategy family; a
    /// lower bound for the semimartingale distance.
    pub emery_lb: Vec<f64>,
    /// Total variation between the two measures on the t_fixed sigma-field.
    #[serde(rename = "tv_Q")]
    pub tv_q: Vec<f64>,
    /// Standard errors for l1_M; zero in exact mode.
    pub l1_stderr: Vec<f64>,
    /// Standard errors for ucp_B.
    pub ucp_stderr: Vec<f64>,
    /// Decay rate of l1_M: minus the least-squares slope of log l1_M against
    /// the horizon, zero when fewer than two positive values exist.
    pub fitted_rate: f64,
    pub t_fixed: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub x0: usize,
    /// "exact" when l1/tv/emery come from full path enumeration, "mc" when
    /// the atom count exceeds the enumeration cap.
    pub mode: String,
}

impl ConvergenceReport {
    /// CSV rendering, one row per horizon. The trailing column records the
    /// evaluation mode and the Monte Carlo standard errors.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("horizon,l1_M,ucp_B,emery_lb,tv_Q,stderr_flags\n");
        for (i, &h) in self.horizons.iter().enumerate() {
            let flags = if self.mode == "exact" {
                format!("mode=exact;ucp_se={:.3e}", self.ucp_stderr[i])
            } else {
                format!(
                    "mode=mc;l1_se={:.3e};ucp_se={:.3e}",
                    self.l1_stderr[i], self.ucp_stderr[i]
                )
            };
            out.push_str(&format!(
                "{h},{:.16e},{:.16e},{:.16e},{:.16e},{flags}\n",
                self.l1_m[i], self.ucp_b[i], self.emery_lb[i], self.tv_q[i]
            ));
        }
        out
    }
}

/// Paths with probability weights, either every positive-probability path or
/// a Monte Carlo sample with uniform weights.
struct PathSet {
    states: Vec<u32>,
    width: usize,
    weights: Vec<f64>,
}

impl PathSet {
    fn n_paths(&self) -> usize {
        self.weights.len()
    }

    fn path(&self, i: usize) -> &[u32] {
        &self.states[i * self.width..(i + 1) * self.width]
    }
}

/// Enumerates every positive-probability path of `t` steps from `x0`.
fn enumerate_paths(model: &MarkovPricingModel, x0: usize, t: usize) -> Result<PathSet> {
    let n = model.n_states();
    let required = (n as f64).powi(t as i32);
    if required > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            required,
            limit: ENUMERATION_LIMIT,
        });
    }
    let p = model.transition();
    let width = t + 1;
    let mut states = Vec::new();
    let mut weights = Vec::new();
    let mut prefix = vec![x0 as u32];
    let mut probs = vec![1.0f64];
    // Depth-first walk over positive-probability continuations.
    fn descend(
        p: &DMatrix<f64>,
        n: usize,
        t: usize,
        prefix: &mut Vec<u32>,
        probs: &mut Vec<f64>,
        states: &mut Vec<u32>,
        weights: &mut Vec<f64>,
    ) {
        if prefix.len() == t + 1 {
            states.extend_from_slice(prefix);
            weights.push(*probs.last().unwrap());
            return;
        }
        let x = *prefix.last().unwrap() as usize;
        for y in 0..n {
            let step = p[(x, y)];
            if step == 0.0 {
                continue;
            }
            prefix.push(y as u32);
            probs.push(probs.last().unwrap() * step);
            descend(p, n, t, prefix, probs, states, weights);
            prefix.pop();
            probs.pop();
        }
    }
    descend(p, n, t, &mut prefix, &mut probs, &mut states, &mut weights);
    Ok(PathSet {
        states,
        width,
        weights,
    })
}

fn sample_paths(model: &MarkovPricingModel, x0: usize, t: usize, n_paths: usize, seed: u64) -> PathSet {
    let p = model.transition();
    let states = sample_states(model.n_states(), x0, n_paths, t, seed, |_, x, y| p[(x, y)]);
    PathSet {
        states,
        width: t + 1,
        weights: vec![1.0 / n_paths as f64; n_paths],
    }
}

/// Kernel running products along every path of a set, same layout as the
/// states.
fn kernel_products(model: &MarkovPricingModel, set: &PathSet) -> Vec<f64> {
    let sdf = model.sdf();
    let mut out = vec![0.0; set.states.len()];
    for i in 0..set.n_paths() {
        let path = set.path(i);
        let row = &mut out[i * set.width..(i + 1) * set.width];
        row[0] = 1.0;
        for s in 0..set.width - 1 {
            row[s + 1] = row[s] * sdf[(path[s] as usize, path[s + 1] as usize)];
        }
    }
    out
}

/// The deterministic sign strategies the strategy-family bounds range over.
/// All 2^t sequences when that fits the work budget, otherwise the all-ones
/// sequence plus seeded random signs.
fn sign_strategies(t: usize, n_paths: usize, seed: u64) -> Vec<Vec<f64>> {
    let full = t <= STRATEGY_FULL_MAX_T
        && (2f64.powi(t as i32)) * (n_paths as f64) * (t as f64) <= STRATEGY_BUDGET;
    if full {
        let count = 1usize << t;
        (0..count)
            .map(|mask| {
                (0..t)
                    .map(|s| if mask >> s & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let mut family = vec![vec![1.0; t]];
        for _ in 0..STRATEGY_SAMPLE {
            family.push(
                (0..t)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect(),
            );
        }
        family
    }
}

fn mean_and_se(values: &[f64], weights: &[f64], monte_carlo: bool) -> (f64, f64) {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    if !monte_carlo {
        return (mean, 0.0);
    }
    let n = values.len() as f64;
    let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, (var / n).sqrt())
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    cov / var
}

/// Measures, per horizon T, the distance between the maturity-T forward
/// objects and their long-horizon limits on the t_fixed window.
///
/// The L1 and total-variation entries are exact path-enumeration sums when
/// the state space is small enough, Monte Carlo otherwise (with the mode
/// recorded in the report); the uniform-window entry is always Monte Carlo.
/// Total variation on the window equals half the L1 distance between the two
/// measure-change martingales, so those two columns share their evaluation.
pub fn convergence_report(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    config: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    model.check_state(config.x0)?;
    if sol.n_states() != model.n_states() {
        return Err(Error::InvalidSolution(format!(
            "solution has {} states, model has {}",
            sol.n_states(),
            model.n_states()
        )));
    }
    if config.t_fixed == 0 {
        return Err(Error::Validation("t_fixed must be at least 1".into()));
    }
    if config.horizons.is_empty() {
        return Err(Error::Validation("horizons list is empty".into()));
    }
    if config.horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("horizons must be strictly increasing".into()));
    }
    if config.horizons[0] <= config.t_fixed {
        return Err(Error::Validation(format!(
            "smallest horizon {} must exceed t_fixed {}",
            config.horizons[0], config.t_fixed
        )));
    }
    if config.n_paths < 1000 {
        return Err(Error::Validation(format!(
            "n_paths = {} too small for Monte Carlo entries, need at least 1000",
            config.n_paths
        )));
    }

    let t = config.t_fixed;
    let (atoms, mode) = match enumerate_paths(model, config.x0, t) {
        Ok(set) => (set, "exact"),
        Err(Error::EnumerationTooLarge { .. }) => (
            sample_paths(model, config.x0, t, config.n_paths, config.seed),
            "mc",
        ),
        Err(other) => return Err(other),
    };
    let mc = sample_paths(model, config.x0, t, config.n_paths, config.seed);
    let atom_kernels = kernel_products(model, &atoms);
    let strategies = sign_strategies(t, atoms.n_paths(), config.seed);

    let max_t = *config.horizons.last().unwrap();
    let bonds = model.bond_table(max_t);
    let lambda = sol.lambda;
    let pi = &sol.pi;
    let pi0 = pi[config.x0];
    // B_s^inf along a path set, flat layout.
    let limit_numeraire = |set: &PathSet| -> Vec<f64> {
        let mut out = vec![0.0; set.states.len()];
        for i in 0..set.n_paths() {
            for s in 0..set.width {
                out[i * set.width + s] =
                    (lambda * s as f64).exp() * pi[set.path(i)[s] as usize] / pi0;
            }
        }
        out
    };
    let atoms_limit = limit_numeraire(&atoms);
    let mc_limit = limit_numeraire(&mc);

    let h = config.horizons.len();
    let mut l1_m = vec![0.0; h];
    let mut l1_stderr = vec![0.0; h];
    let mut tv_q = vec![0.0; h];
    let mut ucp_b = vec![0.0; h];
    let mut ucp_stderr = vec![0.0; h];
    let mut emery_lb = vec![0.0; h];

    let mut deltas = vec![0.0; atoms.n_paths() * t];
    for (hi, &horizon) in config.horizons.iter().enumerate() {
        let p_t0 = bonds[horizon][config.x0];

        // L1 / TV on the atoms, plus strategy increments.
        let mut l1_values = Vec::with_capacity(atoms.n_paths());
        for i in 0..atoms.n_paths() {
            let path = atoms.path(i);
            let mut prev = 0.0;
            for s in 0..=t {
                let fwd = bonds[horizon - s][path[s] as usize] / p_t0;
                let diff = fwd - atoms_limit[i * atoms.width + s];
                if s == t {
                    l1_values.push(atom_kernels[i * atoms.width + t] * diff.abs());
                }
                if s > 0 {
                    deltas[i * t + s - 1] = diff - prev;
                }
                prev = diff;
            }
        }
        let (l1, l1_se) = mean_and_se(&l1_values, &atoms.weights, mode == "mc");
        l1_m[hi] = l1;
        l1_stderr[hi] = l1_se;
        tv_q[hi] = l1 / 2.0;

        let mut best = 0.0f64;
        for eta in &strategies {
            let mut value = 0.0;
            for i in 0..atoms.n_paths() {
                let mut acc = 0.0;
                for s in 0..t {
                    acc += eta[s] * deltas[i * t + s];
                }
                value += atoms.weights[i] * acc.abs().min(1.0);
            }
            best = best.max(value);
        }
        emery_lb[hi] = best;

        // Uniform window distance on the Monte Carlo sample.
        let mut ucp_values = Vec::with_capacity(mc.n_paths());
        for i in 0..mc.n_paths() {
            let path = mc.path(i);
            let mut sup = 0.0f64;
            for s in 0..=t {
                let fwd = bonds[horizon - s][path[s] as usize] / p_t0;
                sup = sup.max((fwd - mc_limit[i * mc.width + s]).abs());
            }
            ucp_values.push(sup.min(1.0));
        }
        let (ucp, ucp_se) = mean_and_se(&ucp_values, &mc.weights, true);
        ucp_b[hi] = ucp;
        ucp_stderr[hi] = ucp_se;
    }

    let fit_points: Vec<(f64, f64)> = config
        .horizons
        .iter()
        .zip(&l1_m)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&h, &v)| (h as f64, v.ln()))
        .collect();
    let fitted_rate = if fit_points.len() < 2 {
        0.0
    } else {
        -least_squares_slope(&fit_points)
    };

    Ok(ConvergenceReport {
        horizons: config.horizons.clone(),
        l1_m,
        ucp_b,
        emery_lb,
        tv_q,
        l1_stderr,
        ucp_stderr,
        fitted_rate,
        t_fixed: t,
        n_paths: config.n_paths,
        seed: config.seed,
        x0: config.x0,
        mode: mode.into(),
    })
}

/// Tail-probability cross-check for the strategy-family bounds: for bounded
/// sign strategies, threshold times the estimated tail probability of the
/// running strategy gain must stay under 18 times the terminal L1 distance,
/// up to sampling error in the tail estimate.
#[derive(Debug, Clone, Serialize)]
pub struct BurkholderCheck {
    pub threshold: f64,
    /// Terminal L1 distance between the two martingales.
    pub l1: f64,
    /// Largest over strategies of threshold * tail probability.
    pub worst_lhs: f64,
    /// Largest allowed value including the Monte Carlo slack term.
    pub worst_allowance: f64,
    pub holds: bool,
    pub n_strategies: usize,
}

/// Inputs for the tail-probability cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct BurkholderConfig {
    pub maturity: usize,
    pub t_fixed: usize,
    pub x0: usize,
    pub threshold: f64,
    pub n_paths: usize,
    pub seed: u64,
}

pub fn burkholder_check(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    config: &BurkholderConfig,
) -> Result<BurkholderCheck> {
    let BurkholderConfig {
        maturity,
        t_fixed,
        x0,
        threshold,
        n_paths,
        seed,
    } = *config;
    model.check_state(x0)?;
    if t_fixed == 0 || t_fixed >= maturity {
        return Err(Error::Validation(format!(
            "need 0 < t_fixed < maturity, got t_fixed = {t_fixed}, maturity = {maturity}"
        )));
    }
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::Validation(format!(
            "threshold must be positive and finite, got {threshold}"
        )));
    }
    if n_paths < 1000 {
        return Err(Error::Validation(format!(
            "n_paths = {n_paths} too small, need at least 1000"
        )));
    }
    let t = t_fixed;
    let bonds = model.bond_table(maturity);
    let p_t0 = bonds[maturity][x0];

    // Exact terminal L1 when enumeration fits, else reuse the sample.
    let exact = enumerate_paths(model, x0, t).ok();
    let mc = sample_paths(model, x0, t, n_paths, seed);
    let martingale_diffs = |set: &PathSet, kernels: &[f64]| -> Vec<f64> {
        // Per path, increments of M^T - M^inf over s = 1..=t.
        let mut out = vec![0.0; set.n_paths() * t];
        for i in 0..set.n_paths() {
            let path = set.path(i);
            let mut prev = 0.0;
            for s in 0..=t {
                let kernel = kernels[i * set.width + s];
                let fwd = kernel * bonds[maturity - s][path[s] as usize] / p_t0;
                let lim = kernel
                    * (sol.lambda * s as f64).exp()
                    * sol.pi[path[s] as usize]
                    / sol.pi[x0];
                let diff = fwd - lim;
                if s > 0 {
                    out[i * t + s - 1] = diff - prev;
                }
                prev = diff;
            }
        }
        out
    };

    let l1 = match &exact {
        Some(set) => {
            let kernels = kernel_products(model, set);
            let diffs = martingale_diffs(set, &kernels);
            let mut total = 0.0;
            for i in 0..set.n_paths() {
                let sum: f64 = diffs[i * t..(i + 1) * t].iter().sum();
                total += set.weights[i] * sum.abs();
            }
            total
        }
        None => {
            let kernels = kernel_products(model, &mc);
            let diffs = martingale_diffs(&mc, &kernels);
            let mut total = 0.0;
            for i in 0..mc.n_paths() {
                let sum: f64 = diffs[i * t..(i + 1) * t].iter().sum();
                total += mc.weights[i] * sum.abs();
            }
            total
        }
    };

    let mc_kernels = kernel_products(model, &mc);
    let mc_diffs = martingale_diffs(&mc, &mc_kernels);
    let strategies = sign_strategies(t, mc.n_paths(), seed);
    let n = mc.n_paths() as f64;
    let mut worst_lhs = 0.0f64;
    let mut worst_allowance = f64::INFINITY;
    let mut holds = true;
    for eta in &strategies {
        let mut exceed = 0usize;
        for i in 0..mc.n_paths() {
            let mut acc = 0.0;
            let mut sup = 0.0f64;
            for s in 0..t {
                acc += eta[s] * mc_diffs[i * t + s];
                sup = sup.max(acc.abs());
            }
            if sup > threshold {
                exceed += 1;
            }
        }
        let p_hat = exceed as f64 / n;
        let lhs = threshold * p_hat;
        let slack = 3.0 * threshold * (p_hat * (1.0 - p_hat) / n).sqrt();
        let allowance = 18.0 * l1 + slack;
        if lhs > worst_lhs {
            worst_lhs = lhs;
        }
        if allowance < worst_allowance {
            worst_allowance = allowance;
        }
        if lhs > allowance {
            holds = false;
        }
    }
    Ok(BurkholderCheck {
        threshold,
        l1,
        worst_lhs,
        worst_allowance,
        holds,
        n_strategies: strategies.len(),
    })
}
