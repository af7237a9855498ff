//! Asymptotic yield analysis: decomposition of discount curves into an
//! exponential rate and a slowly varying residual, long-maturity zero-coupon
//! rates, and expected yields of bounded, power-growth, and stochastically
//! growing cash flows under both the base measure and the long-horizon
//! measure.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::eigen::EigenSolution;
use crate::error::{Error, Result};
use crate::model::{CashFlowSpec, DiscountCurve, GrowthSpec, MarkovPricingModel};

/// Largest |lambda| a curve may fit and still be classed as power decay.
pub const POWER_LAMBDA_TOL: f64 = 1e-6;

/// Largest relative oscillation of -log P / log T over the tail for power
/// classification.
pub const POWER_OSCILLATION_TOL: f64 = 0.02;

/// Shape of the far end of a discount curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DecayClass {
    /// Prices fall like e^{-lambda t} times a slowly varying factor.
    Exponential,
    /// Prices fall polynomially, like t^{-gamma}; the exponential rate is 0.
    Power { gamma: f64 },
    /// Neither pattern is stable on the supplied grid.
    Undetermined,
}

/// Exponential-rate / slowly-varying split of a discount curve.
///
/// `l_values[i]` is e^{lambda * tenor_i} times the price, the residual left
/// after the fitted exponential is removed. `regularity_score` in [0, 1]
/// measures how stable the rate estimates are across the tail (1 = the
/// price-ratio limit that defines the rate visibly exists on this grid).
#[derive(Debug, Clone, Serialize)]
pub struct KaramataFit {
    pub lambda: f64,
    #[serde(rename = "L_values")]
    pub l_values: Vec<f64>,
    pub regularity_score: f64,
    pub decay_class: DecayClass,
}

impl KaramataFit {
    pub fn gamma(&self) -> Option<f64> {
        match self.decay_class {
            DecayClass::Power { gamma } => Some(gamma),
            _ => None,
        }
    }
}

/// Interpolates log price at tenor `s` through the three grid nodes nearest
/// `s`, in (log tenor, log price) coordinates where both model classes of
/// interest are locally polynomial.
fn interp_log_price(tenors: &[f64], log_prices: &[f64], s: f64) -> f64 {
    let n = tenors.len();
    let j = tenors.partition_point(|&x| x < s);
    let lo = j.saturating_sub(1).min(n - 3);
    let xi = s.ln();
    let xs = [tenors[lo].ln(), tenors[lo + 1].ln(), tenors[lo + 2].ln()];
    let ys = [log_prices[lo], log_prices[lo + 1], log_prices[lo + 2]];
    let mut acc = 0.0;
    for k in 0..3 {
        let mut weight = 1.0;
        for j in 0..3 {
            if j != k {
                weight *= (xi - xs[j]) / (xs[k] - xs[j]);
            }
        }
        acc += ys[k] * weight;
    }
    acc
}

/// Extrapolates per-tenor rate estimates to infinite tenor by a quadratic
/// least-squares fit in 1/tenor; the intercept is the limit rate. Removes
/// the O(1/T) head of the estimator bias, which a plain tail average keeps.
fn extrapolate_rate(tail_tenors: &[f64], estimates: &[f64]) -> Result<f64> {
    let m = estimates.len();
    let u_max = 1.0 / tail_tenors[0];
    let us: Vec<f64> = tail_tenors.iter().map(|&t| (1.0 / t) / u_max).collect();
    let mut gram = DMatrix::zeros(3, 3);
    let mut rhs = DVector::zeros(3);
    for i in 0..m {
        let basis = [1.0, us[i], us[i] * us[i]];
        for a in 0..3 {
            for b in 0..3 {
                gram[(a, b)] += basis[a] * basis[b];
            }
            rhs[a] += basis[a] * estimates[i];
        }
    }
    let coeffs = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("rate extrapolation system is singular".into()))?;
    Ok(coeffs[0])
}

/// Splits a discount curve into an exponential rate and a slowly varying
/// residual, and classifies the tail decay.
///
/// Per-tenor rate estimates are log price ratios over a lag of `t_probe`
/// across the curve's tail; their extrapolation to infinite tenor is the
/// fitted rate. A curve is classed as power decay when that rate vanishes
/// and -log P / log T is flat across the tail.
pub fn karamata_fit(curve: &DiscountCurve, t_probe: f64) -> Result<KaramataFit> {
    let tenors = curve.tenors();
    let prices = curve.prices();
    let n = tenors.len();
    if n < 8 {
        return Err(Error::CurveTooShort(format!(
            "need at least 8 tenors to fit a tail, got {n}"
        )));
    }
    let span_factor = tenors[n - 1] / tenors[0];
    if span_factor < 10.0 {
        return Err(Error::CurveTooShort(format!(
            "tenors span a factor of {span_factor:.2}, need at least 10"
        )));
    }
    let span = tenors[n - 1] - tenors[0];
    if t_probe.is_nan() || t_probe <= 0.0 || t_probe >= span / 2.0 {
        return Err(Error::Validation(format!(
            "t_probe = {t_probe} must lie in (0, {})",
            span / 2.0
        )));
    }

    let log_prices: Vec<f64> = prices.iter().map(|&p| p.ln()).collect();
    let tail_start = (3 * n / 4).min(n - 3);
    let tail_tenors: Vec<f64> = tenors[tail_start..].to_vec();
    let estimates: Vec<f64> = (tail_start..n)
        .map(|i| {
            let s = tenors[i] - t_probe;
            (interp_log_price(tenors, &log_prices, s) - log_prices[i]) / t_probe
        })
        .collect();

    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let dispersion =
        (estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / m).sqrt();
    let regularity_score = 1.0 - (dispersion / mean.abs().max(1e-12)).min(1.0);
    let mut lambda = extrapolate_rate(&tail_tenors, &estimates)?;

    // Power classification: vanishing rate and a flat -log P / log T tail.
    let loglog: Vec<f64> = (tail_start..n)
        .map(|i| -log_prices[i] / tenors[i].ln())
        .collect();
    let mut sorted = loglog.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let oscillation = (sorted[sorted.len() - 1] - sorted[0]) / median.abs().max(1e-300);
    let gamma = *loglog.last().unwrap();

    let decay_class = if lambda.abs() <= POWER_LAMBDA_TOL {
        if oscillation <= POWER_OSCILLATION_TOL && gamma > 0.0 {
            lambda = 0.0;
            DecayClass::Power { gamma }
        } else {
            DecayClass::Undetermined
        }
    } else {
        DecayClass::Exponential
    };

    let l_values: Vec<f64> = tenors
        .iter()
        .zip(prices)
        .map(|(&t, &p)| (lambda * t).exp() * p)
        .collect();
    if l_values.iter().any(|&l| !l.is_finite() || l <= 0.0) {
        return Err(Error::Numerical(
            "slowly varying residuals overflow at the fitted rate".into(),
        ));
    }
    Ok(KaramataFit {
        lambda,
        l_values,
        regularity_score,
        decay_class,
    })
}

/// Continuously compounded zero-coupon rate at time t for maturity T, seen
/// from state x: -log P(T - t, x) / (T - t).
pub fn zero_coupon_rate(model: &MarkovPricingModel, t: usize, maturity: usize, x: usize) -> Result<f64> {
    if maturity <= t {
        return Err(Error::HorizonOrder {
            t,
            horizon: maturity,
        });
    }
    let tau = maturity - t;
    Ok(-model.bond_price(tau, x)?.ln() / tau as f64)
}

/// Long-maturity rate estimate with the leading 1/(T-t) bias removed: the
/// forward zero rate between (T-t)/2 and T-t. The eigenfunction-dependent
/// head of the zero rate cancels between the two maturities, leaving the
/// asymptotic rate plus an exponentially small remainder.
pub fn zero_rate_limit(model: &MarkovPricingModel, t: usize, maturity: usize, x: usize) -> Result<f64> {
    if maturity <= t + 1 {
        return Err(Error::HorizonOrder {
            t,
            horizon: maturity,
        });
    }
    let tau = maturity - t;
    let half = tau / 2;
    let p_half = model.bond_price(half, x)?;
    let p_full = model.bond_price(tau, x)?;
    Ok((p_half / p_full).ln() / (tau - half) as f64)
}

fn matrix_power_apply(m: &DMatrix<f64>, v: &DVector<f64>, t: usize) -> DVector<f64> {
    let mut out = v.clone();
    for _ in 0..t {
        out = m * out;
    }
    out
}

fn check_yield_inputs(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    payoff_len: usize,
    t: usize,
    maturity: usize,
    x: usize,
) -> Result<()> {
    model.check_state(x)?;
    if sol.n_states() != model.n_states() {
        return Err(Error::InvalidSolution(format!(
            "solution has {} states, model has {}",
            sol.n_states(),
            model.n_states()
        )));
    }
    if payoff_len != model.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "cash flow has {} entries for {} states",
            payoff_len,
            model.n_states()
        )));
    }
    if maturity <= t {
        return Err(Error::HorizonOrder {
            t,
            horizon: maturity,
        });
    }
    Ok(())
}

/// Expected exponential yield of a positive bounded cash flow paid at T,
/// seen from state x at time t, under the long-horizon measure and under the
/// base measure: log expected payoff over price, per unit time. All
/// expectations are exact matrix-power sums.
pub fn exp_yield(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    cash_flow: &CashFlowSpec,
    t: usize,
    maturity: usize,
    x: usize,
) -> Result<(f64, f64)> {
    check_yield_inputs(model, sol, cash_flow.len(), t, maturity, x)?;
    let tau = maturity - t;
    let tau_f = tau as f64;
    let c = cash_flow.payoff();
    let over_pi = DVector::from_fn(c.len(), |i, _| c[i] / sol.pi[i]);

    let mean_l = matrix_power_apply(&sol.eigen_transition, c, tau)[x];
    let mean_l_over_pi = matrix_power_apply(&sol.eigen_transition, &over_pi, tau)[x];
    let rho_l = sol.lambda + (mean_l / (sol.pi[x] * mean_l_over_pi)).ln() / tau_f;

    let mean_p = matrix_power_apply(model.transition(), c, tau)[x];
    let price = matrix_power_apply(model.state_price(), c, tau)[x];
    let rho_p = (mean_p / price).ln() / tau_f;
    Ok((rho_l, rho_p))
}

/// Inputs for a power yield evaluated on a fitted discount curve: expected
/// payoffs and price-normalized hedge moments, one per curve tenor, and the
/// bound both series must respect.
#[derive(Debug, Clone, Serialize)]
pub struct PowerYieldInput {
    /// Expected payoff per tenor.
    pub payoff_expectations: Vec<f64>,
    /// Expected payoff over the long-horizon numeraire, divided by the bond
    /// price, per tenor.
    pub moment_ratios: Vec<f64>,
    /// Both series must lie in [1/bound, bound].
    pub bound: f64,
    /// Valuation time.
    pub t: f64,
}

/// Expected power yield at a curve tenor: log expected payoff over price,
/// per log unit of time. Defined only for power-decay curves; the value
/// approaches the decay exponent at long maturities because the bounded
/// series vanish against log T.
pub fn power_yield(
    curve: &DiscountCurve,
    fit: &KaramataFit,
    input: &PowerYieldInput,
    maturity: f64,
) -> Result<f64> {
    if !matches!(fit.decay_class, DecayClass::Power { .. }) {
        return Err(Error::NotPowerDecay);
    }
    let n = curve.len();
    if input.payoff_expectations.len() != n || input.moment_ratios.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "moment series must have one entry per tenor ({n})"
        )));
    }
    if !input.bound.is_finite() || input.bound < 1.0 {
        return Err(Error::Validation(format!(
            "series bound must be finite and at least 1, got {}",
            input.bound
        )));
    }
    let inside = |v: f64| v.is_finite() && v >= 1.0 / input.bound && v <= input.bound;
    if !input.payoff_expectations.iter().all(|&v| inside(v))
        || !input.moment_ratios.iter().all(|&v| inside(v))
    {
        return Err(Error::Validation(format!(
            "moment series leave the stated bound [{}, {}]",
            1.0 / input.bound,
            input.bound
        )));
    }
    let idx = curve
        .tenors()
        .iter()
        .position(|&tn| (tn - maturity).abs() <= 1e-9 * maturity.abs().max(1.0))
        .ok_or_else(|| Error::Validation(format!("maturity {maturity} is not a curve tenor")))?;
    if input.t.is_nan() || input.t < 0.0 || maturity - input.t <= 1.0 {
        return Err(Error::Validation(format!(
            "power yield needs maturity - t > 1, got t = {}, maturity = {maturity}",
            input.t
        )));
    }
    let window = maturity - input.t;
    let price = curve.prices()[idx];
    Ok((input.payoff_expectations[idx] / (input.moment_ratios[idx] * price)).ln() / window.ln())
}

/// Expected exponential yield under the long-horizon measure of a cash flow
/// growing by the supplied per-transition factors. Both expectations are
/// matrix powers of the growth-indexed state-price matrix.
pub fn growth_yield(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    growth: &GrowthSpec,
    t: usize,
    maturity: usize,
    x: usize,
) -> Result<f64> {
    check_yield_inputs(model, sol, model.n_states(), t, maturity, x)?;
    let indexed = model.growth_indexed(growth)?;
    if !indexed.is_irreducible() {
        return Err(Error::ReducibleGrowthChain);
    }
    let tau = maturity - t;
    let a_g = indexed.state_price();
    let weighted = matrix_power_apply(a_g, &sol.pi, tau)[x];
    let plain = matrix_power_apply(a_g, &DVector::from_element(model.n_states(), 1.0), tau)[x];
    Ok(sol.lambda + (weighted / (sol.pi[x] * plain)).ln() / tau as f64)
}

/// Zero-coupon yield of the growth-indexed kernel: the base-measure yield of
/// the growing cash flow. Its long-maturity limit is the principal rate of
/// the growth-indexed chain, not of the base chain, which is the wedge
/// between the two measures' yield limits.
pub fn growth_zero_yield(
    model: &MarkovPricingModel,
    growth: &GrowthSpec,
    t: usize,
    maturity: usize,
    x: usize,
) -> Result<f64> {
    model.check_state(x)?;
    if maturity <= t {
        return Err(Error::HorizonOrder {
            t,
            horizon: maturity,
        });
    }
    let indexed = model.growth_indexed(growth)?;
    if !indexed.is_irreducible() {
        return Err(Error::ReducibleGrowthChain);
    }
    let tau = maturity - t;
    let plain =
        matrix_power_apply(indexed.state_price(), &DVector::from_element(model.n_states(), 1.0), tau)[x];
    Ok(-plain.ln() / tau as f64)
}

/// Yields across a maturity sweep, with the limit diagnostics the asymptotic
/// statements are checked against.
#[derive(Debug, Clone, Serialize)]
pub struct YieldReport {
    pub t: usize,
    pub horizons: Vec<usize>,
    #[serde(rename = "rho_L")]
    pub rho_l: Vec<f64>,
    #[serde(rename = "rho_P")]
    pub rho_p: Vec<f64>,
    /// Power yields; empty in model mode, where decay is exponential.
    pub varrho: Vec<f64>,
    /// Bias-corrected limit from the two largest horizons.
    pub limit_estimate: f64,
    pub limit_target: f64,
    /// |rho_L - limit_target| at the largest horizon.
    pub gap_at_max: f64,
}

impl YieldReport {
    /// CSV rendering, one row per horizon; gap is against the limit target.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("horizon,rho_L,rho_P,target,gap\n");
        for (i, &h) in self.horizons.iter().enumerate() {
            out.push_str(&format!(
                "{h},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.rho_l[i],
                self.rho_p[i],
                self.limit_target,
                (self.rho_l[i] - self.limit_target).abs()
            ));
        }
        out
    }
}

/// Sweeps the expected exponential yield of one cash flow across maturities
/// and reports both measures' yields against the principal rate.
pub fn yield_sweep(
    model: &MarkovPricingModel,
    sol: &EigenSolution,
    cash_flow: &CashFlowSpec,
    t: usize,
    horizons: &[usize],
    x: usize,
) -> Result<YieldReport> {
    if horizons.is_empty() {
        return Err(Error::Validation("horizons list is empty".into()));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("horizons must be strictly increasing".into()));
    }
    let mut rho_l = Vec::with_capacity(horizons.len());
    let mut rho_p = Vec::with_capacity(horizons.len());
    for &maturity in horizons {
        let (l, p) = exp_yield(model, sol, cash_flow, t, maturity, x)?;
        rho_l.push(l);
        rho_p.push(p);
    }
    let k = horizons.len();
    let limit_estimate = if k >= 2 {
        let tau2 = (horizons[k - 1] - t) as f64;
        let tau1 = (horizons[k - 2] - t) as f64;
        (tau2 * rho_l[k - 1] - tau1 * rho_l[k - 2]) / (tau2 - tau1)
    } else {
        rho_l[0]
    };
    let limit_target = sol.lambda;
    let gap_at_max = (rho_l[k - 1] - limit_target).abs();
    Ok(YieldReport {
        t,
        horizons: horizons.to_vec(),
        rho_l,
        rho_p,
        varrho: Vec::new(),
        limit_estimate,
        limit_target,
        gap_at_max,
    })
}
