//! Finite-state Markov pricing models, growth indexation, and discount curves.
//!
//! A model pairs a row-stochastic transition matrix with a strictly positive
//! per-transition discount factor. Their entrywise product is the state-price
//! matrix that drives every pricing operation downstream. Time is discrete
//! with unit steps; nothing here interpolates between steps.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Absolute tolerance for a transition row to count as stochastic.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// One-step pricing data on a finite state space.
///
/// Inputs are validated once at construction and never repaired: a row that
/// misses the stochastic constraint by more than [`ROW_SUM_TOL`] is rejected,
/// not renormalized. Reducible chains are accepted here (pricing works on
/// them) and only refused by the spectral operations that need irreducibility.
#[derive(Debug, Clone)]
pub struct MarkovPricingModel {
    transition: DMatrix<f64>,
    sdf: DMatrix<f64>,
    state_price: DMatrix<f64>,
    labels: Option<Vec<String>>,
    irreducible: bool,
}

impl MarkovPricingModel {
    /// Validates and assembles a model from row-major nested vectors.
    pub fn build(
        transition: Vec<Vec<f64>>,
        sdf: Vec<Vec<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let transition = square_matrix(transition, "transition")?;
        let sdf = square_matrix(sdf, "sdf")?;
        Self::from_matrices(transition, sdf, labels)
    }

    /// Same as [`build`](Self::build) for callers that already hold matrices.
    pub fn from_matrices(
        transition: DMatrix<f64>,
        sdf: DMatrix<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = transition.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("model needs at least one state".into()));
        }
        if transition.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "transition is {}x{}, must be square",
                transition.nrows(),
                transition.ncols()
            )));
        }
        if sdf.nrows() != n || sdf.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "sdf is {}x{}, transition is {}x{}",
                sdf.nrows(),
                sdf.ncols(),
                n,
                n
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} states",
                    l.len(),
                    n
                )));
            }
        }
        for x in 0..n {
            let mut sum = 0.0;
            for y in 0..n {
                let p = transition[(x, y)];
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::NonStochasticRow { row: x, sum: p });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochasticRow { row: x, sum });
            }
        }
        for x in 0..n {
            for y in 0..n {
                let m = sdf[(x, y)];
                if !m.is_finite() || (transition[(x, y)] > 0.0 && m <= 0.0) {
                    return Err(Error::NonPositiveSdf {
                        row: x,
                        col: y,
                        value: m,
                    });
                }
            }
        }
        let state_price = transition.component_mul(&sdf);
        let irreducible = strongly_connected(&transition);
        Ok(Self {
            transition,
            sdf,
            state_price,
            labels,
            irreducible,
        })
    }

    /// Parses the JSON model format: keys `n_states`, `transition`, `sdf`,
    /// optional `growth` and `labels`. Returns the embedded growth spec when
    /// present.
    pub fn from_json_str(text: &str) -> Result<(Self, Option<GrowthSpec>)> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("model json: {e}")))?;
        if file.transition.len() != file.n_states {
            return Err(Error::DimensionMismatch(format!(
                "n_states = {} but transition has {} rows",
                file.n_states,
                file.transition.len()
            )));
        }
        let model = Self::build(file.transition, file.sdf, file.labels)?;
        let growth = file.growth.map(GrowthSpec::new).transpose()?;
        if let Some(ref g) = growth {
            if g.factors().nrows() != model.n_states() {
                return Err(Error::DimensionMismatch(format!(
                    "growth is {}x{} for {} states",
                    g.factors().nrows(),
                    g.factors().ncols(),
                    model.n_states()
                )));
            }
        }
        Ok((model, growth))
    }

    pub fn n_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn sdf(&self) -> &DMatrix<f64> {
        &self.sdf
    }

    /// Entrywise product of transition probabilities and discount factors.
    pub fn state_price(&self) -> &DMatrix<f64> {
        &self.state_price
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Whether the positive-probability transition graph is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    pub fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.n_states() {
            return Err(Error::StateOutOfRange {
                state,
                n_states: self.n_states(),
            });
        }
        Ok(())
    }

    /// Applies the t-step pricing operator to a state function: the state-price
    /// matrix power acting on `f`. `t = 0` is the identity.
    pub fn apply_pricing_operator(&self, f: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
        if f.len() != self.n_states() {
            return Err(Error::DimensionMismatch(format!(
                "payoff has {} entries for {} states",
                f.len(),
                self.n_states()
            )));
        }
        let mut v = f.clone();
        for _ in 0..t {
            v = &self.state_price * v;
        }
        Ok(v)
    }

    /// Price at time 0 in state `x` of one unit paid at time `t`.
    pub fn bond_price(&self, t: usize, x: usize) -> Result<f64> {
        self.check_state(x)?;
        let ones = DVector::from_element(self.n_states(), 1.0);
        Ok(self.apply_pricing_operator(&ones, t)?[x])
    }

    /// Bond prices for every maturity `0..=t_max` and every state; entry `[t][x]`
    /// is the price of the t-period bond in state x.
    pub fn bond_table(&self, t_max: usize) -> Vec<DVector<f64>> {
        let mut table = Vec::with_capacity(t_max + 1);
        table.push(DVector::from_element(self.n_states(), 1.0));
        for t in 0..t_max {
            let next = &self.state_price * &table[t];
            table.push(next);
        }
        table
    }

    /// Reindexes the discount factor by a multiplicative growth process:
    /// the new model prices cash flows denominated in growth units.
    pub fn growth_indexed(&self, growth: &GrowthSpec) -> Result<MarkovPricingModel> {
        let n = self.n_states();
        let g = growth.factors();
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "growth is {}x{} for {} states",
                g.nrows(),
                g.ncols(),
                n
            )));
        }
        for x in 0..n {
            for y in 0..n {
                if self.transition[(x, y)] > 0.0 && g[(x, y)] <= 0.0 {
                    return Err(Error::NonPositiveGrowth {
                        row: x,
                        col: y,
                        value: g[(x, y)],
                    });
                }
            }
        }
        Self::from_matrices(
            self.transition.clone(),
            self.sdf.component_mul(g),
            self.labels.clone(),
        )
    }

    /// Product of one-step discount factors along a realized path.
    pub fn kernel_along_path(&self, path: &[usize], t: usize) -> Result<f64> {
        self.check_path(path, t)?;
        let mut s = 1.0;
        for step in 0..t {
            s *= self.sdf[(path[step], path[step + 1])];
        }
        Ok(s)
    }

    /// Validates that `path` has at least `t + 1` in-range states.
    pub fn check_path(&self, path: &[usize], t: usize) -> Result<()> {
        if path.len() < t + 1 {
            return Err(Error::InvalidPath(format!(
                "path has {} states, needs {} for horizon {}",
                path.len(),
                t + 1,
                t
            )));
        }
        for &x in &path[..=t] {
            self.check_state(x)?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ModelFile {
    n_states: usize,
    transition: Vec<Vec<f64>>,
    sdf: Vec<Vec<f64>>,
    #[serde(default)]
    growth: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

/// Per-transition multiplicative growth factors.
#[derive(Debug, Clone)]
pub struct GrowthSpec {
    factors: DMatrix<f64>,
}

impl GrowthSpec {
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        let factors = square_matrix(factors, "growth")?;
        Ok(Self { factors })
    }

    pub fn from_matrix(factors: DMatrix<f64>) -> Self {
        Self { factors }
    }

    pub fn factors(&self) -> &DMatrix<f64> {
        &self.factors
    }

    /// Cumulative growth along a realized path.
    pub fn along_path(&self, path: &[usize], t: usize) -> f64 {
        let mut g = 1.0;
        for step in 0..t {
            g *= self.factors[(path[step], path[step + 1])];
        }
        g
    }
}

/// A terminal payoff given as one strictly positive value per state.
#[derive(Debug, Clone)]
pub struct CashFlowSpec {
    payoff: DVector<f64>,
}

impl CashFlowSpec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::NonPositiveCashFlow { index, value });
            }
        }
        Ok(Self {
            payoff: DVector::from_vec(values),
        })
    }

    pub fn payoff(&self) -> &DVector<f64> {
        &self.payoff
    }

    pub fn len(&self) -> usize {
        self.payoff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoff.len() == 0
    }
}

/// A zero-coupon discount curve sampled at increasing tenors.
#[derive(Debug, Clone)]
pub struct DiscountCurve {
    tenors: Vec<f64>,
    prices: Vec<f64>,
}

impl DiscountCurve {
    pub fn new(tenors: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if tenors.len() != prices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tenors, {} prices",
                tenors.len(),
                prices.len()
            )));
        }
        if tenors.len() < 4 {
            return Err(Error::CurveTooShort(format!(
                "{} points, need at least 4",
                tenors.len()
            )));
        }
        let mut prev = 0.0;
        for (&t, &p) in tenors.iter().zip(&prices) {
            if !t.is_finite() || t <= prev {
                return Err(Error::Validation(format!(
                    "tenors must be strictly increasing and positive, got {t} after {prev}"
                )));
            }
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::NonPositivePrice { tenor: t, price: p });
            }
            if p > prices[0] * (1.0 + ROW_SUM_TOL) {
                return Err(Error::Validation(format!(
                    "price {p} at tenor {t} exceeds the first price {}",
                    prices[0]
                )));
            }
            prev = t;
        }
        Ok(Self { tenors, prices })
    }

    /// Parses `tenor,price` CSV with a header row.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("curve csv: {e}")))?;
        if headers.len() < 2 || headers[0].trim() != "tenor" || headers[1].trim() != "price" {
            return Err(Error::Parse(format!(
                "curve csv must start with 'tenor,price', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut tenors = Vec::new();
        let mut prices = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(format!("curve csv: {e}")))?;
            let parse = |field: &str| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("curve csv value '{field}': {e}")))
            };
            tenors.push(parse(&record[0])?);
            prices.push(parse(&record[1])?);
        }
        Self::new(tenors, prices)
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.tenors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tenors.is_empty()
    }
}

/// Converts nested row vectors into a square matrix, validating shape.
fn square_matrix(rows: Vec<Vec<f64>>, what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::DimensionMismatch(format!("{what} has no rows")));
    }
    let mut flat = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{what} row {i} has {} entries for {n} rows",
                row.len()
            )));
        }
        flat.extend_from_slice(row);
    }
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

/// Strong connectivity of the directed graph on strictly positive entries.
pub(crate) fn strongly_connected(weights: &DMatrix<f64>) -> bool {
    let n = weights.nrows();
    let reaches_all = |reverse: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for y in 0..n {
                let w = if reverse { weights[(y, x)] } else { weights[(x, y)] };
                if w > 0.0 && !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == n
    };
    reaches_all(false) && reaches_all(true)
}
