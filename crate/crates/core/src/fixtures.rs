//! Reference models and curves shared by tests, benchmarks, and docs.
//!
//! The two-state chain is the workhorse: mixing is fast enough that every
//! asymptotic statement is visible at desk-scale horizons, yet the states
//! have genuinely different one-period rates so nothing degenerates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{GrowthSpec, MarkovPricingModel};

/// Single absorbing state discounting at 5 percent. Every martingale in
/// sight is identically one.
pub fn one_state() -> MarkovPricingModel {
    MarkovPricingModel::build(vec![vec![1.0]], vec![vec![(-0.05f64).exp()]], None).unwrap()
}

/// Two-state chain with state-dependent one-period rates of 1 and 5
/// percent. Irreducible, aperiodic, and a closed-form 2x2 eigenproblem.
pub fn two_state() -> MarkovPricingModel {
    MarkovPricingModel::build(
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![
            vec![(-0.01f64).exp(), (-0.01f64).exp()],
            vec![(-0.05f64).exp(), (-0.05f64).exp()],
        ],
        None,
    )
    .unwrap()
}

/// Same transition dynamics as [`two_state`] but a state-independent
/// one-period rate of 3 percent, so the eigenfunction is constant and every
/// zero-coupon rate equals the principal rate exactly at every maturity.
pub fn rate_homogeneous() -> MarkovPricingModel {
    MarkovPricingModel::build(
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![vec![(-0.03f64).exp(); 2]; 2],
        None,
    )
    .unwrap()
}

/// Destination-dependent growth factors g(x, y) = e^{0.01 + 0.01 y} for the
/// two-state chain.
pub fn state_growth() -> GrowthSpec {
    GrowthSpec::new(vec![
        vec![(0.01f64).exp(), (0.02f64).exp()],
        vec![(0.01f64).exp(), (0.02f64).exp()],
    ])
    .unwrap()
}

/// Random dense irreducible aperiodic model: strictly positive transition
/// rows and one-period rates between 0.5 and 6 percent. Deterministic in
/// the seed.
pub fn random_model(n_states: usize, seed: u64) -> MarkovPricingModel {
    assert!(n_states >= 1, "need at least one state");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = vec![vec![0.0f64; n_states]; n_states];
    let mut sdf = vec![vec![0.0f64; n_states]; n_states];
    for x in 0..n_states {
        let mut row_sum = 0.0;
        for slot in transition[x].iter_mut() {
            let w = 0.05 + rng.random::<f64>();
            *slot = w;
            row_sum += w;
        }
        for y in 0..n_states {
            transition[x][y] /= row_sum;
            let rate = 0.005 + 0.055 * rng.random::<f64>();
            sdf[x][y] = (-rate).exp();
        }
    }
    MarkovPricingModel::build(transition, sdf, None).unwrap()
}

/// JSON document for [`two_state`], as the CLI reads it.
pub fn two_state_json() -> String {
    let e1 = (-0.01f64).exp();
    let e5 = (-0.05f64).exp();
    format!(
        concat!(
            "{{\n",
            "  \"n_states\": 2,\n",
            "  \"transition\": [[0.9, 0.1], [0.2, 0.8]],\n",
            "  \"sdf\": [[{e1}, {e1}], [{e5}, {e5}]],\n",
            "  \"labels\": [\"calm\", \"stressed\"]\n",
            "}}\n"
        ),
        e1 = e1,
        e5 = e5,
    )
}

/// JSON document for [`two_state`] with the [`state_growth`] factors.
pub fn two_state_growth_json() -> String {
    let e1 = (-0.01f64).exp();
    let e5 = (-0.05f64).exp();
    let g1 = (0.01f64).exp();
    let g2 = (0.02f64).exp();
    format!(
        concat!(
            "{{\n",
            "  \"n_states\": 2,\n",
            "  \"transition\": [[0.9, 0.1], [0.2, 0.8]],\n",
            "  \"sdf\": [[{e1}, {e1}], [{e5}, {e5}]],\n",
            "  \"growth\": [[{g1}, {g2}], [{g1}, {g2}]]\n",
            "}}\n"
        ),
        e1 = e1,
        e5 = e5,
        g1 = g1,
        g2 = g2,
    )
}

/// Exponential discount curve e^{-0.03 t} on integer tenors 1..=200, in the
/// CSV layout the CLI reads.
pub fn exponential_curve_csv() -> String {
    let mut out = String::from("tenor,price\n");
    for t in 1..=200 {
        out.push_str(&format!("{t},{:.16e}\n", (-0.03 * t as f64).exp()));
    }
    out
}

/// Power-decay discount curve (1 + t)^{-2} on 121 log-spaced tenors from 1
/// to 10^4, in the CSV layout the CLI reads.
pub fn power_curve_csv() -> String {
    let mut out = String::from("tenor,price\n");
    for i in 0..121 {
        let t = 1.0f64 * (1e4f64).powf(i as f64 / 120.0);
        out.push_str(&format!("{t:.16e},{:.16e}\n", (1.0 + t).powi(-2)));
    }
    out
}
