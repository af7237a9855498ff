//! Acceptance gate: every headline guarantee of the library checked at its
//! stated tolerance, one pass/fail line per criterion (run with
//! `--nocapture` to see them as they execute).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use longrisk::fixtures::{
    exponential_curve_csv, one_state, power_curve_csv, random_model, rate_homogeneous,
    state_growth, two_state, two_state_growth_json, two_state_json,
};
use longrisk::{
    aj_check, burkholder_check, certify_ergodicity, convergence_report, exp_yield,
    factorization_check, growth_yield, growth_zero_yield, karamata_fit, long_term_pricing_check,
    power_yield, principal_eigen, zero_coupon_rate, zero_rate_limit, BurkholderConfig,
    CashFlowSpec, ConvergenceConfig, DecayClass, DiscountCurve, EigenSolution, Error,
    ForwardSystem, MarkovPricingModel, PowerYieldInput, Result,
};

const TOL: f64 = 1e-12;
const ITER: usize = 200_000;

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn record(&mut self, number: usize, name: &str, outcome: Result<(bool, String)>) {
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass, detail),
            Err(e) => (false, format!("errored: {e}")),
        };
        let tag = if pass { "[PASS]" } else { "[FAIL]" };
        println!("{tag} {number:02} {name}: {detail}");
        if !pass {
            self.failures.push(format!("{number:02} {name}: {detail}"));
        }
    }
}

fn solve(model: &MarkovPricingModel) -> Result<EigenSolution> {
    principal_eigen(model, TOL, ITER)
}

fn within_budget(elapsed: Duration, budget: Duration) -> (bool, String) {
    (
        elapsed <= budget,
        format!("{:.2}s of {:.0}s budget", elapsed.as_secs_f64(), budget.as_secs_f64()),
    )
}

/// Least-squares slope of ln(values) against integer horizons.
fn log_slope(horizons: &[usize], values: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = horizons
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&h, &v)| (h as f64, v.ln()))
        .collect();
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_01_eigen_identity() -> Result<(bool, String)> {
    let start = Instant::now();
    let mut max_residual = 0.0f64;
    let mut max_row_defect = 0.0f64;
    for i in 0..50usize {
        let n = 2 + (i % 49);
        let model = random_model(n, 1_000 + i as u64);
        let sol = solve(&model)?;
        let a = model.state_price();
        let api = a * &sol.pi;
        let rho = (-sol.lambda).exp();
        let pi_norm = sol.pi.amax();
        let residual = (0..n)
            .map(|x| (api[x] - rho * sol.pi[x]).abs())
            .fold(0.0f64, f64::max)
            / pi_norm;
        max_residual = max_residual.max(residual);
        for x in 0..n {
            let row: f64 = (0..n).map(|y| sol.eigen_transition[(x, y)]).sum();
            max_row_defect = max_row_defect.max((row - 1.0).abs());
        }
    }
    let (in_time, time_note) = within_budget(start.elapsed(), Duration::from_secs(5));
    let pass = max_residual <= 1e-10 && max_row_defect <= 1e-12 && in_time;
    Ok((
        pass,
        format!(
            "50 models n=2..50, max eigen residual {max_residual:.2e} (tol 1e-10), \
             max row defect {max_row_defect:.2e} (tol 1e-12), {time_note}"
        ),
    ))
}

fn criterion_02_factorization_identity() -> Result<(bool, String)> {
    let start = Instant::now();
    let model = two_state();
    let sol = solve(&model)?;
    let t = 10usize;
    let mut max_rel_gap = 0.0f64;
    for mask in 0..(1u32 << t) {
        let mut path = Vec::with_capacity(t + 1);
        path.push(0usize);
        for step in 0..t {
            path.push(((mask >> step) & 1) as usize);
        }
        let check = factorization_check(&model, &sol, &path, t)?;
        max_rel_gap = max_rel_gap.max(check.gap / check.lhs.abs());
    }
    let (in_time, time_note) = within_budget(start.elapsed(), Duration::from_secs(1));
    let pass = max_rel_gap <= 1e-12 && in_time;
    Ok((
        pass,
        format!("1024 paths of length 10, max relative gap {max_rel_gap:.2e} (tol 1e-12), {time_note}"),
    ))
}

fn criterion_03_eigen_relation() -> Result<(bool, String)> {
    let growth_indexed = two_state().growth_indexed(&state_growth())?;
    let fixtures: Vec<(&str, MarkovPricingModel)> = vec![
        ("one_state", one_state()),
        ("two_state", two_state()),
        ("rate_homogeneous", rate_homogeneous()),
        ("growth_indexed", growth_indexed),
    ];
    let mut worst = 0.0f64;
    for (_, model) in &fixtures {
        let sol = solve(model)?;
        let mut v = sol.pi.clone();
        for k in 1..=100usize {
            v = model.apply_pricing_operator(&v, 1)?;
            let scale = (-sol.lambda * k as f64).exp();
            for x in 0..model.n_states() {
                let target = scale * sol.pi[x];
                worst = worst.max((v[x] - target).abs() / target);
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!(
            "A^k pi vs e^(-lambda k) pi over k<=100 on {} fixtures, worst relative gap {worst:.2e} (tol 1e-9)",
            fixtures.len()
        ),
    ))
}

fn criterion_04_convergence_rate() -> Result<(bool, String)> {
    let start = Instant::now();
    let model = two_state();
    let sol = solve(&model)?;
    let cert = certify_ergodicity(&sol, 60)?;
    let config = ConvergenceConfig {
        x0: 0,
        t_fixed: 3,
        horizons: (8..=20).collect(),
        n_paths: 2000,
        seed: 42,
    };
    let report = convergence_report(&model, &sol, &config)?;
    let exact = report.mode == "exact";
    let l1_decreasing = report.l1_m.windows(2).all(|w| w[1] < w[0]);
    let tv_decreasing = report.tv_q.windows(2).all(|w| w[1] < w[0]);
    let l1_slope = -log_slope(&report.horizons, &report.l1_m);
    let tv_slope = -log_slope(&report.horizons, &report.tv_q);
    let l1_ok = (l1_slope - cert.alpha).abs() <= 0.15 * cert.alpha;
    let tv_ok = (tv_slope - cert.alpha).abs() <= 0.15 * cert.alpha;
    let (in_time, time_note) = within_budget(start.elapsed(), Duration::from_secs(10));
    let pass = exact && l1_decreasing && tv_decreasing && l1_ok && tv_ok && in_time;
    Ok((
        pass,
        format!(
            "exact mode, l1 and tv strictly decreasing on T=8..20: {}/{}, decay slopes \
             {l1_slope:.4}/{tv_slope:.4} vs alpha {:.4} (15% band), {time_note}",
            l1_decreasing, tv_decreasing, cert.alpha
        ),
    ))
}

fn criterion_05_forward_measure_oracle() -> Result<(bool, String)> {
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    for n in 2..=4usize {
        let model = random_model(n, 500 + n as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(77 + n as u64);
        for maturity in 1..=6usize {
            let system = ForwardSystem::new(&model, maturity)?;
            for t in 0..=maturity {
                for _ in 0..20 {
                    let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();

                    let mut dist = vec![0.0f64; n];
                    dist[0] = 1.0;
                    for u in 0..t {
                        let step = system.step(u)?;
                        let mut next = vec![0.0f64; n];
                        for (x, w) in dist.iter().enumerate() {
                            for y in 0..n {
                                next[y] += w * step[(x, y)];
                            }
                        }
                        dist = next;
                    }
                    let forward_side: f64 = (0..n).map(|y| dist[y] * f[y]).sum();

                    let mut base_side = 0.0f64;
                    let mut stack = vec![(vec![0usize], 1.0f64)];
                    while let Some((path, prob)) = stack.pop() {
                        if path.len() == t + 1 {
                            base_side += prob
                                * longrisk::forward_martingale(&model, maturity, &path, t)?
                                * f[path[t]];
                            continue;
                        }
                        let x = *path.last().unwrap();
                        for y in 0..n {
                            let p = model.transition()[(x, y)];
                            if p > 0.0 {
                                let mut nxt = path.clone();
                                nxt.push(y);
                                stack.push((nxt, prob * p));
                            }
                        }
                    }

                    worst = worst.max((forward_side - base_side).abs() / base_side.abs().max(1.0));
                    checks += 1;
                }
            }
        }
    }
    Ok((
        worst <= 1e-10,
        format!("{checks} reweighting identities over n<=4, t<=T<=6, worst gap {worst:.2e} (tol 1e-10)"),
    ))
}

fn criterion_06_long_rate_constancy() -> Result<(bool, String)> {
    // A state-independent one-period rate makes the eigenfunction constant,
    // so the T=500 zero-coupon rate itself is flat in (x, t) and sits on
    // lambda. With state-dependent rates the level at T=500 still carries
    // an order 1/T transient, so there the same statement is checked on the
    // transient-free forward-window estimator.
    let homogeneous = rate_homogeneous();
    let sol_h = solve(&homogeneous)?;
    let mut h_rates = Vec::new();
    for x in 0..homogeneous.n_states() {
        for t in [0usize, 1, 5] {
            h_rates.push(zero_coupon_rate(&homogeneous, t, 500, x)?);
        }
    }
    let h_spread = h_rates.iter().cloned().fold(f64::MIN, f64::max)
        - h_rates.iter().cloned().fold(f64::MAX, f64::min);
    let h_gap = h_rates
        .iter()
        .map(|r| (r - sol_h.lambda).abs())
        .fold(0.0f64, f64::max);

    let heterogeneous = two_state();
    let sol_2 = solve(&heterogeneous)?;
    let mut limits = Vec::new();
    for x in 0..heterogeneous.n_states() {
        for t in [0usize, 1, 5] {
            limits.push(zero_rate_limit(&heterogeneous, t, 500, x)?);
        }
    }
    let l_spread = limits.iter().cloned().fold(f64::MIN, f64::max)
        - limits.iter().cloned().fold(f64::MAX, f64::min);
    let l_gap = limits
        .iter()
        .map(|r| (r - sol_2.lambda).abs())
        .fold(0.0f64, f64::max);

    let pass = h_spread <= 1e-6 && h_gap <= 1e-6 && l_spread <= 1e-6 && l_gap <= 1e-6;
    Ok((
        pass,
        format!(
            "flat-rate model: spread {h_spread:.2e}, gap to lambda {h_gap:.2e}; \
             two-rate model via forward window: spread {l_spread:.2e}, gap {l_gap:.2e} (all tol 1e-6)"
        ),
    ))
}

fn criterion_07_exp_yield_limit() -> Result<(bool, String)> {
    let model = two_state();
    let sol = solve(&model)?;
    let cash_flow = CashFlowSpec::new(vec![1.0, 2.0])?;
    let mut l_gaps = Vec::new();
    let mut p_gaps = Vec::new();
    for maturity in [25usize, 50, 100, 200] {
        let (rho_l, rho_p) = exp_yield(&model, &sol, &cash_flow, 0, maturity, 0)?;
        l_gaps.push((rho_l - sol.lambda).abs());
        p_gaps.push((rho_p - sol.lambda).abs());
    }
    let l_monotone = l_gaps.windows(2).all(|w| w[1] < w[0]);
    let p_monotone = p_gaps.windows(2).all(|w| w[1] < w[0]);
    let l_final = *l_gaps.last().unwrap();
    let p_final = *p_gaps.last().unwrap();
    let pass = l_monotone && p_monotone && l_final <= 1e-3 && p_final <= 1e-3;
    Ok((
        pass,
        format!(
            "C=(1,2), |rho_L-lambda| {l_final:.2e} and |rho_P-lambda| {p_final:.2e} at T=200 \
             (tol 1e-3), monotone over T=25..200: {l_monotone}/{p_monotone}"
        ),
    ))
}

fn criterion_08_power_yield_limit() -> Result<(bool, String)> {
    let curve = DiscountCurve::from_csv_str(&power_curve_csv())?;
    let fit = karamata_fit(&curve, 5.0)?;
    let is_power = matches!(fit.decay_class, DecayClass::Power { .. });
    let n = curve.len();
    let input = PowerYieldInput {
        payoff_expectations: vec![1.0; n],
        moment_ratios: vec![1.0; n],
        bound: 1.0,
        t: 0.0,
    };
    let varrho = power_yield(&curve, &fit, &input, 1e4)?;
    let gap = (varrho - 2.0).abs();
    Ok((
        is_power && gap <= 0.05,
        format!(
            "curve (1+t)^-2 classified {:?}, varrho at T=1e4 is {varrho:.6} (within 0.05 of 2: gap {gap:.2e})",
            fit.decay_class
        ),
    ))
}

fn criterion_09_growth_neutrality() -> Result<(bool, String)> {
    let model = two_state();
    let sol = solve(&model)?;
    let growth = state_growth();
    let rho_lg = growth_yield(&model, &sol, &growth, 0, 200, 0)?;
    let l_gap = (rho_lg - sol.lambda).abs();
    let p_side = growth_zero_yield(&model, &growth, 0, 200, 0)?;
    let wedge = (p_side - sol.lambda).abs();
    let pass = l_gap <= 1e-3 && wedge > 1e-2;
    Ok((
        pass,
        format!(
            "growth-indexed long yield gap {l_gap:.2e} (tol 1e-3); base-measure side sits \
             {wedge:.4} from lambda (needs > 1e-2): wedge confirmed {}",
            wedge > 1e-2
        ),
    ))
}

fn criterion_10_pricing_bound() -> Result<(bool, String)> {
    let model = two_state();
    let sol = solve(&model)?;
    let cert = certify_ergodicity(&sol, 60)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0usize;
    let mut checks = 0usize;
    let mut min_margin = f64::MAX;
    for _ in 0..20 {
        let f = DVector::from_iterator(2, (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0));
        for t in cert.t0..=60 {
            checks += 1;
            match long_term_pricing_check(&model, &sol, &cert, &f, t) {
                Ok(check) => min_margin = min_margin.min(check.bound - check.max_gap),
                Err(Error::BoundViolated { .. }) => violations += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((
        violations == 0,
        format!(
            "{checks} entrywise bounds over t=1..60 and 20 random |f|<=1: {violations} violations, \
             slimmest margin {min_margin:.2e}"
        ),
    ))
}

fn criterion_11_burkholder() -> Result<(bool, String)> {
    let start = Instant::now();
    let model = two_state();
    let sol = solve(&model)?;
    let mut all_hold = true;
    let mut n_strategies = 0usize;
    let mut details = Vec::new();
    for threshold in [0.01f64, 0.1, 1.0] {
        let config = BurkholderConfig {
            maturity: 12,
            t_fixed: 7,
            x0: 0,
            threshold,
            n_paths: 100_000,
            seed: 4242,
        };
        let check = burkholder_check(&model, &sol, &config)?;
        all_hold &= check.holds;
        n_strategies = check.n_strategies;
        details.push(format!(
            "a={threshold}: {:.3e}<={:.3e}",
            check.worst_lhs, check.worst_allowance
        ));
    }
    let (in_time, time_note) = within_budget(start.elapsed(), Duration::from_secs(60));
    let pass = all_hold && n_strategies >= 100 && in_time;
    Ok((
        pass,
        format!(
            "{n_strategies} sampled sign strategies at 1e5 paths, tail bound holds on a-grid [{}], {time_note}",
            details.join(", ")
        ),
    ))
}

fn criterion_12_aj_agreement() -> Result<(bool, String)> {
    let mut disagreements = 0usize;
    let mut both_pass = 0usize;
    for i in 0..20u64 {
        let n = 2 + (i as usize % 5);
        let model = random_model(n, 9_000 + i);
        let sol = solve(&model)?;
        let aj_verdict = match aj_check(&model, &sol, &[1, 2, 4], 400) {
            Ok(report) => report.limit_exists,
            Err(Error::NotStabilized { .. }) => false,
            Err(e) => return Err(e),
        };
        let config = ConvergenceConfig {
            x0: 0,
            t_fixed: 2,
            horizons: vec![4, 6, 8, 10, 12],
            n_paths: 1000,
            seed: 5,
        };
        let report = convergence_report(&model, &sol, &config)?;
        let decays =
            report.l1_m.last().unwrap() < report.l1_m.first().unwrap() && report.fitted_rate > 0.0;
        if aj_verdict != decays {
            disagreements += 1;
        }
        if aj_verdict && decays {
            both_pass += 1;
        }
    }
    Ok((
        disagreements == 0,
        format!("20 seeded models: verdicts agree on all, {both_pass} pass both diagnostics, {disagreements} disagreements"),
    ))
}

fn run_cli(dir: &Path, args: &[&str], threads: &str) -> Result<(Vec<u8>, i32)> {
    let exe = env!("CARGO_BIN_EXE_longrisk");
    let output = Command::new(exe)
        .args(args)
        .current_dir(dir)
        .env("LONGRISK_THREADS", threads)
        .output()
        .map_err(|e| Error::Validation(format!("spawn: {e}")))?;
    Ok((output.stdout, output.status.code().unwrap_or(-1)))
}

fn criterion_13_cli_determinism() -> Result<(bool, String)> {
    let dir = std::env::temp_dir().join(format!("longrisk-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Validation(format!("tempdir: {e}")))?;
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Validation(format!("{name}: {e}")))?;
        Ok(path)
    };
    write("model.json", &two_state_json())?;
    write("growth.json", &two_state_growth_json())?;
    write("exp.csv", &exponential_curve_csv())?;
    write("pow.csv", &power_curve_csv())?;

    let commands: Vec<Vec<&str>> = vec![
        vec!["factorize", "--model", "model.json"],
        vec![
            "yields", "--model", "model.json", "--horizons", "25:100:25", "--cash-flow", "1,2",
        ],
        vec![
            "yields", "--model", "growth.json", "--horizons", "25:100:25", "--growth",
        ],
        vec![
            "converge", "--model", "model.json", "--t", "3", "--horizons", "4:12:2", "--seed",
            "7", "--n-paths", "1000",
        ],
        vec!["ergodicity", "--model", "model.json"],
        vec!["karamata", "--curve", "exp.csv"],
        vec!["karamata", "--curve", "pow.csv", "--t-probe", "5"],
        vec![
            "simulate", "--model", "model.json", "--measure", "Q", "--maturity", "12",
            "--horizon", "8", "--n-paths", "200", "--seed", "3", "--out", "paths.bin",
        ],
        vec![
            "ajcheck", "--model", "model.json", "--t-grid", "1:5:1", "--tau-max", "150",
        ],
    ];

    let mut stable = 0usize;
    let mut broken = Vec::new();
    for args in &commands {
        // Reruns also change the thread cap: byte-identity must not depend
        // on parallelism.
        let (out_a, code_a) = run_cli(&dir, args, "1")?;
        let file_a = if args[0] == "simulate" {
            Some(std::fs::read(dir.join("paths.bin")).map_err(|e| Error::Validation(e.to_string()))?)
        } else {
            None
        };
        let (out_b, code_b) = run_cli(&dir, args, "4")?;
        let file_b = if args[0] == "simulate" {
            Some(std::fs::read(dir.join("paths.bin")).map_err(|e| Error::Validation(e.to_string()))?)
        } else {
            None
        };
        if code_a == 0 && code_b == 0 && out_a == out_b && file_a == file_b {
            stable += 1;
        } else {
            broken.push(args.join(" "));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let pass = broken.is_empty();
    Ok((
        pass,
        if pass {
            format!("{stable}/{} command reruns byte-identical across thread caps", commands.len())
        } else {
            format!("unstable commands: {}", broken.join("; "))
        },
    ))
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate { failures: Vec::new() };
    gate.record(1, "eigen identity on random models", criterion_01_eigen_identity());
    gate.record(2, "pathwise factorization identity", criterion_02_factorization_identity());
    gate.record(3, "eigenfunction invariance to k=100", criterion_03_eigen_relation());
    gate.record(4, "deflator convergence at certified rate", criterion_04_convergence_rate());
    gate.record(5, "forward measure reweighting oracle", criterion_05_forward_measure_oracle());
    gate.record(6, "long-rate constancy", criterion_06_long_rate_constancy());
    gate.record(7, "expected exponential yield limit", criterion_07_exp_yield_limit());
    gate.record(8, "power yield limit on analytic curve", criterion_08_power_yield_limit());
    gate.record(9, "growth neutrality and base-measure wedge", criterion_09_growth_neutrality());
    gate.record(10, "certified long-term pricing bound", criterion_10_pricing_bound());
    gate.record(11, "martingale tail cross-check", criterion_11_burkholder());
    gate.record(12, "dominance and convergence verdicts agree", criterion_12_aj_agreement());
    gate.record(13, "CLI byte-identical reruns", criterion_13_cli_determinism());
    assert!(
        gate.failures.is_empty(),
        "acceptance failures:\n{}",
        gate.failures.join("\n")
    );
}
