//! Command-line front end: reproducible runs of the factorization,
//! yield, convergence, ergodicity, curve-fit, simulation, and dominance
//! diagnostics on models read from disk.
//!
//! Every primary output embeds the resolved configuration, a SHA-256 hash
//! of the raw input bytes, and the principal rate where one was computed,
//! so artifacts from different commands can be cross-checked. Identical
//! invocations produce byte-identical primary outputs. Floats are printed
//! with 17 significant digits throughout.

use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use longrisk::{
    aj_check, certify_ergodicity, convergence_report, growth_yield, growth_zero_yield,
    karamata_fit, principal_eigen, simulate, yield_sweep, AjCheckReport, CashFlowSpec,
    ConvergenceConfig, DecayClass, DiscountCurve, EigenSolution, ErgodicityCertificate, Error,
    ForwardSystem, GrowthSpec, MarkovPricingModel, Result, SimulationMeasure,
};

const ABOUT: &str = "Long-horizon pricing kernel toolkit: factorize finite-state models, \
sweep yields, and check convergence diagnostics.\n\n\
Ranges such as --horizons use inclusive start:stop:step syntax (4:20:2 means \
4,6,...,20); a bare integer is a one-element range. LONGRISK_THREADS caps \
internal parallelism. Exit codes: 0 ok, 2 parse error, 3 validation error, \
4 numerical failure.";

#[derive(Parser)]
#[command(name = "longrisk", version, about = ABOUT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the principal rate, eigenfunction, and eigen-measure chain.
    Factorize(FactorizeArgs),
    /// Sweep expected yields across maturities against the principal rate.
    Yields(YieldsArgs),
    /// Report how fast maturity-T pricing collapses onto its long-term limit.
    Converge(ConvergeArgs),
    /// Certify the mixing rate of the eigen-measure chain.
    Ergodicity(ErgodicityArgs),
    /// Fit the tail decay class of a discount curve.
    Karamata(KaramataArgs),
    /// Draw state paths under a chosen measure and dump them in binary form.
    Simulate(SimulateArgs),
    /// Check that discounted bond prices settle under a dominating envelope.
    Ajcheck(AjcheckArgs),
}

#[derive(Args, Serialize)]
struct FactorizeArgs {
    /// Model description JSON.
    #[arg(long)]
    model: PathBuf,
    /// Residual tolerance of the eigen solve.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the eigen solve.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct YieldsArgs {
    /// Model description JSON.
    #[arg(long)]
    model: PathBuf,
    /// Evaluation state.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Evaluation time.
    #[arg(long, default_value_t = 0)]
    t: usize,
    /// Maturities to sweep, inclusive start:stop:step.
    #[arg(long)]
    horizons: String,
    /// Terminal cash flow as comma-separated per-state values; default all ones.
    #[arg(long)]
    cash_flow: Option<String>,
    /// Sweep the growth-indexed yield instead; the model JSON must carry a
    /// growth matrix.
    #[arg(long, default_value_t = false)]
    growth: bool,
    /// Residual tolerance of the eigen solve.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the eigen solve.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ConvergeArgs {
    /// Model description JSON.
    #[arg(long)]
    model: PathBuf,
    /// Starting state.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Fixed time at which the maturity-T deflators are compared.
    #[arg(long = "t")]
    t_fixed: usize,
    /// Maturities to sweep, inclusive start:stop:step.
    #[arg(long)]
    horizons: String,
    /// Paths per Monte Carlo estimate.
    #[arg(long, default_value_t = 2000)]
    n_paths: usize,
    /// Seed for every sampled quantity in the report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Residual tolerance of the eigen solve.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the eigen solve.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ErgodicityArgs {
    /// Model description JSON.
    #[arg(long)]
    model: PathBuf,
    /// Largest horizon on the certificate's fitting grid.
    #[arg(long, default_value_t = 60)]
    grid_t_max: usize,
    /// Residual tolerance of the eigen solve.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the eigen solve.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct KaramataArgs {
    /// Discount curve CSV with a tenor,price header.
    #[arg(long)]
    curve: PathBuf,
    /// Time offset of the tail rate probe.
    #[arg(long, default_value_t = 1.0)]
    t_probe: f64,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum MeasureArg {
    /// Data-generating measure of the model.
    #[value(name = "P")]
    #[serde(rename = "P")]
    P,
    /// Long forward measure, the eigen-measure chain.
    #[value(name = "L")]
    #[serde(rename = "L")]
    L,
    /// Maturity-T forward measure; requires --maturity.
    #[value(name = "Q")]
    #[serde(rename = "Q")]
    Q,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Model description JSON.
    #[arg(long)]
    model: PathBuf,
    /// Measure to draw under.
    #[arg(long, value_enum)]
    measure: MeasureArg,
    /// Bond maturity of the forward measure; only with --measure Q.
    #[arg(long)]
    maturity: Option<usize>,
    /// Starting state.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Steps per path.
    #[arg(long)]
    horizon: usize,
    /// Number of paths.
    #[arg(long, default_value_t = 1000)]
    n_paths: usize,
    /// Seed; paths are reproducible in (seed, path index) regardless of threads.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Residual tolerance of the eigen solve.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the eigen solve.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Binary path dump destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AjcheckArgs {
    /// Model description JSON.
    #[arg(long)]
    model: PathBuf,
    /// Evaluation times for the envelope, inclusive start:stop:step.
    #[arg(long, default_value = "1:10:1")]
    t_grid: String,
    /// Largest maturity probed for stabilization.
    #[arg(long, default_value_t = 200)]
    tau_max: usize,
    /// Residual tolerance of the eigen solve.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the eigen solve.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunFailure::Usage(e)) => {
            // Exit 0 for --help/--version, 2 for genuine usage errors.
            let code = e.exit_code().try_into().unwrap_or(2);
            let _ = e.print();
            ExitCode::from(code)
        }
        Err(RunFailure::Run(e)) => {
            let code = exit_code_for(&e);
            let payload = serde_json::json!({
                "error": {
                    "exit_code": code,
                    "kind": kind_for(code),
                    "variant": variant_name(&e),
                    "message": e.to_string(),
                }
            });
            eprintln!("{payload}");
            ExitCode::from(code)
        }
    }
}

enum RunFailure {
    Usage(clap::Error),
    Run(Error),
}

impl From<Error> for RunFailure {
    fn from(e: Error) -> Self {
        RunFailure::Run(e)
    }
}

fn run() -> std::result::Result<(), RunFailure> {
    init_thread_pool()?;
    let cli = Cli::try_parse().map_err(RunFailure::Usage)?;
    match cli.command {
        Command::Factorize(a) => run_factorize(&a)?,
        Command::Yields(a) => run_yields(&a)?,
        Command::Converge(a) => run_converge(&a)?,
        Command::Ergodicity(a) => run_ergodicity(&a)?,
        Command::Karamata(a) => run_karamata(&a)?,
        Command::Simulate(a) => run_simulate(&a)?,
        Command::Ajcheck(a) => run_ajcheck(&a)?,
    }
    Ok(())
}

/// Parse errors exit 2, input validation 3, numerical failures 4.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => 2,
        Error::NoConvergence { .. }
        | Error::Numerical(_)
        | Error::NotStabilized { .. }
        | Error::BoundViolated { .. }
        | Error::NotPowerDecay => 4,
        _ => 3,
    }
}

fn kind_for(code: u8) -> &'static str {
    match code {
        2 => "parse",
        4 => "numerical",
        _ => "validation",
    }
}

/// Variant identifier for machine consumption, from the debug form.
fn variant_name(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect()
}

fn init_thread_pool() -> Result<()> {
    if let Ok(raw) = std::env::var("LONGRISK_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| Error::Parse(format!("LONGRISK_THREADS={raw} is not a thread count")))?;
        if n == 0 {
            return Err(Error::Parse(
                "LONGRISK_THREADS must be at least 1".to_string(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Inclusive start:stop:step range; a bare integer is a singleton.
fn parse_range(s: &str) -> Result<Vec<usize>> {
    let parse_int = |part: &str| -> Result<usize> {
        part.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("range piece {part:?} is not an integer")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => Ok(vec![parse_int(parts[0])?]),
        3 => {
            let start = parse_int(parts[0])?;
            let stop = parse_int(parts[1])?;
            let step = parse_int(parts[2])?;
            if step == 0 {
                return Err(Error::Parse(format!("range {s} has a zero step")));
            }
            if start > stop {
                return Err(Error::Parse(format!("range {s} runs backwards")));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        _ => Err(Error::Parse(format!(
            "range {s:?} must be start:stop:step or a single integer"
        ))),
    }
}

fn parse_cash_flow(s: &str) -> Result<CashFlowSpec> {
    let values = s
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("cash flow piece {part:?} is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    CashFlowSpec::new(values)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn read_file(path: &Path) -> Result<(String, String)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let sha = sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Parse(format!("{}: not valid UTF-8", path.display())))?;
    Ok((text, sha))
}

fn load_model(path: &Path) -> Result<(MarkovPricingModel, Option<GrowthSpec>, String)> {
    let (text, sha) = read_file(path)?;
    let (model, growth) = MarkovPricingModel::from_json_str(&text)?;
    Ok((model, growth, sha))
}

fn load_curve(path: &Path) -> Result<(DiscountCurve, String)> {
    let (text, sha) = read_file(path)?;
    Ok((DiscountCurve::from_csv_str(&text)?, sha))
}

fn write_primary(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::Validation(format!("cannot write stdout: {e}"))),
    }
}

/// Compact JSON with every float at 17 significant digits, so equal values
/// always print as equal bytes.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serialized json is utf-8")
}

fn csv_with_provenance<T: Serialize>(
    command: &str,
    config: &T,
    input_sha256: &str,
    lambda: f64,
    body: &str,
) -> String {
    let mut config_json = to_json_line(config);
    config_json.pop();
    format!(
        "# command={command}\n# config={config_json}\n# input_sha256={input_sha256}\n# lambda={lambda:.16e}\n{body}"
    )
}

fn solve(model: &MarkovPricingModel, tol: f64, max_iter: usize) -> Result<EigenSolution> {
    principal_eigen(model, tol, max_iter)
}

#[derive(Serialize)]
struct FactorizeOutput<'a> {
    command: &'static str,
    config: &'a FactorizeArgs,
    input_sha256: String,
    lambda: f64,
    principal_value: f64,
    pi: Vec<f64>,
    eigen_transition: Vec<Vec<f64>>,
    residual: f64,
    iterations: usize,
}

fn run_factorize(args: &FactorizeArgs) -> Result<()> {
    let (model, _, sha) = load_model(&args.model)?;
    let sol = solve(&model, args.tol, args.max_iter)?;
    let n = sol.n_states();
    let output = FactorizeOutput {
        command: "factorize",
        config: args,
        input_sha256: sha,
        lambda: sol.lambda,
        principal_value: (-sol.lambda).exp(),
        pi: sol.pi.iter().copied().collect(),
        eigen_transition: (0..n)
            .map(|x| (0..n).map(|y| sol.eigen_transition[(x, y)]).collect())
            .collect(),
        residual: sol.residual,
        iterations: sol.iterations,
    };
    write_primary(args.out.as_deref(), to_json_line(&output).as_bytes())
}

fn run_yields(args: &YieldsArgs) -> Result<()> {
    let (model, growth, sha) = load_model(&args.model)?;
    let sol = solve(&model, args.tol, args.max_iter)?;
    let horizons = parse_range(&args.horizons)?;
    let body = if args.growth {
        let growth = growth.ok_or_else(|| {
            Error::Validation("model JSON carries no growth matrix for --growth".to_string())
        })?;
        let mut body = String::from("horizon,rho_L,rho_P,target,gap\n");
        for &maturity in &horizons {
            let rho_l = growth_yield(&model, &sol, &growth, args.t, maturity, args.x0)?;
            let rho_p = growth_zero_yield(&model, &growth, args.t, maturity, args.x0)?;
            body.push_str(&format!(
                "{maturity},{rho_l:.16e},{rho_p:.16e},{:.16e},{:.16e}\n",
                sol.lambda,
                (rho_l - sol.lambda).abs()
            ));
        }
        body
    } else {
        let cash_flow = match &args.cash_flow {
            Some(raw) => parse_cash_flow(raw)?,
            None => CashFlowSpec::new(vec![1.0; model.n_states()])?,
        };
        yield_sweep(&model, &sol, &cash_flow, args.t, &horizons, args.x0)?.to_csv_string()
    };
    let text = csv_with_provenance("yields", args, &sha, sol.lambda, &body);
    write_primary(args.out.as_deref(), text.as_bytes())
}

fn run_converge(args: &ConvergeArgs) -> Result<()> {
    let (model, _, sha) = load_model(&args.model)?;
    let sol = solve(&model, args.tol, args.max_iter)?;
    let config = ConvergenceConfig {
        x0: args.x0,
        t_fixed: args.t_fixed,
        horizons: parse_range(&args.horizons)?,
        n_paths: args.n_paths,
        seed: args.seed,
    };
    let report = convergence_report(&model, &sol, &config)?;
    let text = csv_with_provenance("converge", args, &sha, sol.lambda, &report.to_csv_string());
    write_primary(args.out.as_deref(), text.as_bytes())
}

#[derive(Serialize)]
struct ErgodicityOutput<'a> {
    command: &'static str,
    config: &'a ErgodicityArgs,
    input_sha256: String,
    lambda: f64,
    certificate: ErgodicityCertificate,
}

fn run_ergodicity(args: &ErgodicityArgs) -> Result<()> {
    let (model, _, sha) = load_model(&args.model)?;
    let sol = solve(&model, args.tol, args.max_iter)?;
    let certificate = certify_ergodicity(&sol, args.grid_t_max)?;
    let output = ErgodicityOutput {
        command: "ergodicity",
        config: args,
        input_sha256: sha,
        lambda: sol.lambda,
        certificate,
    };
    write_primary(args.out.as_deref(), to_json_line(&output).as_bytes())
}

#[derive(Serialize)]
struct KaramataOutput<'a> {
    command: &'static str,
    config: &'a KaramataArgs,
    input_sha256: String,
    lambda: f64,
    decay_class: &'static str,
    gamma: Option<f64>,
    regularity_score: f64,
    l_values: Vec<f64>,
}

fn run_karamata(args: &KaramataArgs) -> Result<()> {
    let (curve, sha) = load_curve(&args.curve)?;
    let fit = karamata_fit(&curve, args.t_probe)?;
    let decay_class = match fit.decay_class {
        DecayClass::Exponential => "exponential",
        DecayClass::Power { .. } => "power",
        DecayClass::Undetermined => "undetermined",
    };
    let output = KaramataOutput {
        command: "karamata",
        config: args,
        input_sha256: sha,
        lambda: fit.lambda,
        decay_class,
        gamma: fit.gamma(),
        regularity_score: fit.regularity_score,
        l_values: fit.l_values.clone(),
    };
    write_primary(args.out.as_deref(), to_json_line(&output).as_bytes())
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    command: &'static str,
    config: &'a SimulateArgs,
    input_sha256: String,
    lambda: Option<f64>,
    generator: &'static str,
    output_sha256: String,
    n_paths: usize,
    horizon: usize,
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let (model, _, sha) = load_model(&args.model)?;
    if args.maturity.is_some() && args.measure != MeasureArg::Q {
        return Err(Error::Validation(
            "--maturity only applies to --measure Q".to_string(),
        ));
    }

    let sol;
    let system;
    let measure = match args.measure {
        MeasureArg::P => SimulationMeasure::Base(&model),
        MeasureArg::L => {
            sol = solve(&model, args.tol, args.max_iter)?;
            SimulationMeasure::LongForward(&sol)
        }
        MeasureArg::Q => {
            let maturity = args.maturity.ok_or_else(|| {
                Error::Validation("--measure Q needs --maturity".to_string())
            })?;
            system = ForwardSystem::new(&model, maturity)?;
            SimulationMeasure::Forward(&system)
        }
    };

    let bundle = simulate(&measure, args.x0, args.horizon, args.n_paths, args.seed)?;
    let bytes = bundle.to_binary();
    std::fs::write(&args.out, &bytes)
        .map_err(|e| Error::Validation(format!("cannot write {}: {e}", args.out.display())))?;

    let lambda = match &measure {
        SimulationMeasure::LongForward(sol) => Some(sol.lambda),
        _ => None,
    };
    let output = SimulateOutput {
        command: "simulate",
        config: args,
        input_sha256: sha,
        lambda,
        generator: bundle.generator_id(),
        output_sha256: sha256_hex(&bytes),
        n_paths: bundle.n_paths(),
        horizon: bundle.horizon(),
    };
    io::stdout()
        .write_all(to_json_line(&output).as_bytes())
        .map_err(|e| Error::Validation(format!("cannot write stdout: {e}")))
}

#[derive(Serialize)]
struct AjcheckOutput<'a> {
    command: &'static str,
    config: &'a AjcheckArgs,
    input_sha256: String,
    lambda: f64,
    report: AjCheckReport,
}

fn run_ajcheck(args: &AjcheckArgs) -> Result<()> {
    let (model, _, sha) = load_model(&args.model)?;
    let sol = solve(&model, args.tol, args.max_iter)?;
    let t_grid = parse_range(&args.t_grid)?;
    let report = aj_check(&model, &sol, &t_grid, args.tau_max)?;
    let output = AjcheckOutput {
        command: "ajcheck",
        config: args,
        input_sha256: sha,
        lambda: sol.lambda,
        report,
    };
    write_primary(args.out.as_deref(), to_json_line(&output).as_bytes())
}
