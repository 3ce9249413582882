//! `corrprop`: generate instances, solve LPs, simulate the proposal
//! algorithms, compute exact benchmarks and run the grid certificates.
//!
//! Exit codes: 0 success, 1 input error, 2 numeric failure, 3 failed certificate.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use corrprop::bounds::{bound_reports, conv_raw, vertex_b, WeightedBernoulliSystem};
use corrprop::certify::{
    certify_k, certify_linear_lb, certify_vertex_bound_tau, k_curve, CertificateReport, K_TAU, LINEAR_OPERATIVE,
    VERTEX_TAU,
};
use corrprop::engine::{simulate_with_workers, AlgSpec, DEFAULT_DELTA, DEFAULT_EPS};
use corrprop::instance::{
    build_from_3sat, gen_random, gen_random_general, gen_rescale_example, gen_uniform_star, read_json, write_json,
    Instance, RandomSpec, Stochastic3SatFormula, DEFAULT_RESCALE_WEIGHT,
};
use corrprop::lp::{
    check_feasibility, general_solution_to_json, solution_to_json, solve_lp, solve_lp_general,
};
use corrprop::oracle::{
    opt_online, opt_online_general, opt_stochastic_3sat, prophet_value_exact, prophet_value_mc, MDP_MAX_N,
    PROPHET_EXACT_MAX_T,
};
use corrprop::pivotal::ps_exact_distribution;
use corrprop::Error;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "corrprop", version, about = "Online stochastic matching: LPs, proposal algorithms, certificates")]
struct Cli {
    /// Worker threads for simulation and grid evaluation; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance as JSON.
    Gen(GenArgs),
    /// Solve the LP relaxation.
    Solve(SolveArgs),
    /// Monte Carlo evaluation of one algorithm.
    Simulate(SimulateArgs),
    /// CSV table of algorithm value against the LP and the online optimum.
    Ratio(RatioArgs),
    /// Exact online optimum, prophet value or stochastic 3-SAT value.
    Oracle(OracleArgs),
    /// Lower bounds on E[min(1, X)] for a weighted Bernoulli system.
    Bounds(BoundsArgs),
    /// Lipschitz grid certificates.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: Option<usize>,
    /// Number of time steps (random kinds).
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    min_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    max_weight: f64,
    /// Weight of the final node's edges in the rescaling example.
    #[arg(long, default_value_t = DEFAULT_RESCALE_WEIGHT)]
    weight: f64,
    #[arg(long)]
    vertex_weighted: bool,
    /// Types per step (general kind).
    #[arg(long, default_value_t = 2)]
    types: usize,
    /// Formula file (sat kind).
    #[arg(long)]
    formula: Option<PathBuf>,
    /// Clause arrival probability (sat kind).
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Rescale,
    Star,
    Random,
    General,
    Sat,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Write the solution JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// core, core-independent, edge-weighted[:eps,delta], vertex-weighted, general[:eps,delta]
    #[arg(long, default_value = "edge-weighted")]
    alg: String,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RatioArgs {
    /// One or more instance files; one CSV row each.
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    #[arg(long, default_value = "edge-weighted")]
    alg: String,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, conflicts_with = "sat")]
    instance: Option<PathBuf>,
    /// Stochastic 3-SAT formula file.
    #[arg(long = "3sat", id = "sat")]
    sat: Option<PathBuf>,
    /// With --3sat: also build the matching instance with clause probability p.
    #[arg(long)]
    reduce: Option<f64>,
    /// With --instance: Monte Carlo prophet value with this many replications.
    #[arg(long)]
    prophet_reps: Option<usize>,
    /// With --instance: exact prophet value by enumerating arrivals.
    #[arg(long)]
    prophet_exact: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    /// JSON `{"c": [...], "q": [...], "correlation": "independent" | "pivotal"}`.
    #[arg(long)]
    system: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(value_enum)]
    target: CertifyTarget,
    #[arg(long, default_value_t = 1e-4)]
    spacing: f64,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Envelope constants `a,b,c` for the linear target.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    constants: Option<Vec<f64>>,
    /// CSV output: `z,k` for k, `x,y,value` grid otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CertifyTarget {
    K,
    Vertex,
    Linear,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("error: cannot configure {w} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a, cli.workers),
        Command::Ratio(a) => cmd_ratio(a, cli.workers),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Certify(a) => cmd_certify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn load_instance(path: &Path) -> CliResult<Instance> {
    read_json(&read_file(path)?).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| {
            Error::Io {
                path: p.display().to_string(),
                source,
            }
            .into()
        }),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| input_error(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize")
}

fn csv_writer(out: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p).map_err(|source| {
            Failure::from(Error::Io {
                path: p.display().to_string(),
                source,
            })
        })?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn csv_err(e: csv::Error) -> Failure {
    input_error(format!("csv output: {e}"))
}

fn require<T>(v: Option<T>, flag: &str, kind: &str) -> CliResult<T> {
    v.ok_or_else(|| input_error(format!("{kind} requires --{flag}")))
}

// ---------------------------------------------------------------------------

fn cmd_gen(a: GenArgs) -> CliResult {
    let inst = match a.kind {
        GenKind::Rescale => Instance::Bernoulli(gen_rescale_example(require(a.n, "n", "gen rescale")?, a.weight)?),
        GenKind::Star => Instance::Bernoulli(gen_uniform_star(require(a.n, "n", "gen star")?)?),
        GenKind::Random => Instance::Bernoulli(gen_random(&RandomSpec {
            n: require(a.n, "n", "gen random")?,
            horizon: require(a.horizon, "T", "gen random")?,
            density: a.density,
            weight_range: (a.min_weight, a.max_weight),
            vertex_weighted: a.vertex_weighted,
            seed: require(a.seed, "seed", "gen random")?,
        })?),
        GenKind::General => Instance::General(gen_random_general(
            require(a.n, "n", "gen general")?,
            require(a.horizon, "T", "gen general")?,
            a.types,
            a.density,
            (a.min_weight, a.max_weight),
            require(a.seed, "seed", "gen general")?,
        )?),
        GenKind::Sat => {
            let f = load_formula(&require(a.formula, "formula", "gen sat")?)?;
            Instance::Bernoulli(build_from_3sat(&f, a.p)?.instance)
        }
    };
    emit(a.out.as_deref(), &write_json(&inst))
}

fn cmd_solve(a: SolveArgs) -> CliResult {
    match load_instance(&a.instance)? {
        Instance::Bernoulli(inst) => {
            let sol = solve_lp(&inst)?;
            let rep = check_feasibility(&sol, &inst, 1e-7);
            println!("objective={:.6}", sol.objective);
            println!("min_slack={:.3e}", rep.min_slack);
            println!("violations={}", rep.violations.len());
            println!("fractional_rates={} (T={})", sol.fractional_count(), inst.horizon());
            emit(a.out.as_deref(), &solution_to_json(&sol))
        }
        Instance::General(inst) => {
            let sol = solve_lp_general(&inst)?;
            println!("objective={:.6}", sol.objective);
            emit(a.out.as_deref(), &general_solution_to_json(&sol))
        }
    }
}

fn parse_alg(alg: &str, eps: Option<f64>, delta: Option<f64>) -> CliResult<AlgSpec> {
    let spec: AlgSpec = alg.parse()?;
    Ok(match spec {
        AlgSpec::EdgeWeighted { eps: e, delta: d } => AlgSpec::EdgeWeighted {
            eps: eps.unwrap_or(e),
            delta: delta.unwrap_or(d),
        },
        AlgSpec::General { eps: e, delta: d } => AlgSpec::General {
            eps: eps.unwrap_or(e),
            delta: delta.unwrap_or(d),
        },
        other => {
            if eps.is_some() || delta.is_some() {
                return Err(input_error(format!("--eps/--delta do not apply to algorithm {other}")));
            }
            other
        }
    })
}

fn cmd_simulate(a: SimulateArgs, workers: Option<usize>) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let spec = parse_alg(&a.alg, a.eps, a.delta)?;
    let rep = simulate_with_workers(&inst, &spec, a.reps, a.seed, workers)?;
    println!(
        "algorithm={} mean={:.6} stderr={:.6} lp={:.6}",
        rep.algorithm, rep.mean, rep.stderr, rep.lp_objective
    );
    match a.out {
        Some(p) => emit(Some(&p), &to_json(&rep)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct RatioRow {
    instance: String,
    algorithm: String,
    reps: usize,
    seed: u64,
    mean: f64,
    stderr: f64,
    lp: f64,
    opt_on: Option<f64>,
    ratio_lp: f64,
    ratio_opt: Option<f64>,
    last_step_freq: f64,
}

fn cmd_ratio(a: RatioArgs, workers: Option<usize>) -> CliResult {
    let spec = parse_alg(&a.alg, a.eps, a.delta)?;
    let mut rows = Vec::new();
    for path in &a.instance {
        let inst = load_instance(path)?;
        let rep = simulate_with_workers(&inst, &spec, a.reps, a.seed, workers)?;
        let opt_on = match &inst {
            _ if inst.n() > MDP_MAX_N => None,
            Instance::Bernoulli(b) => Some(opt_online(b)?.value),
            Instance::General(g) => Some(opt_online_general(g)?.value),
        };
        let ratio = |d: f64| if d > 0.0 { rep.mean / d } else { f64::NAN };
        let last = if rep.horizon > 0 { rep.step_match_freq(rep.horizon - 1) } else { 0.0 };
        rows.push(RatioRow {
            instance: path.display().to_string(),
            algorithm: rep.algorithm.clone(),
            reps: a.reps,
            seed: a.seed,
            mean: rep.mean,
            stderr: rep.stderr,
            lp: rep.lp_objective,
            opt_on,
            ratio_lp: ratio(rep.lp_objective),
            ratio_opt: opt_on.map(ratio),
            last_step_freq: last,
        });
    }
    let mut w = csv_writer(a.out.as_deref())?;
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| input_error(format!("csv output: {e}")))
}

fn load_formula(path: &Path) -> CliResult<Stochastic3SatFormula> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| Failure::from(Error::Parse(format!("{}: {e}", path.display()))))
}

#[derive(Serialize)]
struct SatOutput {
    opt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduction: Option<SandwichOutput>,
}

#[derive(Serialize)]
struct SandwichOutput {
    p: f64,
    /// Value of the variable steps alone: one per odd variable, ½ per even variable.
    base: f64,
    lower: f64,
    upper: f64,
    opt_online: f64,
    inside: bool,
}

#[derive(Serialize)]
struct OracleOutput {
    opt_online: Option<f64>,
    prophet_mc: Option<corrprop::oracle::Estimate>,
    prophet_exact: Option<f64>,
}

fn cmd_oracle(a: OracleArgs) -> CliResult {
    if let Some(path) = a.sat {
        let f = load_formula(&path)?;
        let opt = opt_stochastic_3sat(&f)?;
        let reduction = match a.reduce {
            None => None,
            Some(p) => {
                let red = build_from_3sat(&f, p)?;
                let v = opt_online(&red.instance)?.value;
                let odd = f.num_vars.div_ceil(2) as f64;
                let even = (f.num_vars / 2) as f64;
                let base = odd + even / 2.0;
                let ck = (f.k * f.k) as f64 * 2f64.powi(f.k as i32);
                let upper = base + p * opt;
                let lower = upper - f.num_vars as f64 * ck * p * p;
                Some(SandwichOutput {
                    p,
                    base,
                    lower,
                    upper,
                    opt_online: v,
                    inside: lower - 1e-12 <= v && v <= upper + 1e-12,
                })
            }
        };
        return emit(None, &to_json(&SatOutput { opt, reduction }));
    }
    let path = require(a.instance, "instance", "oracle")?;
    let inst = load_instance(&path)?;
    let mut out = OracleOutput {
        opt_online: None,
        prophet_mc: None,
        prophet_exact: None,
    };
    out.opt_online = Some(match &inst {
        Instance::Bernoulli(b) => opt_online(b)?.value,
        Instance::General(g) => opt_online_general(g)?.value,
    });
    if a.prophet_reps.is_some() || a.prophet_exact {
        let Instance::Bernoulli(b) = &inst else {
            return Err(input_error("prophet values need a Bernoulli instance"));
        };
        if let Some(reps) = a.prophet_reps {
            let seed = require(a.seed, "seed", "--prophet-reps")?;
            out.prophet_mc = Some(prophet_value_mc(b, reps, seed)?);
        }
        if a.prophet_exact {
            if b.horizon() > PROPHET_EXACT_MAX_T {
                return Err(input_error(format!("exact prophet value needs T <= {PROPHET_EXACT_MAX_T}")));
            }
            out.prophet_exact = Some(prophet_value_exact(b)?);
        }
    }
    emit(None, &to_json(&out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    c: Vec<f64>,
    q: Vec<f64>,
    #[serde(default)]
    correlation: CorrelationDoc,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum CorrelationDoc {
    #[default]
    Independent,
    /// The pivotal-sampling law with marginals `q`.
    Pivotal,
}

#[derive(Serialize)]
struct BoundsOutput {
    theta: f64,
    mean: f64,
    exact: Option<f64>,
    bounds: Vec<corrprop::bounds::BoundReport>,
}

fn cmd_bounds(a: BoundsArgs) -> CliResult {
    let doc: SystemDoc = serde_json::from_str(&read_file(&a.system)?)
        .map_err(|e| Failure::from(Error::Parse(format!("{}: {e}", a.system.display()))))?;
    let sys = match doc.correlation {
        CorrelationDoc::Independent => WeightedBernoulliSystem::independent(doc.c, doc.q)?,
        CorrelationDoc::Pivotal => {
            if doc.q.len() != doc.c.len() {
                return Err(input_error("c and q lengths differ"));
            }
            WeightedBernoulliSystem::explicit(doc.c, ps_exact_distribution(&doc.q)?)?
        }
    };
    let (exact, bounds) = bound_reports(&sys, a.theta)?;
    emit(
        None,
        &to_json(&BoundsOutput {
            theta: a.theta,
            mean: sys.mean(),
            exact,
            bounds,
        }),
    )
}

fn cmd_certify(a: CertifyArgs) -> CliResult {
    let report: CertificateReport = match a.target {
        CertifyTarget::K => {
            let r = certify_k(a.eps, a.delta, a.spacing, a.tau.unwrap_or(K_TAU))?;
            if let Some(p) = &a.out {
                let mut w = csv_writer(Some(p))?;
                w.write_record(["z", "k"]).map_err(csv_err)?;
                for (z, k) in k_curve(a.eps, a.delta, a.spacing)? {
                    w.write_record([z.to_string(), k.to_string()]).map_err(csv_err)?;
                }
                w.flush().map_err(|e| input_error(format!("csv output: {e}")))?;
            }
            r
        }
        CertifyTarget::Vertex => {
            let r = certify_vertex_bound_tau(a.spacing, a.tau.unwrap_or(VERTEX_TAU))?;
            if let Some(p) = &a.out {
                write_grid(p, a.spacing, (0.0, 0.5), (0.25, 0.5), |x, y| Some(vertex_b(x, y)))?;
            }
            r
        }
        CertifyTarget::Linear => {
            if a.tau.is_some() {
                return Err(input_error("the linear target certifies against 0; use --constants"));
            }
            let (ca, cb, cc) = match a.constants.as_deref() {
                Some([x, y, z]) => (*x, *y, *z),
                _ => LINEAR_OPERATIVE,
            };
            let r = certify_linear_lb(a.spacing, (ca, cb, cc))?;
            if let Some(p) = &a.out {
                write_grid(p, a.spacing, (0.0, 1.0), (0.0, 1.0), |x, y| {
                    let in_domain = x < 1.0 && y > 0.0 && y <= (1.0 - x) * (1.0 - x);
                    in_domain.then(|| conv_raw(0.5, x, y).ok().map(|v| v - (ca + cb * x + cc * y))).flatten()
                })?;
            }
            r
        }
    };
    emit(None, &to_json(&report))?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: format!(
                "certificate failed: grid min {:.6e} < tau {} + margin {:.1e}",
                report.grid_min, report.tau, report.margin
            ),
        })
    }
}

fn write_grid(
    path: &Path,
    h: f64,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    f: impl Fn(f64, f64) -> Option<f64>,
) -> CliResult {
    let mut w = csv_writer(Some(path))?;
    w.write_record(["x", "y", "value"]).map_err(csv_err)?;
    let nx = ((x1 - x0) / h + 1e-9).floor() as usize;
    let ny = ((y1 - y0) / h + 1e-9).floor() as usize;
    for a in 0..=nx {
        let x = (x0 + a as f64 * h).min(x1);
        for b in 0..=ny {
            let y = (y0 + b as f64 * h).min(y1);
            if let Some(v) = f(x, y) {
                w.write_record([x.to_string(), y.to_string(), v.to_string()]).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| input_error(format!("csv output: {e}")))
}
