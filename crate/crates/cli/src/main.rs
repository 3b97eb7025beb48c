use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sparsemul::dynamics::{
    dense_support_experiment, distribution_csv, estimate_tau_crit, iterate, simulate_game,
    tau_crit_closed_form,
};
use sparsemul::heuristic::{multiply_heuristic, RecoveryParams};
use sparsemul::poly::{random_poly, verify_product, SparsePoly};
use sparsemul::rng::seeded;
use sparsemul::unconditional::{multiply_unconditional, UnconditionalParams};

const EXIT_FAILURE: u8 = 1;
const EXIT_FALLBACK: u8 = 2;
const EXIT_REJECTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sparsemul",
    version,
    about = "Sparse polynomial multiplication by ball peeling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiply two .sp polynomials
    Multiply(MultiplyArgs),
    /// Check R = P Q at a random point (exit 3 on mismatch)
    Verify(VerifyArgs),
    /// Iterate the occupancy recurrence and print p_{i,k} as CSV
    Dynamics(DynamicsArgs),
    /// Bracket the critical box ratio by bisection
    Taucrit(TaucritArgs),
    /// Play the game with uniform throws and print N_{i,k} as CSV
    Simulate(SimulateArgs),
    /// Play the game on the full support of a dense product
    Densebench(DenseArgs),
    /// Write a random .sp polynomial
    Gen(GenArgs),
    /// Time the three multiplication routes on random inputs
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Algo {
    Naive,
    Heuristic,
    Unconditional,
}

#[derive(Args)]
struct Tuning {
    /// Boxes per ball
    #[arg(long, default_value_t = 0.45, value_parser = parse_tau)]
    tau: f64,
    /// Failure probability target of the exponent phase
    #[arg(long, default_value_t = 2f64.powi(-20), value_parser = parse_eps)]
    eps: f64,
    /// Upper bound on the number of product terms
    #[arg(long = "T")]
    terms_bound: Option<u64>,
}

#[derive(Args)]
struct MultiplyArgs {
    p: PathBuf,
    q: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Heuristic)]
    algo: Algo,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the product here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a JSON summary on standard error
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    p: PathBuf,
    q: PathBuf,
    r: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DynamicsArgs {
    #[arg(long, value_parser = parse_tau)]
    tau: f64,
    #[arg(long, default_value_t = 11)]
    rounds: usize,
    /// Occupancy columns k = 1..=cols per round
    #[arg(long, default_value_t = 7)]
    cols: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TaucritArgs {
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of balls
    #[arg(long)]
    t: usize,
    #[arg(long, value_parser = parse_tau)]
    tau: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 7)]
    cols: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the outcome as JSON on standard error
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DenseArgs {
    #[arg(long)]
    n: usize,
    /// Total degree of the product; split evenly between the factors
    #[arg(long)]
    d: u32,
    #[arg(long, value_parser = parse_tau)]
    tau: f64,
    /// Random evaluation vectors scored per throw
    #[arg(long, default_value_t = 12)]
    candidates: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    /// Number of terms
    #[arg(long)]
    t: usize,
    /// Bound on the total degree
    #[arg(long)]
    d: u32,
    /// Bound on the absolute value of the coefficients
    #[arg(long, default_value_t = 1000)]
    height: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Terms per factor
    #[arg(long, default_value_t = 300)]
    t: usize,
    /// Total degree bound per factor
    #[arg(long, default_value_t = 40)]
    d: u32,
    #[arg(long, default_value_t = 1 << 20)]
    height: u64,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json: bool,
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let tau: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if tau > 0.0 && tau <= 1.5 {
        Ok(tau)
    } else {
        Err(format!("tau must lie in (0, 1.5], got {tau}"))
    }
}

fn parse_eps(s: &str) -> Result<f64, String> {
    let eps: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if eps > 0.0 && eps < 1.0 {
        Ok(eps)
    } else {
        Err(format!("eps must lie in (0, 1), got {eps}"))
    }
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn read_poly(path: &Path) -> Result<SparsePoly, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    SparsePoly::parse_sp(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
        }
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summaries serialize")
}

#[derive(Serialize, Default)]
struct MultiplySummary {
    algo: Option<Algo>,
    seed: u64,
    terms: usize,
    fallback: bool,
    attempts: u32,
    total_ms: f64,
    exponent_ms: Option<f64>,
    coefficient_ms: Option<f64>,
    cyclic_ms: Option<f64>,
    cyclic_share: Option<f64>,
    /// Modular-loop iterations per attempt.
    iterations: Option<Vec<usize>>,
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn product(
    p: &SparsePoly,
    q: &SparsePoly,
    algo: Algo,
    tuning: &Tuning,
    seed: u64,
) -> Result<(SparsePoly, MultiplySummary), Failure> {
    let mut rng = seeded(seed);
    let mut s = MultiplySummary {
        algo: Some(algo),
        seed,
        ..MultiplySummary::default()
    };
    let r = match algo {
        Algo::Naive => {
            let start = Instant::now();
            let r = p.naive_mul(q)?;
            s.total_ms = ms(start.elapsed());
            r
        }
        Algo::Heuristic => {
            let params = RecoveryParams {
                tau: tuning.tau,
                eps: tuning.eps,
                terms_bound: tuning.terms_bound,
                ..RecoveryParams::default()
            };
            let (r, rep) = multiply_heuristic(p, q, &params, &mut rng)?;
            s.fallback = rep.fallback;
            s.attempts = rep.attempts;
            s.total_ms = ms(rep.total_time);
            s.exponent_ms = Some(ms(rep.exponent_time));
            s.coefficient_ms = Some(ms(rep.coefficient_time));
            s.cyclic_ms = Some(ms(rep.cyclic_mul_time));
            s.cyclic_share = Some(rep.cyclic_mul_time.as_secs_f64() / rep.total_time.as_secs_f64());
            r
        }
        Algo::Unconditional => {
            let (r, rep) = multiply_unconditional(p, q, &UnconditionalParams::default(), &mut rng)?;
            s.fallback = rep.fallback;
            s.attempts = rep.attempts;
            s.total_ms = ms(rep.total_time);
            s.iterations = Some(rep.iterations);
            r
        }
    };
    s.terms = r.len();
    Ok((r, s))
}

fn multiply(a: MultiplyArgs) -> Outcome {
    let p = read_poly(&a.p)?;
    let q = read_poly(&a.q)?;
    let seed = match a.algo {
        Algo::Naive => a.seed.unwrap_or(0),
        _ => resolve_seed(a.seed),
    };
    let (r, summary) = product(&p, &q, a.algo, &a.tuning, seed)?;
    emit(a.out.as_deref(), &r.to_sp_string())?;
    if a.json {
        eprintln!("{}", to_json(&summary));
    }
    if summary.fallback {
        eprintln!("fell back to schoolbook multiplication");
        return Ok(EXIT_FALLBACK);
    }
    Ok(0)
}

fn verify(a: VerifyArgs) -> Outcome {
    let p = read_poly(&a.p)?;
    let q = read_poly(&a.q)?;
    let r = read_poly(&a.r)?;
    let seed = resolve_seed(a.seed);
    if verify_product(&p, &q, &r, &mut seeded(seed)) {
        println!("ok");
        Ok(0)
    } else {
        println!("mismatch");
        Ok(EXIT_REJECTED)
    }
}

fn dynamics(a: DynamicsArgs) -> Outcome {
    let rounds = iterate(a.tau, a.rounds, 0.0)?;
    emit(a.out.as_deref(), &distribution_csv(&rounds, a.cols))?;
    Ok(0)
}

#[derive(Serialize)]
struct TaucritSummary {
    lo: f64,
    hi: f64,
    closed_form: f64,
    indeterminate: Option<f64>,
}

fn taucrit(a: TaucritArgs) -> Outcome {
    let iv = estimate_tau_crit(a.tol)?;
    let s = TaucritSummary {
        lo: iv.lo,
        hi: iv.hi,
        closed_form: tau_crit_closed_form(),
        indeterminate: iv.indeterminate,
    };
    if a.json {
        println!("{}", to_json(&s));
    } else {
        println!("interval: [{:.10}, {:.10}]", s.lo, s.hi);
        println!("closed form: {:.10}", s.closed_form);
        if let Some(x) = s.indeterminate {
            println!("undecided at tau = {x:.10}");
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct GameSummary {
    seed: u64,
    balls: usize,
    boxes: u64,
    won: bool,
    rounds: u32,
    leftover: usize,
}

impl GameSummary {
    fn line(&self) -> String {
        if self.won {
            format!(
                "won in {} rounds ({} balls, {} boxes)",
                self.rounds, self.balls, self.boxes
            )
        } else {
            format!(
                "lost after {} rounds with {} of {} balls left ({} boxes)",
                self.rounds, self.leftover, self.balls, self.boxes
            )
        }
    }
}

fn simulate(a: SimulateArgs) -> Outcome {
    let seed = resolve_seed(a.seed);
    let sim = simulate_game(a.t, a.tau, seed)?;
    emit(a.out.as_deref(), &sim.table.csv(a.cols))?;
    let s = GameSummary {
        seed,
        balls: a.t,
        boxes: sim.boxes as u64,
        won: sim.won,
        rounds: sim.rounds,
        leftover: sim.leftover,
    };
    if a.json {
        eprintln!("{}", to_json(&s));
    } else {
        eprintln!("{}", s.line());
    }
    Ok(0)
}

fn densebench(a: DenseArgs) -> Outcome {
    let seed = resolve_seed(a.seed);
    let d_p = a.d / 2;
    let out = dense_support_experiment(a.n, d_p, a.d - d_p, a.tau, a.candidates, seed)?;
    let s = GameSummary {
        seed,
        balls: out.t,
        boxes: out.r,
        won: out.won,
        rounds: out.rounds,
        leftover: out.leftover,
    };
    if a.json {
        println!("{}", to_json(&s));
    } else {
        println!("n = {}, d = {}, tau = {}: {}", a.n, a.d, a.tau, s.line());
    }
    Ok(0)
}

fn gen(a: GenArgs) -> Outcome {
    let seed = resolve_seed(a.seed);
    let p = random_poly(a.n, a.t, a.d, a.height, &mut seeded(seed))?;
    emit(a.out.as_deref(), &p.to_sp_string())?;
    Ok(0)
}

#[derive(Serialize)]
struct BenchSummary {
    seed: u64,
    terms_p: usize,
    terms_q: usize,
    runs: Vec<MultiplySummary>,
}

fn bench(a: BenchArgs) -> Outcome {
    let seed = resolve_seed(a.seed);
    let mut rng = seeded(seed);
    let p = random_poly(a.n, a.t, a.d, a.height, &mut rng)?;
    let q = random_poly(a.n, a.t, a.d, a.height, &mut rng)?;
    let mut runs = Vec::new();
    let mut want = None;
    for algo in [Algo::Naive, Algo::Heuristic, Algo::Unconditional] {
        let (r, s) = product(&p, &q, algo, &a.tuning, seed)?;
        if *want.get_or_insert_with(|| r.clone()) != r {
            return Err(Failure(format!(
                "{algo:?} disagrees with the schoolbook product"
            )));
        }
        runs.push(s);
    }
    let s = BenchSummary {
        seed,
        terms_p: p.len(),
        terms_q: q.len(),
        runs,
    };
    if a.json {
        println!("{}", to_json(&s));
        return Ok(0);
    }
    println!(
        "t_P = {}, t_Q = {}, t_R = {}",
        s.terms_p, s.terms_q, s.runs[0].terms
    );
    for run in &s.runs {
        let algo = run.algo.expect("set by product");
        print!(
            "{:<14} {:>10.2} ms",
            format!("{algo:?}").to_lowercase(),
            run.total_ms
        );
        if let Some(share) = run.cyclic_share {
            print!("  cyclic products {:.1}%", 100.0 * share);
        }
        if run.fallback {
            print!("  (fell back)");
        }
        println!();
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Multiply(a) => multiply(a),
        Command::Verify(a) => verify(a),
        Command::Dynamics(a) => dynamics(a),
        Command::Taucrit(a) => taucrit(a),
        Command::Simulate(a) => simulate(a),
        Command::Densebench(a) => densebench(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
