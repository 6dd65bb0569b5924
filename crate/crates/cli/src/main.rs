use clap::Parser;
use nclab_cli::{emit_report, external, run_command, CacheStatus, Flags, Format, CACHE_ENV};
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical laboratory for finite-dimensional operator systems.
///
/// Exit codes: 0 success, 2 certified mathematical negative, 1 error.
#[derive(Parser, Debug)]
#[command(name = "nclab", version)]
struct Args {
    /// validate | decompose | alpha | beta | dualizable | extension |
    /// separate | quotient | coproduct | pushout | corpus | solve-sdp
    command: String,
    /// Spec or map files, or corpus references such as `corpus:off_diagonal(2)`.
    inputs: Vec<String>,
    /// Highest matrix level examined.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feasibility and bisection tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "text")]
    format: String,
    /// reference | external
    #[arg(long)]
    solver: Option<String>,
    /// TOML file configuring the external solver.
    #[arg(long)]
    solver_config: Option<PathBuf>,
    #[arg(long, env = CACHE_ENV)]
    cache: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
    /// Use exact oracles where available.
    #[arg(long)]
    exact: bool,
    /// Element as a flat row-major list of [re, im] pairs.
    #[arg(long)]
    element: Option<String>,
    /// Second coproduct component, same format as --element.
    #[arg(long)]
    element_t: Option<String>,
    /// Point in body coordinates, a JSON list of numbers.
    #[arg(long)]
    point: Option<String>,
    /// interval:a:b | psd_ball:d | quasistate
    #[arg(long)]
    body: Option<String>,
    #[arg(long)]
    inner: Option<String>,
    #[arg(long)]
    outer: Option<String>,
    /// Functional values, one flat matrix per basis element.
    #[arg(long)]
    functional: Option<String>,
    #[arg(long)]
    functional_t: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Highest quasistate level searched by `coproduct`.
    #[arg(long)]
    k_max: Option<usize>,
    /// Directory for `corpus` to write its files into.
    #[arg(long)]
    write: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.command == "solve-sdp" {
        let mut input = String::new();
        if let Err(e) = std::io::stdin().read_to_string(&mut input) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        return match external::serve(&input) {
            Ok(out) => {
                println!("{out}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let format: Format = match args.format.parse() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let flags = Flags {
        levels: args.levels,
        samples: args.samples,
        seed: args.seed,
        tol: args.tol,
        solver: args.solver,
        solver_config: args.solver_config,
        cache: args.cache,
        no_cache: args.no_cache,
        exact: args.exact,
        element: args.element,
        element_t: args.element_t,
        point: args.point,
        body: args.body,
        inner: args.inner,
        outer: args.outer,
        functional: args.functional,
        functional_t: args.functional_t,
        restarts: args.restarts,
        k_max: args.k_max,
        write: args.write,
    };
    let outcome = match run_command(&args.command, &args.inputs, &flags) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match outcome.cache {
        CacheStatus::Hit => eprintln!("(served from cache)"),
        CacheStatus::Recovered => eprintln!("(corrupted cache entry replaced)"),
        _ => {}
    }
    match emit_report(&outcome.report, format) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(outcome.report.exit_code() as u8)
}
