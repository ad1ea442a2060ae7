use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};

use anybound::{
    exact_prob, gen_synthetic, ground, load_dir, parse_lineage, parse_query, query_instances,
    run_bench, write_lineage, AnytimeRun, BenchInstance, BenchSpec, EngineConfig, Formula,
    Heuristic, OracleLimit, Strategy, SynthParams,
};

/// Anytime probability bounds for lineage formulas.
#[derive(Parser)]
#[command(name = "anybound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground a conjunctive query over CSV tables into a lineage file.
    Ground(GroundArgs),
    /// Evaluate a lineage file and print the bound trace as CSV.
    Eval(EvalArgs),
    /// Run strategy/heuristic combinations over many instances.
    Bench(BenchArgs),
    /// Generate a synthetic R(X),S(X,Y),T(Y) lineage.
    Gen(GenArgs),
}

#[derive(Args)]
struct GroundArgs {
    /// Query such as "Q :- R(X), S(X,Y), T(Y)"; atom order is join order.
    #[arg(long)]
    query: String,
    /// Directory holding one `<table>.csv` per table.
    #[arg(long)]
    tables: PathBuf,
    /// Output lineage file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Stop once upper - lower is at most this.
    #[arg(long, default_value_t = 1e-6)]
    eps_abs: f64,
    /// Stop once (upper - lower) / lower is at most this.
    #[arg(long, default_value_t = 0.0)]
    eps_rel: f64,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_expansions: Option<usize>,
    /// Optimizer rounds per leaf for pgd and hb.
    #[arg(long, default_value_t = 10)]
    gd_steps: usize,
    /// Initial step size of the projected gradient optimizer.
    #[arg(long, default_value_t = 0.1)]
    step_size: f64,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            gd_steps: self.gd_steps,
            step_size: self.step_size,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            timeout: self.timeout_ms.map(Duration::from_millis),
            max_expansions: self.max_expansions,
            ..EngineConfig::default()
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    lineage: PathBuf,
    /// mb, sd, pgd or hb.
    #[arg(long, default_value = "sd")]
    strategy: Strategy,
    /// freq or infl.
    #[arg(long, default_value = "infl")]
    heuristic: Heuristic,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    engine: EngineArgs,
    /// Also compute the exact probability and check every record against it.
    #[arg(long)]
    oracle: bool,
    /// Print the final decomposition tree to standard error.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Lineage files to evaluate.
    #[arg(long, num_args = 1..)]
    lineage: Vec<PathBuf>,
    /// Query to ground over --tables, in addition to the lineage files.
    #[arg(long, requires = "tables")]
    query: Option<String>,
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Ground the query under every atom order.
    #[arg(long)]
    permute: bool,
    /// Redraw tuple probabilities once per seed.
    #[arg(long, value_delimiter = ',')]
    prob_seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "mb,sd,pgd,hb")]
    strategies: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "infl")]
    heuristics: Vec<Heuristic>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[command(flatten)]
    engine: EngineArgs,
    /// Skip the exact oracle; the error column becomes the half gap.
    #[arg(long)]
    no_oracle: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 4)]
    num_x: usize,
    #[arg(long, default_value_t = 4)]
    num_y: usize,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 0.05)]
    prob_lo: f64,
    #[arg(long, default_value_t = 0.95)]
    prob_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Number of clauses of the DNF expansion, before absorption.
fn clause_count(f: &Formula) -> u128 {
    match f {
        Formula::False => 0,
        Formula::True | Formula::Var(_) => 1,
        Formula::And(cs) => cs.iter().map(clause_count).fold(1, u128::saturating_mul),
        Formula::Or(cs) => cs.iter().map(clause_count).fold(0, u128::saturating_add),
    }
}

fn cmd_ground(args: &GroundArgs) -> Result<()> {
    let query = parse_query(&args.query)?;
    let db = load_dir(&args.tables)
        .with_context(|| format!("reading tables from {}", args.tables.display()))??;
    let (vt, f) = ground(&query, &db)?;
    emit(args.out.as_ref(), &write_lineage(&vt, &f))?;
    eprintln!("{} variables, {} clauses", vt.len(), clause_count(&f));
    Ok(())
}

fn read_lineage(path: &PathBuf) -> Result<(anybound::VarTable, Formula)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_lineage(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (vt, f) = read_lineage(&args.lineage)?;
    let exact = if args.oracle {
        Some(exact_prob::<f64, _>(&f, &vt, OracleLimit::default())?)
    } else {
        None
    };
    let cfg = EngineConfig {
        strategy: args.strategy,
        heuristic: args.heuristic,
        rng_seed: args.seed,
        ..args.engine.config()
    };
    let mut run = AnytimeRun::new(&f, &vt, cfg)?;
    run.run_to_end()?;
    if args.verbose {
        eprint!("{}", run.tree().dump());
    }

    let mut out = String::from("elapsed_ms,lower,upper,expansions\n");
    for r in &run.trace().records {
        out.push_str(&format!(
            "{:.3},{},{},{}\n",
            r.elapsed.as_secs_f64() * 1e3,
            r.lower,
            r.upper,
            r.expansions
        ));
    }
    emit(None, &out)?;

    if let Some(exact) = exact {
        let tolerance = 1e-9;
        let violations = run
            .trace()
            .records
            .iter()
            .filter(|r| r.lower > exact + tolerance || r.upper < exact - tolerance)
            .count();
        eprintln!("exact {exact}");
        if violations > 0 {
            bail!("{violations} trace records do not contain the exact probability");
        }
        eprintln!("all {} records contain the exact probability", run.trace().records.len());
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let mut instances = Vec::new();
    for path in &args.lineage {
        instances.push(
            BenchInstance::from_lineage_file(path)
                .with_context(|| format!("reading {}", path.display()))?
                .with_context(|| format!("parsing {}", path.display()))?,
        );
    }
    if let (Some(q), Some(dir)) = (&args.query, &args.tables) {
        let query = parse_query(q)?;
        let db = load_dir(dir).with_context(|| format!("reading tables from {}", dir.display()))??;
        instances.extend(query_instances("query", &query, &db, args.permute, &args.prob_seeds)?);
    }
    let spec = BenchSpec {
        strategies: args.strategies.clone(),
        heuristics: args.heuristics.clone(),
        seeds: args.seeds.clone(),
        repetitions: args.repetitions,
        engine: args.engine.config(),
        oracle: !args.no_oracle,
        threads: args.threads,
        ..BenchSpec::new(instances)
    };
    let report = run_bench(&spec)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(args.out.as_ref(), &report.csv)
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let params = SynthParams {
        num_x: args.num_x,
        num_y: args.num_y,
        density: args.density,
        prob_range: (args.prob_lo, args.prob_hi),
        seed: args.seed,
    };
    let (vt, f) = gen_synthetic(&params)?;
    emit(args.out.as_ref(), &write_lineage(&vt, &f))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ground(a) => cmd_ground(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
