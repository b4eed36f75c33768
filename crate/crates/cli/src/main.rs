// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use pgfdb_core::io::{generate, Catalog, Database, GenSchema, ResultDocument};
use pgfdb_core::oracle::enumerate_eval;
use pgfdb_core::plan::{execute, validate, EngineConfig, QueryPlan};
use pgfdb_core::relational::Method;
use pgfdb_core::uda::AggConfig;
use pgfdb_core::PgfError;

#[derive(Parser)]
#[command(name = "pgfdb", version, about = "Aggregates over tuple-independent probabilistic tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a plan and write the result document.
    Run(RunArgs),
    /// Generate a TPC-H-like data directory with uniform probabilities.
    Gen(GenArgs),
    /// Evaluate a plan over every possible world.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Worker threads for aggregation; defaults to the available cores.
    #[arg(long, env = "PGFDB_THREADS")]
    threads: Option<usize>,
    /// Degree from which polynomial products switch to the FFT.
    #[arg(long)]
    fft_threshold: Option<usize>,
    /// Values kept by top-k MIN and MAX.
    #[arg(long)]
    min_topk: Option<usize>,
    /// Gamma components of the moment approximation.
    #[arg(long)]
    mixture_components: Option<usize>,
    /// Method applied to every aggregate that supports it.
    #[arg(long)]
    method: Option<Method>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Number of lineitem rows.
    #[arg(long)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, env = "PGFDB_THREADS")]
    threads: Option<usize>,
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<PgfError> for Failure {
    fn from(e: PgfError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn read_plan(path: &Path) -> Result<QueryPlan, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading plan {}", path.display()))
        .map_err(invalid)?;
    QueryPlan::from_json(&text)
        .with_context(|| format!("parsing plan {}", path.display()))
        .map_err(invalid)
}

fn write_output(path: &Path, doc: &ResultDocument) -> Result<(), Failure> {
    fs::write(path, doc.to_json())
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let plan = read_plan(&args.plan)?;
    let catalog = Catalog::load(&args.data)?;
    let schemas = Database::catalog_schemas(&catalog).map_err(invalid)?;
    let validated = validate(&plan, &schemas, args.method)?;

    let mut agg = AggConfig::default();
    if let Some(t) = args.fft_threshold {
        agg.fft_threshold = t;
    }
    if let Some(k) = args.min_topk {
        if k == 0 {
            return Err(invalid(anyhow!("--min-topk must be positive")));
        }
        agg.topk_capacity = k;
    }
    if let Some(p) = args.mixture_components {
        if !(1..=6).contains(&p) {
            return Err(invalid(anyhow!("--mixture-components must be between 1 and 6")));
        }
        agg.mixture_components = p;
    }
    let cfg = EngineConfig {
        workers: args.threads.unwrap_or_else(default_threads).max(1),
        agg,
    };

    let scanned: Vec<String> = plan.scanned_tables().into_iter().collect();
    let db = Database::load_only(&args.data, Some(&scanned))?;
    log::info!("loaded {} tables in {:?}", db.tables.len(), start.elapsed());
    let result = execute(&validated, &db.tables, &cfg)?;
    log::info!("executed plan in {:?} with {} workers", start.elapsed(), cfg.workers);
    write_output(&args.output, &ResultDocument::from_table(&result))
}

fn gen(args: GenArgs) -> Result<(), Failure> {
    let schema = match &args.schema {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(invalid)?;
            GenSchema::from_json(&text).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?
        }
        None => GenSchema::default(),
    };
    generate(&schema, args.rows, args.seed, &args.out)?;
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), Failure> {
    let plan = read_plan(&args.plan)?;
    let scanned: Vec<String> = plan.scanned_tables().into_iter().collect();
    let db = Database::load_only(&args.data, Some(&scanned))?;
    let workers = args.threads.unwrap_or_else(default_threads);
    let result = enumerate_eval(&plan, &db.tables, workers)?;
    write_output(&args.output, &ResultDocument::from_table(&result))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Gen(a) => gen(a),
        Command::Oracle(a) => oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
