use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use streamk_cli::grid::{DimRange, GridSpec};
use streamk_cli::query;
use streamk_cli::records::read_records;
use streamk_cli::report::{build_report, parse_tolerances};
use streamk_cli::tune::{run_tune, summary, write_outputs, OutputPaths, TuneConfig};
use streamk_cli::verify::{run_verify, VerifyConfig};
use streamk_core::{
    bank_deserialize, CostParams, HardwareModel, ProblemSize, SieveBank, TileShape,
};

#[derive(Parser)]
#[command(
    name = "streamk",
    version,
    about = "Stream-K++ GEMM policy tuning and selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank every policy over a size grid and build the sieve.
    Tune(TuneArgs),
    /// Look up candidate policies for one size and time the lookup.
    Query(QueryArgs),
    /// Check schedule coverage and GEMM equivalence on random instances.
    Verify(VerifyArgs),
    /// Summarize a records CSV as JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long, default_value = "1:8192:pow2")]
    m: DimRange,
    #[arg(long, default_value = "64:8192:pow2")]
    n: DimRange,
    #[arg(long, default_value = "16:65536:pow2")]
    k: DimRange,
    #[arg(long, default_value = "256x128x32")]
    tile: TileShape,
    #[arg(long, default_value_t = HardwareModel::DEFAULT_CU_COUNT)]
    cus: u64,
    /// Resident workgroups per CU.
    #[arg(long, default_value_t = 1)]
    occupancy: u64,
    /// JSON file with any of c_mac, c_store, c_atomic, overlap.
    #[arg(long)]
    cost_params: Option<PathBuf>,
    #[arg(long, default_value_t = SieveBank::DEFAULT_CAPACITY)]
    capacity: u64,
    #[arg(long, default_value_t = SieveBank::DEFAULT_FP_TARGET)]
    fp_target: f64,
    #[arg(long, default_value = "sieve.skps")]
    sieve: PathBuf,
    #[arg(long, default_value = "records.csv")]
    records: PathBuf,
    /// Also write the sieve as a C++ header.
    #[arg(long)]
    emit_header: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    sieve: PathBuf,
    /// Problem size as MxNxK.
    #[arg(long)]
    size: ProblemSize,
    #[arg(long, default_value_t = 1_000_000)]
    repeat: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    cases: u64,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    /// Comma-separated slow-down margins in percent; `inf` is allowed.
    #[arg(long, default_value = "0,5,10,20")]
    tolerances: String,
    /// Sieve file for measured elimination.
    #[arg(long)]
    sieve: Option<PathBuf>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_bank(path: &PathBuf) -> Result<SieveBank> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    bank_deserialize(&bytes).with_context(|| format!("loading sieve {}", path.display()))
}

fn cmd_tune(args: TuneArgs) -> Result<bool> {
    let params = match &args.cost_params {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            CostParams::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => CostParams::default(),
    };
    let cfg = TuneConfig {
        grid: GridSpec {
            m: args.m,
            n: args.n,
            k: args.k,
        },
        tile: args.tile,
        hw: HardwareModel::new(args.cus, args.occupancy)?,
        params,
        capacity: args.capacity,
        fp_target: args.fp_target,
    };
    let outcome = run_tune(&cfg)?;
    write_outputs(
        &outcome,
        &OutputPaths {
            sieve: args.sieve.clone(),
            records: args.records.clone(),
            header: args.emit_header.clone(),
        },
    )?;
    print!("{}", summary(&outcome));
    println!(
        "wrote {} and {}",
        args.sieve.display(),
        args.records.display()
    );
    Ok(true)
}

fn cmd_query(args: QueryArgs) -> Result<bool> {
    let bank = load_bank(&args.sieve)?;
    let timing = query::time_queries(&bank, args.size, args.repeat);
    print!("{}", query::render(args.size, &timing));
    Ok(true)
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let outcome = run_verify(&VerifyConfig {
        seed: args.seed,
        cases: args.cases,
        inject_fault: args.inject_fault,
    })?;
    print!("{}", outcome.render());
    let failed = outcome.failures.len();
    if failed == 0 {
        println!("all {} cases passed", args.cases);
    } else {
        println!("{failed} of {} cases failed", args.cases);
    }
    Ok(failed == 0)
}

fn cmd_report(args: ReportArgs) -> Result<bool> {
    let tolerances = parse_tolerances(&args.tolerances)?;
    let file = fs::File::open(&args.records)
        .with_context(|| format!("opening {}", args.records.display()))?;
    let rows = read_records(file).with_context(|| format!("reading {}", args.records.display()))?;
    let bank = args.sieve.as_ref().map(load_bank).transpose()?;
    let report = build_report(&rows, &tolerances, bank.as_ref())?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => {
            fs::write(path, json).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{json}"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tune(a) => cmd_tune(a),
        Command::Query(a) => cmd_query(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
