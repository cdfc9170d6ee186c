//! `drl`: run the verification suites, evaluate single pairings, and inspect the torsion tower.

mod coords;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drl_core::reciprocity::{self, PairingForm};
use drl_core::verify::{build_tower, run_suites, RunConfig, SUITES};
use drl_core::TowerElem;

#[derive(Parser)]
#[command(name = "drl", version, about = "Explicit reciprocity checks for formal Drinfeld modules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites; exits nonzero iff an asserted case fails.
    Verify(VerifyArgs),
    /// Evaluate a single quantity.
    #[command(subcommand)]
    Compute(ComputeCommand),
    /// Inspect the torsion tower.
    #[command(subcommand)]
    Tower(TowerCommand),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Suite to run; repeatable, all suites when omitted.
    #[arg(long = "suite", value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
    suites: Vec<String>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Line-delimited JSON report: case records, then one summary per suite.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArg {
    /// Module configuration; the Carlitz module over F_2((pi)) when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ComputeCommand {
    /// The pairing of alpha and beta at level n.
    Pairing {
        #[arg(long)]
        n: u32,
        /// `[v^K*]c_0;c_1;...`, each coordinate a comma list of pi-digit codes.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, allow_hyphen_values = true)]
        beta: String,
        #[arg(long, value_enum, default_value_t = Form::Log)]
        form: Form,
        #[command(flatten)]
        config: ConfigArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Log,
    LogFree,
}

#[derive(Subcommand)]
enum TowerCommand {
    /// Minimal polynomials and valuations of levels 1..=n.
    Show {
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        config: ConfigArg,
    },
}

/// Failure to run at all, as opposed to a failing check.
const EXIT_USAGE: u8 = 2;

fn load(config: &ConfigArg) -> Result<RunConfig, String> {
    match &config.config {
        Some(path) => RunConfig::from_path(path).map_err(|e| e.to_string()),
        None => Ok(RunConfig::carlitz(2)),
    }
}

fn verify(args: VerifyArgs) -> Result<bool, String> {
    let mut cfg = RunConfig::from_path(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let reports = run_suites(&args.suites, &cfg).map_err(|e| e.to_string())?;
    if let Some(path) = &args.report {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut out = BufWriter::new(file);
        for report in &reports {
            report.write_jsonl(&mut out).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        out.flush().map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let mut all = true;
    for report in &reports {
        let status = if report.pass() { "PASS" } else { "FAIL" };
        println!(
            "{status} {:<18} {:>5} cases, {:>5} asserted, {} failed, {} ms",
            report.suite,
            report.cases.len(),
            report.asserted_count(),
            report.failures().count(),
            report.wall_ms
        );
        for case in report.failures().take(5) {
            println!("  {}: expected {}, got {} {}", case.case, case.expected, case.got, case.inputs);
        }
        all &= report.pass();
    }
    Ok(all)
}

fn pairing(n: u32, alpha: &str, beta: &str, form: Form, config: &ConfigArg) -> Result<(), String> {
    let cfg = load(config)?;
    let tower = build_tower(&cfg).map_err(|e| e.to_string())?;
    let level = tower.level(n).map_err(|e| e.to_string())?;
    let alpha = coords::parse_element(&level, alpha)?;
    let beta = coords::parse_element(&level, beta)?;
    let form = match form {
        Form::Log => PairingForm::Log,
        Form::LogFree => PairingForm::LogFree,
    };
    let value = reciprocity::pairing_rhs(&tower, &alpha, &beta, form).map_err(|e| e.to_string())?;
    let digits: Vec<String> = value.coord().iter().map(|d| d.code().to_string()).collect();
    println!("level {n}, mu(alpha) = {}", fmt_val(&alpha));
    println!("pairing = a . v_{n} with a = [{}] mod eta^{n}", digits.join(","));
    println!("torsion point {}", value.realization());
    Ok(())
}

fn fmt_val(x: &TowerElem) -> String {
    match x.valuation() {
        Ok(Some(v)) => v.to_string(),
        Ok(None) => "zero to precision".into(),
        Err(e) => e.to_string(),
    }
}

fn tower_show(n: u32, config: &ConfigArg) -> Result<(), String> {
    let cfg = load(config)?;
    let tower = build_tower(&cfg).map_err(|e| e.to_string())?;
    let module = tower.module();
    println!("q = {}, m0 = {}, eta = {}", module.q(), module.m0(), module.eta());
    for k in 1..=n {
        let level = tower.level(k).map_err(|e| e.to_string())?;
        println!("E^{k}: degree {}, mu(v_{k}) = {}, mu(D_{k}) = {}", level.degree(), level.v_valuation(), level.different_valuation());
        println!("  g_{k} = {}", level.min_poly());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(args) => verify(args),
        Command::Compute(ComputeCommand::Pairing { n, alpha, beta, form, config }) => {
            pairing(n, &alpha, &beta, form, &config).map(|()| true)
        }
        Command::Tower(TowerCommand::Show { n, config }) => tower_show(n, &config).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("drl: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
