//! `kolmonet build|price|sweep|verify [--config PATH] [--key value ...]`

mod config;
mod setup;
mod sweep;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kolmonet::constructor::{build_approximator, BuildStatus};
use kolmonet::verify::{run_suite, Suite};
use kolmonet::Network;

use crate::config::Config;
use crate::setup::{CliError, CliResult};
use crate::sweep::SweepRecord;

#[derive(Debug, Parser)]
#[command(name = "kolmonet", version, about = "ReLU-network approximation of Black-Scholes prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    keys: KeyFlags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one approximator, save it and print its report as CSV.
    Build,
    /// Price at `--x` with a saved network, the reference oracle, or both.
    Price {
        /// Print network value, oracle value and their difference.
        #[arg(long)]
        both: bool,
    },
    /// Build every (d, epsilon) cell and fit scaling exponents.
    Sweep,
    /// Run a check suite: core, sde, mc, e2e or all.
    Verify { suite: String },
}

macro_rules! key_flags {
    ($($field:ident => $name:literal),* $(,)?) => {
        /// Any configuration key may be given as `--key value`.
        #[derive(Debug, Args)]
        struct KeyFlags {
            $(
                #[arg(long = $name, global = true, value_name = "VALUE", allow_hyphen_values = true)]
                $field: Option<String>,
            )*
        }

        impl KeyFlags {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push(($name, v.as_str()));
                    }
                )*
                out
            }
        }
    };
}

key_flags! {
    seed => "seed",
    d => "d",
    d_list => "d_list",
    epsilon => "epsilon",
    eps_list => "eps_list",
    p => "p",
    t => "T",
    alpha => "alpha",
    beta => "beta",
    correlation => "correlation",
    payoff => "payoff",
    weights => "weights",
    strike => "strike",
    measure => "measure",
    mode => "mode",
    max_attempts => "max_attempts",
    eval_samples => "eval_samples",
    oracle_samples => "oracle_samples",
    n_cap => "n_cap",
    out => "out",
    network => "network",
    x => "x",
}

fn load_config(cli: &Cli) -> CliResult<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for (key, value) in cli.keys.pairs() {
        config.set_flag(key, value)?;
    }
    Ok(config)
}

fn write_records(records: &[SweepRecord], path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            sweep::write_csv(records, file).map_err(|e| CliError::io(p, e))
        }
        None => sweep::write_csv(records, io::stdout().lock()).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn cmd_build(config: &Config) -> CliResult<bool> {
    let seed: u64 = config.require("seed")?;
    let family = setup::family(config)?;
    let d = setup::dimension(config)?;
    let epsilon: f64 = config.require("epsilon")?;
    let spec = setup::spec(config, family, d, epsilon)?;
    let outcome = build_approximator(&spec, seed)?;
    let report = &outcome.report;

    let out = PathBuf::from(config.raw("out").unwrap_or("psi.ann"));
    match &outcome.network {
        Some(psi) => {
            let file = File::create(&out).map_err(|e| CliError::io(&out, e))?;
            psi.save(io::BufWriter::new(file))?;
            eprintln!("network written to {}", out.display());
        }
        None if report.status == BuildStatus::TheoryOnly => {
            eprintln!("theory mode: n = {} exceeds the build cap, nothing built", report.theory_n.unwrap_or(0));
        }
        None => eprintln!(
            "network with {} parameters exceeds the materialization limit; not written",
            report.param_count
        ),
    }
    let record = SweepRecord::from_report(0, d, epsilon, family, report);
    let csv_path = out.with_extension("csv");
    write_records(std::slice::from_ref(&record), Some(&csv_path))?;
    write_records(std::slice::from_ref(&record), None)?;
    if let (Some(n), Some(c), Some(b)) = (report.theory_n, report.theory_constant, report.a_priori_bound) {
        eprintln!("theory: C = {c:e}, n = {n}, a-priori bound {b:e}");
    }
    let err = report.error.map_or("none".to_string(), |e| format!("{} ± {}", e.estimate, e.stderr));
    eprintln!("{}: n = {}, attempts = {}, error {err}", report.status, report.n_used, report.attempts);
    Ok(report.succeeded() && report.error.is_some_and(|e| e.estimate <= epsilon))
}

fn cmd_price(config: &Config, both: bool) -> CliResult<bool> {
    let x: Vec<f64> = config.list("x")?.ok_or_else(|| config::ConfigError::Missing("x".into()))?;
    let network = match config.raw("network") {
        Some(path) => {
            let path = Path::new(path);
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            Some(Network::load(BufReader::new(file))?)
        }
        None => None,
    };
    if both && network.is_none() {
        return Err(CliError::Usage("--both needs a network file (key `network`)".into()));
    }
    let mut stdout = io::stdout().lock();
    let net_value = network.as_ref().map(|n| n.realize(&x)).transpose()?;
    if let Some(v) = net_value {
        writeln!(stdout, "network = {v}").ok();
    }
    if network.is_none() || both {
        let (price, se) = setup::oracle(config, x.len())?.price_with_stderr(&x)?;
        writeln!(stdout, "oracle = {price}").ok();
        writeln!(stdout, "oracle_stderr = {se}").ok();
        if let Some(v) = net_value {
            writeln!(stdout, "difference = {}", v - price).ok();
        }
    }
    Ok(true)
}

fn cmd_sweep(config: &Config) -> CliResult<bool> {
    let (family, records) = sweep::run(config)?;
    let out = config.raw("out").map(Path::new);
    write_records(&records, out)?;
    let fits = sweep::scaling_fits(family, &records);
    let mut summary: Box<dyn Write> = if out.is_some() { Box::new(io::stdout()) } else { Box::new(io::stderr()) };
    if fits.is_empty() {
        writeln!(summary, "warning: fewer than 3 distinct successful values on every axis; no scaling fit").ok();
    }
    for f in &fits {
        writeln!(summary, "{}", sweep::summary_line(f)).ok();
    }
    let failed = records.iter().filter(|r| !r.success).count();
    if failed > 0 {
        writeln!(summary, "{failed} of {} cells did not reach epsilon and were excluded from fits", records.len()).ok();
    }
    Ok(true)
}

fn cmd_verify(config: &Config, name: &str) -> CliResult<bool> {
    let suite: Suite = name.parse()?;
    let seed = config.get_or("seed", 1u64)?;
    let results = run_suite(suite, seed);
    let mut stdout = io::stdout().lock();
    for r in &results {
        writeln!(stdout, "{r}").ok();
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(stdout, "summary suite={name} checks={} passed={} failed={failed}", results.len(), results.len() - failed)
        .ok();
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli).and_then(|config| match &cli.command {
        Command::Build => cmd_build(&config),
        Command::Price { both } => cmd_price(&config, *both),
        Command::Sweep => cmd_sweep(&config),
        Command::Verify { suite } => cmd_verify(&config, suite),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
