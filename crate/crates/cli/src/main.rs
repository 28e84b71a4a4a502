//! `hva`: runs a scenario through the valuation-adjustment pipeline and writes
//! tables, per-atom series and curves.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 invariant failure
//! under `--strict` (always strict for `check`).

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use config::{EsChoice, GammaSource, ScenarioConfig, TraderChoice};

#[derive(Parser)]
#[command(
    name = "hva",
    version,
    about = "Hedging and capital valuation adjustments under model risk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline and write output files.
    Run,
    /// Check invariants and the path-enumeration oracle; print the summary.
    Check,
    /// KVA at 0 over a grid of ES levels.
    SweepAlpha {
        /// Comma-separated levels, e.g. "0.9,0.95,0.975".
        #[arg(long)]
        grid: String,
        /// Flag levels where rounded KVA equals "bad,nsb", e.g. "36,10".
        #[arg(long)]
        target: Option<String>,
    },
}

#[derive(Args)]
struct Opts {
    /// JSON scenario file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    trader: Option<TraderChoice>,
    /// ES level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Hurdle rate.
    #[arg(long, global = true)]
    hurdle: Option<f64>,
    #[arg(long, global = true)]
    nominal: Option<f64>,
    /// Intensities from the flat normal-regime family with this last value.
    #[arg(long, global = true)]
    gamma_flat: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true, value_enum)]
    es_convention: Option<EsChoice>,
    /// Exit with status 2 when an invariant fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Compare every engine quantity with path enumeration.
    #[arg(long, global = true)]
    oracle_check: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Opts {
    fn scenario(&self) -> anyhow::Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(t) = self.trader {
            c.trader = t;
        }
        if let Some(a) = self.alpha {
            c.es_level = a;
        }
        if let Some(r) = self.hurdle {
            c.hurdle_rate = r;
        }
        if let Some(n) = self.nominal {
            c.nominal = n;
        }
        if let Some(h) = self.horizon {
            c.horizon = Some(h);
        }
        if let Some(g) = self.gamma_flat {
            c.gamma = GammaSource::QFlat { gamma_last: g };
        }
        if let Some(e) = self.es_convention {
            c.es_convention = e;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        c.emit.oracle_check |= self.oracle_check;
        Ok(c)
    }
}

fn parse_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {s:?}"))
        })
        .collect()
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Ok,
    InvariantFailure,
}

fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    let mut scenario = cli.opts.scenario()?;
    let strict = cli.opts.strict || matches!(cli.command, Command::Check);
    if matches!(cli.command, Command::Check) {
        scenario.emit.oracle_check = true;
    }
    let analysis = report::analyze(scenario)?;

    match &cli.command {
        Command::Run => {
            for f in report::emit(&analysis)? {
                println!("{}", analysis.config.out.join(f).display());
            }
        }
        Command::Check => println!("{}", report::summary_json(&analysis)?),
        Command::SweepAlpha { grid, target } => {
            let grid = parse_list(grid)?;
            let target = match target.as_deref().map(parse_list).transpose()? {
                Some(v) if v.len() == 2 => Some((v[0], v[1])),
                Some(_) => bail!("--target takes two numbers, bad,nsb"),
                None => None,
            };
            let rows = report::sweep(&analysis, &grid, target)?;
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            if let Some(dir) = &cli.opts.out {
                std::fs::create_dir_all(dir)?;
                let mut f = csv::Writer::from_path(dir.join("sweep_alpha.csv"))?;
                for r in &rows {
                    f.serialize(r)?;
                }
                f.flush()?;
            }
        }
    }

    for note in &analysis.notes {
        eprintln!("note: {note}");
    }
    let failures = analysis.failures();
    for c in &failures {
        eprintln!(
            "invariant failed: {} = {:e} (tolerance {:e})",
            c.name, c.value, c.tolerance
        );
    }
    Ok(outcome(strict, failures.len()))
}

fn outcome(strict: bool, failures: usize) -> Outcome {
    if strict && failures > 0 {
        Outcome::InvariantFailure
    } else {
        Outcome::Ok
    }
}

fn main() -> ExitCode {
    // usage errors are configuration errors, not invariant failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::InvariantFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
