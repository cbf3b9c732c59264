//! `toroid` command-line front end.
//!
//! Exit codes: 0 on success, 1 on bad input, 2 when the simulation itself
//! breaks an invariant.

mod datagen;
mod demo;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toroid_core::adversary::{write_reports_csv, ReportRow};
use toroid_core::harness::{load_market_csv, write_market_csv, write_series};
use toroid_core::{
    run_backtest, run_pump_and_dump, run_sybil, Amount, AttackError, BacktestOptions, HarnessError, LedgerError,
    RebaseConfig, SybilScenario,
};

#[derive(Parser)]
#[command(name = "toroid", version, about = "Elastic-supply stablecoin simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Backtest the controller over a market CSV.
    Simulate(SimulateArgs),
    /// Price a volume-manipulation attack.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Ledger walk-throughs.
    #[command(subcommand)]
    Ledger(LedgerCommand),
    /// Write a synthetic market series.
    GenData(datagen::GenArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Genesis supply in tokens.
    #[arg(long)]
    initial_supply: Amount,
    /// Output series CSV, or `-` for stdout.
    #[arg(long)]
    out: PathBuf,
    /// Gas cost per transaction in tokens; overrides `gas_cost_base`.
    #[arg(long)]
    gas_cost_trd: Option<Amount>,
    /// Mint the arbitrage supply into the ledger when the peg binds.
    #[arg(long)]
    arb_injection: bool,
    #[arg(long)]
    no_gas_cap: bool,
    #[arg(long)]
    no_bootstrap_floor: bool,
}

#[derive(Args)]
struct AttackArgs {
    /// Wash transactions per attacked period.
    #[arg(long)]
    delta_v: u64,
    #[arg(long)]
    periods: u64,
    /// Honest transactions per period.
    #[arg(long, default_value_t = 0)]
    baseline_v: u64,
    /// Total supply in tokens.
    #[arg(long)]
    supply: Amount,
    /// Tokens held (or bought) by the attacker; defaults to the whole supply.
    #[arg(long)]
    holdings: Option<Amount>,
    /// Controller period the scenario starts at; defaults to the end of
    /// bootstrap.
    #[arg(long)]
    start_period: Option<u64>,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    no_gas_cap: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AttackCommand {
    Sybil(AttackArgs),
    PumpDump {
        #[command(flatten)]
        common: AttackArgs,
        #[arg(long)]
        buy: u64,
        #[arg(long)]
        sell: u64,
    },
}

#[derive(Subcommand)]
enum LedgerCommand {
    /// Step through minting, rebasing and withdrawal.
    Demo,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Internal(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Ledger(ref l) if is_input_ledger_error(l) => CliError::Input(e.to_string()),
            HarnessError::Ledger(_) | HarnessError::Controller(_) | HarnessError::Market(_) => {
                CliError::Internal(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::InvalidScenario(_) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn is_input_ledger_error(e: &LedgerError) -> bool {
    matches!(e, LedgerError::NonDivisibleCollateral(_) | LedgerError::ZeroCollateral)
}

fn load_config(path: &Path) -> Result<RebaseConfig, CliError> {
    RebaseConfig::load(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn with_output<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    if path.as_os_str() == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        match write(&mut lock).and_then(|()| lock.flush()) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            other => other?,
        }
    } else {
        let file = File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        write(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if args.no_gas_cap {
        cfg.gas_cap_enabled = false;
    }
    if args.no_bootstrap_floor {
        cfg.floor_zero_during_bootstrap = false;
    }
    let rows = load_market_csv(&args.data).map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
    let opts = BacktestOptions {
        gas_cost_trd: args.gas_cost_trd,
        arb_injection: args.arb_injection,
    };
    let series = run_backtest(&rows, &cfg, args.initial_supply, opts)?;
    with_output(&args.out, |w| write_series(w, &series))
}

fn scenario(args: &AttackArgs, cfg: &RebaseConfig) -> SybilScenario {
    SybilScenario {
        delta_v_per_period: args.delta_v,
        periods: args.periods,
        baseline_v: args.baseline_v,
        start_supply: args.supply,
        attacker_holdings: args.holdings.unwrap_or(args.supply),
        start_period: args.start_period.unwrap_or(cfg.bootstrap_periods),
    }
}

fn attack(cmd: AttackCommand) -> Result<(), CliError> {
    let (args, window) = match cmd {
        AttackCommand::Sybil(args) => (args, None),
        AttackCommand::PumpDump { common, buy, sell } => (common, Some((buy, sell))),
    };
    let mut cfg = load_config(&args.config)?;
    if args.no_gas_cap {
        cfg.gas_cap_enabled = false;
    }
    let sc = scenario(&args, &cfg);
    let (id, report) = match window {
        None => ("sybil", run_sybil(&sc, &cfg)?),
        Some((buy, sell)) => ("pump-dump", run_pump_and_dump(&sc, buy, sell, &cfg)?),
    };
    let row = ReportRow {
        scenario_id: id.to_string(),
        delta_v: args.delta_v,
        periods: args.periods,
        report,
    };
    with_output(&args.out, |w| write_reports_csv(w, &[row]))
}

fn gen_data(args: datagen::GenArgs) -> Result<(), CliError> {
    let rows = datagen::generate(&args).map_err(CliError::Input)?;
    with_output(&args.out, |w| write_market_csv(w, &rows))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Attack(cmd) => attack(cmd),
        Command::Ledger(LedgerCommand::Demo) => demo::run(&mut io::stdout().lock()),
        Command::GenData(args) => gen_data(args),
    }
}

fn main() -> ExitCode {
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
