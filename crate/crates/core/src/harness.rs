//! Backtest loop over a historical (or synthetic) market series.
//!
//! Input is a `date,price,tx_count` CSV with one row per period. For every
//! row after the first, the loop feeds the row's transaction count to the
//! controller, rebases the ledger, moves the token price by the market
//! return, and emits one [`SeriesRow`].

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::controller::{combined_rate, ControllerError, RebaseConfig};
use crate::ledger::{AccountId, Ledger, LedgerError, LedgerParams};
use crate::market::{MarketError, MarketState};
use crate::numerics::{Amount, Rate};

pub const MARKET_CSV_HEADER: [&str; 3] = ["date", "price", "tx_count"];
pub const SERIES_CSV_HEADER: &str = "date,trd_price,trd_supply,r_initial,r_vol,r_gas_cap,r_combined,tx_count";

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: dates must be strictly increasing")]
    NonMonotoneDates { line: u64 },
    #[error("line {line}: price must be positive")]
    NonPositivePrice { line: u64 },
    #[error("row {row}: gap of {days} days exceeds the {max_days}-day period")]
    DateGap { row: usize, days: i64, max_days: i64 },
    #[error("{0}")]
    InvalidInput(&'static str),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Config(#[from] crate::controller::ConfigError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HarnessError {
    fn parse(line: u64, msg: impl Into<String>) -> Self {
        HarnessError::Parse { line, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketRow {
    pub date: NaiveDate,
    /// Quote currency per base coin.
    pub price: f64,
    pub tx_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub date: NaiveDate,
    pub trd_price: f64,
    /// Supply after this period's rebase.
    pub trd_supply: Amount,
    pub r_initial: Rate,
    pub r_vol: Rate,
    pub r_gas_cap: Rate,
    pub r_combined: Rate,
    pub tx_count: u64,
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub fn parse_market_csv<R: Read>(input: R) -> Result<Vec<MarketRow>, HarnessError> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(|e| HarnessError::parse(1, e.to_string()))?;
    if header.iter().ne(MARKET_CSV_HEADER) {
        return Err(HarnessError::parse(1, "expected header `date,price,tx_count`"));
    }
    let mut rows: Vec<MarketRow> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            HarnessError::parse(line, e.to_string())
        })?;
        let line = line_of(&record);
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT)
            .map_err(|e| HarnessError::parse(line, format!("date {:?}: {e}", &record[0])))?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| HarnessError::parse(line, format!("price {:?}", &record[1])))?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(HarnessError::NonPositivePrice { line });
        }
        let tx_count: u64 = record[2]
            .parse()
            .map_err(|_| HarnessError::parse(line, format!("tx_count {:?}", &record[2])))?;
        if rows.last().is_some_and(|prev| prev.date >= date) {
            return Err(HarnessError::NonMonotoneDates { line });
        }
        rows.push(MarketRow { date, price, tx_count });
    }
    Ok(rows)
}

pub fn load_market_csv(path: &Path) -> Result<Vec<MarketRow>, HarnessError> {
    parse_market_csv(File::open(path)?)
}

pub fn write_market_csv<W: Write>(mut out: W, rows: &[MarketRow]) -> io::Result<()> {
    writeln!(out, "{}", MARKET_CSV_HEADER.join(","))?;
    for r in rows {
        writeln!(out, "{},{},{}", r.date.format(DATE_FORMAT), r.price, r.tx_count)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BacktestOptions {
    /// Gas cost per transaction in tokens, replacing the config's base-coin
    /// figure.
    pub gas_cost_trd: Option<Amount>,
    /// Mint the arbitrage supply into a dedicated ledger account whenever
    /// the peg ceiling binds.
    pub arb_injection: bool,
}

pub fn run_backtest(
    rows: &[MarketRow],
    cfg: &RebaseConfig,
    initial_supply: Amount,
    opts: BacktestOptions,
) -> Result<Vec<SeriesRow>, HarnessError> {
    let mut cfg = cfg.clone();
    if let Some(trd) = opts.gas_cost_trd {
        cfg.set_gas_cost_trd(trd);
    }
    cfg.validate()?;
    let first = rows.first().ok_or(HarnessError::InvalidInput("no market rows"))?;
    if initial_supply.is_zero() {
        return Err(HarnessError::InvalidInput("initial supply must be positive"));
    }
    let max_days = (cfg.period_seconds.div_ceil(86_400)).max(1) as i64;
    for (i, w) in rows.windows(2).enumerate() {
        let days = (w[1].date - w[0].date).num_days();
        if days > max_days {
            return Err(HarnessError::DateGap {
                row: i + 1,
                days,
                max_days,
            });
        }
    }

    let mut ledger = Ledger::new(LedgerParams::from(&cfg));
    let genesis_collateral = ledger.collateral_for(initial_supply)?;
    ledger.open_account(genesis_collateral)?;
    ledger.set_prev_volume(first.tx_count);
    let mut arb_account: Option<AccountId> = None;

    let mut market = MarketState::at_peg(first.price, cfg.peg_ratio);
    let mut out = Vec::with_capacity(rows.len().saturating_sub(1));
    for w in rows.windows(2) {
        let (prev, row) = (&w[0], &w[1]);
        ledger.record_volume(row.tx_count);
        let rate = combined_rate(&ledger.metrics(), &cfg)?;
        let supply = ledger.rebase(rate.r_combined)?;
        market = market.step_price(row.price / prev.price, rate.r_combined, supply, cfg.peg_ratio)?;
        if opts.arb_injection && !market.arb_minted_last.is_zero() {
            inject_arbitrage(&mut ledger, &mut arb_account, market.arb_minted_last)?;
        }
        out.push(SeriesRow {
            date: row.date,
            trd_price: market.trd_price,
            trd_supply: ledger.total_supply(),
            r_initial: rate.r_initial,
            r_vol: rate.r_vol,
            r_gas_cap: rate.r_gas_cap,
            r_combined: rate.r_combined,
            tx_count: row.tx_count,
        });
    }
    Ok(out)
}

/// Deposits the collateral behind `minted` into the arbitrageur account,
/// rounded down to an amount the peg converts exactly.
fn inject_arbitrage(ledger: &mut Ledger, account: &mut Option<AccountId>, minted: Amount) -> Result<(), LedgerError> {
    let peg = ledger.params().peg_ratio.ppb() as u128;
    let collateral = Amount::from_raw(minted.raw() * peg / crate::numerics::UNIT);
    if collateral.is_zero() {
        return Ok(());
    }
    let id = *account.get_or_insert_with(|| ledger.open_wallet());
    match ledger.deposit(id, collateral) {
        Err(LedgerError::NonDivisibleCollateral(_)) => Ok(()),
        other => other.map(|_| ()),
    }
}

pub fn write_series<W: Write>(mut out: W, rows: &[SeriesRow]) -> io::Result<()> {
    writeln!(out, "{SERIES_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.date.format(DATE_FORMAT),
            r.trd_price,
            r.trd_supply,
            r.r_initial,
            r.r_vol,
            r.r_gas_cap,
            r.r_combined,
            r.tx_count
        )?;
    }
    Ok(())
}

pub fn write_series_csv(rows: &[SeriesRow], path: &Path) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_series(&mut out, rows)?;
    out.flush()?;
    Ok(())
}

pub fn parse_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>, HarnessError> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(|e| HarnessError::parse(1, e.to_string()))?;
    if header.iter().ne(SERIES_CSV_HEADER.split(',')) {
        return Err(HarnessError::parse(1, "unexpected series header"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::parse(0, e.to_string()))?;
        let line = line_of(&record);
        let bad = |field: &str| HarnessError::parse(line, format!("bad {field}"));
        let rate = |i: usize, name: &str| record[i].parse::<Rate>().map_err(|_| bad(name));
        rows.push(SeriesRow {
            date: NaiveDate::parse_from_str(&record[0], DATE_FORMAT).map_err(|_| bad("date"))?,
            trd_price: record[1].parse().map_err(|_| bad("trd_price"))?,
            trd_supply: record[2].parse().map_err(|_| bad("trd_supply"))?,
            r_initial: rate(3, "r_initial")?,
            r_vol: rate(4, "r_vol")?,
            r_gas_cap: rate(5, "r_gas_cap")?,
            r_combined: rate(6, "r_combined")?,
            tx_count: record[7].parse().map_err(|_| bad("tx_count"))?,
        });
    }
    Ok(rows)
}

pub fn read_series_csv(path: &Path) -> Result<Vec<SeriesRow>, HarnessError> {
    parse_series_csv(File::open(path)?)
}

/// Sample standard deviation of `ln(p[i] / p[i-1])`.
pub fn log_return_std(prices: &[f64]) -> f64 {
    let rets: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    if rets.len() < 2 {
        return 0.0;
    }
    let n = rets.len() as f64;
    let mean = rets.iter().sum::<f64>() / n;
    (rets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
