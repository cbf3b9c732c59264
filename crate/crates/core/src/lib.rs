//! Deterministic simulator for a collateral-backed, elastic-supply token.
//!
//! The token is minted one way against base-coin collateral at a fixed peg
//! and its supply is rebased every period by a controller that reacts to
//! transaction counts. The volume-driven part of each rebase is capped by
//! the gas those transactions cost, which is what makes wash trading a
//! losing proposition; [`adversary`] checks exactly that.
//!
//! Modules, bottom up:
//!
//! - [`numerics`]: fixed-point amounts, rates and the rebase index
//! - [`controller`]: the per-period rate and its config file
//! - [`ledger`]: accounts, collateral, transfers, rebasement, snapshots
//! - [`market`]: exogenous price model with the peg ceiling
//! - [`adversary`]: Sybil and pump-and-dump attack pricing
//! - [`harness`]: CSV ingestion and the backtest loop

pub mod adversary;
pub mod controller;
pub mod harness;
pub mod ledger;
pub mod market;
pub mod numerics;

pub use adversary::{run_pump_and_dump, run_sybil, sybil_cost, AttackError, AttackReport, SybilScenario};
pub use controller::{
    combined_rate, gas_cap_rate, initial_rate, volume_rate, ConfigError, ControllerError, PeriodMetrics, RateBreakdown,
    RebaseConfig,
};
pub use harness::{run_backtest, BacktestOptions, HarnessError, MarketRow, SeriesRow};
pub use ledger::{Account, AccountId, Ledger, LedgerError, LedgerParams, Shares};
pub use market::{MarketError, MarketState};
pub use numerics::{apply_index, grow_index, mul_amount_rate, Amount, ArithmeticError, Index, Rate, SignedAmount};
