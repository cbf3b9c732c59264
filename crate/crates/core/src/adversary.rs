//! Pricing of volume-manipulation attacks.
//!
//! Every attack is simulated twice from identical initial ledgers: once with
//! the attacker's wash transactions and once without. The attacker's gain is
//! the difference in its final holdings between the two arms, valued in base
//! coin; its cost is the gas for every injected transaction. All modelling
//! choices lean toward the attacker: gas is the only cost, there are no fees
//! or slippage, and holdings are valued at the highest price available.

use std::io::{self, Write};

use thiserror::Error;

use crate::controller::{combined_rate, ControllerError, RebaseConfig};
use crate::ledger::{AccountId, Ledger, LedgerError, LedgerParams};
use crate::market::{MarketError, MarketState};
use crate::numerics::{Amount, ArithmeticError, SignedAmount, UNIT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SybilScenario {
    /// Wash transactions injected per attacked period.
    pub delta_v_per_period: u64,
    pub periods: u64,
    /// Honest transactions per period, identical in both arms.
    pub baseline_v: u64,
    pub start_supply: Amount,
    /// Tokens the attacker holds when the attack starts (or buys, for a
    /// pump and dump).
    pub attacker_holdings: Amount,
    /// Controller period at which the simulation starts.
    pub start_period: u64,
}

impl SybilScenario {
    fn validate(&self) -> Result<(), AttackError> {
        if self.periods == 0 {
            return Err(AttackError::InvalidScenario("periods must be at least 1"));
        }
        if self.start_supply.is_zero() {
            return Err(AttackError::InvalidScenario("start_supply must be positive"));
        }
        if self.attacker_holdings > self.start_supply {
            return Err(AttackError::InvalidScenario("attacker_holdings exceeds start_supply"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackReport {
    /// Gas spent on injected transactions.
    pub cost_base: Amount,
    /// Supply in the attacked arm minus supply in the counterfactual.
    pub extra_supply_trd: SignedAmount,
    /// Attacker's extra holdings valued in base coin.
    pub attacker_gain_base: SignedAmount,
    pub net_profit_base: SignedAmount,
    pub profitable: bool,
}

impl AttackReport {
    fn new(cost_base: Amount, extra_supply_trd: SignedAmount, gain: SignedAmount) -> Result<Self, ArithmeticError> {
        let net = gain.checked_sub(cost_base.into())?;
        Ok(AttackReport {
            cost_base,
            extra_supply_trd,
            attacker_gain_base: gain,
            net_profit_base: net,
            profitable: net.is_positive(),
        })
    }
}

/// Gas cost of `v` transactions, in base coin.
pub fn sybil_cost(v: u64, cfg: &RebaseConfig) -> Result<Amount, ArithmeticError> {
    cfg.gas_cost_base.checked_mul_u64(v)
}

fn open_holding(ledger: &mut Ledger, trd: Amount) -> Result<AccountId, AttackError> {
    if trd.is_zero() {
        return Ok(ledger.open_wallet());
    }
    let collateral = ledger
        .collateral_for(trd)
        .map_err(|_| AttackError::InvalidScenario("token amounts must convert exactly to collateral at the peg"))?;
    Ok(ledger.open_account(collateral)?.0)
}

struct ArmPlan {
    periods: u64,
    /// Attacker starts with its holdings rather than buying them.
    seeded: bool,
    buy_at: Option<u64>,
    inject_from: u64,
    inject_until: u64,
    inject: u64,
}

/// Final state of one simulated arm.
#[derive(Debug, Clone)]
pub struct ArmOutcome {
    pub ledger: Ledger,
    pub attacker: AccountId,
    pub sybil: AccountId,
    pub market: MarketState,
    /// Token price (in base coin) when the attacker bought, if it did.
    pub buy_price: Option<f64>,
}

impl ArmOutcome {
    pub fn attacker_holdings(&self) -> Result<Amount, LedgerError> {
        Ok(self
            .ledger
            .balance_of(self.attacker)?
            .checked_add(self.ledger.balance_of(self.sybil)?)?)
    }
}

fn run_arm(sc: &SybilScenario, cfg: &RebaseConfig, plan: &ArmPlan) -> Result<ArmOutcome, AttackError> {
    let peg = cfg.peg_ratio;
    let mut ledger = Ledger::starting_at(LedgerParams::from(cfg), sc.start_period);
    let seeded = if plan.seeded {
        sc.attacker_holdings
    } else {
        Amount::ZERO
    };
    let genesis = open_holding(&mut ledger, sc.start_supply.checked_sub(seeded)?)?;
    let attacker = open_holding(&mut ledger, seeded)?;
    let sybil = ledger.open_wallet();
    ledger.set_prev_volume(sc.baseline_v);

    // Flat market, base coin as the quote currency.
    let mut market = MarketState::at_peg(1.0, peg);
    let mut buy_price = None;
    for i in 0..plan.periods {
        if plan.buy_at == Some(i) {
            ledger.transfer(genesis, attacker, sc.attacker_holdings)?;
            buy_price = Some(market.trd_price);
        }
        ledger.record_volume(sc.baseline_v);
        if plan.inject > 0 && (plan.inject_from..plan.inject_until).contains(&i) {
            ledger.transfer_repeated(attacker, sybil, Amount::ONE_RAW, plan.inject)?;
        }
        let rate = combined_rate(&ledger.metrics(), cfg)?;
        let supply = ledger.rebase(rate.r_combined)?;
        market = market.step_price(1.0, rate.r_combined, supply, peg)?;
    }
    Ok(ArmOutcome {
        ledger,
        attacker,
        sybil,
        market,
        buy_price,
    })
}

/// One arm of [`run_sybil`]; with `inject == false` this is the
/// counterfactual.
pub fn sybil_arm(sc: &SybilScenario, cfg: &RebaseConfig, inject: bool) -> Result<ArmOutcome, AttackError> {
    sc.validate()?;
    run_arm(
        sc,
        cfg,
        &ArmPlan {
            periods: sc.periods,
            seeded: true,
            buy_at: None,
            inject_from: 0,
            inject_until: sc.periods,
            inject: if inject { sc.delta_v_per_period } else { 0 },
        },
    )
}

/// Wash-trades `delta_v_per_period` transactions in every period and values
/// the attacker's extra holdings at the peg ceiling.
pub fn run_sybil(sc: &SybilScenario, cfg: &RebaseConfig) -> Result<AttackReport, AttackError> {
    let attacked = sybil_arm(sc, cfg, true)?;
    let baseline = sybil_arm(sc, cfg, false)?;
    let extra_supply = attacked.ledger.total_supply().diff(baseline.ledger.total_supply());
    let extra_holdings = attacked.attacker_holdings()?.diff(baseline.attacker_holdings()?);
    let gain =
        SignedAmount::from_raw((extra_holdings.raw() * i128::from(cfg.peg_ratio.ppb())).div_euclid(UNIT as i128));
    let tx = sc
        .delta_v_per_period
        .checked_mul(sc.periods)
        .ok_or(ArithmeticError::Overflow)?;
    Ok(AttackReport::new(sybil_cost(tx, cfg)?, extra_supply, gain)?)
}

/// The attacker buys `attacker_holdings` from the market at `buy_period`,
/// wash-trades from then until `sell_period` and sells everything at
/// `sell_period`.
///
/// The sale price is the counterfactual arm's price: the market is assumed
/// not to discount the manipulated supply at all. Under full absorption the
/// extra tokens would be worth exactly nothing, so this is the most the
/// attacker can hope for. The purchase and the price drift cancel between
/// the two arms, leaving the manipulated accrual as the gain.
pub fn run_pump_and_dump(
    sc: &SybilScenario,
    buy_period: u64,
    sell_period: u64,
    cfg: &RebaseConfig,
) -> Result<AttackReport, AttackError> {
    sc.validate()?;
    if buy_period >= sell_period || sell_period > sc.periods {
        return Err(AttackError::InvalidScenario("need buy_period < sell_period <= periods"));
    }
    let plan = |inject| ArmPlan {
        periods: sell_period,
        seeded: false,
        buy_at: Some(buy_period),
        inject_from: buy_period,
        inject_until: sell_period,
        inject,
    };
    let attacked = run_arm(sc, cfg, &plan(sc.delta_v_per_period))?;
    let baseline = run_arm(sc, cfg, &plan(0))?;
    let extra_supply = attacked.ledger.total_supply().diff(baseline.ledger.total_supply());
    let extra_holdings = attacked.attacker_holdings()?.diff(baseline.attacker_holdings()?);
    let sell_price = baseline.market.trd_price;
    let gain = SignedAmount::from_raw((extra_holdings.raw() as f64 * sell_price).floor() as i128);
    let tx = sc
        .delta_v_per_period
        .checked_mul(sell_period - buy_period)
        .ok_or(ArithmeticError::Overflow)?;
    Ok(AttackReport::new(sybil_cost(tx, cfg)?, extra_supply, gain)?)
}

/// One CSV line of attack output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub scenario_id: String,
    pub delta_v: u64,
    pub periods: u64,
    pub report: AttackReport,
}

pub const REPORT_CSV_HEADER: &str =
    "scenario_id,delta_v,periods,cost_base,extra_supply_trd,gain_base,net_profit_base,profitable";

pub fn write_reports_csv<W: Write>(mut out: W, rows: &[ReportRow]) -> io::Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for row in rows {
        let r = &row.report;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.scenario_id,
            row.delta_v,
            row.periods,
            r.cost_base,
            r.extra_supply_trd,
            r.attacker_gain_base,
            r.net_profit_base,
            r.profitable
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(dv: u64, periods: u64, baseline: u64, supply: u64, holdings: u64) -> SybilScenario {
        SybilScenario {
            delta_v_per_period: dv,
            periods,
            baseline_v: baseline,
            start_supply: Amount::from_tokens(supply),
            attacker_holdings: Amount::from_tokens(holdings),
            start_period: 0,
        }
    }

    #[test]
    fn cost_values() {
        let cfg = RebaseConfig::default();
        assert_eq!(sybil_cost(10_000, &cfg).unwrap(), Amount::from_tokens(4));
        assert_eq!(sybil_cost(0, &cfg).unwrap(), Amount::ZERO);
        assert_eq!(sybil_cost(1, &cfg).unwrap(), "0.0004".parse().unwrap());
        assert_eq!(
            sybil_cost(7, &cfg)
                .unwrap()
                .checked_add(sybil_cost(5, &cfg).unwrap())
                .unwrap(),
            sybil_cost(12, &cfg).unwrap()
        );
    }

    #[test]
    fn capped_attack_is_bounded_by_gas() {
        let cfg = RebaseConfig::default();
        let r = run_sybil(&scenario(10_000, 1, 0, 10_000, 10_000), &cfg).unwrap();
        assert_eq!(r.cost_base, Amount::from_tokens(4));
        assert!(r.extra_supply_trd <= SignedAmount::from_raw(40 * UNIT as i128));
        assert!(r.attacker_gain_base <= SignedAmount::from_raw(4 * UNIT as i128));
        assert!(!r.profitable);
    }

    #[test]
    fn no_attack_no_gain() {
        let cfg = RebaseConfig::default();
        let sc = scenario(0, 3, 250, 10_000, 1_000);
        let r = run_sybil(&sc, &cfg).unwrap();
        assert_eq!(r.cost_base, Amount::ZERO);
        assert_eq!(r.attacker_gain_base, SignedAmount::ZERO);
        assert_eq!(r.extra_supply_trd, SignedAmount::ZERO);
        assert!(!r.profitable);
        let a = sybil_arm(&sc, &cfg, true).unwrap();
        let b = sybil_arm(&sc, &cfg, false).unwrap();
        assert_eq!(a.ledger.to_snapshot(), b.ledger.to_snapshot());
    }

    #[test]
    fn uncapped_attack_pays() {
        let cfg = RebaseConfig {
            gas_cap_enabled: false,
            ..RebaseConfig::default()
        };
        let r = run_sybil(&scenario(10_000, 1, 100, 10_000, 5_000), &cfg).unwrap();
        assert!(r.profitable, "{r:?}");
    }

    #[test]
    fn pump_and_dump_cases() {
        let cfg = RebaseConfig::default();
        let sc = scenario(0, 5, 100, 10_000, 2_000);
        let r = run_pump_and_dump(&sc, 1, 4, &cfg).unwrap();
        assert_eq!(r.net_profit_base, SignedAmount::ZERO);

        let sc = scenario(10_000, 5, 100, 10_000, 2_000);
        assert!(!run_pump_and_dump(&sc, 1, 4, &cfg).unwrap().profitable);
        assert!(!run_pump_and_dump(&sc, 1, 2, &cfg).unwrap().profitable);

        let open = RebaseConfig {
            gas_cap_enabled: false,
            ..cfg.clone()
        };
        assert!(run_pump_and_dump(&sc, 1, 2, &open).unwrap().profitable);

        assert!(matches!(
            run_pump_and_dump(&sc, 3, 3, &cfg),
            Err(AttackError::InvalidScenario(_))
        ));
        assert!(matches!(
            run_pump_and_dump(&sc, 1, 6, &cfg),
            Err(AttackError::InvalidScenario(_))
        ));
    }

    #[test]
    fn invalid_scenarios() {
        let cfg = RebaseConfig::default();
        assert!(run_sybil(&scenario(1, 0, 0, 10, 1), &cfg).is_err());
        assert!(run_sybil(&scenario(1, 1, 0, 10, 11), &cfg).is_err());
        let mut sc = scenario(1, 1, 0, 10, 1);
        sc.start_supply = Amount::from_raw(15);
        assert!(matches!(run_sybil(&sc, &cfg), Err(AttackError::InvalidScenario(_))));
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        let report = AttackReport::new(
            Amount::from_tokens(4),
            SignedAmount::from_raw(40 * UNIT as i128),
            SignedAmount::from_raw(-1),
        )
        .unwrap();
        write_reports_csv(
            &mut buf,
            &[ReportRow {
                scenario_id: "s1".into(),
                delta_v: 10_000,
                periods: 1,
                report,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{REPORT_CSV_HEADER}\ns1,10000,1,4.000000000,40.000000000,-0.000000001,-4.000000001,false\n")
        );
    }
}
