//! Scripted walk through the one-way peg rules.

use std::io::Write;

use toroid_core::{Amount, Ledger, LedgerError, LedgerParams, Rate};

use crate::CliError;

fn show(out: &mut dyn Write, ledger: &Ledger, what: &str) -> Result<(), CliError> {
    writeln!(out, "{what}")?;
    writeln!(
        out,
        "  period {}  index {}  supply {} TRD  collateral {} base",
        ledger.current_period(),
        ledger.index(),
        ledger.total_supply(),
        ledger.total_collateral()
    )?;
    for a in ledger.accounts() {
        writeln!(
            out,
            "  account {}: balance {} TRD, locked {} base",
            a.id,
            ledger.balance_of(a.id)?,
            a.collateral
        )?;
    }
    Ok(())
}

fn expect_err(out: &mut dyn Write, what: &str, res: Result<Amount, LedgerError>) -> Result<(), CliError> {
    match res {
        Err(e) => writeln!(out, "{what}: rejected ({e})")?,
        Ok(_) => return Err(CliError::Internal(format!("{what} unexpectedly succeeded"))),
    }
    Ok(())
}

pub fn run(out: &mut dyn Write) -> Result<(), CliError> {
    let params = LedgerParams::default();
    writeln!(
        out,
        "peg: {} base coin per TRD, holding period {}",
        params.peg_ratio, params.min_holding_periods
    )?;

    let mut l = Ledger::new(params);
    let one = Amount::from_tokens(1);
    let (alice, _) = l.open_account(one)?;
    show(out, &l, "\n1. alice opens a wallet with 1 base of collateral")?;

    l.deposit(alice, Amount::from_tokens(2))?;
    show(out, &l, "\n2. alice deposits 2 more base at the same rate")?;

    let (bob, _) = l.open_account(one)?;
    expect_err(
        out,
        "\n3. bob tries to withdraw in the opening period",
        l.withdraw(bob, one),
    )?;
    l.rebase(Rate::from_ppb(100_000_000))?;
    show(out, &l, "   rebase +10%; collateral stays locked")?;

    let burned = l.withdraw(bob, one)?;
    show(out, &l, &format!("\n4. bob returns {burned} TRD and gets 1 base back"))?;

    l.rebase(Rate::from_ppb(-200_000_000))?;
    show(out, &l, "\n   rebase -20%")?;
    let all = l.account(alice)?.collateral;
    expect_err(out, "   alice withdraws all 3 base", l.withdraw(alice, all))?;
    let part = l.withdraw(alice, Amount::from_tokens(2))?;
    show(
        out,
        &l,
        &format!("   alice withdraws 2 base instead, burning {part} TRD"),
    )?;
    Ok(())
}
