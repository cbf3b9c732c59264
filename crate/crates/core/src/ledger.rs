//! Account and collateral state machine.
//!
//! Balances are never stored. Each account holds index-invariant shares and
//! its balance is `shares * index`, so a rebase is a single update of the
//! global [`Index`] and every account is scaled pro rata. An account opened
//! after some rebases converts its deposit at the index of that moment and is
//! therefore untouched by them.
//!
//! Collateral follows the one-way peg: `collateral == minted * peg_ratio`
//! holds exactly for every account, and a withdrawal burns the originally
//! minted amount, so any rebase gain stays in the account as interest.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::controller::{PeriodMetrics, RebaseConfig};
use crate::numerics::{mul_div_floor, Amount, ArithmeticError, Index, Rate, UNIT};

/// Share sub-units per raw token unit at index 1.
///
/// Shares are finer than token units so that any balance, including one
/// left behind after a withdrawal, is representable at any index.
pub const SHARE_SCALE: u128 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(pub u64);

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shares(u128);

impl Shares {
    pub const ZERO: Shares = Shares(0);

    pub const fn from_raw(raw: u128) -> Self {
        Shares(raw)
    }

    pub const fn raw(self) -> u128 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("collateral must be positive")]
    ZeroCollateral,
    #[error("collateral {0} is not an exact multiple of the peg ratio")]
    NonDivisibleCollateral(Amount),
    #[error("balance {balance} is less than {requested}")]
    InsufficientBalance { balance: Amount, requested: Amount },
    #[error("cannot transfer to the same account")]
    SelfTransfer,
    #[error("account {id} created in period {created}; withdrawals open at period {opens}")]
    HoldingPeriodNotMet { id: AccountId, created: u64, opens: u64 },
    #[error("refund needs {required} but the balance is only {balance}")]
    InsufficientForRefund { balance: Amount, required: Amount },
    #[error("requested {requested} exceeds locked collateral {locked}")]
    ExceedsCollateral { requested: Amount, locked: Amount },
    #[error("snapshot line {line}: {msg}")]
    Snapshot { line: usize, msg: String },
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub id: AccountId,
    pub shares: Shares,
    /// Base coin locked by this account.
    pub collateral: Amount,
    /// Tokens issued against `collateral`; the refund obligation.
    pub minted: Amount,
    pub created_period: u64,
}

/// The subset of the config the ledger enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerParams {
    pub peg_ratio: Rate,
    pub min_holding_periods: u64,
}

impl Default for LedgerParams {
    fn default() -> Self {
        LedgerParams::from(&RebaseConfig::default())
    }
}

impl From<&RebaseConfig> for LedgerParams {
    fn from(cfg: &RebaseConfig) -> Self {
        LedgerParams {
            peg_ratio: cfg.peg_ratio,
            min_holding_periods: cfg.min_holding_periods,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    params: LedgerParams,
    accounts: BTreeMap<AccountId, Account>,
    next_id: u64,
    index: Index,
    current_period: u64,
    tx_count_this_period: u64,
    tx_count_prev_period: u64,
    total_shares: Shares,
    total_collateral: Amount,
    total_minted: Amount,
}

impl Ledger {
    pub fn new(params: LedgerParams) -> Ledger {
        Ledger::starting_at(params, 0)
    }

    /// An empty ledger whose clock starts at `period`.
    pub fn starting_at(params: LedgerParams, period: u64) -> Ledger {
        Ledger {
            params,
            accounts: BTreeMap::new(),
            next_id: 0,
            index: Index::ONE,
            current_period: period,
            tx_count_this_period: 0,
            tx_count_prev_period: 0,
            total_shares: Shares::ZERO,
            total_collateral: Amount::ZERO,
            total_minted: Amount::ZERO,
        }
    }

    pub fn params(&self) -> LedgerParams {
        self.params
    }

    pub fn index(&self) -> Index {
        self.index
    }

    pub fn current_period(&self) -> u64 {
        self.current_period
    }

    pub fn tx_count_this_period(&self) -> u64 {
        self.tx_count_this_period
    }

    pub fn tx_count_prev_period(&self) -> u64 {
        self.tx_count_prev_period
    }

    pub fn total_shares(&self) -> Shares {
        self.total_shares
    }

    pub fn total_collateral(&self) -> Amount {
        self.total_collateral
    }

    pub fn total_minted(&self) -> Amount {
        self.total_minted
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn account(&self, id: AccountId) -> Result<&Account, LedgerError> {
        self.accounts.get(&id).ok_or(LedgerError::UnknownAccount(id))
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    /// Tokens represented by `shares` at the current index.
    pub fn shares_to_amount(&self, shares: Shares) -> Result<Amount, ArithmeticError> {
        let den = self
            .index
            .den()
            .checked_mul(SHARE_SCALE)
            .ok_or(ArithmeticError::Overflow)?;
        mul_div_floor(shares.raw(), self.index.num(), den).map(Amount::from_raw)
    }

    /// Shares worth `amount` at the current index, floored.
    pub fn amount_to_shares(&self, amount: Amount) -> Result<Shares, ArithmeticError> {
        let scaled = amount.raw().checked_mul(SHARE_SCALE).ok_or(ArithmeticError::Overflow)?;
        mul_div_floor(scaled, self.index.den(), self.index.num()).map(Shares)
    }

    pub fn balance_of(&self, id: AccountId) -> Result<Amount, LedgerError> {
        Ok(self.shares_to_amount(self.account(id)?.shares)?)
    }

    /// Supply implied by the total share count. Individual balances are
    /// floored separately, so their sum can trail this by up to one raw unit
    /// per account.
    pub fn total_supply(&self) -> Amount {
        self.shares_to_amount(self.total_shares)
            .expect("total supply fits in u128")
    }

    pub fn sum_of_balances(&self) -> Result<Amount, LedgerError> {
        self.accounts.values().try_fold(Amount::ZERO, |acc, a| {
            Ok(acc.checked_add(self.shares_to_amount(a.shares)?)?)
        })
    }

    /// Metrics for the period in progress, as the controller expects them.
    pub fn metrics(&self) -> PeriodMetrics {
        PeriodMetrics {
            t: self.current_period,
            v: self.tx_count_this_period,
            v_prev: self.tx_count_prev_period,
            s: self.total_supply(),
        }
    }

    /// Tokens minted for `collateral` at the peg; rejects amounts that do
    /// not convert exactly.
    pub fn mint_for(&self, collateral: Amount) -> Result<Amount, LedgerError> {
        if collateral.is_zero() {
            return Err(LedgerError::ZeroCollateral);
        }
        let peg = self.params.peg_ratio.ppb() as u128;
        let scaled = collateral.raw().checked_mul(UNIT).ok_or(ArithmeticError::Overflow)?;
        if scaled % peg != 0 {
            return Err(LedgerError::NonDivisibleCollateral(collateral));
        }
        Ok(Amount::from_raw(scaled / peg))
    }

    /// Base coin that backs exactly `trd` tokens at the peg.
    pub fn collateral_for(&self, trd: Amount) -> Result<Amount, LedgerError> {
        let peg = self.params.peg_ratio.ppb() as u128;
        let base = mul_div_floor(trd.raw(), peg, UNIT)?;
        if mul_div_floor(base, UNIT, peg)? != trd.raw() {
            return Err(LedgerError::NonDivisibleCollateral(Amount::from_raw(base)));
        }
        Ok(Amount::from_raw(base))
    }

    /// An account with no collateral, e.g. one that only receives transfers.
    pub fn open_wallet(&mut self) -> AccountId {
        let id = AccountId(self.next_id);
        self.next_id += 1;
        self.accounts.insert(
            id,
            Account {
                id,
                shares: Shares::ZERO,
                collateral: Amount::ZERO,
                minted: Amount::ZERO,
                created_period: self.current_period,
            },
        );
        id
    }

    pub fn open_account(&mut self, collateral: Amount) -> Result<(AccountId, Amount), LedgerError> {
        self.mint_for(collateral)?;
        let id = self.open_wallet();
        let minted = self.deposit(id, collateral)?;
        Ok((id, minted))
    }

    pub fn deposit(&mut self, id: AccountId, collateral: Amount) -> Result<Amount, LedgerError> {
        self.account(id)?;
        let minted = self.mint_for(collateral)?;
        let shares = self.amount_to_shares(minted)?;
        let total_shares = checked_add_shares(self.total_shares, shares)?;
        let total_collateral = self.total_collateral.checked_add(collateral)?;
        let total_minted = self.total_minted.checked_add(minted)?;

        let acct = self.accounts.get_mut(&id).expect("checked above");
        acct.shares = checked_add_shares(acct.shares, shares)?;
        acct.collateral = acct.collateral.checked_add(collateral)?;
        acct.minted = acct.minted.checked_add(minted)?;
        self.total_shares = total_shares;
        self.total_collateral = total_collateral;
        self.total_minted = total_minted;
        Ok(minted)
    }

    pub fn transfer(&mut self, from: AccountId, to: AccountId, amount: Amount) -> Result<(), LedgerError> {
        self.transfer_repeated(from, to, amount, 1)
    }

    /// `count` transfers of `amount` each, booked in one step.
    ///
    /// The index does not move within a period, so every one of the
    /// individual transfers would move the same number of shares. The only
    /// difference from looping over [`Ledger::transfer`] is that a batch
    /// whose total equals the sender's whole balance moves exactly
    /// `count * per_transfer` shares rather than sweeping the remainder.
    pub fn transfer_repeated(
        &mut self,
        from: AccountId,
        to: AccountId,
        amount: Amount,
        count: u64,
    ) -> Result<(), LedgerError> {
        let sender = self.account(from)?;
        self.account(to)?;
        if from == to {
            return Err(LedgerError::SelfTransfer);
        }
        if count == 0 {
            return Ok(());
        }
        let balance = self.shares_to_amount(sender.shares)?;
        let requested = amount.checked_mul_u64(count)?;
        if balance < requested {
            return Err(LedgerError::InsufficientBalance { balance, requested });
        }
        let moved = if count == 1 && requested == balance {
            sender.shares
        } else {
            let per = self.amount_to_shares(amount)?;
            Shares(per.0.checked_mul(u128::from(count)).ok_or(ArithmeticError::Overflow)?)
        };
        let tx = self
            .tx_count_this_period
            .checked_add(count)
            .ok_or(ArithmeticError::Overflow)?;
        self.accounts.get_mut(&from).expect("checked").shares.0 -= moved.0;
        let receiver = self.accounts.get_mut(&to).expect("checked");
        receiver.shares = checked_add_shares(receiver.shares, moved)?;
        self.tx_count_this_period = tx;
        Ok(())
    }

    /// Counts transactions reported by an external feed rather than booked
    /// through [`Ledger::transfer`].
    pub fn record_volume(&mut self, count: u64) {
        self.tx_count_this_period = self.tx_count_this_period.saturating_add(count);
    }

    /// Overrides the previous-period transaction count, for starting a run
    /// from a known steady state.
    pub fn set_prev_volume(&mut self, count: u64) {
        self.tx_count_prev_period = count;
    }

    /// Closes the current period: scales every balance by `1 + r`, rolls the
    /// transaction counters and advances the clock. Returns the new supply.
    pub fn rebase(&mut self, r: Rate) -> Result<Amount, LedgerError> {
        let index = self.index.grow(r)?;
        let period = self.current_period.checked_add(1).ok_or(ArithmeticError::Overflow)?;
        self.index = index;
        self.tx_count_prev_period = self.tx_count_this_period;
        self.tx_count_this_period = 0;
        self.current_period = period;
        Ok(self.total_supply())
    }

    /// Releases `collateral_out` and burns the tokens originally minted for
    /// it. Returns the burned amount.
    pub fn withdraw(&mut self, id: AccountId, collateral_out: Amount) -> Result<Amount, LedgerError> {
        let acct = self.account(id)?;
        if collateral_out.is_zero() {
            return Err(LedgerError::ZeroCollateral);
        }
        if collateral_out > acct.collateral {
            return Err(LedgerError::ExceedsCollateral {
                requested: collateral_out,
                locked: acct.collateral,
            });
        }
        let opens = acct.created_period.saturating_add(self.params.min_holding_periods);
        if self.current_period < opens {
            return Err(LedgerError::HoldingPeriodNotMet {
                id,
                created: acct.created_period,
                opens,
            });
        }
        let burned = self.mint_for(collateral_out)?;
        let balance = self.shares_to_amount(acct.shares)?;
        if balance < burned {
            return Err(LedgerError::InsufficientForRefund {
                balance,
                required: burned,
            });
        }
        let burned_shares = if burned == balance {
            acct.shares
        } else {
            self.amount_to_shares(burned)?
        };

        let acct = self.accounts.get_mut(&id).expect("checked");
        acct.shares.0 -= burned_shares.0;
        acct.collateral = acct.collateral.checked_sub(collateral_out)?;
        acct.minted = acct.minted.checked_sub(burned)?;
        self.total_shares.0 -= burned_shares.0;
        self.total_collateral = self.total_collateral.checked_sub(collateral_out)?;
        self.total_minted = self.total_minted.checked_sub(burned)?;
        Ok(burned)
    }

    /// Line-oriented text snapshot.
    ///
    /// The first line is `index_num,index_den,current_period,tx_count_this,tx_count_prev`;
    /// each following line is `id,shares_raw,collateral_raw,minted_raw,created_period`
    /// in ascending id order.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            self.index.num(),
            self.index.den(),
            self.current_period,
            self.tx_count_this_period,
            self.tx_count_prev_period
        );
        for a in self.accounts.values() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                a.id,
                a.shares.raw(),
                a.collateral.raw(),
                a.minted.raw(),
                a.created_period
            );
        }
        out
    }

    pub fn from_snapshot(text: &str, params: LedgerParams) -> Result<Ledger, LedgerError> {
        fn fields<const N: usize>(line: usize, s: &str) -> Result<[u128; N], LedgerError> {
            let parts: Vec<&str> = s.split(',').collect();
            if parts.len() != N {
                return Err(LedgerError::Snapshot {
                    line,
                    msg: format!("expected {N} fields, found {}", parts.len()),
                });
            }
            let mut out = [0u128; N];
            for (slot, p) in out.iter_mut().zip(parts) {
                *slot = p.parse().map_err(|_| LedgerError::Snapshot {
                    line,
                    msg: format!("not an unsigned integer: {p:?}"),
                })?;
            }
            Ok(out)
        }
        fn narrow(line: usize, v: u128) -> Result<u64, LedgerError> {
            u64::try_from(v).map_err(|_| LedgerError::Snapshot {
                line,
                msg: format!("{v} out of range"),
            })
        }

        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or(LedgerError::Snapshot {
            line: 1,
            msg: "missing header".into(),
        })?;
        let [num, den, period, tx_this, tx_prev] = fields::<5>(1, head)?;
        let index = Index::new(num, den).map_err(|e| LedgerError::Snapshot {
            line: 1,
            msg: e.to_string(),
        })?;
        let mut ledger = Ledger::starting_at(params, narrow(1, period)?);
        ledger.index = index;
        ledger.tx_count_this_period = narrow(1, tx_this)?;
        ledger.tx_count_prev_period = narrow(1, tx_prev)?;

        for (i, text) in lines {
            let line = i + 1;
            let [id, shares, collateral, minted, created] = fields::<5>(line, text)?;
            let id = AccountId(narrow(line, id)?);
            if id.0 < ledger.next_id {
                return Err(LedgerError::Snapshot {
                    line,
                    msg: "account ids must be strictly increasing".into(),
                });
            }
            let (collateral, minted) = (Amount::from_raw(collateral), Amount::from_raw(minted));
            let backs = if minted.is_zero() {
                collateral.is_zero()
            } else {
                ledger.mint_for(collateral).ok() == Some(minted)
            };
            if !backs {
                return Err(LedgerError::Snapshot {
                    line,
                    msg: "collateral does not match minted amount at the peg".into(),
                });
            }
            ledger.total_shares = checked_add_shares(ledger.total_shares, Shares(shares))?;
            ledger.total_collateral = ledger.total_collateral.checked_add(collateral)?;
            ledger.total_minted = ledger.total_minted.checked_add(minted)?;
            ledger.accounts.insert(
                id,
                Account {
                    id,
                    shares: Shares(shares),
                    collateral,
                    minted,
                    created_period: narrow(line, created)?,
                },
            );
            ledger.next_id = id.0 + 1;
        }
        Ok(ledger)
    }
}

fn checked_add_shares(a: Shares, b: Shares) -> Result<Shares, ArithmeticError> {
    a.0.checked_add(b.0).map(Shares).ok_or(ArithmeticError::Overflow)
}
