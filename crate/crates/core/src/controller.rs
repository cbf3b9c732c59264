//! Per-period rebasement rate.
//!
//! The rate applied at the end of a period has three parts:
//!
//! - an incentive rate `1 / (t + t0)` that decays as the system ages,
//! - a volume-response rate driven by the change in transaction count,
//! - a gas cap that bounds the volume response to what the transactions cost.
//!
//! The combined rate is `r_initial + clamp(r_vol, -cap, cap)`, optionally
//! floored at zero while bootstrapping. Everything here is a pure function of
//! the period metrics and the config.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ethnum::U256;
use thiserror::Error;

use crate::numerics::{Amount, ArithmeticError, Rate, PPB, UNIT};

/// Lowest combined rate ever returned; keeps `1 + r >= 0.01`.
pub const MIN_COMBINED_RATE: Rate = Rate::from_ppb(-990_000_000);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("total supply is zero")]
    ZeroSupply,
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    InvalidValue { line: usize, key: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Controller and peg constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RebaseConfig {
    /// Offset in the incentive rate `1 / (t + t0)`.
    pub t0: u64,
    /// Length of the bootstrap period, in periods.
    pub bootstrap_periods: u64,
    /// Gain of the volume response.
    pub k_v: Rate,
    /// Cost of one transaction, in base-coin units.
    pub gas_cost_base: Amount,
    /// Base coin locked per token minted.
    pub peg_ratio: Rate,
    pub gas_cap_enabled: bool,
    pub floor_zero_during_bootstrap: bool,
    pub period_seconds: u64,
    /// Periods an account must exist before collateral can be withdrawn.
    pub min_holding_periods: u64,
}

impl Default for RebaseConfig {
    fn default() -> Self {
        RebaseConfig {
            t0: 10,
            bootstrap_periods: 90,
            k_v: Rate::from_ppb(100_000_000),
            // 20_000 gas at 20 gwei
            gas_cost_base: Amount::from_raw(400_000),
            peg_ratio: Rate::from_ppb(100_000_000),
            gas_cap_enabled: true,
            floor_zero_during_bootstrap: true,
            period_seconds: 86_400,
            min_holding_periods: 1,
        }
    }
}

impl RebaseConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.peg_ratio.ppb() <= 0 {
            return Err(ConfigError::Invalid("peg_ratio must be positive"));
        }
        if self.gas_cost_base.is_zero() {
            return Err(ConfigError::Invalid("gas_cost_base must be positive"));
        }
        if self.t0 == 0 {
            return Err(ConfigError::Invalid("t0 must be at least 1"));
        }
        if self.period_seconds == 0 {
            return Err(ConfigError::Invalid("period_seconds must be positive"));
        }
        Ok(())
    }

    /// Gas cost of one transaction expressed in tokens at the peg, floored.
    pub fn gas_cost_trd(&self) -> Amount {
        Amount::from_raw(
            (U256::from(self.gas_cost_base.raw()) * U256::from(UNIT) / U256::from(self.peg_ratio.ppb().max(1) as u128))
                .as_u128(),
        )
    }

    /// Sets the base-coin gas cost so that one transaction costs `trd` tokens.
    pub fn set_gas_cost_trd(&mut self, trd: Amount) {
        let base = U256::from(trd.raw()) * U256::from(self.peg_ratio.ppb().max(0) as u128) / U256::from(UNIT);
        self.gas_cost_base = Amount::from_raw(base.as_u128());
    }

    pub fn load(path: &Path) -> Result<RebaseConfig, ConfigError> {
        std::fs::read_to_string(path)?.parse()
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let invalid = || ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        fn int(v: &str) -> Option<u64> {
            v.parse().ok()
        }
        fn boolean(v: &str) -> Option<bool> {
            match v {
                "true" | "1" | "yes" | "on" => Some(true),
                "false" | "0" | "no" | "off" => Some(false),
                _ => None,
            }
        }
        match key {
            "t0" => self.t0 = int(value).ok_or_else(invalid)?,
            "bootstrap_periods" => self.bootstrap_periods = int(value).ok_or_else(invalid)?,
            "k_v" => self.k_v = value.parse().map_err(|_| invalid())?,
            "gas_cost_base" => self.gas_cost_base = value.parse().map_err(|_| invalid())?,
            "peg_ratio" => self.peg_ratio = value.parse().map_err(|_| invalid())?,
            "gas_cap_enabled" => self.gas_cap_enabled = boolean(value).ok_or_else(invalid)?,
            "floor_zero_during_bootstrap" => self.floor_zero_during_bootstrap = boolean(value).ok_or_else(invalid)?,
            "period_seconds" => self.period_seconds = int(value).ok_or_else(invalid)?,
            "min_holding_periods" => self.min_holding_periods = int(value).ok_or_else(invalid)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

/// Flat `key = value` text. Missing keys take their defaults; `#` and `;`
/// start comments.
impl FromStr for RebaseConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cfg = RebaseConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = i + 1;
            let text = raw.split(['#', ';']).next().unwrap_or("").trim();
            if text.is_empty() || (text.starts_with('[') && text.ends_with(']')) {
                continue;
            }
            let (k, v) = text.split_once('=').ok_or(ConfigError::Malformed { line })?;
            let (k, v) = (k.trim(), v.trim());
            if seen.contains(&k) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: k.to_string(),
                });
            }
            cfg.set(k, v, line)?;
            seen.push(k);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for RebaseConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "t0 = {}", self.t0)?;
        writeln!(f, "bootstrap_periods = {}", self.bootstrap_periods)?;
        writeln!(f, "k_v = {}", self.k_v)?;
        writeln!(f, "gas_cost_base = {}", self.gas_cost_base)?;
        writeln!(f, "peg_ratio = {}", self.peg_ratio)?;
        writeln!(f, "gas_cap_enabled = {}", self.gas_cap_enabled)?;
        writeln!(f, "floor_zero_during_bootstrap = {}", self.floor_zero_during_bootstrap)?;
        writeln!(f, "period_seconds = {}", self.period_seconds)?;
        writeln!(f, "min_holding_periods = {}", self.min_holding_periods)
    }
}

/// Observations for one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodMetrics {
    /// Period ordinal since launch.
    pub t: u64,
    /// Transactions this period.
    pub v: u64,
    /// Transactions in the previous period.
    pub v_prev: u64,
    /// Total supply at period start.
    pub s: Amount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateBreakdown {
    pub r_initial: Rate,
    pub r_vol: Rate,
    pub r_gas_cap: Rate,
    pub r_combined: Rate,
}

/// `1 / (t + t0)`, floored to ppb.
pub fn initial_rate(t: u64, cfg: &RebaseConfig) -> Rate {
    let d = u128::from(t) + u128::from(cfg.t0.max(1));
    Rate::from_ppb((PPB as u128 / d) as i64)
}

/// `v * gas_cost_trd / s`: the largest volume-driven rate whose extra supply
/// is worth no more than the gas the volume burned.
pub fn gas_cap_rate(m: &PeriodMetrics, cfg: &RebaseConfig) -> Result<Rate, ControllerError> {
    if m.s.is_zero() {
        return Err(ControllerError::ZeroSupply);
    }
    let peg = cfg.peg_ratio.ppb();
    if peg <= 0 {
        return Err(ArithmeticError::DivisionByZero.into());
    }
    // ppb = v * gas_base * 1e9 * 1e9 / (peg_ppb * s_raw), all in one floor.
    let num = U256::from(m.v)
        .checked_mul(U256::from(cfg.gas_cost_base.raw()))
        .and_then(|x| x.checked_mul(U256::from(UNIT * UNIT)))
        .ok_or(ArithmeticError::Overflow)?;
    let den = U256::from(peg as u128) * U256::from(m.s.raw());
    let q = num / den;
    Ok(if q > U256::from(i64::MAX as u128) {
        Rate::MAX
    } else {
        Rate::from_ppb(q.as_i64())
    })
}

/// `k_v * ln(max(v, 1) / max(v_prev, 1))`, floored to ppb.
pub fn volume_rate(m: &PeriodMetrics, cfg: &RebaseConfig) -> Rate {
    let v = m.v.max(1);
    let vp = m.v_prev.max(1);
    if v == vp {
        return Rate::ZERO;
    }
    let ln_ratio = ln_fixed(v) - ln_fixed(vp);
    let r = (i128::from(cfg.k_v.ppb()) * ln_ratio).div_euclid(1i128 << LN_FRAC_BITS);
    Rate::from_ppb(r.clamp(i128::from(i64::MIN), i128::from(i64::MAX)) as i64)
}

pub fn combined_rate(m: &PeriodMetrics, cfg: &RebaseConfig) -> Result<RateBreakdown, ControllerError> {
    let r_initial = initial_rate(m.t, cfg);
    let r_vol = volume_rate(m, cfg);
    let r_gas_cap = gas_cap_rate(m, cfg)?;
    let adjustment = if cfg.gas_cap_enabled {
        r_vol.clamp(r_gas_cap.saturating_neg(), r_gas_cap)
    } else {
        r_vol
    };
    let mut r_combined = r_initial.saturating_add(adjustment);
    if cfg.floor_zero_during_bootstrap && m.t < cfg.bootstrap_periods {
        r_combined = r_combined.max(Rate::ZERO);
    }
    r_combined = r_combined.max(MIN_COMBINED_RATE);
    Ok(RateBreakdown {
        r_initial,
        r_vol,
        r_gas_cap,
        r_combined,
    })
}

const LN_FRAC_BITS: u32 = 60;
/// ln 2 * 2^60, rounded to nearest.
const LN2_FIXED: i128 = 799_144_290_325_165_979;

/// Natural log of `x >= 1` in Q60 fixed point.
///
/// Integer-only so that rates are identical on every platform. Writes
/// `x = 2^k * m` with `m` in `[1, 2)` and sums `2 atanh((m-1)/(m+1))`;
/// the argument is at most 1/3, so 30 terms reach well past 2^-60.
fn ln_fixed(x: u64) -> i128 {
    debug_assert!(x >= 1);
    let one: u128 = 1 << LN_FRAC_BITS;
    let k = 63 - x.leading_zeros();
    let m = (u128::from(x) << LN_FRAC_BITS) >> k;
    let z = ((m - one) << LN_FRAC_BITS) / (m + one);
    let z2 = (z * z) >> LN_FRAC_BITS;
    let mut term = z;
    let mut sum: u128 = 0;
    let mut n: u128 = 1;
    while term != 0 {
        sum += term / n;
        term = (term * z2) >> LN_FRAC_BITS;
        n += 2;
    }
    i128::from(k) * LN2_FIXED + 2 * sum as i128
}
