//! Exogenous-demand price model.
//!
//! The market value of the token supply follows an input return series and
//! a rebase is absorbed in full within the same period, so the per-token
//! price moves by `m / (1 + r)`. Arbitrage at the peg caps the token price
//! at `peg_ratio * base_price`; whenever the cap binds, the extra supply the
//! arbitrageurs would mint to get there is recorded.
//!
//! Prices are `f64` diagnostics and never feed back into ledger arithmetic.
//! Only IEEE basic operations are used, so results are platform independent.

use thiserror::Error;

use crate::numerics::{Amount, Rate, PPB};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("market return must be positive and finite, got {0}")]
    NonPositiveReturn(f64),
    #[error("growth factor 1 + r must be positive")]
    NonPositiveFactor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    /// Quote currency per token.
    pub trd_price: f64,
    /// Quote currency per base coin.
    pub base_price: f64,
    /// Tokens minted by arbitrageurs so far.
    pub arb_minted_cum: Amount,
    /// Tokens minted by arbitrageurs in the last step.
    pub arb_minted_last: Amount,
}

fn rate_factor(r: Rate) -> f64 {
    (PPB as f64 + r.ppb() as f64) / PPB as f64
}

impl MarketState {
    /// Token priced exactly at the peg ceiling.
    pub fn at_peg(base_price: f64, peg_ratio: Rate) -> MarketState {
        MarketState {
            trd_price: peg_ratio.to_f64() * base_price,
            base_price,
            arb_minted_cum: Amount::ZERO,
            arb_minted_last: Amount::ZERO,
        }
    }

    pub fn peg_ceiling(&self, peg_ratio: Rate) -> f64 {
        peg_ratio.to_f64() * self.base_price
    }

    /// Advances one period with market return `m` and rebase rate `r`.
    ///
    /// `supply` is the token supply after the rebase; it only sizes the
    /// arbitrage mint when the ceiling binds.
    pub fn step_price(&self, m: f64, r: Rate, supply: Amount, peg_ratio: Rate) -> Result<MarketState, MarketError> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(MarketError::NonPositiveReturn(m));
        }
        let factor = rate_factor(r);
        if factor <= 0.0 {
            return Err(MarketError::NonPositiveFactor);
        }
        let implied = self.trd_price * m / factor;
        let base_price = self.base_price * m;
        let ceiling = peg_ratio.to_f64() * base_price;
        let (trd_price, arb) = if implied > ceiling {
            // Keeping market cap fixed, the price falls to the ceiling once
            // supply grows by implied / ceiling.
            let extra = supply.raw() as f64 * (implied / ceiling - 1.0);
            (ceiling, Amount::from_raw(extra as u128))
        } else {
            (implied, Amount::ZERO)
        };
        Ok(MarketState {
            trd_price,
            base_price,
            arb_minted_cum: self
                .arb_minted_cum
                .checked_add(arb)
                .unwrap_or(Amount::from_raw(u128::MAX)),
            arb_minted_last: arb,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PEG: Rate = Rate::from_ppb(100_000_000);

    fn below_peg() -> MarketState {
        MarketState {
            trd_price: 5.0,
            ..MarketState::at_peg(100.0, PEG)
        }
    }

    #[test]
    fn identity_step() {
        let s = below_peg();
        let n = s.step_price(1.0, Rate::ZERO, Amount::from_tokens(1), PEG).unwrap();
        assert_eq!(n.trd_price, s.trd_price);
        assert_eq!(n.base_price, s.base_price);
        assert_eq!(n.arb_minted_last, Amount::ZERO);
    }

    #[test]
    fn rebase_absorbs_growth() {
        let s = below_peg();
        let n = s
            .step_price(1.1, Rate::from_ppb(100_000_000), Amount::from_tokens(1), PEG)
            .unwrap();
        assert!((n.trd_price - s.trd_price).abs() < 1e-12);
    }

    #[test]
    fn clamps_at_ceiling() {
        // implied = 0.12 * base while the ceiling is 0.1 * base
        let s = MarketState {
            trd_price: 12.0,
            ..MarketState::at_peg(100.0, PEG)
        };
        let n = s.step_price(1.0, Rate::ZERO, Amount::from_tokens(1000), PEG).unwrap();
        assert_eq!(n.trd_price, 10.0);
        // 1000 * (1.2 - 1) = 200 tokens, up to float error
        assert!((n.arb_minted_last.to_f64() - 200.0).abs() < 1e-6);
        assert_eq!(n.arb_minted_cum, n.arb_minted_last);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = below_peg();
        for m in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                s.step_price(m, Rate::ZERO, Amount::ZERO, PEG),
                Err(MarketError::NonPositiveReturn(_))
            ));
        }
        assert_eq!(
            s.step_price(1.0, Rate::from_ppb(-PPB), Amount::ZERO, PEG),
            Err(MarketError::NonPositiveFactor)
        );
    }

    proptest! {
        #[test]
        fn never_above_peg(
            steps in proptest::collection::vec((0.5f64..2.0, -900_000_000i64..1_000_000_000), 1..100)
        ) {
            let mut s = MarketState::at_peg(1000.0, PEG);
            for (m, r) in steps {
                s = s.step_price(m, Rate::from_ppb(r), Amount::from_tokens(10_000), PEG).unwrap();
                prop_assert!(s.trd_price <= s.peg_ceiling(PEG));
            }
        }

        #[test]
        fn dilution_neutral_below_ceiling(
            m in 0.5f64..2.0,
            r in -500_000_000i64..1_000_000_000,
            supply in 1_000u64..10_000_000_000,
        ) {
            let r = Rate::from_ppb(r);
            // far enough below the ceiling that it cannot bind
            let s = MarketState { trd_price: 0.001, ..MarketState::at_peg(1000.0, PEG) };
            let before = Amount::from_raw(u128::from(supply) * 1_000_000_000);
            let after = crate::numerics::scale_one_plus(before, r).unwrap();
            let n = s.step_price(m, r, after, PEG).unwrap();
            let cap_before = s.trd_price * before.to_f64();
            let cap_after = n.trd_price * after.to_f64();
            prop_assert!(((cap_after - cap_before * m) / (cap_before * m)).abs() <= 1e-9);
        }
    }
}
