//! Synthetic market series.
//!
//! Price follows a geometric random walk,
//! `ln p[t] = ln p[t-1] + (mu - sigma^2 / 2) + sigma * z1`.
//! Transaction counts grow with adoption and respond to price moves,
//! `ln v[t] = ln v[t-1] + growth + beta * (ln p[t] - ln p[t-1]) + eta * z2`,
//! with `z1`, `z2` independent standard normals from a seeded ChaCha20
//! stream. Prices are rounded to 6 decimals, counts to integers.

use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use toroid_core::MarketRow;

pub const DEFAULT_SEED: u64 = 20_170_425;

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// Output CSV, or `-` for stdout.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub periods: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "2017-01-01")]
    pub start_date: NaiveDate,
    #[arg(long, default_value_t = 100.0)]
    pub start_price: f64,
    #[arg(long, default_value_t = 2_000)]
    pub start_tx: u64,
    /// Daily drift of the log price.
    #[arg(long, default_value_t = 0.002)]
    pub mu: f64,
    /// Daily volatility of the log price.
    #[arg(long, default_value_t = 0.04)]
    pub sigma: f64,
    /// Daily log growth of the transaction count.
    #[arg(long, default_value_t = 0.004)]
    pub growth: f64,
    /// Elasticity of the transaction count to price.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Idiosyncratic noise of the log transaction count.
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
}

pub fn generate(args: &GenArgs) -> Result<Vec<MarketRow>, String> {
    if !(args.start_price > 0.0 && args.start_price.is_finite()) {
        return Err("start price must be positive".into());
    }
    if !(args.sigma >= 0.0 && args.eta >= 0.0) {
        return Err("sigma and eta must be non-negative".into());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let mut ln_p = args.start_price.ln();
    let mut ln_v = (args.start_tx.max(1) as f64).ln();
    let mut rows = Vec::with_capacity(args.periods);
    for i in 0..args.periods {
        if i > 0 {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let dp = args.mu - args.sigma * args.sigma / 2.0 + args.sigma * z1;
            ln_p += dp;
            ln_v += args.growth + args.beta * dp + args.eta * z2;
        }
        let price = (ln_p.exp() * 1e6).round() / 1e6;
        if price <= 0.0 {
            return Err(format!("price underflowed at period {i}"));
        }
        let date = args
            .start_date
            .checked_add_days(Days::new(i as u64))
            .ok_or("date out of range")?;
        rows.push(MarketRow {
            date,
            price,
            tx_count: ln_v.exp().round() as u64,
        });
    }
    Ok(rows)
}
