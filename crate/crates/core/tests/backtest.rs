use chrono::NaiveDate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toroid_core::harness::{parse_series_csv, read_series_csv, write_series, write_series_csv};
use toroid_core::numerics::UNIT;
use toroid_core::{combined_rate, run_backtest, Amount, BacktestOptions, MarketRow, PeriodMetrics, RebaseConfig};

fn day(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 1, 1).unwrap() + chrono::Days::new(i)
}

fn rows(prices: &[f64], txs: &[u64]) -> Vec<MarketRow> {
    prices
        .iter()
        .zip(txs)
        .enumerate()
        .map(|(i, (&price, &tx_count))| MarketRow {
            date: day(i as u64),
            price,
            tx_count,
        })
        .collect()
}

fn random_rows(seed: u64, n: usize) -> Vec<MarketRow> {
    random_rows_from(seed, n, 100_000)
}

fn random_rows_from(seed: u64, n: usize, start_tx: u64) -> Vec<MarketRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut price = 1000.0;
    let mut tx = start_tx;
    (0..n)
        .map(|i| {
            price *= rng.random_range(0.9..1.1);
            tx = (tx as f64 * rng.random_range(0.8..1.25)) as u64 + 1;
            MarketRow {
                date: day(i as u64),
                price,
                tx_count: tx,
            }
        })
        .collect()
}

fn tokens(n: u64) -> Amount {
    Amount::from_tokens(n)
}

#[test]
fn constant_market_follows_incentive_chain() {
    let cfg = RebaseConfig::default();
    let out = run_backtest(
        &rows(&[500.0; 6], &[0; 6]),
        &cfg,
        tokens(10_000),
        BacktestOptions::default(),
    )
    .unwrap();
    assert_eq!(out.len(), 5);

    let mut supply = 10_000.0f64;
    let mut price = 0.1 * 500.0;
    for (i, row) in out.iter().enumerate() {
        let factor = 1.0 + 1.0 / (i as f64 + 10.0);
        supply *= factor;
        price /= factor;
        assert_eq!(row.r_combined, row.r_initial);
        assert_eq!(row.r_vol.ppb(), 0);
        let got = row.trd_supply.to_f64();
        // floored ppb rates lose at most 1e-9 per step
        assert!((got - supply).abs() / supply < 1e-8, "period {i}: {got} vs {supply}");
        assert!((row.trd_price - price).abs() / price < 1e-8);
    }
    assert_eq!(out[0].trd_supply, tokens(11_000));
}

#[test]
fn rows_are_rederivable_from_controller() {
    let cfg = RebaseConfig::default();
    let data = random_rows(7, 300);
    let initial = tokens(10_000);
    let out = run_backtest(&data, &cfg, initial, BacktestOptions::default()).unwrap();
    assert_eq!(out.len(), data.len() - 1);
    let mut s = initial;
    for (t, row) in out.iter().enumerate() {
        let m = PeriodMetrics {
            t: t as u64,
            v: row.tx_count,
            v_prev: data[t].tx_count,
            s,
        };
        let rb = combined_rate(&m, &cfg).unwrap();
        assert_eq!(
            (rb.r_initial, rb.r_vol, rb.r_gas_cap, rb.r_combined),
            (row.r_initial, row.r_vol, row.r_gas_cap, row.r_combined),
            "period {t}"
        );
        s = row.trd_supply;
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let cfg = RebaseConfig::default();
    let data = random_rows(11, 200);
    let render = || {
        let out = run_backtest(&data, &cfg, tokens(10_000), BacktestOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &out).unwrap();
        buf
    };
    assert_eq!(render(), render());
}

#[test]
fn gas_cap_contrast() {
    // Low volume relative to supply, so v * gas / s is small enough to bind.
    let data = random_rows_from(3, 300, 300);
    let opts = BacktestOptions {
        gas_cost_trd: Some(Amount::from_raw(UNIT / 10)),
        ..Default::default()
    };
    let capped_cfg = RebaseConfig::default();
    let uncapped_cfg = RebaseConfig {
        gas_cap_enabled: false,
        ..RebaseConfig::default()
    };
    let capped = run_backtest(&data, &capped_cfg, tokens(10_000), opts).unwrap();
    let uncapped = run_backtest(&data, &uncapped_cfg, tokens(10_000), opts).unwrap();

    let over = |r: &toroid_core::SeriesRow| (r.r_combined.ppb() - r.r_initial.ppb()).abs() > r.r_gas_cap.ppb();
    for r in &capped {
        // the bootstrap floor can only lift a rate towards r_initial
        assert!(!over(r), "{r:?}");
    }
    assert!(uncapped.iter().any(over));
}

#[test]
fn capped_supply_not_above_uncapped_when_volume_rises() {
    let n = 120;
    let prices = vec![100.0; n];
    let txs: Vec<u64> = (0..n as u64).map(|i| 1_000 + 50 * i * i).collect();
    let data = rows(&prices, &txs);
    let opts = BacktestOptions {
        gas_cost_trd: Some(Amount::from_raw(UNIT / 10)),
        ..Default::default()
    };
    let capped = run_backtest(&data, &RebaseConfig::default(), tokens(10_000), opts).unwrap();
    let uncapped_cfg = RebaseConfig {
        gas_cap_enabled: false,
        ..RebaseConfig::default()
    };
    let uncapped = run_backtest(&data, &uncapped_cfg, tokens(10_000), opts).unwrap();
    assert!(capped.last().unwrap().trd_supply <= uncapped.last().unwrap().trd_supply);
}

#[test]
fn series_file_roundtrip() {
    let out = run_backtest(
        &random_rows(5, 50),
        &RebaseConfig::default(),
        tokens(10_000),
        BacktestOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_series_csv(&out, &path).unwrap();
    assert_eq!(read_series_csv(&path).unwrap(), out);

    write_series_csv(&[], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(parse_series_csv(text.as_bytes()).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bootstrap_supply_never_shrinks(seed in any::<u64>()) {
        let cfg = RebaseConfig::default();
        let out = run_backtest(&random_rows(seed, 120), &cfg, tokens(10_000), BacktestOptions::default()).unwrap();
        let mut prev = tokens(10_000);
        for row in out.iter().take(cfg.bootstrap_periods as usize) {
            prop_assert!(row.trd_supply >= prev);
            prev = row.trd_supply;
        }
    }

    #[test]
    fn price_never_above_ceiling(seed in any::<u64>(), inject in any::<bool>()) {
        let data = random_rows(seed, 150);
        let opts = BacktestOptions { arb_injection: inject, ..Default::default() };
        let out = run_backtest(&data, &RebaseConfig::default(), tokens(10_000), opts).unwrap();
        for (row, m) in out.iter().zip(&data[1..]) {
            prop_assert!(row.trd_price <= 0.1 * m.price * (1.0 + 1e-12));
        }
    }
}
