use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use toroid_bench::sample_market;
use toroid_core::numerics::UNIT;
use toroid_core::{
    combined_rate, grow_index, run_backtest, run_sybil, Amount, BacktestOptions, Index, PeriodMetrics, Rate,
    RebaseConfig, SybilScenario,
};

fn index_growth(c: &mut Criterion) {
    let rates: Vec<Rate> = (0..1_000)
        .map(|i| Rate::from_ppb(((i * 7_919) % 200_000_000) - 50_000_000))
        .collect();
    let mut g = c.benchmark_group("index");
    g.throughput(Throughput::Elements(rates.len() as u64));
    g.bench_function("grow_1000", |b| {
        b.iter(|| {
            let mut idx = Index::ONE;
            for &r in &rates {
                idx = grow_index(idx, black_box(r)).unwrap();
            }
            idx
        })
    });
    g.finish();
}

fn controller(c: &mut Criterion) {
    let cfg = RebaseConfig::default();
    let m = PeriodMetrics {
        t: 120,
        v: 123_457,
        v_prev: 98_765,
        s: Amount::from_tokens(1_000_000),
    };
    c.bench_function("combined_rate", |b| {
        b.iter(|| combined_rate(black_box(&m), &cfg).unwrap())
    });
}

fn backtest(c: &mut Criterion) {
    let rows = sample_market();
    let cfg = RebaseConfig::default();
    let opts = BacktestOptions {
        gas_cost_trd: Some(Amount::from_raw(UNIT / 10)),
        ..Default::default()
    };
    let mut g = c.benchmark_group("backtest");
    g.throughput(Throughput::Elements(rows.len() as u64));
    g.bench_function("sample_500", |b| {
        b.iter(|| run_backtest(black_box(&rows), &cfg, Amount::from_tokens(10_000), opts).unwrap())
    });
    g.finish();
}

fn sybil_sweep(c: &mut Criterion) {
    let cfg = RebaseConfig::default();
    let mut g = c.benchmark_group("sybil");
    for periods in [1u64, 10, 100] {
        let sc = SybilScenario {
            delta_v_per_period: 1_000_000,
            periods,
            baseline_v: 0,
            start_supply: Amount::from_tokens(1_000_000),
            attacker_holdings: Amount::from_tokens(500_000),
            start_period: 90,
        };
        g.bench_with_input(BenchmarkId::from_parameter(periods), &sc, |b, sc| {
            b.iter(|| run_sybil(black_box(sc), &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, index_growth, controller, backtest, sybil_sweep);
criterion_main!(benches);
