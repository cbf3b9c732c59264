//! Fixtures shared by the benchmarks.

use std::path::Path;

use toroid_core::harness::load_market_csv;
use toroid_core::MarketRow;

/// The bundled 500-period sample series.
pub fn sample_market() -> Vec<MarketRow> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_market.csv");
    load_market_csv(&path).expect("bundled sample data")
}
