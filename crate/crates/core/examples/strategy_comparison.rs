//! Final accuracy of every selection strategy on the same data and seeds.
//!
//! cargo run --release --example strategy_comparison

use alforge::al::{run_trials, ALConfig};
use alforge::data::gen_blobs;
use alforge::selection::Strategy;

fn main() -> alforge::Result<()> {
    let (train, test) = gen_blobs(1000, 5, 7, 1.0, 100)?
        .standardized()
        .split(500, 0)?;
    for strategy in Strategy::ALL {
        let cfg = ALConfig {
            strategy,
            epochs_per_cycle: 100,
            ..ALConfig::default()
        };
        let trials = run_trials(&train, &test, &cfg, 3)?;
        let last = trials.summary.last().expect("at least one cycle");
        println!(
            "{:<12} {:.4} +/- {:.4} at {} labels",
            strategy.name(),
            last.acc_mean,
            last.acc_std,
            last.labeled_mean
        );
    }
    Ok(())
}
