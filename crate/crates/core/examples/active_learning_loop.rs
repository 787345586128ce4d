//! A full selection loop with per-cycle records, averaged over three trials.
//!
//! cargo run --release --example active_learning_loop

use alforge::al::{records_csv, run_trials, ALConfig};
use alforge::data::gen_two_moons;
use alforge::selection::Strategy;

fn main() -> alforge::Result<()> {
    let (train, test) = gen_two_moons(1000, 0.1, 100)?.split(500, 0)?;
    let cfg = ALConfig {
        strategy: Strategy::Consistency,
        start_size: 10,
        batch_size: 10,
        cycles: 4,
        epochs_per_cycle: 100,
        ..ALConfig::default()
    };
    let trials = run_trials(&train, &test, &cfg, 3)?;
    for c in &trials.summary {
        println!(
            "cycle {} labels {:>3}: accuracy {:.4} +/- {:.4}, target loss {:.4}, H {:.4}",
            c.cycle, c.labeled_mean, c.acc_mean, c.acc_std, c.target_loss_mean, c.measure_h_mean
        );
    }
    print!("{}", records_csv(&trials.runs));
    Ok(())
}
