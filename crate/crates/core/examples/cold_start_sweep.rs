//! Sweep start-set sizes, track the label-free measure next to the target
//! loss and pick a start size.
//!
//! cargo run --release --example cold_start_sweep

use alforge::al::ALConfig;
use alforge::coldstart::{mean_by_size, pearson, start_size_rule, sweep_start_sizes};
use alforge::data::gen_two_moons;

fn main() -> alforge::Result<()> {
    let train = gen_two_moons(500, 0.1, 100)?;
    let mut records = Vec::new();
    for seed in 0..3 {
        let cfg = ALConfig {
            seed,
            epochs_per_cycle: 100,
            ..ALConfig::default()
        };
        records.extend(sweep_start_sizes(&train, &[4, 10, 20, 40, 100], &cfg)?);
    }
    let means = mean_by_size(&records);
    for m in &means {
        println!(
            "size {:>3}: H {:.4}  target loss {:.4}",
            m.labeled_count, m.measure_h, m.target_loss
        );
    }
    let h: Vec<f64> = means.iter().map(|m| m.measure_h).collect();
    let loss: Vec<f64> = means.iter().map(|m| m.target_loss).collect();
    println!("pearson {:?}", pearson(&h, &loss));
    let rec = start_size_rule(&means, 0.05)?;
    println!(
        "start size {} (converged: {}), deltas {:?}",
        rec.size, rec.converged, rec.deltas
    );
    Ok(())
}
