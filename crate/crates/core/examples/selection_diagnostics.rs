//! Diagnostics for one ranked pool, written as CSV files.
//!
//! cargo run --release --example selection_diagnostics [OUT_DIR]

use alforge::al::{run_al, ALConfig};
use alforge::augment::AugmentationSpec;
use alforge::data::gen_grid_patterns;
use alforge::diagnostics::{build_report, DEFAULT_THRESHOLDS};
use alforge::selection::{score_pool, select_topk, Strategy};

fn main() -> alforge::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "alforge-diagnostics".into());
    let (train, test) = gen_grid_patterns(1500, 5, 8, 0.5, 100)?.split(1000, 0)?;
    let aug = AugmentationSpec::shift_flip(1, true, 10);
    let cfg = ALConfig {
        start_size: 10,
        cycles: 1,
        epochs_per_cycle: 50,
        augment: aug,
        ..ALConfig::default()
    };
    let run = run_al(&train, &test, &cfg)?;
    for strategy in [Strategy::Consistency, Strategy::Entropy] {
        let ranked = score_pool(
            strategy,
            &run.final_params,
            &train,
            &run.final_pool,
            &aug,
            0,
        )?;
        let batch = select_topk(&ranked, 10)?;
        let report = build_report(
            &run.final_params,
            &train,
            &test,
            &ranked,
            &batch,
            0.01,
            &DEFAULT_THRESHOLDS,
        )?;
        println!(
            "{strategy}: top-1% diversity {:.4}, overconfident misses {:?}, batch classes {:?}",
            report.top_frac_avg_dist, report.overconf_counts, report.class_hist
        );
        report.write(&std::path::Path::new(&out).join(strategy.name()))?;
    }
    println!("wrote {out}");
    Ok(())
}
