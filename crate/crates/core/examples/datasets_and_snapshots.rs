//! Generate the benchmark datasets, round-trip them through CSV and save a
//! model snapshot plus pool state.
//!
//! cargo run --example datasets_and_snapshots [OUT_DIR]

use std::path::PathBuf;

use alforge::data::{gen_blobs, gen_grid_patterns, gen_two_moons, Dataset, Split};
use alforge::io::{load_model, save_model};
use alforge::nn::{init_params, Activation};
use alforge::pool::{init_start_set, PoolState};

fn main() -> alforge::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "alforge-data".into()),
    );
    std::fs::create_dir_all(&out)?;
    let sets = [
        gen_two_moons(200, 0.1, 0)?,
        gen_blobs(200, 4, 7, 1.0, 0)?.standardized(),
        gen_grid_patterns(200, 4, 8, 0.1, 0)?,
    ];
    for ds in &sets {
        let path = out.join(format!("{}.csv", ds.name));
        ds.write_csv(&path)?;
        let back = Dataset::read_csv(&path, Split::Train, Some(ds.classes()))?;
        println!(
            "{:<14} n {} d {:>2} classes {} counts {:?} fingerprint {} round-trip {}",
            ds.name,
            ds.len(),
            ds.input_dim(),
            ds.classes(),
            ds.class_counts(),
            &ds.fingerprint()[..12],
            back.fingerprint() == ds.fingerprint()
        );
    }

    let model = init_params(42, 2, 16, 2, 0.5, Activation::Tanh)?;
    save_model(&model, &out.join("model.bin"))?;
    println!(
        "snapshot identical after reload: {}",
        load_model(&out.join("model.bin"))? == model
    );

    let pool = init_start_set(&sets[0], 10, true, 0)?;
    pool.save(&out.join("pool.json"))?;
    println!(
        "pool labeled {:?}",
        PoolState::load(&out.join("pool.json"))?.labeled_indices()
    );
    Ok(())
}
