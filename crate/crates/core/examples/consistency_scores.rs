//! Score an unlabeled pool by prediction variance under augmentation and
//! compare the top picks with entropy.
//!
//! cargo run --release --example consistency_scores

use alforge::al::{train_cycle, ALConfig};
use alforge::augment::AugmentationSpec;
use alforge::data::gen_two_moons;
use alforge::nn::init_params;
use alforge::pool::init_start_set;
use alforge::selection::{score_consistency, score_entropy, select_topk};

fn main() -> alforge::Result<()> {
    let train = gen_two_moons(400, 0.1, 3)?;
    let cfg = ALConfig {
        epochs_per_cycle: 50,
        ..ALConfig::default()
    };
    let pool = init_start_set(&train, 10, true, 0)?;
    let init = init_params(0, 2, cfg.hidden_dim, 2, cfg.init_scale, cfg.activation)?;
    let model = train_cycle(&init, &pool, &train, &cfg, 0)?;

    let spec = AugmentationSpec::jitter(0.3, 10);
    let cons = score_consistency(&model, &train, &pool.unlabeled, &spec, 0)?;
    let ent = score_entropy(&model, &train, &pool.unlabeled)?;
    println!("rank  consistency (idx, score)    entropy (idx, score)");
    for (r, (c, e)) in cons.ranked().iter().zip(ent.ranked()).take(10).enumerate() {
        println!(
            "{r:>4}  {:>5} {:.6}          {:>5} {:.6}",
            c.0, c.1, e.0, e.1
        );
    }
    println!("next batch: {:?}", select_topk(&cons, 10)?);
    Ok(())
}
