//! Train on 10 labels of two-moons with and without the consistency term.
//!
//! cargo run --release --example ssl_two_moons

use alforge::al::{accuracy, train_cycle, ALConfig};
use alforge::augment::AugmentationSpec;
use alforge::data::gen_two_moons;
use alforge::nn::init_params;
use alforge::pool::init_start_set;

fn main() -> alforge::Result<()> {
    let (train, test) = gen_two_moons(1000, 0.1, 100)?.split(500, 0)?;
    let mut cfg = ALConfig {
        augment: AugmentationSpec::jitter(0.3, 10),
        ..ALConfig::default()
    };
    let pool = init_start_set(&train, 10, true, cfg.seed)?;
    let init = init_params(
        cfg.seed,
        2,
        cfg.hidden_dim,
        2,
        cfg.init_scale,
        cfg.activation,
    )?;

    for weight in [0.0, 1.0] {
        cfg.loss.unsup_weight = weight;
        let model = train_cycle(&init, &pool, &train, &cfg, 0)?;
        println!(
            "unsup_weight {weight}: test accuracy {:.4}",
            accuracy(&model, &test)?
        );
    }
    Ok(())
}
