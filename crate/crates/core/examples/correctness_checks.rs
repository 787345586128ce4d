//! Run the built-in oracle checks: gradients, scores, top-K, risk bracket
//! and k-center quality.
//!
//! cargo run --release --example correctness_checks

use alforge::verify::{render_table, run_all, VerifyOptions};

fn main() {
    let results = run_all(VerifyOptions {
        seed: 0,
        corrupt_gradient: false,
    });
    print!("{}", render_table(&results));
    if results.iter().any(|r| !r.passed) {
        std::process::exit(1);
    }
}
