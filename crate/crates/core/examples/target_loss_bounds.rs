//! Bracket the expected cross-entropy risk of a classifier on a small
//! discrete problem using only label marginals.
//!
//! cargo run --example target_loss_bounds

use alforge::coldstart::{verify_prop1, DiscreteJoint};

fn main() -> alforge::Result<()> {
    let joint = DiscreteJoint {
        p_x: vec![0.2, 0.3, 0.5],
        p_y_given_x: vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.2, 0.8]],
    };
    let classifier = vec![vec![0.8, 0.2], vec![0.6, 0.4], vec![0.3, 0.7]];
    let b = verify_prop1(&joint, &classifier)?;
    println!("p(Y) = {:?}", joint.p_y());
    println!("H[p(Y), p(Y_hat)] = {:.6}", b.cross_entropy);
    println!(
        "lower {:.6} <= risk {:.6} <= upper {:.6}",
        b.lower, b.risk, b.upper
    );
    println!(
        "H(X) = {:.6}, Z_hat = {:.6}, holds: {}",
        b.h_px,
        b.z_hat,
        b.holds(1e-12)
    );
    Ok(())
}
