//! Farthest-first coverage of a point cloud, anchored at already labeled points.
//!
//! cargo run --release --example kcenter_coreset

use alforge::selection::kcenter_greedy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> alforge::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<Vec<f64>> = (0..200)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let anchors = [0, 1];
    let candidates: Vec<usize> = (2..points.len()).collect();
    for pick in kcenter_greedy(&points, &anchors, &candidates, 8)? {
        let p = &points[pick.idx];
        println!(
            "pick {:>3} at ({:+.3}, {:+.3}), distance {:.4}",
            pick.idx, p[0], p[1], pick.distance
        );
    }
    Ok(())
}
