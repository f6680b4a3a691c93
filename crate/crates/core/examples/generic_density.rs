//! A user-supplied density with a sampler: Monte-Carlo ranks, a contour and Poisson smoothing.
use georank::depth::contour;
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;
use georank::reconstruct::poisson_smoothing;
use rand::Rng;

fn main() -> georank::Result<()> {
    // uniform law on [0, 2] x [0, 1]
    let m = Measure::generic(
        "rectangle",
        2,
        |x| {
            if (0.0..=2.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]) {
                0.5
            } else {
                0.0
            }
        },
        |rng| vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..1.0)],
    )?;
    let ev = RankEvaluator::monte_carlo(m, 40_000, 3)?;
    let (r, se) = ev.rank_with_stderr(&[1.0, 0.5])?;
    println!("rank at the centre {r:.4?} ± {se:.4?}");
    let c = contour(&ev, 0.5, 8, 1e-6)?;
    for (u, radius, achieved) in c.rows() {
        println!("  direction {u:.3?}: radius {radius:.4}, |R| = {achieved:.6}");
    }
    for x in [[1.0, 0.5], [0.1, 0.1], [3.0, 0.5]] {
        println!(
            "smoothed density at {x:?}, t = 0.01: {:.4}",
            poisson_smoothing(&ev, &x, 0.01, 128)?
        );
    }
    Ok(())
}
