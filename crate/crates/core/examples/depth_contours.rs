//! Depth contours {|R(x)| = beta}: radial fast path and per-ray solves for a sample.
use georank::depth::{contour, ContourShape};
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;

fn main() -> georank::Result<()> {
    let ev = RankEvaluator::exact(Measure::cauchy(2)?)?;
    for beta in [0.1, 0.25, 2f64.sqrt() - 1.0, 0.75] {
        if let ContourShape::RadialRadius { r_beta } = contour(&ev, beta, 1, 1e-12)?.shape {
            println!("cauchy d=2, beta = {beta:.6}: circle of radius {r_beta:.10}");
        }
    }

    let sample = Measure::gaussian(2)?.sample(300, 9)?;
    let emp = RankEvaluator::exact(Measure::empirical(sample, None)?)?;
    let c = contour(&emp, 0.5, 24, 1e-9)?;
    println!(
        "300-point sample, beta = 0.5, {} rays, {} skipped, centre {:.4?}",
        c.n_rays,
        c.skipped.len(),
        c.center
    );
    c.write_csv(std::io::stdout().lock())
}
