//! Probability content of balls from the rank field, and re-indexing by content.
use georank::depth::{probability_content_surface, reindexed_rank, uniformization_ks, ContentPath, ThetaTable};
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;

fn main() -> georank::Result<()> {
    let ev = RankEvaluator::exact(Measure::gaussian(3)?)?;
    let p = ev.measure().radial_profile()?;
    for r in [0.5, 1.0, 2.0] {
        let a = probability_content_surface(&ev, r, ContentPath::Analytic)?;
        let g = probability_content_surface(
            &ev,
            r,
            ContentPath::Grid {
                spacing: 0.05,
                order: 4,
            },
        )?;
        println!(
            "R = {r}: surface (analytic) {a:.10}  surface (grid) {g:.10}  radial {:.10}",
            p.ball_content(r)
        );
    }

    let table = ThetaTable::new(&ev, 0, 0)?;
    for beta in [0.25, 0.4839414490382867, 0.75] {
        println!("theta({beta:.4}) = {:.6}", table.theta(beta)?);
    }
    println!(
        "re-indexed rank at (1, 0, 0): {:.6?}",
        reindexed_rank(&ev, &table, &[1.0, 0.0, 0.0])?
    );

    let ev2 = RankEvaluator::exact(Measure::gaussian(2)?)?;
    let n = 100_000;
    let ks = uniformization_ks(&ev2, &ThetaTable::new(&ev2, n, 1)?, n, 2)?;
    println!(
        "gaussian d=2: KS of theta(|R(Z)|) vs uniform = {ks:.2e} (1% critical value {:.2e})",
        1.63 / (n as f64).sqrt()
    );
    Ok(())
}
