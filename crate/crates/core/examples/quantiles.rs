//! Geometric quantiles Q(αu) and the roundtrip R(Q(αu)) = αu.
use georank::measures::Measure;
use georank::quantile::{rank_of_quantile_roundtrip, solve_quantile, QuantileQuery};
use georank::rankfield::RankEvaluator;

fn main() -> georank::Result<()> {
    let ev = RankEvaluator::exact(Measure::gaussian(2)?)?;
    println!("gaussian d=2, u = (0.6, 0.8)");
    for alpha in [0.0, 0.25, 0.5, 0.75, 0.9, 0.99] {
        let q = QuantileQuery::new(alpha, vec![0.6, 0.8])?;
        let x = solve_quantile(&ev, &q, 1e-12)?;
        println!("  alpha {alpha:<4}  Q = [{:>9.5}, {:>9.5}]", x[0], x[1]);
    }

    let sample = Measure::cauchy(2)?.sample(500, 3)?;
    let emp = RankEvaluator::exact(Measure::empirical(sample, None)?)?;
    let q = QuantileQuery::along(0.5, &[1.0, 1.0])?;
    let x = solve_quantile(&emp, &q, 1e-10)?;
    println!("empirical (500 Cauchy draws) Q(0.5 u) = {x:.5?}");
    println!(
        "  residual |R(Q) - alpha u| = {:.1e}",
        rank_of_quantile_roundtrip(&emp, &q, 1e-10)?
    );
    Ok(())
}
