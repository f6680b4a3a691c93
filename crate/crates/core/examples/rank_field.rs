//! Geometric ranks of a closed-form law, an empirical sample and a Monte-Carlo evaluator.
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;

fn main() -> georank::Result<()> {
    let gauss = RankEvaluator::exact(Measure::gaussian(2)?)?;
    for x in [[0.0, 0.0], [1.0, 0.0], [2.0, 2.0], [-5.0, 1.0]] {
        let r = gauss.rank(&x)?;
        println!(
            "gaussian  R({x:?}) = [{:.6}, {:.6}]  |R| = {:.6}",
            r[0],
            r[1],
            r[0].hypot(r[1])
        );
    }

    // atoms carry K(0) = 0, so the rank at an atom skips that atom
    let atoms = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let emp = RankEvaluator::exact(Measure::empirical(atoms, None)?)?;
    for x in [[0.5, 0.5], [0.0, 0.0], [3.0, -1.0]] {
        println!("empirical R({x:?}) = {:?}", emp.rank(&x)?);
    }

    let mc = RankEvaluator::monte_carlo(Measure::cauchy(3)?, 50_000, 7)?;
    let exact = RankEvaluator::exact(Measure::cauchy(3)?)?;
    let x = [0.5, -0.2, 1.0];
    let (r, se) = mc.rank_with_stderr(&x)?;
    println!("cauchy d=3 Monte Carlo {r:.4?} ± {se:.4?}");
    println!("cauchy d=3 closed form {:.4?}", exact.rank(&x)?);
    println!("divergence at x: {:.6}", exact.divergence(&x)?);
    Ok(())
}
