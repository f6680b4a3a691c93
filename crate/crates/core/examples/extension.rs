//! Harmonic extension: Poisson smoothing at heights t and t/2, then Richardson.
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;
use georank::reconstruct::{poisson_smoothing, reconstruct, EvalPoints, Method, ReconstructionConfig};

fn main() -> georank::Result<()> {
    let ev = RankEvaluator::exact(Measure::gaussian(2)?)?;
    let cfg = ReconstructionConfig {
        extension_height: 0.02,
        ..ReconstructionConfig::with_method(Method::Extension)
    };
    let rep = reconstruct(&ev, &cfg, &EvalPoints::Points(vec![vec![0.0, 0.0], vec![1.0, 0.5]]))?;
    let ext = rep.diagnostics.extension.as_ref().unwrap();
    for (i, s) in rep.samples.iter().enumerate() {
        println!(
            "x = {:?}: v(t) = {:.6}  v(t/2) = {:.6}  richardson = {:.8}  f = {:.8}",
            s.x,
            ext.at_height[i],
            ext.at_half_height[i],
            ext.richardson[i],
            s.f_reference.unwrap()
        );
    }
    println!("error ratio between heights: {:.3}", ext.error_ratio.unwrap());

    // on atoms the smoothing is a Poisson-kernel density estimate
    let sample = Measure::gaussian(2)?.sample(20_000, 5)?;
    let emp = RankEvaluator::exact(Measure::empirical(sample, None)?)?;
    for t in [0.3, 0.1, 0.05] {
        println!(
            "20000 atoms, t = {t}: estimate at 0 = {:.4} (f = 0.1592)",
            poisson_smoothing(&emp, &[0.0, 0.0], t, 64)?
        );
    }
    Ok(())
}
