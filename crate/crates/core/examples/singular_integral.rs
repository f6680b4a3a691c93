//! Even dimension: the half-Laplacian as a symmetrized singular integral.
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;
use georank::reconstruct::{reconstruct, EvalPoints, Method, ReconstructionConfig};

fn main() -> georank::Result<()> {
    let ev = RankEvaluator::exact(Measure::cauchy(2)?)?;
    let cfg = ReconstructionConfig::with_method(Method::SingularIntegral);
    let radii: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let rep = reconstruct(&ev, &cfg, &EvalPoints::Radii(radii))?;
    rep.write_csv(std::io::stdout().lock())?;
    let d = &rep.diagnostics;
    eprintln!(
        "eta = {}, r_max = {}: relative sup error {:.1e}, refinement change {:.1e}",
        cfg.eta,
        cfg.r_max,
        d.relative_sup_error.unwrap(),
        d.refinement_change.unwrap_or(f64::NAN)
    );
    Ok(())
}
