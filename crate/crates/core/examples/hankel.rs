//! Isotropic d = 2 route through order-0 Hankel transforms.
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;
use georank::reconstruct::{isotropic_symbol, reconstruct, EvalPoints, HankelOptions, Method, ReconstructionConfig};

fn main() -> georank::Result<()> {
    let opts = HankelOptions::default();
    for m in [Measure::gaussian(2)?, Measure::cauchy(2)?] {
        let ev = RankEvaluator::exact(m)?;
        let p = ev.measure().radial_profile()?;
        println!("{}: |xi| F u", p.family().name());
        for xi in [0.05, 0.1, 0.25, 0.5] {
            println!("  |xi| = {xi:<4}  {:.10}", isotropic_symbol(p, xi, &opts)?);
        }
        let rep = reconstruct(
            &ev,
            &ReconstructionConfig::with_method(Method::HankelIsotropic),
            &EvalPoints::Radii(vec![0.0, 1.0, 2.0]),
        )?;
        for s in &rep.samples {
            println!(
                "  f_hat({}) = {:.8}  (f = {:.8})",
                s.x[0],
                s.f_hat,
                s.f_reference.unwrap()
            );
        }
    }
    Ok(())
}
