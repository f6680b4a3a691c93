//! Normalizing constants behind the reconstruction operator.
use georank::reconstruct::poisson_constant;
use georank::specfun::{c_ds, gamma_d, gamma_fn, lambda_dl, sphere_area, Dimension};

fn main() -> georank::Result<()> {
    println!(" d  gamma_d            c_(d,1/2)          |S^(d-1)|          Poisson norm. check");
    for d in 1..=8 {
        let dim = Dimension::new(d)?;
        let h = 0.5 * (d as f64 + 1.0);
        let check = poisson_constant(dim) * std::f64::consts::PI.powf(h) / gamma_fn(h)?;
        println!(
            "{d:>2}  {:<17.12e}  {:<17.12e}  {:<17.12e}  {check:.15}",
            gamma_d(dim),
            c_ds(dim, 0.5)?,
            sphere_area(dim)
        );
    }
    // (−Δ)^l (1/|x|) = Λ_{d,l} / |x|^{2l+1}
    for (d, l) in [(5, 1), (7, 1), (7, 2), (9, 3)] {
        println!("Lambda_({d},{l}) = {}", lambda_dl(Dimension::new(d)?, l));
    }
    Ok(())
}
