use rayon::prelude::*;

use super::{
    parity, reference_density, EvalPoints, ExtensionDiagnostics, Method, ReconstructionConfig, ReconstructionReport,
    Sample,
};
use crate::error::Result;
use crate::measures::Measure;
use crate::quadrature::{integrate_breakpoints, SphereRule};
use crate::rankfield::RankEvaluator;
use crate::specfun::{gamma_d, gamma_fn, Dimension};

/// `2γ_{d+1} Γ(d+1)`, the normalization of the Poisson kernel
/// `P_t(y) = 2γ_{d+1}Γ(d+1) t / (|y|² + t²)^{(d+1)/2}` on `R^d`.
pub fn poisson_constant(d: Dimension) -> f64 {
    let up = Dimension::new(d.get() + 1).expect("positive dimension");
    2.0 * gamma_d(up) * gamma_fn(d.get() as f64 + 1.0).expect("positive argument")
}

fn kernel(c: f64, d: usize, r2: f64, t: f64) -> f64 {
    c * t / (r2 + t * t).powf(0.5 * (d as f64 + 1.0))
}

/// `−∂_{d+1}U(x, t) = E[P_t(x − Z)]`: the Poisson smoothing of `P` at height `t`.
///
/// Atoms are summed exactly. Densities, including those of Monte-Carlo
/// evaluators, are integrated in polar coordinates around `x`, with radial
/// panels that resolve the kernel width `t`.
pub fn poisson_smoothing(ev: &RankEvaluator, x: &[f64], t: f64, angles: usize) -> Result<f64> {
    let d = ev.dim();
    crate::measures::check_dim(d, x)?;
    let dim = d.get();
    let c = poisson_constant(d);
    let density: &dyn Fn(&[f64]) -> f64 = match ev.measure() {
        Measure::Empirical(s) => {
            return Ok(s
                .atoms()
                .zip(s.weights())
                .map(|(z, w)| {
                    let r2: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    w * kernel(c, dim, r2, t)
                })
                .sum())
        }
        Measure::RadialClosedForm(p) => &move |z| p.f(crate::measures::norm(z)),
        Measure::GenericDensity(g) => &*g.density,
    };
    Ok(density_smoothing(density, dim, x, t, angles))
}

fn density_smoothing(f: &dyn Fn(&[f64]) -> f64, dim: usize, x: &[f64], t: f64, angles: usize) -> f64 {
    let d = Dimension::new(dim).expect("positive dimension");
    let c = poisson_constant(d);
    // quasi-random directions in d ≥ 4 grow like resolution^(d−1)
    let sphere = SphereRule::new(d, if dim >= 4 { angles.min(6) } else { angles });
    let mut breaks = vec![0.0, 0.25 * t, t];
    let end = (1e6 * t).max(1e3);
    while *breaks.last().expect("non-empty") < end {
        let b = 2.0 * breaks.last().expect("non-empty");
        breaks.push(b);
    }
    let mut z = vec![0.0; dim];
    integrate_breakpoints(
        |rho| {
            let ang = sphere.integrate(|th| {
                for k in 0..dim {
                    z[k] = x[k] + rho * th[k];
                }
                f(&z)
            });
            ang * rho.powi(dim as i32 - 1) * kernel(c, dim, rho * rho, t)
        },
        &breaks,
        1e-14,
        1e-11,
    )
    .value
}

/// Even-d reconstruction through the harmonic extension to the upper half-space.
///
/// Evaluates the smoothing at heights `t` and `t/2`. For densities the
/// reported value is the Richardson extrapolate `2v(t/2) − v(t)`; for atoms
/// (a Poisson-kernel density estimate with bandwidth `t`) it is `v(t)`.
pub fn reconstruct_extension(
    ev: &RankEvaluator,
    cfg: &ReconstructionConfig,
    points: &EvalPoints,
) -> Result<ReconstructionReport> {
    let d = ev.dim();
    parity("extension reconstruction", d, false)?;
    cfg.validate()?;
    let pts = points.resolve(d)?;
    let t = cfg.extension_height;
    let pairs: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|x| {
            Ok((
                poisson_smoothing(ev, x, t, cfg.angles)?,
                poisson_smoothing(ev, x, 0.5 * t, cfg.angles)?,
            ))
        })
        .collect::<Result<_>>()?;
    let atomic = matches!(ev.measure(), Measure::Empirical(_));
    let richardson: Vec<f64> = pairs.iter().map(|(a, b)| 2.0 * b - a).collect();
    let refs: Vec<Option<f64>> = pts.iter().map(|x| reference_density(ev, x)).collect();
    let error_ratio = if refs.iter().all(Option::is_some) && !refs.is_empty() {
        let (mut e1, mut e2) = (0.0f64, 0.0f64);
        for ((a, b), f) in pairs.iter().zip(&refs) {
            let f = f.expect("checked");
            e1 = e1.max((a - f).abs());
            e2 = e2.max((b - f).abs());
        }
        (e2 > 0.0).then(|| e1 / e2)
    } else {
        None
    };
    let samples = pts
        .into_iter()
        .zip(&pairs)
        .zip(&richardson)
        .zip(refs)
        .map(|(((x, &(a, _)), &rich), f_reference)| Sample {
            x,
            f_hat: if atomic { a } else { rich },
            f_reference,
        })
        .collect();
    let path = if atomic {
        "Poisson-kernel smoothing of the atoms at height t"
    } else {
        "Poisson-kernel smoothing of the density, Richardson in t"
    };
    let mut report = ReconstructionReport::from_samples(
        Method::Extension,
        cfg,
        path,
        samples,
        matches!(points, EvalPoints::Radii(_)),
    );
    report.diagnostics.extension = Some(ExtensionDiagnostics {
        height: t,
        at_height: pairs.iter().map(|p| p.0).collect(),
        at_half_height: pairs.iter().map(|p| p.1).collect(),
        richardson,
        error_ratio,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn normalization_identity() {
        for d in 1..=8 {
            let dd = Dimension::new(d).unwrap();
            let half = 0.5 * (d as f64 + 1.0);
            let v = poisson_constant(dd) * PI.powf(half) / gamma_fn(half).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "d = {d}: {v}");
        }
    }

    #[test]
    fn constant_density_is_preserved() {
        let one = |_: &[f64]| 1.0;
        for t in [0.5, 0.01] {
            let v = density_smoothing(&one, 2, &[0.3, -0.7], t, 64);
            // mass beyond the last panel is t/end ≤ 1e-6
            assert!((v - 1.0).abs() < 2e-6, "{v}");
        }
    }

    #[test]
    fn gaussian_at_origin() {
        let ev = RankEvaluator::exact(Measure::gaussian(2).unwrap()).unwrap();
        let v = poisson_smoothing(&ev, &[0.0, 0.0], 0.01, 64).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 2e-3);
    }

    #[test]
    fn empirical_sample_is_a_density_estimate() {
        let m = Measure::gaussian(2).unwrap();
        let sample = m.sample(100_000, 17).unwrap();
        let ev = RankEvaluator::exact(Measure::empirical(sample, None).unwrap()).unwrap();
        let v = poisson_smoothing(&ev, &[0.0, 0.0], 0.05, 64).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 0.02);
    }

    #[test]
    fn generic_density_quadrature() {
        // uniform law on the unit square, evaluated at its centre
        let m = Measure::generic(
            "unit square",
            2,
            |x| if x.iter().all(|c| c.abs() <= 0.5) { 1.0 } else { 0.0 },
            |rng| vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
        )
        .unwrap();
        let ev = RankEvaluator::monte_carlo(m, 10, 1).unwrap();
        let v = poisson_smoothing(&ev, &[0.0, 0.0], 0.01, 256).unwrap();
        assert!((v - 1.0).abs() < 0.02);
    }

    #[test]
    fn odd_dimension_rejected() {
        let ev = RankEvaluator::exact(Measure::gaussian(3).unwrap()).unwrap();
        let r = reconstruct_extension(&ev, &ReconstructionConfig::default(), &EvalPoints::Radii(vec![0.0]));
        assert!(matches!(r, Err(Error::Parity { .. })));
    }
}
