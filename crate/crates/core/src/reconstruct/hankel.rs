use std::f64::consts::PI;

use rayon::prelude::*;

use super::{parity, Method, ReconstructionConfig, ReconstructionReport, Sample};
use crate::error::{Error, Result};
use crate::measures::RadialProfile;
use crate::quadrature::GaussLegendre;
use crate::rankfield::{Quadrature, RankEvaluator};
use crate::specfun::{bessel_j0, bessel_j0_zero};

/// Controls of the oscillatory quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelOptions {
    /// Gauss–Legendre nodes per interval between consecutive zeros of `J₀`.
    pub quad_nodes: usize,
    /// Integrate directly at least up to this abscissa before extrapolating.
    pub direct_until: f64,
    /// Partial sums handed to the Euler transform.
    pub euler_terms: usize,
    /// Bound on `φ(s)·s^{3/2}` at the last abscissa used.
    pub decay_tolerance: f64,
}

impl Default for HankelOptions {
    fn default() -> Self {
        HankelOptions {
            quad_nodes: 20,
            direct_until: 100.0,
            euler_terms: 30,
            decay_tolerance: 1e-2,
        }
    }
}

/// `∫₀^∞ f(s) J₀(ks) ds` split at the zeros of `J₀(ks)`: the intervals up
/// to `direct_until` are summed directly and the alternating remainder is
/// summed by repeated averaging of partial sums (Euler transform). Returns
/// the value and the last abscissa touched.
fn j0_integral<F: Fn(f64) -> f64>(f: F, k: f64, opts: &HankelOptions) -> (f64, f64) {
    let gl = GaussLegendre::new(opts.quad_nodes);
    let interval = |a: f64, b: f64| gl.integrate(|s| f(s) * bessel_j0(k * s), a, b);
    let mut a = 0.0;
    let mut n = 1;
    let mut sum = 0.0;
    loop {
        let b = bessel_j0_zero(n) / k;
        sum += interval(a, b);
        a = b;
        n += 1;
        if a >= opts.direct_until && n > 8 {
            break;
        }
    }
    let mut partial = Vec::with_capacity(opts.euler_terms);
    for _ in 0..opts.euler_terms {
        let b = bessel_j0_zero(n) / k;
        sum += interval(a, b);
        partial.push(sum);
        a = b;
        n += 1;
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    (partial[0], a)
}

/// Order-zero Hankel transform `(𝓗₀φ)(r) = ∫₀^∞ φ(s) J₀(sr) √(sr) ds`.
///
/// Needs `φ(s) = o(s^{-3/2})`; the decay error is raised when
/// `|φ(s)|·s^{3/2}` at the last abscissa exceeds `1e-2`.
pub fn hankel_transform_order0<F: Fn(f64) -> f64>(phi: F, r: f64, quad_nodes: usize) -> Result<f64> {
    let opts = HankelOptions {
        quad_nodes,
        ..Default::default()
    };
    hankel_with(&phi, r, &opts)
}

fn hankel_with<F: Fn(f64) -> f64>(phi: &F, r: f64, opts: &HankelOptions) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("Hankel transform needs r > 0, got {r}")));
    }
    let (v, end) = j0_integral(|s| phi(s) * (s * r).sqrt(), r, opts);
    let decay = phi(end).abs() * end.powf(1.5);
    if !(decay <= opts.decay_tolerance) {
        return Err(Error::Decay(format!("|φ(s)| s^(3/2) = {decay:e} at s = {end:e}")));
    }
    Ok(v)
}

/// `|ξ|·(ℱu)(ξ)` for `u = h(|x|)` in the plane, at `|ξ| = rho`.
///
/// With `ℱu(ξ) = √(2π/|ξ|) (𝓗₀ h̃)(2π|ξ|)`, `h̃(s) = √s h(s)`, the slowly
/// decaying part `s^{-1/2}` of `h̃` transforms exactly (`𝓗₀[s^{-1/2}](k) = k^{-1/2}`),
/// and the rest `ψ(s) = (s h(s) − 1)/√s` goes through the quadrature.
pub fn isotropic_symbol(p: &RadialProfile, rho: f64, opts: &HankelOptions) -> Result<f64> {
    if p.dim().get() != 2 {
        return Err(Error::Parity {
            method: "isotropic Hankel reconstruction",
            required: "a two-dimensional",
            d: p.dim().get(),
        });
    }
    if rho == 0.0 {
        return Ok(1.0);
    }
    let k = 2.0 * PI * rho;
    let psi = |s: f64| (s * p.h(s) - 1.0) / s.sqrt();
    let rest = hankel_with(&psi, k, opts)?;
    // |ξ| √(2π/|ξ|) (k^{-1/2} + 𝓗₀ψ(k)) = 1 + √k 𝓗₀ψ(k)
    Ok(1.0 + k.sqrt() * rest)
}

/// Isotropic d = 2 reconstruction. With `(−Δ)^{1/2} = ℱ^{-1} 2π|ξ| ℱ` and
/// `γ₂ = 1/(2π)`, `f = ℱ^{-1}(w)` for `w = |ξ|ℱh`, and the inverse isotropic
/// transform is `f(r) = 2π ∫₀^∞ w(ρ) J₀(2πρr) ρ dρ`.
pub fn reconstruct_isotropic_hankel(
    ev: &RankEvaluator,
    cfg: &ReconstructionConfig,
    radii: &[f64],
) -> Result<ReconstructionReport> {
    parity("isotropic Hankel reconstruction", ev.dim(), false)?;
    cfg.validate()?;
    if ev.quadrature() != Quadrature::ClosedFormRadial || ev.dim().get() != 2 {
        return Err(Error::UnsupportedVariant {
            variant: ev.measure().variant_name(),
            op: "isotropic Hankel reconstruction (needs a closed-form radial law in d = 2)",
        });
    }
    let p = ev.measure().radial_profile()?;
    let opts = HankelOptions::default();

    // outer cutoff where the symbol has died out
    let mut rho_max = 0.5;
    loop {
        let w = isotropic_symbol(p, rho_max, &opts)?;
        if w.abs() < 1e-13 || rho_max >= 20.0 {
            break;
        }
        rho_max += 0.5;
    }
    let panels = (rho_max / 0.05).ceil() as usize;
    let width = rho_max / panels as f64;
    let gl = GaussLegendre::new(16);
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|i| {
            let a = i as f64 * width;
            gl.mapped(a, a + width).collect::<Vec<_>>()
        })
        .collect();
    let table: Vec<f64> = nodes
        .par_iter()
        .map(|&(rho, _)| isotropic_symbol(p, rho, &opts))
        .collect::<Result<_>>()?;
    let samples = radii
        .iter()
        .map(|&r| {
            let f_hat: f64 = 2.0
                * PI
                * nodes
                    .iter()
                    .zip(&table)
                    .map(|(&(rho, w), &s)| w * s * bessel_j0(2.0 * PI * rho * r) * rho)
                    .sum::<f64>();
            Sample {
                x: vec![r, 0.0],
                f_hat,
                f_reference: Some(p.f(r)),
            }
        })
        .collect();
    Ok(ReconstructionReport::from_samples(
        Method::HankelIsotropic,
        cfg,
        "Hankel transform of the closed-form divergence",
        samples,
        true,
    ))
}
