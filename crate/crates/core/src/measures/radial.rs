//! Closed-form rank profiles of the spherically symmetric reference laws.
//!
//! For a radial law the rank is `R(x) = g(|x|) x/|x|` and its divergence is
//! `h(r) = g'(r) + (d-1) g(r)/r`. Every closed form below has a removable
//! singularity at `r = 0`, so for `r < SERIES_RADIUS` all quantities are
//! evaluated from the even power series `h(r) = Σ c_k r^{2k}`, from which
//! `g(r) = Σ c_k r^{2k+1} / (2k+d)` follows by integrating `(r^{d-1} g)' = r^{d-1} h`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_breakpoints;
use crate::specfun::{bessel_i0e, bessel_i1e, erf, gamma_fn, sphere_area, std_normal_pdf, Dimension};

/// Below this radius profiles are summed from their power series.
pub const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialFamily {
    Gaussian,
    Cauchy,
}

impl RadialFamily {
    pub fn name(self) -> &'static str {
        match self {
            RadialFamily::Gaussian => "gaussian",
            RadialFamily::Cauchy => "cauchy",
        }
    }
}

impl std::str::FromStr for RadialFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(RadialFamily::Gaussian),
            "cauchy" => Ok(RadialFamily::Cauchy),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// Scalar profile functions of a radial closed-form law in d = 2 or 3.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    family: RadialFamily,
    dim: Dimension,
    coeffs: Vec<f64>,
}

impl RadialProfile {
    pub fn new(family: RadialFamily, dim: Dimension) -> Result<Self> {
        if !(2..=3).contains(&dim.get()) {
            return Err(Error::Domain(format!(
                "closed-form radial profiles exist only for d = 2, 3 (got {dim})"
            )));
        }
        let coeffs = series_coefficients(family, dim.get());
        Ok(RadialProfile { family, dim, coeffs })
    }

    pub fn family(&self) -> RadialFamily {
        self.family
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    fn d(&self) -> f64 {
        self.dim.get() as f64
    }

    // Σ_k c_k a(k) r^{2k - shift}; terms with a(k) = 0 are skipped so that
    // negative powers of r never appear.
    fn series<A: Fn(f64) -> f64>(&self, r: f64, shift: i32, a: A) -> f64 {
        let mut sum = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            let ak = a(k as f64);
            if ak == 0.0 {
                continue;
            }
            let t = c * ak * r.powi(2 * k as i32 - shift);
            sum += t;
            if k > 4 && t.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    /// Rank norm profile `g(r) = |R(x)|` at `|x| = r`.
    pub fn g(&self, r: f64) -> f64 {
        let r = r.abs();
        if r < SERIES_RADIUS {
            let d = self.d();
            return self.series(r, -1, |k| 1.0 / (2.0 * k + d));
        }
        match (self.family, self.dim.get()) {
            (RadialFamily::Gaussian, 3) => {
                let e = erf(r * std::f64::consts::FRAC_1_SQRT_2);
                2.0 * std_normal_pdf(r) / r + (r * r - 1.0) / (r * r) * e
            }
            (RadialFamily::Gaussian, _) => {
                let x = 0.25 * r * r;
                (PI / 2.0).sqrt() * 0.5 * r * (bessel_i0e(x) + bessel_i1e(x))
            }
            (RadialFamily::Cauchy, 3) => 2.0 * ((1.0 + r * r) * r.atan() - r) / (PI * r * r),
            (RadialFamily::Cauchy, _) => r / (1.0 + (1.0 + r * r).sqrt()),
        }
    }

    pub fn g_prime(&self, r: f64) -> f64 {
        let r = r.abs();
        if r < SERIES_RADIUS {
            let d = self.d();
            return self.series(r, 0, |k| (2.0 * k + 1.0) / (2.0 * k + d));
        }
        self.h(r) - (self.d() - 1.0) * self.g(r) / r
    }

    pub fn g_second(&self, r: f64) -> f64 {
        let r = r.abs();
        if r < SERIES_RADIUS {
            let d = self.d();
            return self.series(r, 1, |k| (2.0 * k + 1.0) * 2.0 * k / (2.0 * k + d));
        }
        self.h_prime(r) - (self.d() - 1.0) * (self.g_prime(r) * r - self.g(r)) / (r * r)
    }

    /// Divergence profile `h(r) = g'(r) + (d-1) g(r)/r`.
    pub fn h(&self, r: f64) -> f64 {
        let r = r.abs();
        if r < SERIES_RADIUS {
            return self.series(r, 0, |_| 1.0);
        }
        match (self.family, self.dim.get()) {
            (RadialFamily::Gaussian, 3) => 2.0 * erf(r * std::f64::consts::FRAC_1_SQRT_2) / r,
            (RadialFamily::Gaussian, _) => (PI / 2.0).sqrt() * bessel_i0e(0.25 * r * r),
            (RadialFamily::Cauchy, 3) => 4.0 * r.atan() / (PI * r),
            (RadialFamily::Cauchy, _) => 1.0 / (1.0 + r * r).sqrt(),
        }
    }

    pub fn h_prime(&self, r: f64) -> f64 {
        let r = r.abs();
        if r < SERIES_RADIUS {
            return self.series(r, 1, |k| 2.0 * k);
        }
        match (self.family, self.dim.get()) {
            (RadialFamily::Gaussian, 3) => {
                let e = erf(r * std::f64::consts::FRAC_1_SQRT_2);
                (4.0 * r * std_normal_pdf(r) - 2.0 * e) / (r * r)
            }
            (RadialFamily::Gaussian, _) => {
                let x = 0.25 * r * r;
                (PI / 2.0).sqrt() * 0.5 * r * (bessel_i1e(x) - bessel_i0e(x))
            }
            (RadialFamily::Cauchy, 3) => 4.0 / PI * (1.0 / (r * (1.0 + r * r)) - r.atan() / (r * r)),
            (RadialFamily::Cauchy, _) => -r / (1.0 + r * r).powf(1.5),
        }
    }

    pub fn h_second(&self, r: f64) -> f64 {
        let r = r.abs();
        if r < SERIES_RADIUS {
            return self.series(r, 2, |k| 2.0 * k * (2.0 * k - 1.0));
        }
        match (self.family, self.dim.get()) {
            (RadialFamily::Gaussian, 3) => {
                let e = erf(r * std::f64::consts::FRAC_1_SQRT_2);
                let ph = std_normal_pdf(r);
                -4.0 * ph - 2.0 * (4.0 * r * ph - 2.0 * e) / (r * r * r)
            }
            (RadialFamily::Gaussian, _) => {
                let x = 0.25 * r * r;
                let (e0, e1) = (bessel_i0e(x), bessel_i1e(x));
                (PI / 2.0).sqrt() * (0.5 * (e1 - e0) + 0.5 * r * r * (e0 - e1) - e1)
            }
            (RadialFamily::Cauchy, 3) => {
                let q = 1.0 + r * r;
                4.0 / PI * (-2.0 / (q * q) - 2.0 / (r * r * q) + 2.0 * r.atan() / (r * r * r))
            }
            (RadialFamily::Cauchy, _) => {
                let q = 1.0 + r * r;
                -1.0 / q.powf(1.5) + 3.0 * r * r / q.powf(2.5)
            }
        }
    }

    /// Laplacian of the divergence `x ↦ h(|x|)`: `h'' + (d-1) h'/r`.
    pub fn laplacian_h(&self, r: f64) -> f64 {
        let r = r.abs();
        let d = self.d();
        if r < SERIES_RADIUS {
            return self.series(r, 2, |k| 2.0 * k * (2.0 * k + d - 2.0));
        }
        self.h_second(r) + (d - 1.0) * self.h_prime(r) / r
    }

    /// Density at `|x| = r`.
    pub fn f(&self, r: f64) -> f64 {
        let d = self.d();
        match self.family {
            RadialFamily::Gaussian => (2.0 * PI).powf(-0.5 * d) * (-0.5 * r * r).exp(),
            RadialFamily::Cauchy => {
                let c = gamma_fn(0.5 * (d + 1.0)).expect("positive argument") / PI.powf(0.5 * (d + 1.0));
                c * (1.0 + r * r).powf(-0.5 * (d + 1.0))
            }
        }
    }

    /// `g(r)/r`, smooth and even; the rank is `φ(|x|) x`.
    pub(crate) fn phi(&self, r: f64) -> f64 {
        if r < SERIES_RADIUS {
            let d = self.d();
            return self.series(r, 0, |k| 1.0 / (2.0 * k + d));
        }
        self.g(r) / r
    }

    /// `φ'(r)/r`.
    pub(crate) fn phi_d1(&self, r: f64) -> f64 {
        if r < SERIES_RADIUS {
            let d = self.d();
            return self.series(r, 2, |k| 2.0 * k / (2.0 * k + d));
        }
        (self.g_prime(r) * r - self.g(r)) / (r * r * r)
    }

    /// `(φ'(r)/r)'/r`.
    pub(crate) fn phi_d2(&self, r: f64) -> f64 {
        if r < SERIES_RADIUS {
            let d = self.d();
            return self.series(r, 4, |k| 2.0 * k * (2.0 * k - 2.0) / (2.0 * k + d));
        }
        let (g, g1, g2) = (self.g(r), self.g_prime(r), self.g_second(r));
        (g2 * r * r - 3.0 * g1 * r + 3.0 * g) / r.powi(5)
    }

    /// Solves `g(r) = beta` for `r >= 0`; `g` is strictly increasing.
    pub fn g_inverse(&self, beta: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Domain(format!("rank level must lie in [0, 1), got {beta}")));
        }
        if beta == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.g(hi) < beta {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Bracket(format!("g(r) = {beta} not bracketed")));
            }
        }
        let lo = if hi > 1.0 { 0.5 * hi } else { 0.0 };
        Ok(monotone_root(|r| self.g(r) - beta, |r| self.g_prime(r), lo, hi))
    }

    /// `P[|Z| <= radius]` by radial quadrature of the density.
    pub fn ball_content(&self, radius: f64) -> f64 {
        let area = sphere_area(self.dim);
        let dm1 = self.dim.get() as i32 - 1;
        let mut breaks = vec![0.0];
        let mut b = 1.0;
        while b < radius {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(radius);
        integrate_breakpoints(|r| area * r.powi(dm1) * self.f(r), &breaks, 1e-15, 1e-14).value
    }
}

/// Safeguarded Newton on an increasing function with a sign change on `[lo, hi]`.
pub(crate) fn monotone_root<F, D>(f: F, df: D, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dfx = df(x);
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

fn series_coefficients(family: RadialFamily, d: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(SERIES_TERMS);
    match (family, d) {
        (RadialFamily::Gaussian, 3) => {
            // 2 erf(r/√2)/r
            let mut fact = 1.0;
            for k in 0..SERIES_TERMS {
                if k > 0 {
                    fact *= k as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                c.push(2.0 * (2.0 / PI).sqrt() * sign / (2f64.powi(k as i32) * fact * (2.0 * k as f64 + 1.0)));
            }
        }
        (RadialFamily::Gaussian, _) => {
            // √(π/2) 1F1(1/2; 1; -r²/2)
            let mut t = (PI / 2.0).sqrt();
            for k in 0..SERIES_TERMS {
                c.push(t);
                let kf = k as f64;
                t *= (kf + 0.5) * -0.5 / ((kf + 1.0) * (kf + 1.0));
            }
        }
        (RadialFamily::Cauchy, 3) => {
            // 4 arctan(r)/(π r)
            for k in 0..SERIES_TERMS {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                c.push(4.0 / PI * sign / (2.0 * k as f64 + 1.0));
            }
        }
        (RadialFamily::Cauchy, _) => {
            // (1 + r²)^{-1/2}
            let mut t = 1.0;
            for k in 0..SERIES_TERMS {
                c.push(t);
                let kf = k as f64;
                t *= -(kf + 0.5) / (kf + 1.0);
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all() -> Vec<RadialProfile> {
        let mut v = Vec::new();
        for fam in [RadialFamily::Gaussian, RadialFamily::Cauchy] {
            for d in [2, 3] {
                v.push(RadialProfile::new(fam, Dimension::new(d).unwrap()).unwrap());
            }
        }
        v
    }

    #[test]
    fn reference_values() {
        let g3 = RadialProfile::new(RadialFamily::Gaussian, Dimension::new(3).unwrap()).unwrap();
        assert_relative_eq!(g3.g(1.0), 2.0 * std_normal_pdf(1.0), max_relative = 1e-14);
        assert_relative_eq!(g3.g(1.0), 0.483_941_449_038_286_7, max_relative = 1e-14);
        let c3 = RadialProfile::new(RadialFamily::Cauchy, Dimension::new(3).unwrap()).unwrap();
        assert_relative_eq!(c3.h(1.0), 1.0, max_relative = 1e-14);
        let c2 = RadialProfile::new(RadialFamily::Cauchy, Dimension::new(2).unwrap()).unwrap();
        assert_eq!(c2.h(0.0), 1.0);
        // frozen from 2-D quadrature of E[(x - Z)/|x - Z|] (mpmath, 30 digits)
        let g2 = RadialProfile::new(RadialFamily::Gaussian, Dimension::new(2).unwrap()).unwrap();
        for (r, v) in [
            (0.5, 0.303_835_205_263_479_1),
            (1.0, 0.557_179_468_382_247_8),
            (2.0, 0.844_320_163_640_556_6),
            (4.0, 0.966_938_777_053_816_4),
        ] {
            assert_relative_eq!(g2.g(r), v, max_relative = 1e-13);
        }
    }

    #[test]
    fn series_and_closed_forms_agree_at_switch() {
        for p in all() {
            let below = SERIES_RADIUS * (1.0 - 1e-12);
            let above = SERIES_RADIUS;
            for (name, f) in [
                ("g", RadialProfile::g as fn(&RadialProfile, f64) -> f64),
                ("g'", RadialProfile::g_prime),
                ("g''", RadialProfile::g_second),
                ("h", RadialProfile::h),
                ("h'", RadialProfile::h_prime),
                ("h''", RadialProfile::h_second),
                ("phi", RadialProfile::phi),
                ("phi_d1", RadialProfile::phi_d1),
                ("phi_d2", RadialProfile::phi_d2),
            ] {
                let (a, b) = (f(&p, below), f(&p, above));
                assert!(
                    (a - b).abs() <= 1e-11 * (1.0 + b.abs()),
                    "{name} {:?} d={}: {a} vs {b}",
                    p.family(),
                    p.dim()
                );
            }
        }
    }

    #[test]
    fn profile_basic_invariants() {
        for p in all() {
            assert_eq!(p.g(0.0), 0.0);
            let mut prev = 0.0;
            for i in 1..400 {
                let r = i as f64 * 0.05;
                let g = p.g(r);
                assert!(g >= prev, "g not monotone at {r}");
                prev = g;
            }
            assert!((1.0 - p.g(50.0)).abs() < 0.05);
            for i in 0..200 {
                let r = 0.05 + i as f64 * (20.0 - 0.05) / 199.0;
                let lhs = p.h(r);
                let rhs = p.g_prime(r) + (p.d() - 1.0) * p.g(r) / r;
                assert!((lhs - rhs).abs() < 1e-10, "h identity at {r}");
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let step = 1e-5;
        for p in all() {
            for i in 0..50 {
                let r = 0.1 + i as f64 * (10.0 - 0.1) / 49.0;
                let fd = |f: &dyn Fn(f64) -> f64| (f(r + step) - f(r - step)) / (2.0 * step);
                assert!((fd(&|x| p.g(x)) - p.g_prime(r)).abs() < 1e-6);
                assert!((fd(&|x| p.g_prime(x)) - p.g_second(r)).abs() < 1e-6);
                assert!((fd(&|x| p.h(x)) - p.h_prime(r)).abs() < 1e-6);
                assert!((fd(&|x| p.h_prime(x)) - p.h_second(r)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn g_inverse_roundtrip() {
        for p in all() {
            for &beta in &[0.0, 0.1, 0.4, 0.7, 0.95, 0.999] {
                let r = p.g_inverse(beta).unwrap();
                assert!((p.g(r) - beta).abs() < 1e-14);
            }
            assert!(p.g_inverse(1.0).is_err());
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for p in all() {
            let mass = p.ball_content(40.0);
            let tol = match p.family() {
                RadialFamily::Gaussian => 1e-6,
                RadialFamily::Cauchy => 1e-3,
            };
            // Cauchy tail beyond 40 is (d-1)/40-ish; compare against the closed form instead
            let expect = match (p.family(), p.dim().get()) {
                (RadialFamily::Gaussian, _) => 1.0,
                (RadialFamily::Cauchy, 2) => 1.0 - 1.0 / (1.0f64 + 1600.0).sqrt(),
                (RadialFamily::Cauchy, _) => 2.0 / PI * (40f64.atan() - 40.0 / 1601.0),
            };
            assert!((mass - expect).abs() < tol, "{:?} {}", p.family(), mass);
        }
    }
}
