use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::parity;
use crate::error::{Error, Result};
use crate::measures::{check_dim, norm};
use crate::quadrature::{GaussLegendre, SphereRule};
use crate::rankfield::RankEvaluator;
use crate::specfun::{gamma_d, Dimension};

/// `ψ(x) = q(t)·exp(1 − 1/(1 − t/ρ²))` for `t = |x − c|² < ρ²`, zero outside,
/// with `q(t) = Σ poly[k] t^k`. So `ψ(c) = poly[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    pub poly: Vec<f64>,
}

/// Both sides of `∫ ψ dP = ∫ ⟨R_P, 𝓛*ψ⟩ dx` and their gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `∫ ⟨R_P(x), 𝓛*ψ(x)⟩ dx`.
    pub lhs: f64,
    /// `∫ ψ dP`.
    pub rhs: f64,
    pub residual: f64,
    /// Radial nodes (and angular resolution) of the accepted quadrature.
    pub nodes: usize,
}

// Truncated power series in s = t − t₀.
type Series = Vec<f64>;

fn mul(a: &[f64], b: &[f64]) -> Series {
    let n = a.len().min(b.len());
    (0..n).map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum()).collect()
}

fn recip(a: &[f64]) -> Series {
    let mut b = vec![0.0; a.len()];
    b[0] = 1.0 / a[0];
    for k in 1..a.len() {
        b[k] = -(1..=k).map(|j| a[j] * b[k - j]).sum::<f64>() / a[0];
    }
    b
}

fn exp(a: &[f64]) -> Series {
    let mut e = vec![0.0; a.len()];
    e[0] = a[0].exp();
    for k in 1..a.len() {
        e[k] = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum::<f64>() / k as f64;
    }
    e
}

fn deriv(a: &[f64]) -> Series {
    (1..a.len()).map(|k| k as f64 * a[k]).collect()
}

/// Laplacian of `x ↦ B(|x − c|²)` in `R^d`: `4t B'' + 2d B'`.
fn radial_laplacian(b: &[f64], t0: f64, d: usize) -> Series {
    let b1 = deriv(b);
    let b2 = deriv(&b1);
    (0..b2.len())
        .map(|k| {
            let shifted = if k > 0 { b2[k - 1] } else { 0.0 };
            4.0 * (t0 * b2[k] + shifted) + 2.0 * d as f64 * b1[k]
        })
        .collect()
}

impl TestFunction {
    pub fn bump(center: Vec<f64>, radius: f64) -> Self {
        TestFunction {
            center,
            radius,
            poly: vec![1.0],
        }
    }

    fn validate(&self, d: Dimension) -> Result<()> {
        check_dim(d, &self.center)?;
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Domain(format!(
                "test function radius must be positive, got {}",
                self.radius
            )));
        }
        if self.poly.is_empty() || self.poly.iter().chain(&self.center).any(|v| !v.is_finite()) {
            return Err(Error::Domain("test function needs finite coefficients".into()));
        }
        Ok(())
    }

    fn t(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Taylor coefficients of `B(t) = q(t)·bump(t)` at `t0`, or `None` outside the support.
    fn series(&self, t0: f64, len: usize) -> Option<Series> {
        let rho2 = self.radius * self.radius;
        let u0 = 1.0 - t0 / rho2;
        if u0 <= 0.0 || 1.0 - 1.0 / u0 < -700.0 {
            return None;
        }
        let mut u = vec![0.0; len];
        u[0] = u0;
        if len > 1 {
            u[1] = -1.0 / rho2;
        }
        let mut arg: Series = recip(&u).iter().map(|c| -c).collect();
        arg[0] += 1.0;
        let bump = exp(&arg);
        // q re-expanded around t0 by Horner steps
        let mut q = vec![0.0; len];
        for &c in self.poly.iter().rev() {
            let mut next = vec![0.0; len];
            for k in 0..len {
                next[k] = t0 * q[k] + if k > 0 { q[k - 1] } else { 0.0 };
            }
            next[0] += c;
            q = next;
        }
        Some(mul(&q, &bump))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.series(self.t(x), 1).map_or(0.0, |s| s[0])
    }

    /// `𝓛*ψ(x) = −γ_d ∇(−Δ)^{(d−1)/2} ψ(x)` for odd `d`, by exact series arithmetic.
    pub fn adjoint(&self, x: &[f64], d: Dimension) -> Vec<f64> {
        let m = (d.get() - 1) / 2;
        let t0 = self.t(x);
        let Some(mut b) = self.series(t0, 2 * m + 2) else {
            return vec![0.0; x.len()];
        };
        for _ in 0..m {
            b = radial_laplacian(&b, t0, d.get());
        }
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let s = -gamma_d(d) * sign * 2.0 * b[1];
        x.iter().zip(&self.center).map(|(a, c)| s * (a - c)).collect()
    }
}

/// `Σ_θ w_θ ∫₀^{ℓ(θ)} F(o + rθ, θ) r^{d−1} dr`, where `ℓ(θ)` is the exit
/// distance from the ball when `o` lies in it, or the ball radius when `o`
/// is its centre.
const RIM_PANELS: usize = 6;

fn polar<F: Fn(&[f64], &[f64]) -> f64>(psi: &TestFunction, o: &[f64], n: usize, f: F) -> f64 {
    let dim = o.len();
    let d = Dimension::new(dim).expect("positive dimension");
    let sphere = if dim == 3 {
        SphereRule::product_3d(n, 2 * n)
    } else {
        SphereRule::new(d, n)
    };
    let gl = GaussLegendre::new(n);
    let rho2 = psi.radius * psi.radius;
    let oc: Vec<f64> = o.iter().zip(&psi.center).map(|(a, b)| a - b).collect();
    let q = oc.iter().map(|v| v * v).sum::<f64>() - rho2;
    let mut x = vec![0.0; dim];
    sphere.integrate(|th| {
        let b: f64 = th.iter().zip(&oc).map(|(a, c)| a * c).sum();
        let exit = -b + (b * b - q).max(0.0).sqrt();
        // panels halve towards the rim, where the bump flattens out
        let mut total = 0.0;
        let mut a = 0.0;
        for k in 1..=RIM_PANELS {
            let b = if k == RIM_PANELS {
                exit
            } else {
                exit * (1.0 - 0.5f64.powi(k as i32))
            };
            total += gl.integrate(
                |r| {
                    for k in 0..dim {
                        x[k] = o[k] + r * th[k];
                    }
                    f(&x, th) * r.powi(dim as i32 - 1)
                },
                a,
                b,
            );
            a = b;
        }
        total
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sides(ev: &RankEvaluator, psi: &TestFunction, n: usize) -> Result<(f64, f64)> {
    let d = ev.dim();
    let inside = |z: &[f64]| psi.t(z) < psi.radius * psi.radius;
    if let Some(s) = ev.support() {
        let lhs = s
            .atoms()
            .zip(s.weights())
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(z, w)| {
                // about an atom inside the support the kernel is just the direction
                let v = if inside(z) {
                    polar(psi, z, n, |x, th| dot(th, &psi.adjoint(x, d)))
                } else {
                    polar(psi, &psi.center, n, |x, _| {
                        let diff: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
                        dot(&diff, &psi.adjoint(x, d)) / norm(&diff)
                    })
                };
                w * v
            })
            .sum();
        let rhs = s.atoms().zip(s.weights()).map(|(z, w)| w * psi.value(z)).sum();
        return Ok((lhs, rhs));
    }
    let p = ev.measure().radial_profile()?;
    let origin = vec![0.0; d.get()];
    let o: &[f64] = if inside(&origin) { &origin } else { &psi.center };
    let lhs = polar(psi, o, n, |x, _| {
        let r = norm(x);
        if r == 0.0 {
            0.0
        } else {
            p.g(r) * dot(x, &psi.adjoint(x, d)) / r
        }
    });
    let rhs = polar(psi, o, n, |x, _| psi.value(x) * p.f(norm(x)));
    Ok((lhs, rhs))
}

/// Checks `∫ ψ dP = ∫ ⟨R_P, 𝓛*ψ⟩ dx` for odd `d`, including atomic `P`.
///
/// The right side is integrated in polar coordinates about every atom inside
/// `supp ψ`, where the kernel reduces to the unit direction, and about the
/// centre of `supp ψ` otherwise. Resolution doubles until two successive
/// values agree to `1e-11` relative to `1 + |rhs|`.
pub fn verify_identity_on_test_function(psi: &TestFunction, ev: &RankEvaluator) -> Result<IdentityCheck> {
    const FIRST: usize = 8;
    const CAP: usize = 96;
    let d = ev.dim();
    parity("identity check", d, true)?;
    psi.validate(d)?;
    let mut n = FIRST;
    let mut prev = sides(ev, psi, n)?;
    loop {
        let next_n = 2 * n;
        if next_n > CAP {
            return Err(Error::Budget {
                what: "identity-check quadrature nodes",
                requested: next_n,
                cap: CAP,
            });
        }
        let cur = sides(ev, psi, next_n)?;
        let change = (cur.0 - prev.0).abs().max((cur.1 - prev.1).abs());
        n = next_n;
        if change <= 1e-11 * (1.0 + cur.1.abs()) {
            return Ok(IdentityCheck {
                lhs: cur.0,
                rhs: cur.1,
                residual: (cur.0 - cur.1).abs(),
                nodes: n,
            });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;
    use approx::assert_relative_eq;

    fn delta(a: Vec<f64>) -> RankEvaluator {
        RankEvaluator::exact(Measure::empirical(vec![a], None).unwrap()).unwrap()
    }

    #[test]
    fn series_matches_finite_differences() {
        let psi = TestFunction {
            center: vec![0.0],
            radius: 1.5,
            poly: vec![1.0, -0.3, 0.2],
        };
        let f = |t: f64| psi.series(t, 1).map_or(0.0, |s| s[0]);
        let s = psi.series(0.7, 3).unwrap();
        let h = 1e-4;
        assert_relative_eq!(s[1], (f(0.7 + h) - f(0.7 - h)) / (2.0 * h), max_relative = 1e-7);
        assert_relative_eq!(
            s[2],
            (f(0.7 + h) - 2.0 * f(0.7) + f(0.7 - h)) / (2.0 * h * h),
            max_relative = 1e-5
        );
        assert_eq!(psi.value(&[0.0]), 1.0);
        assert_eq!(psi.value(&[1.5]), 0.0);
    }

    #[test]
    fn adjoint_in_three_dimensions_by_finite_differences() {
        // 𝓛*ψ = −γ₃ ∇(−Δψ) = γ₃ ∇Δψ
        let psi = TestFunction {
            center: vec![0.1, -0.2, 0.3],
            radius: 1.0,
            poly: vec![1.0, 0.5],
        };
        let d = Dimension::new(3).unwrap();
        let h = 1e-3;
        let lap = |x: &[f64]| {
            let mut s = -6.0 * psi.value(x);
            for k in 0..3 {
                for sgn in [-1.0, 1.0] {
                    let mut y = x.to_vec();
                    y[k] += sgn * h;
                    s += psi.value(&y);
                }
            }
            s / (h * h)
        };
        let x = [0.3, 0.1, 0.2];
        let a = psi.adjoint(&x, d);
        for k in 0..3 {
            let (mut p, mut m) = (x, x);
            p[k] += 1e-2;
            m[k] -= 1e-2;
            let fd = gamma_d(d) * (lap(&p) - lap(&m)) / 2e-2;
            assert!((a[k] - fd).abs() < 1e-3 * (1.0 + fd.abs()), "{k}: {} vs {fd}", a[k]);
        }
    }

    #[test]
    fn one_dimensional_point_mass() {
        let psi = TestFunction::bump(vec![0.2], 1.0);
        let c = verify_identity_on_test_function(&psi, &delta(vec![0.0])).unwrap();
        assert_relative_eq!(c.rhs, psi.value(&[0.0]), max_relative = 1e-14);
        assert!(c.residual <= 1e-8, "{c:?}");
    }

    #[test]
    fn three_dimensional_point_mass_inside() {
        let psi = TestFunction {
            center: vec![0.0, 0.0, 0.0],
            radius: 1.0,
            poly: vec![1.0, 0.4],
        };
        let c = verify_identity_on_test_function(&psi, &delta(vec![0.3, -0.2, 0.1])).unwrap();
        assert!(c.residual <= 1e-6, "{c:?}");
    }

    #[test]
    fn locality_away_from_atoms() {
        let psi = TestFunction::bump(vec![2.0, 0.0, 0.0], 0.8);
        let c = verify_identity_on_test_function(&psi, &delta(vec![0.0, 0.0, 0.0])).unwrap();
        assert!(c.lhs.abs() <= 1e-8 && c.rhs.abs() <= 1e-8, "{c:?}");
    }

    #[test]
    fn radial_law_in_three_dimensions() {
        let ev = RankEvaluator::exact(Measure::gaussian(3).unwrap()).unwrap();
        let psi = TestFunction::bump(vec![0.5, 0.0, 0.0], 1.0);
        let c = verify_identity_on_test_function(&psi, &ev).unwrap();
        assert!(c.residual <= 1e-6, "{c:?}");
    }

    #[test]
    fn even_dimension_rejected() {
        let psi = TestFunction::bump(vec![0.0, 0.0], 1.0);
        let r = verify_identity_on_test_function(&psi, &delta(vec![0.0, 0.0]));
        assert!(matches!(r, Err(Error::Parity { .. })));
    }
}
