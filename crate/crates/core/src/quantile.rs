//! Geometric quantiles: minimizers of `g_P(x) − α(u, x)`, equivalently
//! solutions of `R_P(x) = αu`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_dim, norm, Empirical};
use crate::quadrature::integrate_adaptive;
use crate::rankfield::RankEvaluator;

pub const MAX_ITERATIONS: usize = 200;
pub const DEFAULT_TOL_ANALYTIC: f64 = 1e-8;
pub const DEFAULT_TOL_EMPIRICAL: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileQuery {
    pub alpha: f64,
    pub u: Vec<f64>,
}

impl QuantileQuery {
    pub fn new(alpha: f64, u: Vec<f64>) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        if (norm(&u) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "direction must be a unit vector, |u| = {}",
                norm(&u)
            )));
        }
        Ok(QuantileQuery { alpha, u })
    }

    /// Normalizes `u` first.
    pub fn along(alpha: f64, u: &[f64]) -> Result<Self> {
        let n = norm(u);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("direction must be a nonzero vector".into()));
        }
        Self::new(alpha, u.iter().map(|c| c / n).collect())
    }

    fn target(&self) -> Vec<f64> {
        self.u.iter().map(|c| self.alpha * c).collect()
    }
}

/// Default tolerance for the evaluator's quadrature.
pub fn default_tol(ev: &RankEvaluator) -> f64 {
    if ev.support().is_some() {
        DEFAULT_TOL_EMPIRICAL
    } else {
        DEFAULT_TOL_ANALYTIC
    }
}

/// `g_P(x) − α(u, x)` with `g_P(x) = ∫ (|z − x| − |z|) dP(z)`.
pub fn objective(ev: &RankEvaluator, q: &QuantileQuery, x: &[f64]) -> Result<f64> {
    check_dim(ev.dim(), x)?;
    check_dim(ev.dim(), &q.u)?;
    Ok(objective_unchecked(ev, q, x))
}

fn objective_unchecked(ev: &RankEvaluator, q: &QuantileQuery, x: &[f64]) -> f64 {
    let lin: f64 = q.alpha * q.u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let g = match ev.support() {
        Some(s) => s
            .atoms()
            .zip(s.weights())
            .map(|(z, w)| {
                let dz: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                w * (dz - norm(z))
            })
            .sum(),
        None => {
            // radial: g_P(x) = ∫_0^{|x|} g(s) ds
            let p = ev.measure().radial_profile().expect("closed-form evaluator");
            let r = norm(x);
            if r == 0.0 {
                0.0
            } else {
                integrate_adaptive(|s| p.g(s), 0.0, r, 1e-15, 1e-13).value
            }
        }
    };
    g - lin
}

/// Solves `R_P(x) = αu` to `|R_P(x) − αu| ≤ tol`.
pub fn solve_quantile(ev: &RankEvaluator, q: &QuantileQuery, tol: f64) -> Result<Vec<f64>> {
    check_dim(ev.dim(), &q.u)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    match ev.support() {
        None => solve_radial(ev, q, tol),
        Some(s) => {
            check_support(s)?;
            solve_empirical(ev, s, q, tol)
        }
    }
}

/// `|R_P(Q_P(αu)) − αu|`.
pub fn rank_of_quantile_roundtrip(ev: &RankEvaluator, q: &QuantileQuery, tol: f64) -> Result<f64> {
    let x = solve_quantile(ev, q, tol)?;
    Ok(residual(ev, q, &x))
}

fn residual(ev: &RankEvaluator, q: &QuantileQuery, x: &[f64]) -> f64 {
    let r = ev.rank_unchecked(x);
    r.iter()
        .zip(q.target())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn solve_radial(ev: &RankEvaluator, q: &QuantileQuery, tol: f64) -> Result<Vec<f64>> {
    let p = ev.measure().radial_profile()?;
    let r = p.g_inverse(q.alpha)?;
    let x: Vec<f64> = q.u.iter().map(|c| r * c).collect();
    let res = residual(ev, q, &x);
    if res > tol {
        return Err(Error::NonConvergence {
            iterations: 1,
            residual: res,
        });
    }
    Ok(x)
}

/// Rejects measures whose support lies on a single line (or point).
fn check_support(s: &Empirical) -> Result<()> {
    let d = s.dim().get();
    let n = s.len();
    if n < 2 || d < 2 {
        return Err(Error::DegenerateSupport(
            "support lies on a line; the quantile is not unique".into(),
        ));
    }
    let mut mean = vec![0.0; d];
    for (z, w) in s.atoms().zip(s.weights()) {
        for k in 0..d {
            mean[k] += w * z[k];
        }
    }
    let centered = DMatrix::from_fn(n, d, |i, k| s.atom(i)[k] - mean[k]);
    let sv = centered.singular_values();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] == 0.0 || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::DegenerateSupport(
            "support lies on a line; the quantile is not unique".into(),
        ));
    }
    Ok(())
}

fn weighted_median(vals: &mut [(f64, f64)]) -> f64 {
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for &(v, w) in vals.iter() {
        acc += w;
        if acc >= 0.5 {
            return v;
        }
    }
    vals.last().map_or(0.0, |p| p.0)
}

/// Damped Newton on `R_P(x) − αu` with an Armijo line search on the
/// objective, falling back to a Weiszfeld step whenever Newton cannot make
/// progress (singular Jacobian, iterate on an atom, failed line search).
fn solve_empirical(ev: &RankEvaluator, s: &Empirical, q: &QuantileQuery, tol: f64) -> Result<Vec<f64>> {
    let d = s.dim().get();
    let mut x: Vec<f64> = (0..d)
        .map(|k| {
            let mut v: Vec<(f64, f64)> = s.atoms().zip(s.weights()).map(|(z, &w)| (z[k], w)).collect();
            weighted_median(&mut v)
        })
        .collect();
    let target = q.target();
    let mut obj = objective_unchecked(ev, q, &x);
    let mut res = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let f: Vec<f64> = ev.rank_unchecked(&x).iter().zip(&target).map(|(a, b)| a - b).collect();
        res = norm(&f);
        if res <= tol {
            return Ok(x);
        }
        // Newton is attracted by the kink of |x − z| at a nearby atom; decide
        // on the atom itself whether it is optimal or which way to leave it
        if let Some(j) = nearby_atom(s, &x) {
            let z = s.atom(j).to_vec();
            let oz = objective_unchecked(ev, q, &z);
            if oz <= obj {
                let g: Vec<f64> = ev.rank_unchecked(&z).iter().zip(&target).map(|(a, b)| a - b).collect();
                match leave_atom(ev, s, &z, &g, q, oz) {
                    Some((nx, no)) => {
                        x = nx;
                        obj = no;
                        continue;
                    }
                    None => {
                        res = norm(&g);
                        break;
                    }
                }
            }
        }
        let step = newton_step(ev, &x, &f, q, obj);
        let (next, next_obj) = match step {
            Some(p) => p,
            None => {
                let w = weiszfeld(s, &x, &target);
                let o = objective_unchecked(ev, q, &w);
                if o < obj {
                    (w, o)
                } else {
                    match leave_atom(ev, s, &x, &f, q, obj) {
                        Some(p) => p,
                        None => break,
                    }
                }
            }
        };
        x = next;
        obj = next_obj;
    }
    Err(Error::NonConvergence {
        iterations,
        residual: res,
    })
}

fn newton_step(ev: &RankEvaluator, x: &[f64], f: &[f64], q: &QuantileQuery, obj: f64) -> Option<(Vec<f64>, f64)> {
    let jac = ev.jacobian(x).ok()?;
    let rhs = DVector::from_iterator(f.len(), f.iter().map(|v| -v));
    let p = jac.lu().solve(&rhs)?;
    if p.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let slope: f64 = p.iter().zip(f).map(|(a, b)| a * b).sum();
    if slope >= 0.0 {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..50 {
        let trial: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + t * b).collect();
        let o = objective_unchecked(ev, q, &trial);
        if o <= obj + ARMIJO * t * slope {
            return Some((trial, o));
        }
        // near the solution the decrease drops below rounding of the objective
        if o <= obj + 8.0 * f64::EPSILON * (1.0 + obj.abs()) {
            let f_trial = residual(ev, q, &trial);
            if f_trial < 0.5 * norm(f) {
                return Some((trial, o.min(obj)));
            }
        }
        t *= 0.5;
    }
    None
}

// On an atom z_j the subgradient is G + w_j B (|B| ≤ 1), with G the rank
// excluding z_j minus αu. The atom is optimal iff |G| ≤ w_j; otherwise −G
// is a descent direction.
fn leave_atom(
    ev: &RankEvaluator,
    s: &Empirical,
    x: &[f64],
    g: &[f64],
    q: &QuantileQuery,
    obj: f64,
) -> Option<(Vec<f64>, f64)> {
    let j = s.atoms().position(|z| z == x)?;
    let gn = norm(g);
    if gn <= s.weight(j) {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - t * b / gn).collect();
        let o = objective_unchecked(ev, q, &trial);
        if o < obj {
            return Some((trial, o));
        }
        t *= 0.5;
    }
    None
}

fn nearby_atom(s: &Empirical, x: &[f64]) -> Option<usize> {
    let scale = 1e-7 * (1.0 + norm(x));
    s.atoms().position(|z| {
        let r2: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        r2 > 0.0 && r2.sqrt() < scale
    })
}

fn weiszfeld(s: &Empirical, x: &[f64], target: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut num = target.to_vec();
    let mut den = 0.0;
    for (z, &w) in s.atoms().zip(s.weights()) {
        let r: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if r > 0.0 {
            for k in 0..d {
                num[k] += w * z[k] / r;
            }
            den += w / r;
        }
    }
    num.iter().map(|v| v / den).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    }

    fn cloud(n: usize, seed: u64) -> RankEvaluator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms = (0..n)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..3.0)])
            .collect();
        RankEvaluator::exact(Measure::empirical(atoms, None).unwrap()).unwrap()
    }

    #[test]
    fn objective_examples() {
        let ev = RankEvaluator::exact(Measure::gaussian(3).unwrap()).unwrap();
        let q0 = QuantileQuery::new(0.0, e(3, 0)).unwrap();
        assert_eq!(objective(&ev, &q0, &[0.0; 3]).unwrap(), 0.0);

        let a = vec![1.0, 2.0];
        let one = RankEvaluator::exact(Measure::empirical(vec![a.clone()], None).unwrap()).unwrap();
        let q = QuantileQuery::new(0.0, e(2, 0)).unwrap();
        let x = [-1.0, 0.5];
        let expect = ((x[0] - a[0]).powi(2) + (x[1] - a[1]).powi(2)).sqrt() - norm(&a);
        assert_relative_eq!(objective(&one, &q, &x).unwrap(), expect, max_relative = 1e-15);

        let two =
            RankEvaluator::exact(Measure::empirical(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], None).unwrap()).unwrap();
        assert_relative_eq!(
            objective(&two, &q, &[0.0, 1.0]).unwrap(),
            2f64.sqrt() - 1.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn radial_objective_gradient_is_rank() {
        let ev = RankEvaluator::exact(Measure::cauchy(2).unwrap()).unwrap();
        let q = QuantileQuery::new(0.0, e(2, 0)).unwrap();
        let x = [0.7, -1.1];
        let h = 1e-5;
        let r = ev.rank(&x).unwrap();
        for k in 0..2 {
            let (mut p, mut m) = (x, x);
            p[k] += h;
            m[k] -= h;
            let fd = (objective(&ev, &q, &p).unwrap() - objective(&ev, &q, &m).unwrap()) / (2.0 * h);
            assert!((fd - r[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn radial_examples() {
        let g3 = RankEvaluator::exact(Measure::gaussian(3).unwrap()).unwrap();
        assert_eq!(
            solve_quantile(&g3, &QuantileQuery::new(0.0, e(3, 2)).unwrap(), 1e-8).unwrap(),
            vec![0.0; 3]
        );
        let x = solve_quantile(
            &g3,
            &QuantileQuery::new(0.483_941_449_038_286_7, e(3, 0)).unwrap(),
            1e-8,
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8 && x[1] == 0.0 && x[2] == 0.0);

        let c2 = RankEvaluator::exact(Measure::cauchy(2).unwrap()).unwrap();
        let x = solve_quantile(&c2, &QuantileQuery::new(2f64.sqrt() - 1.0, e(2, 1)).unwrap(), 1e-8).unwrap();
        assert!((x[1] - 1.0).abs() < 1e-8 && x[0] == 0.0);
    }

    #[test]
    fn gaussian_roundtrips() {
        let ev = RankEvaluator::exact(Measure::gaussian(2).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let alpha = rng.gen_range(0.0..0.99);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let q = QuantileQuery::along(alpha, &[th.cos(), th.sin()]).unwrap();
            assert!(rank_of_quantile_roundtrip(&ev, &q, 1e-8).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn monotone_along_rays() {
        for m in [Measure::gaussian(3).unwrap(), Measure::cauchy(3).unwrap()] {
            let ev = RankEvaluator::exact(m).unwrap();
            let mut last = -1.0;
            for k in 0..10 {
                let q = QuantileQuery::along(0.095 * k as f64, &[1.0, 1.0, -1.0]).unwrap();
                let r = norm(&solve_quantile(&ev, &q, 1e-8).unwrap());
                assert!(r > last);
                last = r;
            }
        }
    }

    #[test]
    fn empirical_cloud_roundtrip() {
        let ev = cloud(100, 9);
        let q = QuantileQuery::new(0.5, e(2, 0)).unwrap();
        assert!(rank_of_quantile_roundtrip(&ev, &q, 1e-10).unwrap() <= 1e-10);
        let q0 = QuantileQuery::new(0.0, e(2, 1)).unwrap();
        assert!(rank_of_quantile_roundtrip(&ev, &q0, 1e-10).unwrap() <= 1e-10);
    }

    #[test]
    fn translation_equivariance() {
        let ev = cloud(40, 2);
        let s = ev.support().unwrap();
        let t = [3.5, -1.25];
        let shifted = RankEvaluator::exact(crate::measures::Measure::Empirical(s.translated(&t))).unwrap();
        let q = QuantileQuery::along(0.7, &[1.0, -2.0]).unwrap();
        let a = solve_quantile(&ev, &q, 1e-10).unwrap();
        let b = solve_quantile(&shifted, &q, 1e-10).unwrap();
        for k in 0..2 {
            assert!((b[k] - a[k] - t[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_equivariance_radial() {
        let ev = RankEvaluator::exact(Measure::gaussian(2).unwrap()).unwrap();
        let th: f64 = 0.83;
        let (c, s) = (th.cos(), th.sin());
        let u = [0.6, 0.8];
        let ou = [c * u[0] - s * u[1], s * u[0] + c * u[1]];
        let a = solve_quantile(&ev, &QuantileQuery::along(0.6, &u).unwrap(), 1e-8).unwrap();
        let b = solve_quantile(&ev, &QuantileQuery::along(0.6, &ou).unwrap(), 1e-8).unwrap();
        assert!((b[0] - (c * a[0] - s * a[1])).abs() < 1e-7);
        assert!((b[1] - (s * a[0] + c * a[1])).abs() < 1e-7);
    }

    #[test]
    fn collinear_support_rejected() {
        let atoms = (0..5).map(|k| vec![k as f64, 2.0 * k as f64]).collect();
        let ev = RankEvaluator::exact(Measure::empirical(atoms, None).unwrap()).unwrap();
        let q = QuantileQuery::new(0.2, e(2, 0)).unwrap();
        assert!(matches!(
            solve_quantile(&ev, &q, 1e-10),
            Err(Error::DegenerateSupport(_))
        ));
    }

    #[test]
    fn median_on_heavy_atom_cannot_meet_tolerance() {
        let atoms = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
        let w = vec![0.7, 0.1, 0.1, 0.1];
        let ev = RankEvaluator::exact(Measure::empirical(atoms, Some(w)).unwrap()).unwrap();
        let q = QuantileQuery::new(0.0, e(2, 0)).unwrap();
        assert!(matches!(
            solve_quantile(&ev, &q, 1e-10),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn query_validation() {
        assert!(QuantileQuery::new(1.0, vec![1.0, 0.0]).is_err());
        assert!(QuantileQuery::new(0.5, vec![1.0, 1.0]).is_err());
        assert!(QuantileQuery::along(0.5, &[0.0, 0.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn empirical_roundtrip_and_shift(
                seed in 0u64..10_000,
                alpha in 0.0..0.9f64,
                th in 0.0..std::f64::consts::TAU,
                t in prop::collection::vec(-10.0..10.0f64, 2),
            ) {
                let ev = cloud(30, seed);
                let q = QuantileQuery::along(alpha, &[th.cos(), th.sin()]).unwrap();
                let x = match solve_quantile(&ev, &q, 1e-10) {
                    Ok(x) => x,
                    Err(Error::NonConvergence { .. }) => {
                        // only allowed when some atom satisfies the optimality condition
                        let s = ev.support().unwrap();
                        let at_atom = (0..s.len()).any(|j| {
                            let r = ev.rank(s.atom(j)).unwrap();
                            let g = [r[0] - q.alpha * q.u[0], r[1] - q.alpha * q.u[1]];
                            norm(&g) <= s.weight(j)
                        });
                        prop_assert!(at_atom);
                        return Ok(());
                    }
                    Err(e) => panic!("{e}"),
                };
                prop_assert!(residual(&ev, &q, &x) <= 1e-10);
                let shifted = RankEvaluator::exact(Measure::Empirical(ev.support().unwrap().translated(&t))).unwrap();
                let y = solve_quantile(&shifted, &q, 1e-10).unwrap();
                for k in 0..2 {
                    prop_assert!((y[k] - x[k] - t[k]).abs() < 1e-8);
                }
            }
        }
    }
}
