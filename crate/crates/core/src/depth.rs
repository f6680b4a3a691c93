//! Depth regions `{|R_P| ≤ β}`, their contours, probability content and
//! the re-indexing of depth levels by probability content.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_dim, norm, normal_vector, RadialProfile};
use crate::quadrature::SphereRule;
use crate::quantile::{default_tol, solve_quantile, QuantileQuery};
use crate::rankfield::RankEvaluator;
use crate::specfun::{gamma_d, sphere_area, Dimension};

/// Rays whose line passes this close to an atom are nudged sideways.
const ATOM_CLEARANCE: f64 = 1e-9;
const NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContourShape {
    /// The sphere `|x| = r_beta` of a spherically symmetric law.
    RadialRadius { r_beta: f64 },
    /// One point `center + radius·direction` per ray.
    RayFan {
        directions: Vec<Vec<f64>>,
        radii: Vec<f64>,
        achieved: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRay {
    pub index: usize,
    pub direction: Vec<f64>,
    pub reason: String,
}

/// The level set `{x : |R_P(x)| = β}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthContour {
    pub beta: f64,
    pub tol: f64,
    /// Rays start here: the origin for radial laws, the spatial median otherwise.
    pub center: Vec<f64>,
    pub n_rays: usize,
    pub shape: ContourShape,
    pub skipped: Vec<SkippedRay>,
}

impl DepthContour {
    /// Direction, radius and achieved `|R_P|` per ray.
    pub fn rows(&self) -> Vec<(Vec<f64>, f64, f64)> {
        match &self.shape {
            ContourShape::RadialRadius { r_beta } => ray_directions(self.center.len(), self.n_rays)
                .into_iter()
                .map(|u| (u, *r_beta, self.beta))
                .collect(),
            ContourShape::RayFan {
                directions,
                radii,
                achieved,
            } => directions
                .iter()
                .zip(radii)
                .zip(achieved)
                .map(|((u, &r), &a)| (u.clone(), r, a))
                .collect(),
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.rows()
            .into_iter()
            .map(|(u, r, _)| self.center.iter().zip(&u).map(|(c, v)| c + r * v).collect())
            .collect()
    }

    /// One row per ray: `u1..ud, radius, achieved_norm`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.center.len();
        let mut header: Vec<String> = (1..=d).map(|k| format!("u{k}")).collect();
        header.push("radius".into());
        header.push("achieved_norm".into());
        out.write_record(&header)?;
        for (u, r, a) in self.rows() {
            let mut rec: Vec<String> = u.iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{r:e}"));
            rec.push(format!("{a:e}"));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<contour>", e))?;
        Ok(())
    }

    /// Summary without the per-ray table.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let radius = match &self.shape {
            ContourShape::RadialRadius { r_beta } => Some(*r_beta),
            ContourShape::RayFan { .. } => None,
        };
        let summary = serde_json::json!({
            "beta": self.beta,
            "tol": self.tol,
            "center": self.center,
            "n_rays": self.n_rays,
            "radial_radius": radius,
            "skipped_rays": self.skipped,
        });
        serde_json::to_writer_pretty(w, &summary)?;
        Ok(())
    }
}

/// Deterministic ray directions: `±1` in d = 1, equispaced angles in d = 2,
/// a Fibonacci lattice in d = 3, seeded Gaussian directions beyond.
pub fn ray_directions(d: usize, n: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let p = golden * i as f64;
                    vec![r * p.cos(), r * p.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            (0..n)
                .map(|_| {
                    let v = normal_vector(&mut rng, d);
                    let l = norm(&v);
                    v.into_iter().map(|c| c / l).collect()
                })
                .collect()
        }
    }
}

fn spatial_median(ev: &RankEvaluator) -> Vec<f64> {
    let d = ev.dim().get();
    let Some(s) = ev.support() else {
        return vec![0.0; d];
    };
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let q = QuantileQuery::new(0.0, e1).expect("unit direction");
    solve_quantile(ev, &q, default_tol(ev)).unwrap_or_else(|_| {
        // a median sitting on an atom: take the deepest atom
        s.atoms()
            .min_by(|a, b| norm(&ev.rank_unchecked(a)).total_cmp(&norm(&ev.rank_unchecked(b))))
            .expect("non-empty support")
            .to_vec()
    })
}

fn clear_of_atoms(ev: &RankEvaluator, center: &[f64], u: Vec<f64>) -> Vec<f64> {
    let Some(s) = ev.support() else { return u };
    let d = u.len();
    if d == 1 {
        return u;
    }
    let hits = s.atoms().any(|z| {
        let w: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
        let along: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
        along > ATOM_CLEARANCE && (norm(&w).powi(2) - along * along).max(0.0).sqrt() < ATOM_CLEARANCE
    });
    if !hits {
        return u;
    }
    let k = (0..d)
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .expect("d > 1");
    let mut p: Vec<f64> = u.iter().map(|c| -u[k] * c).collect();
    p[k] += 1.0;
    let pl = norm(&p);
    let v: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a + NUDGE * b / pl).collect();
    let vl = norm(&v);
    v.into_iter().map(|c| c / vl).collect()
}

/// First crossing of `|R_P(c + t u)| = β` for `t > 0`: geometric bracketing,
/// a scan for the first sign change, then Illinois regula falsi.
fn solve_ray(ev: &RankEvaluator, center: &[f64], u: &[f64], beta: f64, tol: f64, scale: f64) -> Result<(f64, f64)> {
    let at = |t: f64| {
        let x: Vec<f64> = center.iter().zip(u).map(|(c, v)| c + t * v).collect();
        norm(&ev.rank_unchecked(&x)) - beta
    };
    let mut hi = scale;
    let mut doublings = 0;
    while at(hi) <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::Bracket(format!("|R| stays below {beta} along the ray")));
        }
    }
    const SCAN: usize = 32;
    let (mut a, mut fa) = (0.0, at(0.0));
    let (mut b, mut fb) = (hi, at(hi));
    for k in 1..=SCAN {
        let t = hi * k as f64 / SCAN as f64;
        let ft = at(t);
        if ft > 0.0 {
            (b, fb) = (t, ft);
            break;
        }
        (a, fa) = (t, ft);
    }
    let mut side = 0;
    let (mut t, mut ft) = if fb.abs() < fa.abs() { (b, fb) } else { (a, fa) };
    for _ in 0..200 {
        if ft.abs() <= 0.25 * tol || b - a <= 1e-15 * (1.0 + b) {
            break;
        }
        t = (a * fb - b * fa) / (fb - fa);
        if !(t > a && t < b) {
            t = 0.5 * (a + b);
        }
        ft = at(t);
        if ft > 0.0 {
            (b, fb) = (t, ft);
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            (a, fa) = (t, ft);
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if ft.abs() > tol {
        return Err(Error::Bracket(format!(
            "|R| jumps across {beta} along the ray (closest value off by {:e})",
            ft.abs()
        )));
    }
    Ok((t, ft + beta))
}

/// The contour `{|R_P| = β}`.
///
/// Closed-form radial laws invert `g` directly. Otherwise each ray from the
/// spatial median is solved separately and rays without a crossing within
/// `tol` are listed in `skipped`.
pub fn contour(ev: &RankEvaluator, beta: f64, n_rays: usize, tol: f64) -> Result<DepthContour> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Domain(format!("rank level must lie in [0, 1), got {beta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if n_rays == 0 {
        return Err(Error::Domain("at least one ray is needed".into()));
    }
    let d = ev.dim().get();
    if ev.support().is_none() {
        let p = ev.measure().radial_profile()?;
        let r_beta = p.g_inverse(beta)?;
        if (p.g(r_beta) - beta).abs() > tol {
            return Err(Error::Bracket(format!("g(r) = {beta} not resolved to {tol:e}")));
        }
        return Ok(DepthContour {
            beta,
            tol,
            center: vec![0.0; d],
            n_rays,
            shape: ContourShape::RadialRadius { r_beta },
            skipped: Vec::new(),
        });
    }
    let center = spatial_median(ev);
    let s = ev.support().expect("checked");
    let spread = (s
        .atoms()
        .zip(s.weights())
        .map(|(z, w)| w * z.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>())
    .sqrt();
    let scale = 0.25 * spread.max(1e-6);
    let dirs: Vec<Vec<f64>> = ray_directions(d, n_rays)
        .into_iter()
        .map(|u| clear_of_atoms(ev, &center, u))
        .collect();
    let solved: Vec<Result<(f64, f64)>> = dirs
        .par_iter()
        .map(|u| {
            if beta == 0.0 {
                let a = norm(&ev.rank_unchecked(&center));
                return if a <= tol {
                    Ok((0.0, a))
                } else {
                    Err(Error::Bracket(format!("|R| = {a:e} at the median")))
                };
            }
            solve_ray(ev, &center, u, beta, tol, scale)
        })
        .collect();
    let (mut directions, mut radii, mut achieved, mut skipped) = (vec![], vec![], vec![], vec![]);
    for (index, (u, r)) in dirs.into_iter().zip(solved).enumerate() {
        match r {
            Ok((t, a)) => {
                directions.push(u);
                radii.push(t);
                achieved.push(a);
            }
            Err(e) => skipped.push(SkippedRay {
                index,
                direction: u,
                reason: e.to_string(),
            }),
        }
    }
    Ok(DepthContour {
        beta,
        tol,
        center,
        n_rays,
        shape: ContourShape::RayFan {
            directions,
            radii,
            achieved,
        },
        skipped,
    })
}

/// How the surface integrand `(−Δ)^{(d−1)/2} R_P · ν` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContentPath {
    /// Closed-form radial profile.
    Analytic,
    /// Centered differences of the rank field with step `spacing` at each
    /// node of a 48 × 96 product rule on the sphere.
    Grid { spacing: f64, order: u32 },
}

impl Default for ContentPath {
    fn default() -> Self {
        ContentPath::Grid {
            spacing: 0.05,
            order: 2,
        }
    }
}

/// `P[|Z| ≤ radius] = γ_d ∫_{|x| = radius} ((−Δ)^{(d−1)/2} R_P(x), ν(x)) dS`.
pub fn probability_content_surface(ev: &RankEvaluator, radius: f64, path: ContentPath) -> Result<f64> {
    let d = ev.dim();
    if d.is_even() {
        return Err(Error::Parity {
            method: "surface-integral probability content",
            required: "an odd",
            d: d.get(),
        });
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::Domain(format!("radius must be non-negative, got {radius}")));
    }
    if radius == 0.0 {
        return Ok(0.0);
    }
    match path {
        ContentPath::Analytic => {
            let p = ev.profile().ok_or(Error::UnsupportedVariant {
                variant: ev.measure().variant_name(),
                op: "analytic probability content (needs a closed-form radial law)",
            })?;
            analytic_content(p, d, radius)
        }
        ContentPath::Grid { spacing, order } => grid_content(ev, d, radius, spacing, order),
    }
}

fn analytic_content(p: &RadialProfile, d: Dimension, radius: f64) -> Result<f64> {
    // R = ∇g_P is curl-free, so −ΔR = −∇h and the normal part is −h'
    if d.get() != 3 {
        return Err(Error::UnsupportedVariant {
            variant: "radial closed-form",
            op: "analytic probability content outside d = 3",
        });
    }
    Ok(-gamma_d(d) * sphere_area(d) * radius * radius * p.h_prime(radius))
}

fn grid_content(ev: &RankEvaluator, d: Dimension, radius: f64, h: f64, order: u32) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
    }
    let weights: &[(f64, f64)] = match order {
        2 => &[(1.0, 1.0)],
        4 => &[(1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)],
        _ => {
            return Err(Error::Config(format!(
                "finite-difference order must be 2 or 4, got {order}"
            )))
        }
    };
    match d.get() {
        1 => {
            let right = ev.rank_unchecked(&[radius])[0];
            let left = ev.rank_unchecked(&[-radius])[0];
            Ok(gamma_d(d) * (right - left))
        }
        3 => {
            let sphere = SphereRule::product_3d(48, 96);
            let laplacian = |x: &[f64]| {
                let centre: f64 = weights.iter().map(|&(_, w)| 2.0 * w).sum::<f64>() * 3.0;
                let r0 = ev.rank_unchecked(x);
                let mut lap: Vec<f64> = r0.iter().map(|c| -centre * c).collect();
                let mut y = x.to_vec();
                for k in 0..3 {
                    for &(m, w) in weights {
                        for sgn in [-1.0, 1.0] {
                            y[k] = x[k] + sgn * m * h;
                            for (l, v) in ev.rank_unchecked(&y).into_iter().enumerate() {
                                lap[l] += w * v;
                            }
                        }
                    }
                    y[k] = x[k];
                }
                lap.into_iter().map(|v| v / (h * h)).collect::<Vec<f64>>()
            };
            let parts: Vec<f64> = sphere
                .directions
                .par_iter()
                .zip(&sphere.weights)
                .map(|(u, &w)| {
                    let x: Vec<f64> = u.iter().map(|c| radius * c).collect();
                    let lap = laplacian(&x);
                    -w * lap.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            Ok(gamma_d(d) * radius * radius * parts.iter().sum::<f64>())
        }
        _ => Err(Error::UnsupportedVariant {
            variant: ev.measure().variant_name(),
            op: "grid probability content beyond d = 3",
        }),
    }
}

/// `θ_P`, the cdf of `|R_P(Z)|` for `Z ~ P`.
#[derive(Debug, Clone)]
pub enum ThetaTable {
    /// `θ_P(β) = P[|Z| ≤ g^{-1}(β)]` by radial quadrature.
    Radial(RadialProfile),
    /// Sorted `|R_P(Z_i)|` over an independent sample.
    MonteCarlo(Vec<f64>),
}

impl ThetaTable {
    /// Exact for closed-form radial laws, Monte Carlo otherwise.
    pub fn new(ev: &RankEvaluator, mc_budget: usize, seed: u64) -> Result<Self> {
        match ev.profile() {
            Some(p) => Ok(ThetaTable::Radial(p.clone())),
            None => Self::monte_carlo(ev, mc_budget, seed),
        }
    }

    pub fn monte_carlo(ev: &RankEvaluator, mc_budget: usize, seed: u64) -> Result<Self> {
        let sample = ev.measure().sample(mc_budget, seed)?;
        let mut norms: Vec<f64> = sample.par_iter().map(|z| norm(&ev.rank_unchecked(z))).collect();
        norms.sort_by(f64::total_cmp);
        Ok(ThetaTable::MonteCarlo(norms))
    }

    pub fn theta(&self, beta: f64) -> Result<f64> {
        if beta <= 0.0 {
            return Ok(0.0);
        }
        match self {
            ThetaTable::Radial(p) => {
                if beta >= 1.0 {
                    return Ok(1.0);
                }
                Ok(p.ball_content(p.g_inverse(beta)?))
            }
            ThetaTable::MonteCarlo(norms) => Ok(norms.partition_point(|&v| v <= beta) as f64 / norms.len() as f64),
        }
    }
}

/// `θ_P(β) = P[|R_P(Z)| ≤ β]`.
pub fn theta_reindex(ev: &RankEvaluator, beta: f64, mc_budget: usize, seed: u64) -> Result<f64> {
    ThetaTable::new(ev, mc_budget, seed)?.theta(beta)
}

/// `R̃_P(x) = θ_P(|R_P(x)|) R_P(x)/|R_P(x)|`, zero where the rank vanishes.
pub fn reindexed_rank(ev: &RankEvaluator, table: &ThetaTable, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(ev.dim(), x)?;
    let r = ev.rank_unchecked(x);
    let n = norm(&r);
    if n == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let t = table.theta(n)?;
    Ok(r.into_iter().map(|c| t * c / n).collect())
}

/// Kolmogorov–Smirnov distance between the sample and Uniform[0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS statistic of `θ_P(|R_P(Z)|)` over `n` fresh draws `Z ~ P`.
pub fn uniformization_ks(ev: &RankEvaluator, table: &ThetaTable, n: usize, seed: u64) -> Result<f64> {
    let sample = ev.measure().sample(n, seed)?;
    let values: Vec<f64> = sample
        .par_iter()
        .map(|z| table.theta(norm(&ev.rank_unchecked(z))))
        .collect::<Result<_>>()?;
    Ok(ks_uniform(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;
    use approx::assert_relative_eq;

    const BALL_1: f64 = 0.198_748_043_098_799;

    fn closed(m: Measure) -> RankEvaluator {
        RankEvaluator::exact(m).unwrap()
    }

    #[test]
    fn radial_contours() {
        let c = contour(
            &closed(Measure::cauchy(2).unwrap()),
            1.0 / (1.0 + 2f64.sqrt()),
            8,
            1e-12,
        )
        .unwrap();
        let ContourShape::RadialRadius { r_beta } = c.shape else {
            panic!()
        };
        assert!((r_beta - 1.0).abs() < 1e-12);
        let g = contour(&closed(Measure::gaussian(3).unwrap()), 0.483_941_4, 8, 1e-7).unwrap();
        let ContourShape::RadialRadius { r_beta } = g.shape else {
            panic!()
        };
        assert!((r_beta - 1.0).abs() < 1e-6);
        let z = contour(&closed(Measure::gaussian(2).unwrap()), 0.0, 4, 1e-12).unwrap();
        assert!(z.points().iter().all(|p| norm(p) == 0.0));
        assert_eq!(z.points().len(), 4);
    }

    #[test]
    fn empirical_contour_residuals_and_nesting() {
        let m = Measure::gaussian(2).unwrap();
        let ev = closed(Measure::empirical(m.sample(400, 3).unwrap(), None).unwrap());
        let betas: Vec<f64> = (1..=10).map(|k| 0.08 * k as f64).collect();
        let mut prev: Option<Vec<f64>> = None;
        for &b in &betas {
            let c = contour(&ev, b, 24, 1e-9).unwrap();
            assert!(c.skipped.is_empty(), "{:?}", c.skipped);
            for (p, (_, _, a)) in c.points().iter().zip(c.rows()) {
                let back = norm(&ev.rank(p).unwrap());
                assert!((back - b).abs() <= 1e-9);
                assert!((a - b).abs() <= 1e-9);
            }
            let ContourShape::RayFan { radii, .. } = c.shape else {
                panic!()
            };
            if let Some(p) = prev {
                assert!(radii.iter().zip(&p).all(|(r, q)| r > q));
            }
            prev = Some(radii);
        }
    }

    #[test]
    fn ray_through_an_atom_is_nudged() {
        let atoms = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let ev = closed(Measure::empirical(atoms, None).unwrap());
        let u = clear_of_atoms(&ev, &[0.0, 0.0], vec![1.0, 0.0]);
        assert!(u[1].abs() > 0.0 && u[1].abs() < 2e-6);
        assert!((norm(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_content() {
        let ev = closed(Measure::gaussian(3).unwrap());
        let p = ev.profile().unwrap().clone();
        for r in [0.5, 1.0, 2.0] {
            let v = probability_content_surface(&ev, r, ContentPath::Analytic).unwrap();
            assert!((v - p.ball_content(r)).abs() < 1e-6);
        }
        let v = probability_content_surface(&ev, 1.0, ContentPath::Analytic).unwrap();
        assert!((v - BALL_1).abs() < 1e-12);
        assert!(probability_content_surface(&ev, 1e-2, ContentPath::Analytic).unwrap() < 1e-5);
        let c = closed(Measure::cauchy(3).unwrap());
        let far = probability_content_surface(&c, 200.0, ContentPath::Analytic).unwrap();
        assert!((far - 1.0).abs() < 2e-2);
    }

    #[test]
    fn one_dimensional_content_counts_atoms() {
        let atoms: Vec<Vec<f64>> = [-2.5, -0.7, 0.1, 0.4, 1.9].iter().map(|&v| vec![v]).collect();
        let ev = closed(Measure::empirical(atoms, None).unwrap());
        let v = probability_content_surface(&ev, 1.0, ContentPath::default()).unwrap();
        assert_relative_eq!(v, 0.6, max_relative = 1e-14);
    }

    #[test]
    fn grid_content() {
        let ev = closed(Measure::gaussian(3).unwrap());
        let p = ev.profile().unwrap().clone();
        for r in [0.5, 1.0, 2.0] {
            let v = probability_content_surface(&ev, r, ContentPath::default()).unwrap();
            assert!((v - p.ball_content(r)).abs() < 1e-3, "r = {r}: {v}");
        }
    }

    #[test]
    fn even_dimension_rejected() {
        let ev = closed(Measure::gaussian(2).unwrap());
        assert!(matches!(
            probability_content_surface(&ev, 1.0, ContentPath::Analytic),
            Err(Error::Parity { .. })
        ));
    }

    #[test]
    fn theta_values() {
        let ev = closed(Measure::gaussian(3).unwrap());
        let g1 = ev.profile().unwrap().g(1.0);
        assert_relative_eq!(theta_reindex(&ev, g1, 10, 0).unwrap(), BALL_1, max_relative = 1e-10);
        assert_eq!(theta_reindex(&ev, 0.0, 10, 0).unwrap(), 0.0);
        let mc = ThetaTable::monte_carlo(&ev, 20_000, 5).unwrap();
        assert!((mc.theta(g1).unwrap() - BALL_1).abs() < 0.015);
        let grid: Vec<f64> = (0..20).map(|k| k as f64 / 20.0).collect();
        let th: Vec<f64> = grid.iter().map(|&b| mc.theta(b).unwrap()).collect();
        assert!(th.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn reindexed_rank_has_probability_length() {
        let ev = closed(Measure::gaussian(2).unwrap());
        let t = ThetaTable::new(&ev, 10, 0).unwrap();
        assert_eq!(reindexed_rank(&ev, &t, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let v = reindexed_rank(&ev, &t, &[0.6, -0.8]).unwrap();
        // P[|Z| ≤ 1] in the plane is 1 − e^{−1/2}
        assert_relative_eq!(norm(&v), 1.0 - (-0.5f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn uniformization_holds_for_gaussian_plane() {
        let ev = closed(Measure::gaussian(2).unwrap());
        let t = ThetaTable::new(&ev, 10, 0).unwrap();
        let n = 20_000;
        let ks = uniformization_ks(&ev, &t, n, 11).unwrap();
        assert!(ks <= 1.63 / (n as f64).sqrt(), "{ks}");
    }

    #[test]
    fn ks_detects_non_uniform() {
        let v: Vec<f64> = (0..1000).map(|k| (k as f64 / 1000.0).powi(2)).collect();
        assert!(ks_uniform(&v) > 0.2);
        let u: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&u) <= 0.5e-3 + 1e-12);
    }
}
