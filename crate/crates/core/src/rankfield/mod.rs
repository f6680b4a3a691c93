//! Evaluation of the geometric rank `R_P(x) = E[(x - Z)/|x - Z|]`, its
//! derivatives, and grids of it.

mod grid;
pub mod kernel;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_dim, norm, Empirical, Measure, RadialProfile};
use crate::specfun::Dimension;

pub use self::grid::{
    fd_derivative, fd_divergence, fd_laplacian, read_grid, sample_grid, sample_grid_with_cap, stencil_half_width,
    write_grid, VectorGridField, DEFAULT_GRID_CAP,
};
use self::kernel::{add_kernel, add_kernel_jacobian, kernel_second, KernelDerivative};

/// Atoms closer than this to an evaluation point make kernel derivatives singular.
pub const SINGULARITY_RADIUS: f64 = 1e-12;

/// How expectations against the measure are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quadrature {
    /// Weighted sum over the atoms of an empirical measure.
    ExactSum,
    /// Closed-form radial profile.
    ClosedFormRadial,
    /// Average over one fixed sample of size `n` drawn with `seed`.
    MonteCarlo { n: usize, seed: u64 },
}

/// Immutable rank evaluator; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct RankEvaluator {
    measure: Measure,
    quadrature: Quadrature,
    // atoms summed over: the empirical measure itself, or the Monte-Carlo sample
    support: Option<Empirical>,
}

impl RankEvaluator {
    /// Deterministic evaluator: exact sums for empirical measures, closed
    /// forms for radial ones. Generic densities need [`RankEvaluator::monte_carlo`].
    pub fn exact(measure: Measure) -> Result<Self> {
        match &measure {
            Measure::Empirical(e) => {
                let support = Some(e.clone());
                Ok(RankEvaluator {
                    measure,
                    quadrature: Quadrature::ExactSum,
                    support,
                })
            }
            Measure::RadialClosedForm(_) => Ok(RankEvaluator {
                measure,
                quadrature: Quadrature::ClosedFormRadial,
                support: None,
            }),
            Measure::GenericDensity(_) => Err(Error::UnsupportedVariant {
                variant: "generic density",
                op: "exact rank evaluation",
            }),
        }
    }

    /// Monte-Carlo evaluator over a single fixed sample (common random numbers),
    /// so that the resulting field is smooth in `x` away from the sample points.
    pub fn monte_carlo(measure: Measure, n: usize, seed: u64) -> Result<Self> {
        let sample = measure.sample(n, seed)?;
        let support = Some(Empirical::new(sample, None)?);
        Ok(RankEvaluator {
            measure,
            quadrature: Quadrature::MonteCarlo { n, seed },
            support,
        })
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn dim(&self) -> Dimension {
        self.measure.dim()
    }

    /// Atoms the expectations are summed over, if any.
    pub fn support(&self) -> Option<&Empirical> {
        self.support.as_ref()
    }

    /// The radial profile when the rank is evaluated in closed form.
    pub fn profile(&self) -> Option<&RadialProfile> {
        match (&self.measure, self.quadrature) {
            (Measure::RadialClosedForm(p), Quadrature::ClosedFormRadial) => Some(p),
            _ => None,
        }
    }

    /// Distance from `x` to the nearest support atom (`inf` for closed forms).
    pub fn nearest_atom_distance(&self, x: &[f64]) -> f64 {
        let Some(s) = &self.support else {
            return f64::INFINITY;
        };
        s.atoms().map(|z| dist(x, z)).fold(f64::INFINITY, f64::min)
    }

    pub fn rank(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x)?;
        Ok(self.rank_unchecked(x))
    }

    pub(crate) fn rank_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        if let Some(p) = self.profile() {
            let phi = p.phi(norm(x));
            return x.iter().map(|c| phi * c).collect();
        }
        let s = self.support.as_ref().expect("support present for sums");
        let mut out = vec![0.0; d];
        let mut y = vec![0.0; d];
        for (z, &w) in s.atoms().zip(s.weights()) {
            for k in 0..d {
                y[k] = x[k] - z[k];
            }
            add_kernel(&mut out, &y, w);
        }
        out
    }

    /// Rank and, for Monte-Carlo evaluators, the per-component standard error
    /// (zero for deterministic evaluators).
    pub fn rank_with_stderr(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.dim(), x)?;
        let d = x.len();
        let mean = self.rank_unchecked(x);
        if !matches!(self.quadrature, Quadrature::MonteCarlo { .. }) {
            return Ok((mean, vec![0.0; d]));
        }
        let s = self.support.as_ref().expect("support present for sums");
        let n = s.len() as f64;
        let mut sq = vec![0.0; d];
        let mut y = vec![0.0; d];
        for z in s.atoms() {
            for k in 0..d {
                y[k] = x[k] - z[k];
            }
            let r = norm(&y);
            if r > 0.0 {
                for k in 0..d {
                    let dev = y[k] / r - mean[k];
                    sq[k] += dev * dev;
                }
            }
        }
        let se = sq.iter().map(|v| (v / (n - 1.0) / n).sqrt()).collect();
        Ok((mean, se))
    }

    fn check_singular(&self, x: &[f64]) -> Result<()> {
        let dist = self.nearest_atom_distance(x);
        if dist < SINGULARITY_RADIUS {
            return Err(Error::Singularity { distance: dist });
        }
        Ok(())
    }

    /// `∂^alpha R_P(x)`, one entry per rank component.
    pub fn rank_derivative(&self, x: &[f64], alpha: &[u32]) -> Result<Vec<f64>> {
        let d = self.dim().get();
        check_dim(self.dim(), x)?;
        if alpha.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: alpha.len(),
            });
        }
        let order: u32 = alpha.iter().sum();
        if order == 0 {
            return Ok(self.rank_unchecked(x));
        }
        if order as usize > d {
            return Err(Error::Domain(format!(
                "rank derivatives are provided up to order d = {d}, requested {order}"
            )));
        }
        if let Some(p) = self.profile() {
            return radial_derivative(p, x, alpha);
        }
        self.check_singular(x)?;
        let s = self.support.as_ref().expect("support present for sums");
        let axes: Vec<usize> = alpha
            .iter()
            .enumerate()
            .flat_map(|(a, &n)| std::iter::repeat_n(a, n as usize))
            .collect();
        let mut out = vec![0.0; d];
        let mut y = vec![0.0; d];
        match axes.as_slice() {
            [j] => {
                let mut jac = vec![0.0; d * d];
                for (z, &w) in s.atoms().zip(s.weights()) {
                    for k in 0..d {
                        y[k] = x[k] - z[k];
                    }
                    add_kernel_jacobian(&mut jac, &y, w);
                }
                for i in 0..d {
                    out[i] = jac[i * d + j];
                }
            }
            [j, k] => {
                for (z, &w) in s.atoms().zip(s.weights()) {
                    for l in 0..d {
                        y[l] = x[l] - z[l];
                    }
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += w * kernel_second(&y, i, *j, *k);
                    }
                }
            }
            _ => {
                let kernels: Vec<KernelDerivative> = (0..d).map(|i| KernelDerivative::new(d, i, alpha)).collect();
                for (z, &w) in s.atoms().zip(s.weights()) {
                    for l in 0..d {
                        y[l] = x[l] - z[l];
                    }
                    for (o, kd) in out.iter_mut().zip(&kernels) {
                        *o += w * kd.eval(&y);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Jacobian `J[i][j] = ∂_j R_i(x)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        let d = x.len();
        if let Some(p) = self.profile() {
            let r = norm(x);
            let (phi, phi1) = (p.phi(r), p.phi_d1(r));
            return Ok(DMatrix::from_fn(d, d, |i, j| {
                let delta = if i == j { phi } else { 0.0 };
                delta + phi1 * x[i] * x[j]
            }));
        }
        self.check_singular(x)?;
        let s = self.support.as_ref().expect("support present for sums");
        let mut jac = vec![0.0; d * d];
        let mut y = vec![0.0; d];
        for (z, &w) in s.atoms().zip(s.weights()) {
            for k in 0..d {
                y[k] = x[k] - z[k];
            }
            add_kernel_jacobian(&mut jac, &y, w);
        }
        Ok(DMatrix::from_row_slice(d, d, &jac))
    }

    /// `∇·R_P(x)`, the trace of the Jacobian.
    pub fn divergence(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        if let Some(p) = self.profile() {
            return Ok(p.h(norm(x)));
        }
        self.check_singular(x)?;
        Ok(self.divergence_unchecked(x))
    }

    pub(crate) fn divergence_unchecked(&self, x: &[f64]) -> f64 {
        if let Some(p) = self.profile() {
            return p.h(norm(x));
        }
        let s = self.support.as_ref().expect("support present for sums");
        let dm1 = x.len() as f64 - 1.0;
        s.atoms()
            .zip(s.weights())
            .map(|(z, &w)| {
                let r = dist(x, z);
                if r > 0.0 {
                    w * dm1 / r
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

// R_i = φ(r) x_i with φ = g/r.
fn radial_derivative(p: &RadialProfile, x: &[f64], alpha: &[u32]) -> Result<Vec<f64>> {
    let d = x.len();
    let r = norm(x);
    let axes: Vec<usize> = alpha
        .iter()
        .enumerate()
        .flat_map(|(a, &n)| std::iter::repeat_n(a, n as usize))
        .collect();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    match axes.as_slice() {
        [j] => {
            let (phi, phi1) = (p.phi(r), p.phi_d1(r));
            Ok((0..d).map(|i| phi * delta(i, *j) + phi1 * x[i] * x[*j]).collect())
        }
        [j, k] => {
            let (psi1, psi2) = (p.phi_d1(r), p.phi_d2(r));
            Ok((0..d)
                .map(|i| {
                    psi2 * x[i] * x[*j] * x[*k]
                        + psi1 * (delta(*j, *k) * x[i] + delta(i, *j) * x[*k] + delta(i, *k) * x[*j])
                })
                .collect())
        }
        _ => Err(Error::Domain(
            "closed-form radial rank derivatives are provided up to order 2".into(),
        )),
    }
}
