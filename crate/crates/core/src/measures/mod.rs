//! Probability measures on `R^d`: weighted atoms, the Gaussian and Cauchy
//! reference laws, and arbitrary densities paired with a sampler.

mod csv;
mod radial;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::specfun::{gamma_fn, Dimension};

pub use self::csv::{empirical_from_csv, empirical_from_reader};
pub use self::radial::{RadialFamily, RadialProfile, SERIES_RADIUS};

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// Finitely many weighted atoms; coordinates stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    dim: Dimension,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl Empirical {
    /// Weights default to uniform. Supplied weights must be positive and sum
    /// to 1 within 1e-9; they are renormalised exactly.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::Domain("empirical measure needs at least one atom".into()))?;
        let dim = Dimension::new(first.len())?;
        let mut coords = Vec::with_capacity(atoms.len() * dim.get());
        for a in &atoms {
            if a.len() != dim.get() {
                return Err(Error::DimensionMismatch {
                    expected: dim.get(),
                    found: a.len(),
                });
            }
            if a.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain("atom coordinates must be finite".into()));
            }
            coords.extend_from_slice(a);
        }
        let n = atoms.len();
        let weights = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) => {
                if w.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: w.len(),
                    });
                }
                if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::Domain("atom weights must be positive".into()));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!("atom weights sum to {total}, expected 1")));
                }
                w.into_iter().map(|x| x / total).collect()
            }
        };
        Ok(Empirical { dim, coords, weights })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        let d = self.dim.get();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.get())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Shifted copy `P + t`.
    pub fn translated(&self, t: &[f64]) -> Self {
        let d = self.dim.get();
        let coords = self.coords.iter().enumerate().map(|(i, c)| c + t[i % d]).collect();
        Empirical { coords, ..self.clone() }
    }

    /// Point reflection through `center`: atoms `z ↦ 2c - z`.
    pub fn reflected(&self, center: &[f64]) -> Self {
        let d = self.dim.get();
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| 2.0 * center[i % d] - c)
            .collect();
        Empirical { coords, ..self.clone() }
    }
}

/// A density on `R^d` paired with a sampler drawing from it.
#[derive(Clone)]
pub struct GenericDensity {
    pub name: String,
    pub dim: Dimension,
    pub density: DensityFn,
    pub sampler: SamplerFn,
}

impl fmt::Debug for GenericDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericDensity")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Measure {
    Empirical(Empirical),
    RadialClosedForm(RadialProfile),
    GenericDensity(GenericDensity),
}

impl Measure {
    pub fn empirical(atoms: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        Empirical::new(atoms, weights).map(Measure::Empirical)
    }

    pub fn radial(family: RadialFamily, d: usize) -> Result<Self> {
        RadialProfile::new(family, Dimension::new(d)?).map(Measure::RadialClosedForm)
    }

    pub fn gaussian(d: usize) -> Result<Self> {
        Self::radial(RadialFamily::Gaussian, d)
    }

    pub fn cauchy(d: usize) -> Result<Self> {
        Self::radial(RadialFamily::Cauchy, d)
    }

    pub fn generic<F, S>(name: impl Into<String>, d: usize, density: F, sampler: S) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync + 'static,
    {
        Ok(Measure::GenericDensity(GenericDensity {
            name: name.into(),
            dim: Dimension::new(d)?,
            density: Arc::new(density),
            sampler: Arc::new(sampler),
        }))
    }

    pub fn dim(&self) -> Dimension {
        match self {
            Measure::Empirical(e) => e.dim(),
            Measure::RadialClosedForm(p) => p.dim(),
            Measure::GenericDensity(g) => g.dim,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Measure::Empirical(_) => "empirical",
            Measure::RadialClosedForm(_) => "radial closed-form",
            Measure::GenericDensity(_) => "generic density",
        }
    }

    pub fn as_empirical(&self) -> Option<&Empirical> {
        match self {
            Measure::Empirical(e) => Some(e),
            _ => None,
        }
    }

    /// Density `f_P(x)`; atomic measures have none.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        match self {
            Measure::Empirical(_) => Err(Error::UnsupportedVariant {
                variant: "empirical",
                op: "density",
            }),
            Measure::RadialClosedForm(p) => Ok(p.f(norm(x))),
            Measure::GenericDensity(g) => {
                let v = (g.density)(x);
                if v < 0.0 || v.is_nan() {
                    return Err(Error::Domain(format!("density '{}' returned {v}", g.name)));
                }
                Ok(v)
            }
        }
    }

    pub fn radial_profile(&self) -> Result<&RadialProfile> {
        match self {
            Measure::RadialClosedForm(p) => Ok(p),
            other => Err(Error::UnsupportedVariant {
                variant: other.variant_name(),
                op: "radial_profile",
            }),
        }
    }

    /// `n` independent draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::Domain("sample size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim().get();
        let out = match self {
            Measure::RadialClosedForm(p) => match p.family() {
                RadialFamily::Gaussian => (0..n).map(|_| normal_vector(&mut rng, d)).collect(),
                RadialFamily::Cauchy => (0..n)
                    .map(|_| {
                        let mut v = normal_vector(&mut rng, d);
                        let w = box_muller(&mut rng).0.abs();
                        v.iter_mut().for_each(|c| *c /= w);
                        v
                    })
                    .collect(),
            },
            Measure::Empirical(e) => {
                let mut cdf = Vec::with_capacity(e.len());
                let mut acc = 0.0;
                for &w in e.weights() {
                    acc += w;
                    cdf.push(acc);
                }
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.gen::<f64>() * acc;
                        let i = cdf.partition_point(|&c| c <= u).min(e.len() - 1);
                        e.atom(i).to_vec()
                    })
                    .collect()
            }
            Measure::GenericDensity(g) => (0..n).map(|_| (g.sampler)(&mut rng)).collect(),
        };
        Ok(out)
    }
}

pub(crate) fn check_dim(dim: Dimension, x: &[f64]) -> Result<()> {
    if x.len() != dim.get() {
        return Err(Error::DimensionMismatch {
            expected: dim.get(),
            found: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// One Box–Muller pair of independent standard normals.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // 1 - U lies in (0, 1], keeping the logarithm finite
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let rad = (-2.0 * u1.ln()).sqrt();
    let ang = 2.0 * PI * u2;
    (rad * ang.cos(), rad * ang.sin())
}

pub fn normal_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(d + 1);
    while v.len() < d {
        let (a, b) = box_muller(rng);
        v.push(a);
        v.push(b);
    }
    v.truncate(d);
    v
}

/// Uniformly distributed direction on `S^{d-1}`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v = normal_vector(rng, d);
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Density of the standard multivariate Cauchy law in any dimension.
pub fn cauchy_density(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let c = gamma_fn(0.5 * (d + 1.0)).expect("positive argument") / PI.powf(0.5 * (d + 1.0));
    let r2: f64 = x.iter().map(|c| c * c).sum();
    c * (1.0 + r2).powf(-0.5 * (d + 1.0))
}
