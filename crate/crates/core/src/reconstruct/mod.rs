//! Density reconstruction `f = 𝓛_d R_P` with `𝓛_d = γ_d (−Δ)^{(d−1)/2} ∇·`.
//!
//! Odd dimensions need only integer Laplacians ([`reconstruct_odd_local`],
//! [`reconstruct_odd_grid`]). Even dimensions need a half-Laplacian, taken
//! either as a singular integral, through the Hankel transform (isotropic
//! d = 2), or as the boundary derivative of a harmonic extension.

mod extension;
mod hankel;
mod identity;
mod odd;
mod singular;

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::norm;
use crate::rankfield::{write_grid, RankEvaluator, VectorGridField};
use crate::specfun::{sphere_area, Dimension};

pub use self::extension::{poisson_constant, poisson_smoothing, reconstruct_extension};
pub use self::hankel::{hankel_transform_order0, isotropic_symbol, reconstruct_isotropic_hankel, HankelOptions};
pub use self::identity::{verify_identity_on_test_function, IdentityCheck, TestFunction};
pub use self::odd::{reconstruct_odd_grid, reconstruct_odd_local};
pub use self::singular::{half_laplacian_singular, reconstruct_even_singular, SingularOptions, TailAsymptote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    OddLocal,
    SingularIntegral,
    HankelIsotropic,
    Extension,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::OddLocal => "odd-local",
            Method::SingularIntegral => "singular-integral",
            Method::HankelIsotropic => "hankel",
            Method::Extension => "extension",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "odd-local" | "odd" | "local" => Ok(Method::OddLocal),
            "singular-integral" | "singular" => Ok(Method::SingularIntegral),
            "hankel" | "hankel-isotropic" => Ok(Method::HankelIsotropic),
            "extension" | "poisson" => Ok(Method::Extension),
            other => Err(Error::Config(format!("unknown reconstruction method '{other}'"))),
        }
    }
}

/// Cubic box `[lo, hi]^d` with `nodes` per axis; errors are measured on
/// `[-inner, inner]^d` when `inner` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub inner: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: -3.0,
            hi: 3.0,
            nodes: 61,
            inner: Some(2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionConfig {
    pub method: Method,
    /// Inner cutoff of the singular integral.
    pub eta: f64,
    /// Outer truncation radius of the singular integral.
    pub r_max: f64,
    pub fd_order: u32,
    pub grid: GridSpec,
    /// Monte-Carlo sample size for measures without closed forms.
    pub mc_budget: usize,
    pub seed: u64,
    pub extension_height: f64,
    /// Allowed change between successive refinements.
    pub tolerance: f64,
    /// Angular nodes of the polar rules in d = 2.
    pub angles: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            method: Method::OddLocal,
            eta: 1e-3,
            r_max: 50.0,
            fd_order: 2,
            grid: GridSpec::default(),
            mc_budget: 100_000,
            seed: 0,
            extension_height: 0.01,
            tolerance: 1e-4,
            angles: 64,
        }
    }
}

impl ReconstructionConfig {
    pub fn with_method(method: Method) -> Self {
        ReconstructionConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.r_max > 10.0) || !self.r_max.is_finite() {
            return bad(format!("r_max must exceed 10, got {}", self.r_max));
        }
        if !(self.extension_height > 0.0 && self.extension_height <= 0.5) {
            return bad(format!(
                "extension height must lie in (0, 0.5], got {}",
                self.extension_height
            ));
        }
        if self.fd_order != 2 && self.fd_order != 4 {
            return bad(format!("fd_order must be 2 or 4, got {}", self.fd_order));
        }
        if self.grid.nodes < 5 || !(self.grid.hi > self.grid.lo) {
            return bad("grid needs hi > lo and at least 5 nodes per axis".into());
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.angles < 8 {
            return bad(format!("need at least 8 angular nodes, got {}", self.angles));
        }
        Ok(())
    }
}

/// Where point-wise pipelines evaluate the density.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalPoints {
    /// `r · e₁` for each radius; the report then carries a radial curve.
    Radii(Vec<f64>),
    Points(Vec<Vec<f64>>),
}

impl EvalPoints {
    pub(crate) fn resolve(&self, d: Dimension) -> Result<Vec<Vec<f64>>> {
        match self {
            EvalPoints::Radii(rs) => Ok(rs
                .iter()
                .map(|&r| {
                    let mut x = vec![0.0; d.get()];
                    x[0] = r;
                    x
                })
                .collect()),
            EvalPoints::Points(ps) => {
                for p in ps {
                    crate::measures::check_dim(d, p)?;
                }
                Ok(ps.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub f_hat: f64,
    pub f_reference: Option<f64>,
}

/// Values at heights `t` and `t/2` and the Richardson extrapolate `2v(t/2) − v(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionDiagnostics {
    pub height: f64,
    pub at_height: Vec<f64>,
    pub at_half_height: Vec<f64>,
    pub richardson: Vec<f64>,
    pub error_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sup_error: Option<f64>,
    /// Root-mean-square error over samples, or the L² norm over the grid.
    pub l2_error: Option<f64>,
    /// `sup_error` divided by the largest reference value.
    pub relative_sup_error: Option<f64>,
    /// `∫ max(0, −f̂)` over a radial curve or a grid; `None` for scattered points.
    pub negativity_mass: Option<f64>,
    pub min_value: f64,
    pub fd_order_estimate: Option<f64>,
    pub coarse_relative_sup_error: Option<f64>,
    /// Largest change between the final and the previous refinement.
    pub refinement_change: Option<f64>,
    pub extension: Option<ExtensionDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub method: Method,
    pub config: ReconstructionConfig,
    /// The radial quadrature underlying values, e.g. "closed-form radial".
    pub path: String,
    pub samples: Vec<Sample>,
    #[serde(skip)]
    pub grid: Option<VectorGridField>,
    pub diagnostics: Diagnostics,
}

impl ReconstructionReport {
    pub(crate) fn from_samples(
        method: Method,
        config: &ReconstructionConfig,
        path: impl Into<String>,
        samples: Vec<Sample>,
        radial: bool,
    ) -> Self {
        let mut diagnostics = Diagnostics {
            min_value: samples.iter().map(|s| s.f_hat).fold(f64::INFINITY, f64::min),
            ..Default::default()
        };
        let errs: Vec<f64> = samples
            .iter()
            .filter_map(|s| s.f_reference.map(|f| (s.f_hat - f).abs()))
            .collect();
        if !errs.is_empty() && errs.len() == samples.len() {
            let sup = errs.iter().copied().fold(0.0, f64::max);
            let scale = samples
                .iter()
                .filter_map(|s| s.f_reference)
                .fold(0.0, |a: f64, b| a.max(b.abs()));
            diagnostics.sup_error = Some(sup);
            diagnostics.l2_error = Some((errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt());
            diagnostics.relative_sup_error = (scale > 0.0).then(|| sup / scale);
        }
        if radial && !samples.is_empty() {
            diagnostics.negativity_mass = Some(radial_negativity(&samples));
        }
        ReconstructionReport {
            method,
            config: config.clone(),
            path: path.into(),
            samples,
            grid: None,
            diagnostics,
        }
    }

    /// JSON: method, config echo, path and diagnostics.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Radial curve CSV `r,f_hat,f_reference,abs_error`, point CSV
    /// `x1..xd,f_hat,f_reference,abs_error`, or the grid format of rankfield.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        if let Some(g) = &self.grid {
            return write_grid(g, w);
        }
        let d = self.samples.first().map_or(0, |s| s.x.len());
        let curve = self.is_curve();
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = if curve {
            vec!["r".into()]
        } else {
            (1..=d).map(|i| format!("x{i}")).collect()
        };
        header.extend(["f_hat", "f_reference", "abs_error"].map(String::from));
        out.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = if curve {
                vec![format!("{:e}", s.x[0])]
            } else {
                s.x.iter().map(|v| format!("{v:e}")).collect()
            };
            row.push(format!("{:e}", s.f_hat));
            match s.f_reference {
                Some(f) => {
                    row.push(format!("{f:e}"));
                    row.push(format!("{:e}", (s.f_hat - f).abs()));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
            out.write_record(&row)?;
        }
        out.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }

    fn is_curve(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.x[0] >= 0.0 && s.x[1..].iter().all(|&c| c == 0.0))
    }
}

// ∫ |S^{d-1}| r^{d-1} max(0, −f̂) dr by the trapezoid rule over sorted radii.
fn radial_negativity(samples: &[Sample]) -> f64 {
    let d = samples[0].x.len();
    let area = Dimension::new(d).map(sphere_area).unwrap_or(2.0);
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| {
            let r = norm(&s.x);
            (r, area * r.powi(d as i32 - 1) * (-s.f_hat).max(0.0))
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// Reference density when the measure has one.
pub(crate) fn reference_density(ev: &RankEvaluator, x: &[f64]) -> Option<f64> {
    ev.measure().density(x).ok()
}

/// Dispatches on `cfg.method`.
pub fn reconstruct(
    ev: &RankEvaluator,
    cfg: &ReconstructionConfig,
    points: &EvalPoints,
) -> Result<ReconstructionReport> {
    cfg.validate()?;
    match cfg.method {
        Method::OddLocal => reconstruct_odd_local(ev, cfg, points),
        Method::SingularIntegral => reconstruct_even_singular(ev, cfg, points),
        Method::HankelIsotropic => {
            let radii = match points {
                EvalPoints::Radii(r) => r.clone(),
                EvalPoints::Points(ps) => ps.iter().map(|p| norm(p)).collect(),
            };
            reconstruct_isotropic_hankel(ev, cfg, &radii)
        }
        Method::Extension => reconstruct_extension(ev, cfg, points),
    }
}

pub(crate) fn parity(method: &'static str, d: Dimension, want_odd: bool) -> Result<()> {
    if d.is_odd() != want_odd {
        return Err(Error::Parity {
            method,
            required: if want_odd { "an odd" } else { "an even" },
            d: d.get(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut cfg = ReconstructionConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.eta = 1.0;
        assert!(cfg.validate().is_err());
        cfg = ReconstructionConfig {
            r_max: 10.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg = ReconstructionConfig {
            extension_height: 0.6,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg = ReconstructionConfig {
            fd_order: 3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_roundtrip_with_defaults() {
        let cfg: ReconstructionConfig =
            serde_json::from_str(r#"{"method": "singular-integral", "eta": 0.002}"#).unwrap();
        assert_eq!(cfg.method, Method::SingularIntegral);
        assert_eq!(cfg.eta, 0.002);
        assert_eq!(cfg.r_max, 50.0);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ReconstructionConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn method_names_parse() {
        for m in [
            Method::OddLocal,
            Method::SingularIntegral,
            Method::HankelIsotropic,
            Method::Extension,
        ] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("fft".parse::<Method>().is_err());
    }

    #[test]
    fn negativity_is_reported_not_clipped() {
        let samples = vec![
            Sample {
                x: vec![0.0, 0.0],
                f_hat: -0.1,
                f_reference: None,
            },
            Sample {
                x: vec![1.0, 0.0],
                f_hat: -0.1,
                f_reference: None,
            },
        ];
        let rep = ReconstructionReport::from_samples(
            Method::OddLocal,
            &ReconstructionConfig::default(),
            "test",
            samples,
            true,
        );
        // trapezoid of 2πr·0.1 over [0, 1]
        assert!((rep.diagnostics.negativity_mass.unwrap() - 0.1 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(rep.diagnostics.min_value, -0.1);
        assert_eq!(rep.samples[0].f_hat, -0.1);
    }
}
