//! Quadrature rules shared by the reconstruction and depth pipelines.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::specfun::{sphere_area, Dimension};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    const MAX_INTERVALS: usize = 2000;
    let (v, e) = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if pieces.len() >= MAX_INTERVALS {
            return Integral {
                value: total,
                error: err,
                converged: false,
            };
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, pv, pe) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = pieces.iter().map(|p| p.2).sum();
    let error = pieces.iter().map(|p| p.3).sum();
    Integral {
        value,
        error,
        converged: true,
    }
}

/// Adaptive integration over consecutive breakpoints.
pub fn integrate_breakpoints<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Integral {
    let mut out = Integral {
        value: 0.0,
        error: 0.0,
        converged: true,
    };
    for w in breaks.windows(2) {
        let part = integrate_adaptive(&mut f, w[0], w[1], abs_tol, rel_tol);
        out.value += part.value;
        out.error += part.error;
        out.converged &= part.converged;
    }
    out
}

/// A weighted point set on the unit sphere `S^{d-1}`; weights sum to its area.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// d = 1: the two points ±1. d = 2: `resolution` equispaced angles.
    /// d = 3: Gauss–Legendre in cos(polar) × `2·resolution` azimuths.
    /// d ≥ 4: `resolution^(d-1)` antipodal pairs of quasi-random directions.
    pub fn new(d: Dimension, resolution: usize) -> Self {
        let dim = d.get();
        match dim {
            1 => SphereRule {
                dim,
                directions: vec![vec![1.0], vec![-1.0]],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let n = resolution.max(4);
                let w = 2.0 * PI / n as f64;
                let directions = (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        vec![t.cos(), t.sin()]
                    })
                    .collect();
                SphereRule {
                    dim,
                    directions,
                    weights: vec![w; n],
                }
            }
            3 => Self::product_3d(resolution.max(2), 2 * resolution.max(2)),
            _ => {
                let pairs = resolution.max(2).pow((dim - 1) as u32).min(1 << 16);
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5bee);
                let mut directions = Vec::with_capacity(2 * pairs);
                for _ in 0..pairs {
                    let v = crate::measures::unit_vector(&mut rng, dim);
                    let neg: Vec<f64> = v.iter().map(|c| -c).collect();
                    directions.push(v);
                    directions.push(neg);
                }
                let w = sphere_area(d) / directions.len() as f64;
                let n = directions.len();
                SphereRule {
                    dim,
                    directions,
                    weights: vec![w; n],
                }
            }
        }
    }

    /// Product rule on S²: Gauss–Legendre in `cos θ` × uniform azimuth.
    pub fn product_3d(n_polar: usize, n_azimuth: usize) -> Self {
        let gl = GaussLegendre::new(n_polar);
        let mut directions = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        let dphi = 2.0 * PI / n_azimuth as f64;
        for (&ct, &w) in gl.nodes.iter().zip(&gl.weights) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for k in 0..n_azimuth {
                let phi = (k as f64 + 0.5) * dphi;
                directions.push(vec![st * phi.cos(), st * phi.sin(), ct]);
                weights.push(w * dphi);
            }
        }
        SphereRule {
            dim: 3,
            directions,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.directions.iter().zip(&self.weights).map(|(u, &w)| w * f(u)).sum()
    }
}
