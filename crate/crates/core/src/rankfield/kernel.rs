//! The unit-vector kernel `K(y) = y/|y|` (zero at the origin) and its
//! partial derivatives.
//!
//! Every derivative of `K_i` is a sum of monomials `c · y^p · |y|^{-m}`, so
//! arbitrary orders are produced by differentiating that representation
//! term by term. Orders one and two also have hand-written closed forms used
//! on the hot paths.

use std::collections::BTreeMap;

/// One monomial `coef · Π y_l^{pow_l} · |y|^{-m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub pow: Vec<u32>,
    pub m: u32,
}

/// `∂^alpha K_i` as a sum of monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDerivative {
    pub terms: Vec<Monomial>,
}

impl KernelDerivative {
    pub fn new(d: usize, component: usize, alpha: &[u32]) -> Self {
        assert_eq!(alpha.len(), d);
        let mut pow = vec![0; d];
        pow[component] = 1;
        let mut terms = vec![Monomial { coef: 1.0, pow, m: 1 }];
        for (axis, &order) in alpha.iter().enumerate() {
            for _ in 0..order {
                terms = differentiate(&terms, axis);
            }
        }
        KernelDerivative { terms }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|c| c * c).sum();
        if r2 == 0.0 {
            return 0.0;
        }
        let r = r2.sqrt();
        self.terms
            .iter()
            .map(|t| {
                let mono: f64 = t
                    .pow
                    .iter()
                    .zip(y)
                    .filter(|(&p, _)| p > 0)
                    .map(|(&p, &c)| c.powi(p as i32))
                    .product();
                t.coef * mono / r.powi(t.m as i32)
            })
            .sum()
    }
}

fn differentiate(terms: &[Monomial], axis: usize) -> Vec<Monomial> {
    let mut acc: BTreeMap<(Vec<u32>, u32), f64> = BTreeMap::new();
    for t in terms {
        let p = t.pow[axis];
        if p > 0 {
            let mut pow = t.pow.clone();
            pow[axis] -= 1;
            *acc.entry((pow, t.m)).or_default() += t.coef * p as f64;
        }
        let mut pow = t.pow.clone();
        pow[axis] += 1;
        *acc.entry((pow, t.m + 2)).or_default() -= t.coef * t.m as f64;
    }
    acc.into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|((pow, m), coef)| Monomial { coef, pow, m })
        .collect()
}

/// `K(y)` added into `out` with weight `w`; the diagonal contributes nothing.
#[inline]
pub fn add_kernel(out: &mut [f64], y: &[f64], w: f64) {
    let r2: f64 = y.iter().map(|c| c * c).sum();
    if r2 > 0.0 {
        let s = w / r2.sqrt();
        for (o, &c) in out.iter_mut().zip(y) {
            *o += s * c;
        }
    }
}

/// `J_K(y) = (I - u uᵀ)/|y|` added into the row-major `d×d` buffer.
#[inline]
pub fn add_kernel_jacobian(out: &mut [f64], y: &[f64], w: f64) {
    let d = y.len();
    let r2: f64 = y.iter().map(|c| c * c).sum();
    if r2 == 0.0 {
        return;
    }
    let r = r2.sqrt();
    let s = w / r;
    let s3 = w / (r2 * r);
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { s } else { 0.0 };
            out[i * d + j] += delta - s3 * y[i] * y[j];
        }
    }
}

/// `∂_j ∂_k K_i(y)`.
#[inline]
pub fn kernel_second(y: &[f64], i: usize, j: usize, k: usize) -> f64 {
    let r2: f64 = y.iter().map(|c| c * c).sum();
    if r2 == 0.0 {
        return 0.0;
    }
    let r = r2.sqrt();
    let r3 = r2 * r;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    -(delta(i, j) * y[k] + delta(i, k) * y[j] + delta(j, k) * y[i]) / r3 + 3.0 * y[i] * y[j] * y[k] / (r3 * r2)
}
