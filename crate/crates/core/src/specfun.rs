//! Constants and elementary special functions.
//!
//! Everything here is a pure function of its arguments. Constants such as
//! `gamma_d` are computed on each call from [`gamma_fn`] rather than being
//! tabulated, so identity checks between them exercise real arithmetic.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ambient dimension `d >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Dimension(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    #[inline]
    pub fn is_odd(self) -> bool {
        self.0 % 2 == 1
    }

    #[inline]
    pub fn is_even(self) -> bool {
        !self.is_odd()
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Dimension::new(d)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (Γ(x + 1) form)
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Euler Γ for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    if x == x.floor() && x <= 23.0 {
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return acc;
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    // split the power to postpone overflow near x ~ 170
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * (-t).exp() * half * lanczos_sum(z)
}

/// Natural logarithm of Γ for positive arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Normalising constant of the density-recovery operator:
/// `1/γ_d = 2^d π^{(d-1)/2} Γ((d+1)/2)`.
pub fn gamma_d(d: Dimension) -> f64 {
    let d = d.get() as f64;
    1.0 / (2f64.powf(d) * PI.powf(0.5 * (d - 1.0)) * gamma_unchecked(0.5 * (d + 1.0)))
}

/// Constant of the pointwise singular-integral form of `(-Δ)^s`.
pub fn c_ds(d: Dimension, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("c_ds requires 0 < s < 1, got {s}")));
    }
    let df = d.get() as f64;
    let num = s * (1.0 - s) * 4f64.powf(s) * gamma_unchecked(0.5 * df + s);
    let den = gamma_unchecked(2.0 - s).abs() * PI.powf(0.5 * df);
    Ok(num / den)
}

/// `Λ_{d,l} = ∏_{j=1}^{l} (2j-1)(d-2j-1)`; the empty product for `l = 0` is 1.
///
/// Satisfies `(-Δ)^l |x|^{-1} = Λ_{d,l} |x|^{-(2l+1)}` away from the origin.
pub fn lambda_dl(d: Dimension, l: usize) -> f64 {
    let d = d.get() as f64;
    (1..=l)
        .map(|j| {
            let j = j as f64;
            (2.0 * j - 1.0) * (d - 2.0 * j - 1.0)
        })
        .product()
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: Dimension) -> f64 {
    let d = d.get() as f64;
    2.0 * PI.powf(0.5 * d) / gamma_unchecked(0.5 * d)
}

// W. J. Cody's rational Chebyshev approximations for erf / erfc.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6,
    113.864_154_151_050_16,
    377.485_237_685_302,
    3_209.377_589_138_469_5,
    0.185_777_706_184_603_15,
];
const ERF_B: [f64; 4] = [
    23.601_290_952_344_122,
    244.024_637_934_444_17,
    1_282.616_526_077_372_3,
    2_844.236_833_439_171,
];
const ERF_C: [f64; 9] = [
    0.564_188_496_988_670_1,
    8.883_149_794_388_376,
    66.119_190_637_141_63,
    298.635_138_197_400_1,
    881.952_221_241_769,
    1_712.047_612_634_070_6,
    2_051.078_377_826_071_5,
    1_230.339_354_797_997_3,
    2.153_115_354_744_038_5e-8,
];
const ERF_D: [f64; 8] = [
    15.744_926_110_709_835,
    117.693_950_891_312_5,
    537.181_101_862_009_9,
    1_621.389_574_566_690_2,
    3_290.799_235_733_459_6,
    4_362.619_090_143_247,
    3_439.367_674_143_721_6,
    1_230.339_354_803_749_4,
];
const ERF_P: [f64; 6] = [
    0.305_326_634_961_232_36,
    0.360_344_899_949_804_45,
    0.125_781_726_111_229_25,
    0.016_083_785_148_742_275,
    6.587_491_615_298_378e-4,
    0.016_315_387_137_302_097,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_467_3,
    0.527_905_102_951_428_4,
    0.060_518_341_312_441_32,
    0.002_335_204_976_268_691_8,
];
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// `exp(-y^2)` with the argument split so that the large-`y` factor is exact.
fn exp_neg_sq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Complementary error function for `y >= 0.46875`.
fn erfc_tail(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        (num + ERF_C[7]) / (den + ERF_D[7]) * exp_neg_sq(y)
    } else if y < 26.7 {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let r = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        (FRAC_1_SQRT_PI - r) / y * exp_neg_sq(y)
    } else {
        0.0
    }
}

fn erf_small(x: f64) -> f64 {
    let ysq = x * x;
    let mut num = ERF_A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + ERF_A[i]) * ysq;
        den = (den + ERF_B[i]) * ysq;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.468_75 {
        erf_small(x)
    } else {
        let v = 1.0 - erfc_tail(y);
        if x < 0.0 {
            -v
        } else {
            v
        }
    }
}

pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.468_75 {
        1.0 - erf_small(x)
    } else if x > 0.0 {
        erfc_tail(y)
    } else {
        2.0 - erfc_tail(y)
    }
}

/// Standard normal cumulative distribution function Φ.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density φ.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

// Crossover between the ascending series and the Hankel asymptotic expansion:
// beyond 20 the smallest asymptotic term is ~e^{-40}.
const BESSEL_I_CROSSOVER: f64 = 20.0;

/// Exponentially scaled `e^{-x} I_nu(x)` for `nu ∈ {0, 1}` and `x >= 0`.
fn bessel_i_scaled(nu: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= BESSEL_I_CROSSOVER {
        let q = 0.25 * x * x;
        let (mut term, shift) = if nu == 0 { (1.0, 0.0) } else { (0.5 * x, 1.0) };
        let mut sum = term;
        let mut k = 1.0;
        loop {
            term *= q / (k * (k + shift));
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        let mu = 4.0 * (nu * nu) as f64;
        let mut term = 1.0;
        let mut sum: f64 = 1.0;
        let mut k = 1.0;
        loop {
            let odd = 2.0 * k - 1.0;
            let next = -term * (mu - odd * odd) / (k * 8.0 * x);
            if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
                if next.abs() < term.abs() {
                    sum += next;
                }
                break;
            }
            sum += next;
            term = next;
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Modified Bessel function `I_0` on `x >= 0`; overflows to `inf` past ~713.
pub fn bessel_i0(x: f64) -> f64 {
    bessel_i0e(x) * x.exp()
}

/// `e^{-x} I_0(x)`.
pub fn bessel_i0e(x: f64) -> f64 {
    bessel_i_scaled(0, x.abs())
}

/// `e^{-x} I_1(x)`.
pub fn bessel_i1e(x: f64) -> f64 {
    let v = bessel_i_scaled(1, x.abs());
    if x < 0.0 {
        -v
    } else {
        v
    }
}

pub fn bessel_i1(x: f64) -> f64 {
    bessel_i1e(x) * x.abs().exp()
}

/// Bessel function of the first kind of order zero.
#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Positive zeros of `J_0`: McMahon's expansion refined by Newton.
pub fn bessel_j0_zero(k: usize) -> f64 {
    assert!(k >= 1);
    let beta = (k as f64 - 0.25) * PI;
    let b8 = 8.0 * beta;
    let mut z = beta + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3)) + 120_928.0 / (15.0 * b8.powi(5));
    for _ in 0..6 {
        // J0' = -J1
        let step = libm::j0(z) / -libm::j1(z);
        z -= step;
        if step.abs() < 1e-15 * z {
            break;
        }
    }
    z
}
