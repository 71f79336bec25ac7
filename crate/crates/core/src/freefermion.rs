//! Closed-form dynamics of the `mu = h = 0` quench.
//!
//! At vanishing mass and field the links decouple and the matter sector is a
//! free hopping chain. The formulas here are written in the time variable of
//! a chain with hopping amplitude `1/2`; a lattice model with hopping `J`
//! reaches time `tau` at `t = tau / (2 J)`.

use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreeFermionError {
    #[error("time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
    #[error("the number of sites must be even and positive, got {0}")]
    InvalidSize(usize),
    #[error("quadrature tolerances must be positive and at least one subdivision allowed")]
    InvalidQuadrature,
    #[error("quadrature did not converge: estimated error {achieved:.3e} after {subdivisions} subdivisions")]
    NotConverged { value: f64, achieved: f64, subdivisions: usize },
}

/// Tolerances for the adaptive quadrature of the return rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-10, max_subdivisions: 20_000 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), FreeFermionError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_subdivisions > 0) {
            return Err(FreeFermionError::InvalidQuadrature);
        }
        Ok(())
    }
}

/// Bessel function `J_0(x)`.
///
/// Power series up to `|x| = 12`, Hankel asymptotic expansion (truncated at
/// its smallest term) beyond; absolute error below `1e-12`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 12.0 {
        let y = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -y / (k * k);
            sum += term;
            if term.abs() < 1e-18 && k * k > y {
                return sum;
            }
        }
    }
    // a_k = prod_{j<=k} (-(2j - 1)^2) / (k! 8^k)
    let mut a = 1.0;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut last = f64::INFINITY;
    let mut k = 0usize;
    loop {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * a / x.powi(k as i32);
        if term.abs() > last || term.abs() < 1e-17 {
            break;
        }
        if k % 2 == 0 {
            p += term;
        } else {
            q += term;
        }
        last = term.abs();
        k += 1;
        let m = (2 * k - 1) as f64;
        a *= -(m * m) / (8.0 * k as f64);
    }
    let w = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

/// Staggered density imbalance `N_d(t) = J_0(2t)`.
pub fn nd_analytic(t: f64) -> f64 {
    bessel_j0(2.0 * t)
}

/// Time of the `n`-th nonanalyticity, `(n + 1/2) pi`.
pub fn dqpt_times_analytic(n: usize) -> f64 {
    (n as f64 + 0.5) * PI
}

fn log_abs_cos(t: f64, k: f64) -> f64 {
    (t * k.cos()).cos().abs().ln()
}

/// Return rate per site of the thermodynamic-limit quench,
/// `-(2/pi) int_0^{pi/2} ln|cos(t cos k)| dk`.
///
/// The integration range is split at every zero of `cos(t cos k)`, where
/// the integrand has an integrable logarithmic singularity, and each panel
/// is integrated by globally adaptive Gauss-Kronrod (7, 15).
pub fn return_rate_analytic(t: f64, quad: &QuadratureSpec) -> Result<f64, FreeFermionError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(FreeFermionError::InvalidTime(t));
    }
    quad.validate()?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut breaks = vec![0.0];
    let mut n = 0;
    loop {
        let c = dqpt_times_analytic(n) / t;
        if c > 1.0 {
            break;
        }
        let k = c.acos();
        if k > 0.0 && k < FRAC_PI_2 {
            breaks.push(k);
        }
        n += 1;
    }
    breaks.push(FRAC_PI_2);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let f = |k: f64| log_abs_cos(t, k);
    let (integral, err, subdivisions) = adaptive_gk15(&f, &breaks, quad);
    let value = -(2.0 / PI) * integral;
    let achieved = (2.0 / PI) * err;
    if achieved > quad.abs_tol.max(quad.rel_tol * value.abs()) {
        return Err(FreeFermionError::NotConverged { value, achieved, subdivisions });
    }
    Ok(value.max(0.0))
}

/// [`return_rate_analytic`] over a time grid.
pub fn return_rate_analytic_grid(
    times: &[f64],
    quad: &QuadratureSpec,
    exec: Execution,
) -> Vec<Result<f64, FreeFermionError>> {
    par::map(exec, times, |&t| return_rate_analytic(t, quad))
}

/// Midpoint Riemann sum of the return-rate integral with `l / 2` momenta
/// `k_m = (m - 1/2) pi / l`.
///
/// This is exactly the return rate per site of a ring of `2 l` sites at half
/// filling with antiperiodic fermion boundary conditions. A mode with
/// `|cos(t cos k_m)| < 1e-300` makes the overlap vanish; the rate is then
/// `f64::INFINITY`.
pub fn return_rate_mode_sum(t: f64, l: usize) -> Result<f64, FreeFermionError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(FreeFermionError::InvalidTime(t));
    }
    if l == 0 || l % 2 != 0 {
        return Err(FreeFermionError::InvalidSize(l));
    }
    let mut sum = 0.0;
    for m in 1..=l / 2 {
        let k = (m as f64 - 0.5) * PI / l as f64;
        let c = (t * k.cos()).cos().abs();
        if c < 1e-300 {
            return Ok(f64::INFINITY);
        }
        sum += c.ln();
    }
    Ok(-(2.0 / l as f64) * sum)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += KRONROD_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive integration over consecutive `breaks`; returns
/// `(integral, error estimate, subdivisions)`.
fn adaptive_gk15(f: &impl Fn(f64) -> f64, breaks: &[f64], quad: &QuadratureSpec) -> (f64, f64, usize) {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        let (value, err) = gk15(f, w[0], w[1]);
        heap.push(Panel { a: w[0], b: w[1], value, err });
    }
    let mut subdivisions = 0;
    let mut total: f64 = heap.iter().map(|p| p.value).sum();
    let mut err: f64 = heap.iter().map(|p| p.err).sum();
    loop {
        if err <= quad.abs_tol.max(quad.rel_tol * total.abs()) || subdivisions >= quad.max_subdivisions {
            // resum to shed the drift of the running totals
            let total = heap.iter().map(|p| p.value).sum();
            let err = heap.iter().map(|p| p.err).sum();
            return (total, err, subdivisions);
        }
        let worst = heap.pop().expect("at least one panel");
        total -= worst.value;
        err -= worst.err;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || worst.err == 0.0 {
            // panel at machine resolution: keep it and stop refining
            total += worst.value;
            heap.push(Panel { err: 0.0, ..worst });
            continue;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, e) = gk15(f, a, b);
            total += value;
            err += e;
            heap.push(Panel { a, b, value, err: e });
        }
        subdivisions += 1;
    }
}
