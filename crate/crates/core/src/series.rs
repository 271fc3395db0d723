//! Truncated power-series arithmetic and iteration of generating functions.
//!
//! `f_k` is the `k`-th iterate of the offspring pgf and
//! `H_n(x) = Π_{k<n} h(f_k(x))` is the pgf of `Z_n`.

use std::io::Write;

use serde::Serialize;

use crate::error::{GwiError, Result};
use crate::model::{DistributionSpec, ModelParams};

/// Coefficient magnitude that flags an invalid composition.
pub const OVERFLOW_LIMIT: f64 = 1e6;

/// Coefficients below this are arithmetic breakdown, not round-off.
pub const ROUND_OFF_FLOOR: f64 = -1e-12;

/// Coefficients `c_0..=c_K` of a power series truncated at order `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    /// Panics on an empty coefficient vector.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a truncated series has at least c_0");
        Self { coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[0] = c;
        s
    }

    /// The series `x`.
    pub fn identity(order: usize) -> Self {
        let mut s = Self::zeros(order);
        if order >= 1 {
            s.coeffs[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// `1 - Σ c_j`, floored at 0.
    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.sum()).max(0.0)
    }

    /// Horner evaluation of `Σ c_j x^j`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `a * self + b`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut coeffs: Vec<f64> = self.coeffs.iter().map(|c| a * c).collect();
        coeffs[0] += b;
        Self { coeffs }
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
        self
    }

    /// Product truncated at `self.order()`; `other` must have the same order.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.order(), other.order(), "series orders differ");
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in out[i..].iter_mut().zip(&other.coeffs[..n - i]) {
                *o += a * b;
            }
        }
        Self { coeffs: out }
    }

    /// Multiplicative inverse; requires `c_0 != 0`.
    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 {
            return Err(GwiError::InvalidInput("reciprocal of a series with c_0 = 0".into()));
        }
        let n = self.coeffs.len();
        let mut b = vec![0.0; n];
        b[0] = 1.0 / a0;
        for j in 1..n {
            let s: f64 = (1..=j).map(|i| self.coeffs[i] * b[j - i]).sum();
            b[j] = -s / a0;
        }
        Ok(Self { coeffs: b })
    }

    /// `exp(self)` via `j g_j = Σ_{i=1}^{j} i a_i g_{j-i}`.
    pub fn exp(&self) -> Self {
        let n = self.coeffs.len();
        let mut g = vec![0.0; n];
        g[0] = self.coeffs[0].exp();
        for j in 1..n {
            let s: f64 = (1..=j).map(|i| i as f64 * self.coeffs[i] * g[j - i]).sum();
            g[j] = s / j as f64;
        }
        Self { coeffs: g }
    }

    /// Clamps round-off negatives to zero; anything below
    /// [`ROUND_OFF_FLOOR`] is an error.
    pub fn clamp_round_off(mut self) -> Result<Self> {
        for (index, c) in self.coeffs.iter_mut().enumerate() {
            if *c < 0.0 {
                if *c < ROUND_OFF_FLOOR {
                    return Err(GwiError::NegativeCoefficient { index, value: *c });
                }
                *c = 0.0;
            }
        }
        Ok(self)
    }

    /// Whether the series is a sub-probability generating function.
    pub fn is_subprobability(&self) -> bool {
        self.coeffs.iter().all(|c| (0.0..=1.0).contains(c)) && self.sum() <= 1.0 + 1e-9
    }

    /// Writes `j,coeff` rows preceded by a `# n=..,K=..,tail_mass=..` line.
    pub fn write_csv<W: Write>(&self, n: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n={},K={},tail_mass={}", n, self.order(), self.tail_mass())?;
        writeln!(w, "j,coeff")?;
        for (j, c) in self.coeffs.iter().enumerate() {
            writeln!(w, "{j},{c}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_magnitude(s: &TruncatedSeries) -> Result<()> {
    match s.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max) {
        m if m > OVERFLOW_LIMIT || m.is_nan() => Err(GwiError::TruncationOverflow {
            magnitude: m,
            limit: OVERFLOW_LIMIT,
        }),
        _ => Ok(()),
    }
}

/// Horner evaluation of `Σ outer_j inner^j` over series arithmetic.
/// Trailing zero coefficients of `outer` are skipped, so a degree-`d`
/// polynomial costs `d` truncated products.
pub(crate) fn horner(outer: &[f64], inner: &TruncatedSeries) -> Result<TruncatedSeries> {
    let order = inner.order();
    let degree = match outer.iter().rposition(|c| *c != 0.0) {
        Some(d) => d,
        None => return Ok(TruncatedSeries::zeros(order)),
    };
    let mut acc = TruncatedSeries::constant(outer[degree], order);
    for &c in outer[..degree].iter().rev() {
        acc = acc.mul(inner);
        acc.coeffs[0] += c;
        check_magnitude(&acc)?;
    }
    Ok(acc)
}

/// Coefficients of `outer(inner(x))`, both truncated at the same order.
pub fn compose(outer: &TruncatedSeries, inner: &TruncatedSeries) -> Result<TruncatedSeries> {
    if outer.order() != inner.order() {
        return Err(GwiError::InvalidInput(format!(
            "orders differ: outer {} vs inner {}",
            outer.order(),
            inner.order()
        )));
    }
    let c0 = inner.coeffs[0];
    if !(0.0..1.0).contains(&c0) {
        return Err(GwiError::InvalidInput(format!(
            "inner constant term {c0} outside [0, 1)"
        )));
    }
    horner(&outer.coeffs, inner)
}

/// Iterates `f_0 = x, f_{k+1} = f(f_k)` as truncated series.
pub struct PgfIterates<'a> {
    offspring: &'a DistributionSpec,
    current: TruncatedSeries,
}

impl<'a> PgfIterates<'a> {
    pub fn new(offspring: &'a DistributionSpec, order: usize) -> Self {
        Self {
            offspring,
            current: TruncatedSeries::identity(order),
        }
    }

    /// The current iterate `f_k`.
    pub fn current(&self) -> &TruncatedSeries {
        &self.current
    }

    /// Advances to `f_{k+1}`.
    pub fn advance(&mut self) -> Result<&TruncatedSeries> {
        self.current = self.offspring.compose_series(&self.current)?.clamp_round_off()?;
        Ok(&self.current)
    }
}

/// `f_n` as a truncated series.
pub fn offspring_iterate(offspring: &DistributionSpec, n: usize, order: usize) -> Result<TruncatedSeries> {
    let mut it = PgfIterates::new(offspring, order);
    for _ in 0..n {
        it.advance()?;
    }
    Ok(it.current)
}

/// Output of [`iterate_pgf`].
#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub n: usize,
    /// `f_k(0)` for `k = 0..=n`.
    pub f_at_zero: Vec<f64>,
    /// Coefficients of `H_n`.
    pub h_n: TruncatedSeries,
}

/// Computes `H_n` by the running product of `h(f_k)` for `k < n`.
pub fn iterate_pgf(model: &ModelParams, n: usize, order: usize) -> Result<IterationTrace> {
    if order < 1 {
        return Err(GwiError::InvalidInput("truncation order must be at least 1".into()));
    }
    let offspring = model.offspring();
    let immigration = model.immigration();
    let mut iterates = PgfIterates::new(offspring, order);
    let mut h_n = TruncatedSeries::constant(1.0, order);
    let mut f_at_zero = Vec::with_capacity(n + 1);
    let mut f0 = 0.0;
    for k in 0..n {
        f_at_zero.push(f0);
        let factor = immigration.compose_series(iterates.current())?;
        h_n = h_n.mul(&factor).clamp_round_off()?;
        if k + 1 < n {
            iterates.advance()?;
        }
        f0 = offspring.pgf(f0);
    }
    f_at_zero.push(f0);
    Ok(IterationTrace { n, f_at_zero, h_n })
}

/// Scalar `f_n(x)` by repeated evaluation.
pub fn iterate_value(offspring: &DistributionSpec, n: usize, x: f64) -> f64 {
    (0..n).fold(x, |s, _| offspring.pgf(s))
}

/// Scalar `H_n(x)`, accumulated in log space.
pub fn hn_value(model: &ModelParams, n: usize, x: f64) -> f64 {
    let (f, h) = (model.offspring(), model.immigration());
    let mut s = x;
    let mut log_h = 0.0;
    for _ in 0..n {
        log_h += h.pgf(s).ln();
        s = f.pgf(s);
    }
    log_h.exp()
}

/// `E[x^{Z_n}; Z_n > 0] = H_n(x) - H_n(0)` without subtracting two nearly
/// equal products: the log-ratio of the products is accumulated term by
/// term and exponentiated with `expm1`.
pub fn hn_excess(model: &ModelParams, n: usize, x: f64) -> f64 {
    let (f, h) = (model.offspring(), model.immigration());
    let (mut s, mut z) = (x, 0.0);
    let (mut log_h0, mut log_ratio) = (0.0, 0.0);
    for _ in 0..n {
        let hs = h.pgf(s).ln();
        let hz = h.pgf(z).ln();
        log_h0 += hz;
        log_ratio += hs - hz;
        s = f.pgf(s);
        z = f.pgf(z);
    }
    log_h0.exp() * log_ratio.exp_m1()
}

/// Closed form of `f_n(s)` for the critical linear-fractional law:
/// `1 - f_n(s) = (1 - s) / (1 + γ n (1 - s))`.
pub fn linear_fractional_oracle(gamma: f64, n: usize, s: f64) -> f64 {
    let a = gamma * n as f64 * (1.0 - s);
    (a + s) / (1.0 + a)
}
