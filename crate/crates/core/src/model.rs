//! Offspring and immigration laws, and the validated critical model.

use serde::{Deserialize, Serialize};

use crate::error::{GwiError, Result};
use crate::series::TruncatedSeries;

/// Tolerance on `|m - 1|` for a model to count as critical.
pub const CRITICALITY_TOLERANCE: f64 = 1e-10;

/// Tolerance on the total mass of an explicit pmf.
pub const PMF_SUM_TOLERANCE: f64 = 1e-12;

/// A law on the non-negative integers.
///
/// `Geometric { success }` has `P(k) = success * (1 - success)^k`.
/// `LinearFractional { gamma }` is the critical linear-fractional law with
/// generating function `1 - (1 - s) / (1 + gamma (1 - s))`; it has mean 1 and
/// `f''(1) / 2 = gamma` for every `gamma > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Explicit { pmf: Vec<f64> },
    Geometric { success: f64 },
    Poisson { rate: f64 },
    LinearFractional { gamma: f64 },
}

impl DistributionSpec {
    pub fn explicit(pmf: impl Into<Vec<f64>>) -> Self {
        DistributionSpec::Explicit { pmf: pmf.into() }
    }

    pub fn geometric(success: f64) -> Self {
        DistributionSpec::Geometric { success }
    }

    pub fn poisson(rate: f64) -> Self {
        DistributionSpec::Poisson { rate }
    }

    pub fn linear_fractional(gamma: f64) -> Self {
        DistributionSpec::LinearFractional { gamma }
    }

    /// Checks the well-formedness invariants of the spec itself.
    pub fn check(&self) -> Result<()> {
        match self {
            DistributionSpec::Explicit { pmf } => {
                if pmf.is_empty() {
                    return Err(GwiError::InvalidDistribution("empty pmf".into()));
                }
                if let Some((k, p)) = pmf.iter().enumerate().find(|(_, p)| !(**p >= 0.0) || !p.is_finite()) {
                    return Err(GwiError::InvalidDistribution(format!(
                        "pmf[{k}] = {p} is not a probability"
                    )));
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
                    return Err(GwiError::InvalidDistribution(format!(
                        "pmf sums to {total}, not 1"
                    )));
                }
            }
            DistributionSpec::Geometric { success } => {
                if !(*success > 0.0 && *success <= 1.0) {
                    return Err(GwiError::InvalidDistribution(format!(
                        "geometric success parameter {success} outside (0, 1]"
                    )));
                }
            }
            DistributionSpec::Poisson { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(GwiError::InvalidDistribution(format!(
                        "Poisson rate {rate} must be positive and finite"
                    )));
                }
            }
            DistributionSpec::LinearFractional { gamma } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(GwiError::InvalidDistribution(format!(
                        "linear-fractional gamma {gamma} must be positive and finite"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Explicit { pmf } => {
                pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
            }
            DistributionSpec::Geometric { success } => (1.0 - success) / success,
            DistributionSpec::Poisson { rate } => *rate,
            DistributionSpec::LinearFractional { .. } => 1.0,
        }
    }

    /// Second factorial moment `E[X(X-1)] = f''(1)`.
    pub fn second_factorial_moment(&self) -> f64 {
        match self {
            DistributionSpec::Explicit { pmf } => pmf
                .iter()
                .enumerate()
                .map(|(k, p)| (k as f64) * (k as f64 - 1.0) * p)
                .sum(),
            DistributionSpec::Geometric { success } => {
                let q = (1.0 - success) / success;
                2.0 * q * q
            }
            DistributionSpec::Poisson { rate } => rate * rate,
            DistributionSpec::LinearFractional { gamma } => 2.0 * gamma,
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_factorial_moment() + m - m * m
    }

    pub fn pmf(&self, k: usize) -> f64 {
        match self {
            DistributionSpec::Explicit { pmf } => pmf.get(k).copied().unwrap_or(0.0),
            DistributionSpec::Geometric { success } => success * (1.0 - success).powi(k as i32),
            DistributionSpec::Poisson { rate } => {
                let kf = k as f64;
                (-rate + kf * rate.ln() - crate::special::ln_gamma(kf + 1.0)).exp()
            }
            DistributionSpec::LinearFractional { gamma } => {
                let d = 1.0 + gamma;
                if k == 0 {
                    gamma / d
                } else {
                    (gamma / d).powi(k as i32 - 1) / (d * d)
                }
            }
        }
    }

    /// Scalar generating function `Σ p_k s^k` for `s ∈ [0, 1]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match self {
            DistributionSpec::Explicit { pmf } => pmf.iter().rev().fold(0.0, |acc, p| acc * s + p),
            DistributionSpec::Geometric { success } => success / (1.0 - (1.0 - success) * s),
            DistributionSpec::Poisson { rate } => (rate * (s - 1.0)).exp(),
            DistributionSpec::LinearFractional { gamma } => {
                (gamma + (1.0 - gamma) * s) / (1.0 + gamma - gamma * s)
            }
        }
    }

    /// Coefficients `P(X = j)` for `j <= order`.
    pub fn coefficients(&self, order: usize) -> TruncatedSeries {
        let coeffs = match self {
            DistributionSpec::Explicit { pmf } => {
                (0..=order).map(|k| pmf.get(k).copied().unwrap_or(0.0)).collect()
            }
            DistributionSpec::Geometric { success } => {
                let q = 1.0 - success;
                let mut c = Vec::with_capacity(order + 1);
                let mut term = *success;
                for _ in 0..=order {
                    c.push(term);
                    term *= q;
                }
                c
            }
            DistributionSpec::Poisson { rate } => {
                let mut c = Vec::with_capacity(order + 1);
                let mut term = (-rate).exp();
                for k in 0..=order {
                    c.push(term);
                    term *= rate / (k + 1) as f64;
                }
                c
            }
            DistributionSpec::LinearFractional { .. } => (0..=order).map(|k| self.pmf(k)).collect(),
        };
        TruncatedSeries::from_coeffs(coeffs)
    }

    /// Series of `self(inner(x))`, truncated at the order of `inner`.
    ///
    /// Named families use their closed forms (one reciprocal or exponential
    /// per call); explicit laws use Horner over their full support.
    pub fn compose_series(&self, inner: &TruncatedSeries) -> Result<TruncatedSeries> {
        let order = inner.order();
        let out = match self {
            DistributionSpec::Explicit { pmf } => crate::series::horner(pmf, inner)?,
            DistributionSpec::Geometric { success } => {
                let denom = inner.affine(-(1.0 - success), 1.0);
                denom.reciprocal()?.scaled(*success)
            }
            DistributionSpec::Poisson { rate } => inner.affine(*rate, -rate).exp(),
            DistributionSpec::LinearFractional { gamma } => {
                let num = inner.affine(1.0 - gamma, *gamma);
                let denom = inner.affine(-gamma, 1.0 + gamma);
                num.mul(&denom.reciprocal()?)
            }
        };
        debug_assert_eq!(out.order(), order);
        crate::series::check_magnitude(&out)?;
        Ok(out)
    }

    /// gcd of `{k : p_k > 0}`; 0 when the law is a point mass at 0.
    pub fn support_gcd(&self) -> usize {
        match self {
            DistributionSpec::Explicit { pmf } => pmf
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .fold(0, |g, (k, _)| gcd(g, k)),
            DistributionSpec::Geometric { success } if *success >= 1.0 => 0,
            _ => 1,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            DistributionSpec::Explicit { .. } => "explicit",
            DistributionSpec::Geometric { .. } => "geometric",
            DistributionSpec::Poisson { .. } => "poisson",
            DistributionSpec::LinearFractional { .. } => "linear_fractional",
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Coefficients of a law up to `order` together with the mass beyond it.
pub fn pgf_coefficients(spec: &DistributionSpec, order: usize) -> TruncatedSeries {
    spec.coefficients(order)
}

/// A validated critical model with its derived constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    offspring: DistributionSpec,
    immigration: DistributionSpec,
    m: f64,
    beta: f64,
    gamma: f64,
    sigma: f64,
}

impl ModelParams {
    pub fn offspring(&self) -> &DistributionSpec {
        &self.offspring
    }
    pub fn immigration(&self) -> &DistributionSpec {
        &self.immigration
    }
    /// Offspring mean.
    pub fn m(&self) -> f64 {
        self.m
    }
    /// Immigration mean `h'(1)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }
    /// Half the offspring second factorial moment, `f''(1) / 2`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// `beta / gamma`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Validates condition (A) for a critical process with immigration and
/// derives `(m, β, γ, σ)`.
pub fn validate_condition_a(
    offspring: &DistributionSpec,
    immigration: &DistributionSpec,
) -> Result<ModelParams> {
    offspring.check()?;
    immigration.check()?;

    let m = offspring.mean();
    if (m - 1.0).abs() > CRITICALITY_TOLERANCE {
        return Err(GwiError::CriticalityViolation {
            mean: m,
            tolerance: CRITICALITY_TOLERANCE,
        });
    }
    let p0 = offspring.pmf(0);
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(GwiError::DegenerateLaw(format!("offspring p0 = {p0} not in (0, 1)")));
    }
    let h0 = immigration.pmf(0);
    if !(h0 > 0.0 && h0 < 1.0) {
        return Err(GwiError::DegenerateLaw(format!("immigration h0 = {h0} not in (0, 1)")));
    }
    let gamma = 0.5 * offspring.second_factorial_moment();
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(GwiError::DegenerateLaw(format!("gamma = {gamma} not in (0, inf)")));
    }
    let beta = immigration.mean();
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(GwiError::DegenerateLaw(format!("beta = {beta} not in (0, inf)")));
    }
    let g = offspring.support_gcd();
    if g != 1 {
        return Err(GwiError::PeriodicSupport { gcd: g });
    }
    // Log and second moments: finite sums for explicit laws, closed-form
    // finite for the named families.
    if let DistributionSpec::Explicit { pmf } = offspring {
        let s: f64 = pmf
            .iter()
            .enumerate()
            .skip(2)
            .map(|(j, p)| p * (j as f64).powi(2) * (j as f64).ln())
            .sum();
        if !s.is_finite() {
            return Err(GwiError::InvalidDistribution(format!(
                "{} offspring: sum p_j j^2 log j is not finite",
                offspring.name()
            )));
        }
    }
    if let DistributionSpec::Explicit { pmf } = immigration {
        let s: f64 = pmf.iter().enumerate().map(|(j, p)| p * (j as f64).powi(2)).sum();
        if !s.is_finite() {
            return Err(GwiError::InvalidDistribution(
                "immigration: sum h_j j^2 is not finite".into(),
            ));
        }
    }

    Ok(ModelParams {
        offspring: offspring.clone(),
        immigration: immigration.clone(),
        m,
        beta,
        gamma,
        sigma: beta / gamma,
    })
}
