//! Limit constants, normalizing sequences, the regime classifier and a
//! sampler for the limit law of the normalized sum.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GwiError, Result};
use crate::exact::laplace_moment;
use crate::model::ModelParams;
use crate::quadrature::{integrate, integrate_segments, integrate_to_infinity, QuadOptions};
use crate::rng::stream_rng;
use crate::special::{gamma, normal_sf};

/// Tolerance for treating `r` and `σ` (or `α` and `1 + σ`, or `e` and `ρ`)
/// as equal.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;

/// Default `n*` for the approximation `U ≈ n*^σ H_{n*}`.
pub const DEFAULT_N_STAR: usize = 1024;

/// Draws per shard in `sample_limit_law`.
const SAMPLER_SHARD: usize = 1 << 16;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQUALITY_TOLERANCE
}

/// Normalizer `A(n, r)` of the harmonic moment `E(Z_n^{-r} | Z_n > 0)`.
pub fn scaling_a(n: usize, r: f64, sigma: f64) -> Result<f64> {
    if n < 2 || !(r > 0.0) || !(sigma > 0.0) {
        return Err(GwiError::InvalidInput(format!(
            "scaling_a needs n >= 2, r > 0, sigma > 0 (got n={n}, r={r}, sigma={sigma})"
        )));
    }
    let nf = n as f64;
    Ok(if close(r, sigma) {
        nf.powf(sigma) / nf.ln()
    } else if r > sigma {
        nf.powf(sigma)
    } else {
        nf.powf(r)
    })
}

/// `γ^{-r} Γ(σ - r) / Γ(σ)`, the value of `I(r, σ)` for `r < σ`.
pub fn i_below_closed_form(r: f64, sigma: f64, gamma_: f64) -> f64 {
    gamma_.powf(-r) * gamma(sigma - r) / gamma(sigma)
}

/// `(1/Γ(r)) ∫_0^∞ (1 + γs)^{-σ} s^{r-1} ds` by quadrature, for `0 < r < σ`.
///
/// `[0, 1]` is mapped by `s = w^{1/r}` and `[1, ∞)` by `s = v^{-1/(σ-r)}`,
/// which turns both pieces into bounded integrands.
pub fn i_below_quadrature(r: f64, sigma: f64, gamma_: f64) -> Result<f64> {
    if !(r > 0.0 && r < sigma && gamma_ > 0.0) {
        return Err(GwiError::InvalidInput(format!(
            "quadrature branch needs 0 < r < sigma and gamma > 0 (r={r}, sigma={sigma}, gamma={gamma_})"
        )));
    }
    let opts = QuadOptions::rel(1e-13);
    let d = sigma - r;
    let head = integrate(|w| (1.0 + gamma_ * w.powf(1.0 / r)).powf(-sigma), 0.0, 1.0, opts)?.value / r;
    let tail = integrate(
        |v| {
            if v == 0.0 {
                0.0
            } else {
                // s = v^{-1/d}: s^{r-1}(1+γs)^{-σ} ds = (v^{1/d} + γ)^{-σ} dv / d
                (v.powf(1.0 / d) + gamma_).powf(-sigma)
            }
        },
        0.0,
        1.0,
        opts,
    )?
    .value
        / d;
    Ok((head + tail) / gamma(r))
}

/// `I(r, σ)` with `U` approximated at `n_star` when `r > σ`.
///
/// For `r > σ` the value is `A(n) = (1/Γ(r)) n^σ ∫_0^∞ (H_n(e^{-t}) - H_n(0)) t^{r-1} dt`
/// at `n = n*, 2n*, 4n*`, extrapolated by two Richardson steps. The error of
/// `A(n)` carries the powers `n^{-(r-σ)}` and `n^{-1}` (plus `n^{-1} log n`
/// when they coincide), which the steps remove smaller exponent first.
pub fn i_constant_at(
    r: f64,
    sigma: f64,
    gamma_: f64,
    model: Option<&ModelParams>,
    n_star: usize,
) -> Result<f64> {
    if !(r > 0.0 && sigma > 0.0 && gamma_ > 0.0) {
        return Err(GwiError::InvalidInput(format!(
            "I(r, sigma) needs r, sigma, gamma > 0 (r={r}, sigma={sigma}, gamma={gamma_})"
        )));
    }
    if close(r, sigma) {
        return Ok(gamma_.powf(-sigma) / gamma(sigma));
    }
    if r < sigma {
        return Ok(i_below_closed_form(r, sigma, gamma_));
    }
    let model = model.ok_or_else(|| {
        GwiError::ModelRequired(format!("I({r}, {sigma}) with r > sigma integrates U"))
    })?;
    if n_star < 2 {
        return Err(GwiError::InvalidInput(format!("n* = {n_star} must be at least 2")));
    }
    let g = gamma(r);
    let scaled = |n: usize| -> Result<f64> {
        let nf = n as f64;
        Ok(nf.powf(model.sigma()) * laplace_moment(model, n, r)? / g)
    };
    let (a1, a2, a3) = (scaled(n_star)?, scaled(2 * n_star)?, scaled(4 * n_star)?);
    let gap = r - sigma;
    let step = |x: f64, y: f64, p: f64| {
        let c = 2f64.powf(p);
        (c * y - x) / (c - 1.0)
    };
    let (p1, p2) = (gap.min(1.0), gap.max(1.0));
    Ok(step(step(a1, a2, p1), step(a2, a3, p1), p2))
}

/// `I(r, σ)` with the default `n*`.
pub fn i_constant(r: f64, sigma: f64, gamma_: f64, model: Option<&ModelParams>) -> Result<f64> {
    i_constant_at(r, sigma, gamma_, model, DEFAULT_N_STAR)
}

/// `Υ(σ, σ₀) = 2^{σ-1} Γ(σ + 1/2) σ₀^{2σ} / (Γ(σ) γ^σ σ √π)`.
pub fn upsilon(sigma: f64, sigma0_sq: f64, gamma_: f64) -> Result<f64> {
    if !(sigma > 1.0 && sigma0_sq > 0.0 && gamma_ > 0.0) {
        return Err(GwiError::InvalidInput(format!(
            "upsilon needs sigma > 1, sigma0_sq > 0, gamma > 0 (got {sigma}, {sigma0_sq}, {gamma_})"
        )));
    }
    let num = 2f64.powf(sigma - 1.0) * gamma(sigma + 0.5) * sigma0_sq.powf(sigma);
    let den = gamma(sigma) * gamma_.powf(sigma) * sigma * std::f64::consts::PI.sqrt();
    Ok(num / den)
}

/// `(1/(Γ(σ) γ^σ)) ∫_0^∞ u^{σ-1} Ψ(√u / σ₀) du` with `Ψ` the normal upper tail.
pub fn upsilon_quadrature(sigma: f64, sigma0_sq: f64, gamma_: f64) -> Result<f64> {
    if !(sigma > 1.0 && sigma0_sq > 0.0 && gamma_ > 0.0) {
        return Err(GwiError::InvalidInput(format!(
            "upsilon needs sigma > 1, sigma0_sq > 0, gamma > 0 (got {sigma}, {sigma0_sq}, {gamma_})"
        )));
    }
    let sigma0 = sigma0_sq.sqrt();
    let f = |u: f64| u.powf(sigma - 1.0) * normal_sf(u.sqrt() / sigma0);
    let opts = QuadOptions::rel(1e-13);
    let head = integrate_segments(f, &[0.0, 0.25 * sigma0_sq, sigma0_sq], opts)?.value;
    let tail = integrate_to_infinity(f, sigma0_sq, 4.0 * sigma0_sq, opts)?.value;
    Ok((head + tail) / (gamma(sigma) * gamma_.powf(sigma)))
}

/// Constants attached to a model and an increment law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConstants {
    sigma: f64,
    gamma: f64,
    sigma0_sq: f64,
    alpha: Option<f64>,
    a: Option<f64>,
    rho: Option<f64>,
}

impl LimitConstants {
    /// `tail` is `(α, a)` for an increment law with `P(X₁ ≥ x) ~ a x^{-α}`.
    pub fn new(sigma: f64, gamma_: f64, sigma0_sq: f64, tail: Option<(f64, f64)>) -> Result<Self> {
        if !(sigma > 0.0 && gamma_ > 0.0 && sigma0_sq > 0.0) {
            return Err(GwiError::InvalidInput(format!(
                "constants need sigma, gamma, sigma0_sq > 0 (got {sigma}, {gamma_}, {sigma0_sq})"
            )));
        }
        if let Some((alpha, a)) = tail {
            if !(alpha > 0.0 && a > 0.0) {
                return Err(GwiError::InvalidInput(format!(
                    "tail index {alpha} and constant {a} must be positive"
                )));
            }
        }
        let alpha = tail.map(|t| t.0);
        let rho = alpha
            .filter(|&al| al > 2.0 && al < 1.0 + sigma && !close(al, 1.0 + sigma))
            .map(|al| (1.0 + sigma - al) / (2.0 * sigma - al));
        Ok(Self {
            sigma,
            gamma: gamma_,
            sigma0_sq,
            alpha,
            a: tail.map(|t| t.1),
            rho,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }
    pub fn a(&self) -> Option<f64> {
        self.a
    }
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AGaussian,
    BHeavyTail,
    CBoundary,
    CritA,
    CritB,
    CritC,
    FixedEpsA,
    FixedEpsB,
    FixedEpsC,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::AGaussian => "a_gaussian",
            Regime::BHeavyTail => "b_heavy_tail",
            Regime::CBoundary => "c_boundary",
            Regime::CritA => "crit_a",
            Regime::CritB => "crit_b",
            Regime::CritC => "crit_c",
            Regime::FixedEpsA => "fixed_eps_a",
            Regime::FixedEpsB => "fixed_eps_b",
            Regime::FixedEpsC => "fixed_eps_c",
        }
    }
}

/// The deviation level `ε_n`.
///
/// `LogPower` (`ε_n = c (log n)^{-p}`) exists because the critical tail
/// index `α = 1 + σ` separates its regimes by the size of `ε_n^{σ-1} log n`,
/// which a power sequence never keeps bounded away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsSequence {
    /// `ε_n = coefficient * n^{-exponent}`.
    Power { coefficient: f64, exponent: f64 },
    /// `ε_n = coefficient * (log n)^{-exponent}`.
    LogPower { coefficient: f64, exponent: f64 },
    Fixed { eps: f64 },
}

impl EpsSequence {
    pub fn power(exponent: f64) -> Self {
        EpsSequence::Power {
            coefficient: 1.0,
            exponent,
        }
    }

    pub fn at(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            EpsSequence::Power { coefficient, exponent } => coefficient * nf.powf(-exponent),
            EpsSequence::LogPower { coefficient, exponent } => coefficient * nf.ln().powf(-exponent),
            EpsSequence::Fixed { eps } => eps,
        }
    }
}

/// Moment assumption on the positive part of the increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentCondition {
    /// `E(X₁⁺)^{1+σ} < ∞`.
    Light,
    /// Regularly varying tail with the index and constant in `LimitConstants`.
    Tail,
}

/// Normalizer `ε^{eps_power} n^{n_power} (log n)^{log_power}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scaling {
    pub eps_power: f64,
    pub n_power: f64,
    pub log_power: f64,
}

impl Scaling {
    pub fn factor(&self, n: usize, eps: f64) -> f64 {
        let nf = n as f64;
        let mut v = nf.powf(self.n_power);
        if self.eps_power != 0.0 {
            v *= eps.powf(self.eps_power);
        }
        if self.log_power != 0.0 {
            v *= nf.ln().powf(self.log_power);
        }
        v
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.eps_power != 0.0 {
            parts.push(format!("eps^{}", self.eps_power));
        }
        if self.n_power != 0.0 {
            parts.push(format!("n^{}", self.n_power));
        }
        if self.log_power != 0.0 {
            parts.push(format!("log(n)^{}", self.log_power));
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(" * ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub tau: Option<f64>,
    pub scaling: Scaling,
    pub scaling_text: String,
    pub limit_value: f64,
}

/// Regime and `τ` for `(consts, eps, moment)` without evaluating any limit.
pub fn regime_of(
    consts: &LimitConstants,
    eps: &EpsSequence,
    moment: MomentCondition,
) -> Result<(Regime, Option<f64>)> {
    let sigma = consts.sigma;
    if !(sigma > 1.0) {
        return Err(GwiError::OutOfScope(format!("sigma = {sigma} must exceed 1")));
    }
    let alpha = match moment {
        MomentCondition::Light => None,
        MomentCondition::Tail => {
            let alpha = consts.alpha.ok_or_else(|| {
                GwiError::InvalidInput("tail moment condition needs a tail index".into())
            })?;
            if !(alpha > 2.0) {
                return Err(GwiError::OutOfScope(format!("tail index {alpha} must exceed 2")));
            }
            Some(alpha)
        }
    };
    // None: light tail or α > 1 + σ; Some(true): α = 1 + σ; Some(false): α < 1 + σ.
    let heavy = alpha.and_then(|al| {
        if close(al, 1.0 + sigma) {
            Some(true)
        } else if al < 1.0 + sigma {
            Some(false)
        } else {
            None
        }
    });
    let positive = |c: f64, what: &str| -> Result<()> {
        if c > 0.0 && c.is_finite() {
            Ok(())
        } else {
            Err(GwiError::OutOfScope(format!("{what} = {c} must be positive")))
        }
    };
    match *eps {
        EpsSequence::Fixed { eps } => {
            positive(eps, "fixed eps")?;
            Ok(match heavy {
                None => (Regime::FixedEpsA, None),
                Some(true) => (Regime::FixedEpsB, None),
                Some(false) => (Regime::FixedEpsC, None),
            })
        }
        EpsSequence::Power { coefficient, exponent } => {
            positive(coefficient, "eps coefficient")?;
            if !(exponent > 0.0 && exponent < 0.5) {
                return Err(GwiError::OutOfScope(format!(
                    "eps exponent {exponent} outside (0, 1/2): need eps_n -> 0 and n eps_n^2 -> inf"
                )));
            }
            Ok(match heavy {
                None => (Regime::AGaussian, None),
                // ε^{σ-1} log n = c^{σ-1} n^{-e(σ-1)} log n -> 0
                Some(true) => (Regime::CritA, None),
                Some(false) => {
                    let rho = consts.rho.expect("rho exists for 2 < alpha < 1 + sigma");
                    if close(exponent, rho) {
                        (Regime::CBoundary, Some(coefficient))
                    } else if exponent > rho {
                        (Regime::AGaussian, None)
                    } else {
                        (Regime::BHeavyTail, None)
                    }
                }
            })
        }
        EpsSequence::LogPower { coefficient, exponent } => {
            positive(coefficient, "eps coefficient")?;
            positive(exponent, "eps log exponent")?;
            Ok(match heavy {
                None => (Regime::AGaussian, None),
                Some(true) => {
                    // ε^{σ-1} log n = c^{σ-1} (log n)^{1 - p(σ-1)}
                    let power = exponent * (sigma - 1.0);
                    if close(power, 1.0) {
                        (Regime::CritC, Some(coefficient.powf(sigma - 1.0)))
                    } else if power > 1.0 {
                        (Regime::CritA, None)
                    } else {
                        (Regime::CritB, None)
                    }
                }
                // ε_n n^ρ -> ∞ for every logarithmic decay
                Some(false) => (Regime::BHeavyTail, None),
            })
        }
    }
}

/// Classifies `ε_n` and returns the normalizer and predicted limit.
///
/// `q_eps` is the constant `q(ε)` of the fixed-`ε` light-tail case, which
/// depends on the whole model; it is required only for that regime.
pub fn classify_regime(
    consts: &LimitConstants,
    eps: &EpsSequence,
    moment: MomentCondition,
    q_eps: Option<f64>,
) -> Result<RegimeReport> {
    let (regime, tau) = regime_of(consts, eps, moment)?;
    let (sigma, gamma_) = (consts.sigma, consts.gamma);
    let ups = || upsilon(sigma, consts.sigma0_sq, gamma_);
    let alpha = consts.alpha.unwrap_or(f64::NAN);
    let a = consts.a.unwrap_or(f64::NAN);
    let heavy_const = || a * i_below_closed_form(alpha - 1.0, sigma, gamma_);
    let crit_const = || a * gamma_.powf(-sigma) / gamma(sigma);
    let fixed_eps = match *eps {
        EpsSequence::Fixed { eps } => eps,
        _ => f64::NAN,
    };
    let s = |eps_power, n_power, log_power| Scaling {
        eps_power,
        n_power,
        log_power,
    };
    let (scaling, limit_value) = match regime {
        Regime::AGaussian | Regime::CritA => (s(2.0 * sigma, sigma, 0.0), ups()?),
        Regime::BHeavyTail => (s(alpha, alpha - 1.0, 0.0), heavy_const()),
        Regime::CBoundary => {
            let t = tau.expect("boundary regime carries tau");
            let exponent = sigma * (alpha - 2.0) / (2.0 * sigma - alpha);
            (
                s(0.0, exponent, 0.0),
                t.powf(-2.0 * sigma) * ups()? + t.powf(-alpha) * heavy_const(),
            )
        }
        Regime::CritB => (s(sigma + 1.0, sigma, -1.0), crit_const()),
        Regime::CritC => {
            let t = tau.expect("critical boundary carries tau");
            (s(2.0 * sigma, sigma, 0.0), ups()? + t * crit_const())
        }
        Regime::FixedEpsA => {
            let q = q_eps.ok_or_else(|| {
                GwiError::ModelRequired("q(eps) for a fixed eps with a light tail".into())
            })?;
            (s(0.0, sigma, 0.0), q)
        }
        Regime::FixedEpsB => (
            s(0.0, sigma, -1.0),
            fixed_eps.powf(-(sigma + 1.0)) * crit_const(),
        ),
        Regime::FixedEpsC => (s(0.0, alpha - 1.0, 0.0), fixed_eps.powf(-alpha) * heavy_const()),
    };
    if !(limit_value > 0.0 && limit_value.is_finite()) {
        return Err(GwiError::InvalidInput(format!(
            "limit for {} is {limit_value}",
            regime.name()
        )));
    }
    Ok(RegimeReport {
        regime,
        tau,
        scaling_text: scaling.describe(),
        scaling,
        limit_value,
    })
}

/// Draws from the limit law `σ₀ N / √Y`, `Y ~ Gamma(σ, scale γ)`.
///
/// Draw `i` belongs to shard `i / 65536`, which uses stream `shard` of the
/// seed, so the output does not depend on the thread count.
pub fn sample_limit_law(
    sigma: f64,
    gamma_: f64,
    sigma0_sq: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(GwiError::InvalidInput("count must be at least 1".into()));
    }
    if !(sigma0_sq > 0.0) {
        return Err(GwiError::InvalidInput(format!("sigma0_sq = {sigma0_sq} must be positive")));
    }
    let mixing = Gamma::new(sigma, gamma_)
        .map_err(|e| GwiError::InvalidInput(format!("Gamma({sigma}, {gamma_}): {e}")))?;
    let sigma0 = sigma0_sq.sqrt();
    let mut out = vec![0.0; count];
    out.par_chunks_mut(SAMPLER_SHARD)
        .enumerate()
        .for_each(|(shard, chunk)| {
            let mut rng = stream_rng(seed, shard as u64);
            for v in chunk.iter_mut() {
                let y: f64 = mixing.sample(&mut rng);
                let z: f64 = rng.sample(StandardNormal);
                *v = sigma0 * z / y.sqrt();
            }
        });
    Ok(out)
}

/// Row of the constants table.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantRow {
    pub name: String,
    pub sigma: f64,
    pub gamma: f64,
    pub sigma0_sq: Option<f64>,
    pub alpha: Option<f64>,
    pub value: f64,
}

pub fn write_constants_csv<W: Write>(rows: &[ConstantRow], mut w: W) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    writeln!(w, "name,sigma,gamma,sigma0_sq,alpha,value")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.name,
            r.sigma,
            r.gamma,
            opt(r.sigma0_sq),
            opt(r.alpha),
            r.value
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_condition_a, DistributionSpec};

    #[test]
    fn scaling_branches() {
        assert_eq!(scaling_a(100, 1.0, 2.0).unwrap(), 100.0);
        assert!((scaling_a(100, 2.0, 2.0).unwrap() - 10000.0 / 100f64.ln()).abs() < 1e-9);
        assert!((scaling_a(100, 2.0, 2.0).unwrap() - 2171.472409516259).abs() < 1e-6);
        assert_eq!(scaling_a(100, 3.0, 2.0).unwrap(), 10000.0);
        assert!(scaling_a(1, 1.0, 2.0).is_err());
    }

    #[test]
    fn i_constant_examples() {
        assert!((i_constant(1.0, 2.0, 1.0, None).unwrap() - 1.0).abs() < 1e-14);
        assert!((i_constant(2.0, 2.0, 1.0, None).unwrap() - 1.0).abs() < 1e-14);
        assert!((i_constant(1.0, 3.0, 2.0, None).unwrap() - 0.25).abs() < 1e-14);
        assert!(matches!(
            i_constant(3.0, 2.0, 1.0, None),
            Err(GwiError::ModelRequired(_))
        ));
    }

    #[test]
    fn beta_identity_grid() {
        for r in [0.5, 1.0, 1.5] {
            for sigma in [2.0, 3.0] {
                for g in [0.5, 1.0, 2.0] {
                    let q = i_below_quadrature(r, sigma, g).unwrap();
                    let c = i_below_closed_form(r, sigma, g);
                    assert!((q - c).abs() < 1e-8, "r={r} sigma={sigma} gamma={g}: {q} vs {c}");
                }
            }
        }
    }

    #[test]
    fn i_above_sigma_geometric() {
        // U(x) = (2 - x)/(1 - x)^2 gives μ_k = k + 2 and I(3, 2) = ζ(2) + 2ζ(3).
        let model = validate_condition_a(
            &DistributionSpec::geometric(0.5),
            &DistributionSpec::geometric(1.0 / 3.0),
        )
        .unwrap();
        let v = i_constant(3.0, 2.0, 1.0, Some(&model)).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 6.0 + 2.0 * 1.202_056_903_159_594_2;
        assert!((v - exact).abs() / exact < 1e-4, "{v} vs {exact}");
        // ζ(1.5) + 2ζ(2.5)
        let v = i_constant(2.5, 2.0, 1.0, Some(&model)).unwrap();
        let exact = 2.612_375_348_685_488 + 2.0 * 1.341_487_257_250_917_2;
        assert!((v - exact).abs() / exact < 5e-4, "{v} vs {exact}");
    }

    #[test]
    fn upsilon_values() {
        assert!((upsilon(2.0, 1.0, 1.0).unwrap() - 0.75).abs() < 1e-12);
        assert!((upsilon(2.0, 1.0, 2.0).unwrap() - 3.0 / 16.0).abs() < 1e-12);
        for sigma in [1.5, 2.0, 3.0] {
            for (s0, g) in [(1.0, 1.0), (0.75, 0.5), (4.0, 2.0)] {
                let q = upsilon_quadrature(sigma, s0, g).unwrap();
                let c = upsilon(sigma, s0, g).unwrap();
                assert!((q - c).abs() < 1e-8 * c.max(1.0), "sigma={sigma}: {q} vs {c}");
            }
        }
    }

    fn heavy() -> LimitConstants {
        LimitConstants::new(2.0, 1.0, 1.0, Some((2.5, 1.0))).unwrap()
    }

    #[test]
    fn rho_presence() {
        assert!((heavy().rho().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(LimitConstants::new(2.0, 1.0, 1.0, Some((3.0, 1.0))).unwrap().rho().is_none());
        assert!(LimitConstants::new(2.0, 1.0, 1.0, Some((3.5, 1.0))).unwrap().rho().is_none());
        assert!(LimitConstants::new(2.0, 1.0, 1.0, None).unwrap().rho().is_none());
    }

    #[test]
    fn regime_examples() {
        let c = heavy();
        let ups = upsilon(2.0, 1.0, 1.0).unwrap();
        let heavy_limit = i_below_closed_form(1.5, 2.0, 1.0);

        let a = classify_regime(&c, &EpsSequence::power(0.4), MomentCondition::Tail, None).unwrap();
        assert_eq!(a.regime, Regime::AGaussian);
        assert_eq!(a.scaling, Scaling { eps_power: 4.0, n_power: 2.0, log_power: 0.0 });
        assert!((a.limit_value - ups).abs() < 1e-15);

        let b = classify_regime(&c, &EpsSequence::power(0.2), MomentCondition::Tail, None).unwrap();
        assert_eq!(b.regime, Regime::BHeavyTail);
        assert_eq!(b.scaling, Scaling { eps_power: 2.5, n_power: 1.5, log_power: 0.0 });
        assert!((b.limit_value - heavy_limit).abs() < 1e-15);

        let tau = 1.7;
        let eps = EpsSequence::Power { coefficient: tau, exponent: 1.0 / 3.0 };
        let cc = classify_regime(&c, &eps, MomentCondition::Tail, None).unwrap();
        assert_eq!(cc.regime, Regime::CBoundary);
        assert_eq!(cc.tau, Some(tau));
        assert!((cc.scaling.n_power - 2.0 / 3.0).abs() < 1e-15);
        let want = tau.powf(-4.0) * ups + tau.powf(-2.5) * heavy_limit;
        assert!((cc.limit_value - want).abs() < 1e-14);
    }

    #[test]
    fn critical_and_fixed_regimes() {
        let c = LimitConstants::new(2.0, 1.0, 1.0, Some((3.0, 2.0))).unwrap();
        let t = MomentCondition::Tail;
        let r = |e: EpsSequence| regime_of(&c, &e, t).unwrap().0;
        assert_eq!(r(EpsSequence::power(0.3)), Regime::CritA);
        assert_eq!(r(EpsSequence::LogPower { coefficient: 1.0, exponent: 2.0 }), Regime::CritA);
        assert_eq!(r(EpsSequence::LogPower { coefficient: 1.0, exponent: 0.5 }), Regime::CritB);
        assert_eq!(r(EpsSequence::LogPower { coefficient: 1.0, exponent: 1.0 }), Regime::CritC);
        assert_eq!(r(EpsSequence::Fixed { eps: 0.5 }), Regime::FixedEpsB);

        let b = classify_regime(&c, &EpsSequence::Fixed { eps: 0.5 }, t, None).unwrap();
        assert!((b.limit_value - 0.5f64.powf(-3.0) * 2.0).abs() < 1e-12);
        assert_eq!(b.scaling.log_power, -1.0);

        let light = LimitConstants::new(2.0, 1.0, 1.0, None).unwrap();
        let fixed = EpsSequence::Fixed { eps: 0.5 };
        assert!(matches!(
            classify_regime(&light, &fixed, MomentCondition::Light, None),
            Err(GwiError::ModelRequired(_))
        ));
        let fa = classify_regime(&light, &fixed, MomentCondition::Light, Some(0.3)).unwrap();
        assert_eq!(fa.regime, Regime::FixedEpsA);
        assert_eq!(fa.limit_value, 0.3);

        let c25 = heavy();
        let fc = classify_regime(&c25, &fixed, t, None).unwrap();
        assert_eq!(fc.regime, Regime::FixedEpsC);
        assert_eq!(fc.scaling.n_power, 1.5);
    }

    #[test]
    fn out_of_scope_inputs() {
        let c = heavy();
        for e in [0.0, 0.5, 0.7, -0.1] {
            assert!(matches!(
                regime_of(&c, &EpsSequence::power(e), MomentCondition::Tail),
                Err(GwiError::OutOfScope(_))
            ));
        }
        let low = LimitConstants::new(2.0, 1.0, 1.0, Some((2.0, 1.0))).unwrap();
        assert!(matches!(
            regime_of(&low, &EpsSequence::power(0.3), MomentCondition::Tail),
            Err(GwiError::OutOfScope(_))
        ));
        let flat = LimitConstants::new(0.8, 1.0, 1.0, None).unwrap();
        assert!(matches!(
            regime_of(&flat, &EpsSequence::power(0.3), MomentCondition::Light),
            Err(GwiError::OutOfScope(_))
        ));
    }

    #[test]
    fn limit_law_moments() {
        let draws = sample_limit_law(3.0, 1.0, 1.0, 1_000_000, 11).unwrap();
        let n = draws.len() as f64;
        let neg = draws.iter().filter(|v| **v <= 0.0).count() as f64 / n;
        assert!((neg - 0.5).abs() < 3.0 * (0.25 / n).sqrt());
        let m2: f64 = draws.iter().map(|v| v * v).sum::<f64>() / n;
        // σ₀² E[1/Y] = 1 / (γ(σ - 1))
        assert!((m2 - 0.5).abs() < 0.01 * 0.5, "{m2}");
        assert_eq!(draws, sample_limit_law(3.0, 1.0, 1.0, 1_000_000, 11).unwrap());
        assert!(sample_limit_law(3.0, 1.0, 1.0, 0, 11).is_err());
    }
}
