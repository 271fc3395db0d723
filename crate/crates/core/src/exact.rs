//! Exact finite-`n` quantities: the law of `Z_n`, harmonic moments by two
//! independent routes, and the coefficients `μ_j` of the limit `U`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GwiError, Result};
use crate::model::ModelParams;
use crate::quadrature::{integrate_segments, integrate_to_infinity, QuadOptions};
use crate::series::{hn_excess, hn_value, iterate_pgf, TruncatedSeries};
use crate::special::gamma;

/// Relative tolerance of the Laplace-integral route.
pub const HARMONIC_REL_TOL: f64 = 1e-9;

/// Working order of `brute_force_law`.
pub const BRUTE_FORCE_MAX_ORDER: usize = 256;

/// Largest coefficient index `mu_coefficient` will expand to.
pub const MU_MAX_ORDER: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct LawOfZn {
    pub n: usize,
    /// `P(Z_n = k)` for `k = 0..=K`.
    pub pmf: Vec<f64>,
    pub survival: f64,
    /// `P(Z_n > K)`.
    pub tail_mass: f64,
}

impl LawOfZn {
    fn from_pmf(n: usize, pmf: Vec<f64>) -> Self {
        let total: f64 = pmf.iter().sum();
        Self {
            n,
            survival: 1.0 - pmf[0],
            tail_mass: (1.0 - total).max(0.0),
            pmf,
        }
    }

    pub fn order(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `max_k k P(Z_n = k)` over the stored range.
    pub fn max_weighted_mass(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .fold(0.0, f64::max)
    }

    /// `Σ_{k>=1} P(Z_n = k) w(k)` for a weight in `[0, 1]`, with the bound
    /// `tail_mass * sup_{k>K} w(k)` supplied by the caller as `tail_weight`.
    pub fn mixture<F: Fn(usize) -> f64>(&self, weight: F, tail_weight: f64) -> (f64, f64) {
        let value = self.pmf.iter().enumerate().skip(1).map(|(k, p)| p * weight(k)).sum();
        (value, self.tail_mass * tail_weight)
    }
}

/// Law of `Z_n` read off the coefficients of `H_n`.
pub fn law_of_zn(model: &ModelParams, n: usize, order: usize) -> Result<LawOfZn> {
    if n == 0 {
        return Err(GwiError::InvalidInput("law_of_zn requires n >= 1".into()));
    }
    let trace = iterate_pgf(model, n, order)?;
    Ok(LawOfZn::from_pmf(n, trace.h_n.into_coeffs()))
}

/// Law of `Z_n` by direct convolution over the recursion, without any
/// generating-function composition:
/// `law(Z_n) = (Σ_k P(Z_{n-1} = k) p^{*k}) * h`.
///
/// The convolutions always run at order `BRUTE_FORCE_MAX_ORDER` and the
/// result is cut to `K` afterwards. Mass passing through states above that
/// order is dropped, so the result is exact when that mass is negligible.
pub fn brute_force_law(model: &ModelParams, n: usize, order: usize) -> Result<LawOfZn> {
    if n == 0 || n > 5 {
        return Err(GwiError::InvalidInput(format!("brute force supports 1 <= n <= 5, got {n}")));
    }
    if order > BRUTE_FORCE_MAX_ORDER {
        return Err(GwiError::InvalidInput(format!(
            "brute force supports K <= {BRUTE_FORCE_MAX_ORDER}, got {order}"
        )));
    }
    let len = BRUTE_FORCE_MAX_ORDER + 1;
    let p: Vec<f64> = (0..len).map(|k| model.offspring().pmf(k)).collect();
    let h: Vec<f64> = (0..len).map(|k| model.immigration().pmf(k)).collect();
    let convolve = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (i, &x) in a.iter().enumerate().filter(|(_, x)| **x != 0.0) {
            for (j, &y) in b.iter().enumerate().take(len - i) {
                out[i + j] += x * y;
            }
        }
        out
    };

    let mut law = vec![0.0; len];
    law[0] = 1.0;
    for _ in 0..n {
        let mut parents_out = vec![0.0; len];
        let mut power = vec![0.0; len];
        power[0] = 1.0;
        for &mass in &law {
            if mass != 0.0 {
                for (o, q) in parents_out.iter_mut().zip(&power) {
                    *o += mass * q;
                }
            }
            power = convolve(&power, &p);
        }
        law = convolve(&parents_out, &h);
    }
    law.truncate(order + 1);
    Ok(LawOfZn::from_pmf(n, law))
}

/// A harmonic moment with the bound on the mass beyond the truncation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HarmonicSum {
    pub value: f64,
    pub remainder: f64,
}

/// `J_n(r) = Σ_{k>=1} k^{-r} P(Z_n = k) / P(Z_n > 0)` from a tabulated law.
pub fn harmonic_moment_sum(law: &LawOfZn, r: f64) -> Result<HarmonicSum> {
    if !(r > 0.0) {
        return Err(GwiError::InvalidInput(format!("r = {r} must be positive")));
    }
    if law.survival < 1e-300 {
        return Err(GwiError::ZeroSurvival(law.survival));
    }
    let sum: f64 = law
        .pmf
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, p)| p * (k as f64).powf(-r))
        .sum();
    let k_next = (law.order() + 1) as f64;
    Ok(HarmonicSum {
        value: sum / law.survival,
        remainder: law.tail_mass * k_next.powf(-r) / law.survival,
    })
}

/// `∫_0^∞ E(e^{-t Z_n}; Z_n > 0) t^{r-1} dt`, split at `t = 1`.
///
/// On `(0, 1]` the variable `t = s / n` puts the scale of `H_n` at `s ~ 1`
/// and the `s`-range is cut at doubling breakpoints; for `r < 1` the first
/// piece uses `s = s_1 w^{1/r}` to absorb the singularity of `s^{r-1}`.
pub fn laplace_moment(model: &ModelParams, n: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(GwiError::InvalidInput(format!("r = {r} must be positive")));
    }
    if n == 0 {
        return Err(GwiError::InvalidInput("harmonic moments need n >= 1".into()));
    }
    let opts = QuadOptions::rel(HARMONIC_REL_TOL);
    let nf = n as f64;
    let g = |t: f64| hn_excess(model, n, (-t).exp());

    // ∫_0^1 g(t) t^{r-1} dt = n^{-r} ∫_0^n g(s/n) s^{r-1} ds
    let s1 = 1.0f64.min(nf);
    let head = if r < 1.0 {
        let i = integrate_segments(|w| g(s1 * w.powf(1.0 / r) / nf), &[0.0, 0.5, 1.0], opts)?;
        i.value * s1.powf(r) / r
    } else {
        integrate_segments(|s| g(s / nf) * s.powf(r - 1.0), &[0.0, s1], opts)?.value
    };
    let mut points = vec![s1];
    while *points.last().unwrap() < nf {
        let next = (points.last().unwrap() * 2.0).min(nf);
        points.push(next);
    }
    let body = if points.len() > 1 {
        integrate_segments(|s| g(s / nf) * s.powf(r - 1.0), &points, opts)?.value
    } else {
        0.0
    };
    let lower = (head + body) * nf.powf(-r);
    let upper = integrate_to_infinity(|t| g(t) * t.powf(r - 1.0), 1.0, 1.0, opts)?.value;
    Ok(lower + upper)
}

/// `J_n(r)` through the Laplace representation
/// `J_n(r) = ∫_0^∞ E(e^{-tZ_n}; Z_n > 0) t^{r-1} dt / (Γ(r) P(Z_n > 0))`.
pub fn harmonic_moment_integral(model: &ModelParams, n: usize, r: f64) -> Result<f64> {
    let laplace = laplace_moment(model, n, r)?;
    let survival = 1.0 - hn_value(model, n, 0.0);
    if survival < 1e-300 {
        return Err(GwiError::ZeroSurvival(survival));
    }
    Ok(laplace / (gamma(r) * survival))
}

#[derive(Debug, Clone, Serialize)]
pub struct MuEstimate {
    pub j: usize,
    pub value: f64,
    pub n_used: Vec<usize>,
    /// Raw values `n^σ P(Z_n = j)` along `n_used`.
    pub sequence: Vec<f64>,
    pub extrapolated: bool,
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GwiError::InvalidInput(format!(
            "n_grid must be non-empty, positive and strictly increasing: {n_grid:?}"
        )));
    }
    Ok(())
}

/// `n^σ P(Z_n = j)` for `j = 0..=j_max` and every `n` in the grid.
fn scaled_coefficients(model: &ModelParams, j_max: usize, n_grid: &[usize]) -> Result<Vec<Vec<f64>>> {
    let order = j_max.max(1);
    n_grid
        .par_iter()
        .map(|&n| {
            let h = iterate_pgf(model, n, order)?.h_n;
            let scale = (n as f64).powf(model.sigma());
            Ok(h.coeffs()[..=j_max].iter().map(|c| scale * c).collect())
        })
        .collect()
}

fn extrapolate(j: usize, n_grid: &[usize], seq: Vec<f64>) -> Result<MuEstimate> {
    let last = seq.len() - 1;
    let mut estimate = MuEstimate {
        j,
        value: seq[last],
        n_used: n_grid.to_vec(),
        sequence: seq.clone(),
        extrapolated: false,
    };
    if last == 0 {
        return Ok(estimate);
    }
    let (a1, a2) = (seq[last - 1], seq[last]);
    let gap = (a2 - a1).abs() / a2.abs().max(f64::MIN_POSITIVE);
    if !(gap <= 0.05) {
        return Err(GwiError::NonConvergent(format!(
            "n^sigma P(Z_n = {j}) moved by {:.2}% between n = {} and n = {}",
            100.0 * gap,
            n_grid[last - 1],
            n_grid[last]
        )));
    }
    if gap < 0.01 {
        // First-order Richardson step in 1/n.
        let (n1, n2) = (n_grid[last - 1] as f64, n_grid[last] as f64);
        estimate.value = ((n2 * a2 - n1 * a1) / (n2 - n1)).max(0.0);
        estimate.extrapolated = true;
    }
    Ok(estimate)
}

/// Estimates `μ_j = lim n^σ P(Z_n = j)` over an increasing grid.
pub fn mu_coefficient(model: &ModelParams, j: usize, n_grid: &[usize]) -> Result<MuEstimate> {
    check_grid(n_grid)?;
    if j > MU_MAX_ORDER {
        return Err(GwiError::NonConvergent(format!(
            "j = {j} is beyond the truncation order {MU_MAX_ORDER}"
        )));
    }
    let table = scaled_coefficients(model, j, n_grid)?;
    extrapolate(j, n_grid, table.iter().map(|row| row[j]).collect())
}

/// `μ_0..=μ_{j_max}` from one sweep of the grid.
pub fn mu_coefficients(model: &ModelParams, j_max: usize, n_grid: &[usize]) -> Result<Vec<MuEstimate>> {
    check_grid(n_grid)?;
    if j_max > MU_MAX_ORDER {
        return Err(GwiError::NonConvergent(format!(
            "j = {j_max} is beyond the truncation order {MU_MAX_ORDER}"
        )));
    }
    let table = scaled_coefficients(model, j_max, n_grid)?;
    (0..=j_max)
        .map(|j| extrapolate(j, n_grid, table.iter().map(|row| row[j]).collect()))
        .collect()
}

/// `H_n(e^{-s/n}) (1 + γ s)^σ` at each `s`.
pub fn envelope_ratios(model: &ModelParams, n: usize, s_grid: &[f64]) -> Vec<f64> {
    let (gamma, sigma) = (model.gamma(), model.sigma());
    s_grid
        .iter()
        .map(|&s| hn_value(model, n, (-s / n as f64).exp()) * (1.0 + gamma * s).powf(sigma))
        .collect()
}

/// Rows `n,k,p` for each law.
pub fn write_law_csv<W: Write>(laws: &[LawOfZn], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,k,p")?;
    for law in laws {
        for (k, p) in law.pmf.iter().enumerate() {
            writeln!(w, "{},{k},{p}", law.n)?;
        }
    }
    Ok(())
}

/// Rows `n,r,J` of harmonic moments.
pub fn write_harmonic_csv<W: Write>(rows: &[(usize, f64, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,r,J")?;
    for (n, r, j) in rows {
        writeln!(w, "{n},{r},{j}")?;
    }
    Ok(())
}

/// The law of a single series as a `LawOfZn`, for callers holding `H_n`.
pub fn law_from_series(n: usize, h_n: TruncatedSeries) -> LawOfZn {
    LawOfZn::from_pmf(n, h_n.into_coeffs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_condition_a, DistributionSpec};

    fn geometric_model() -> ModelParams {
        validate_condition_a(
            &DistributionSpec::geometric(0.5),
            &DistributionSpec::geometric(1.0 / 3.0),
        )
        .unwrap()
    }

    #[test]
    fn first_generation_is_immigration() {
        let law = law_of_zn(&geometric_model(), 1, 50).unwrap();
        for (k, p) in law.pmf.iter().enumerate() {
            assert!((p - (1.0 / 3.0) * (2.0f64 / 3.0).powi(k as i32)).abs() < 1e-15);
        }
        assert!((law.survival - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn second_generation_zero_mass() {
        let m = geometric_model();
        assert!((law_of_zn(&m, 2, 32).unwrap().pmf[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((brute_force_law(&m, 2, 32).unwrap().pmf[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn law_rejects_n_zero() {
        assert!(law_of_zn(&geometric_model(), 0, 8).is_err());
        assert!(brute_force_law(&geometric_model(), 6, 8).is_err());
        assert!(brute_force_law(&geometric_model(), 2, 300).is_err());
    }

    #[test]
    fn harmonic_sum_n1() {
        let law = law_of_zn(&geometric_model(), 1, 400).unwrap();
        let j = harmonic_moment_sum(&law, 1.0).unwrap();
        assert!((j.value - 3f64.ln() / 2.0).abs() < 1e-12, "{}", j.value);
    }

    #[test]
    fn harmonic_of_point_mass_is_one() {
        let law = LawOfZn::from_pmf(1, vec![0.4, 0.6, 0.0]);
        for r in [0.3, 1.0, 4.0] {
            let j = harmonic_moment_sum(&law, r).unwrap();
            assert!((j.value - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn harmonic_errors() {
        let dead = LawOfZn::from_pmf(1, vec![1.0, 0.0]);
        assert!(matches!(harmonic_moment_sum(&dead, 1.0), Err(GwiError::ZeroSurvival(_))));
        let law = LawOfZn::from_pmf(1, vec![0.5, 0.5]);
        assert!(harmonic_moment_sum(&law, 0.0).is_err());
    }

    #[test]
    fn integral_route_n1() {
        let j = harmonic_moment_integral(&geometric_model(), 1, 1.0).unwrap();
        assert!((j - 3f64.ln() / 2.0).abs() < 1e-9, "{j}");
    }

    #[test]
    fn integral_route_point_mass() {
        // immigration {1/2, 1/2} and n = 1: Z_1 ∈ {0, 1}
        let m = validate_condition_a(
            &DistributionSpec::explicit([0.25, 0.5, 0.25]),
            &DistributionSpec::explicit([0.5, 0.5]),
        )
        .unwrap();
        for r in [0.5, 1.0, 2.5] {
            let j = harmonic_moment_integral(&m, 1, r).unwrap();
            assert!((j - 1.0).abs() < 1e-9, "r={r}: {j}");
        }
    }

    #[test]
    fn mu_errors() {
        let m = geometric_model();
        assert!(matches!(
            mu_coefficient(&m, MU_MAX_ORDER + 1, &[16, 32]),
            Err(GwiError::NonConvergent(_))
        ));
        assert!(mu_coefficient(&m, 0, &[32, 16]).is_err());
        // far from the limit: n^2 P(Z_n = 0) = 2n^2/((n+1)(n+2)) moves by > 5%
        assert!(matches!(mu_coefficient(&m, 0, &[2, 4]), Err(GwiError::NonConvergent(_))));
    }
}
