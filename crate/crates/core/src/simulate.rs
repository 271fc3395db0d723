//! Monte Carlo engine: paths of `Z_n`, increment laws, estimates of
//! `P(S_{Z_n} / Z_n >= ε, Z_n > 0)` and the Fuk–Nagaev bounds.

use std::io::Write;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GwiError, Result};
use crate::model::{DistributionSpec, ModelParams};
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::stream_rng;
use crate::special::{normal_pdf, normal_sf};

/// Number of shards an estimate is split into, independent of thread count.
pub const SHARDS: u64 = 64;

/// Smallest path count accepted by `estimate_large_deviation`.
pub const MIN_PATHS: u64 = 1000;

/// Parent counts above this use closed-form sum laws instead of a loop.
const LOOP_LIMIT: u64 = 16;

/// Draws per shard in `sample_increments`.
const INCREMENT_SHARD: usize = 1 << 16;

/// Runs `f` on a pool capped by `GWI_THREADS` when that variable is set.
pub fn with_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var("GWI_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn gamma_poisson<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> u64 {
    if scale <= 0.0 {
        return 0;
    }
    let lambda: f64 = Gamma::new(shape, scale).expect("positive shape and scale").sample(rng);
    poisson(lambda, rng)
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let v: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
    v as u64
}

/// Sum of `k` failures-before-success geometric variables.
fn negative_binomial<R: Rng + ?Sized>(k: u64, geo: &Geometric, success: f64, rng: &mut R) -> u64 {
    if k <= LOOP_LIMIT {
        (0..k).map(|_| geo.sample(rng)).sum()
    } else {
        gamma_poisson(k as f64, (1.0 - success) / success, rng)
    }
}

/// Sampler for sums of i.i.d. copies of a law on the non-negative integers.
#[derive(Debug, Clone)]
pub enum SumSampler {
    Geometric { success: f64, geo: Geometric },
    Poisson { rate: f64 },
    /// Zero with probability `γ/(1+γ)`, else one plus a geometric variable
    /// with success `1/(1+γ)`.
    LinearFractional { gamma: f64, geo: Geometric },
    Explicit { pmf: Vec<f64>, alias: WeightedAliasIndex<f64> },
}

impl SumSampler {
    pub fn new(spec: &DistributionSpec) -> Result<Self> {
        spec.check()?;
        let bad = |e: &dyn std::fmt::Display| GwiError::InvalidDistribution(e.to_string());
        Ok(match spec {
            DistributionSpec::Geometric { success } => SumSampler::Geometric {
                success: *success,
                geo: Geometric::new(*success).map_err(|e| bad(&e))?,
            },
            DistributionSpec::Poisson { rate } => SumSampler::Poisson { rate: *rate },
            DistributionSpec::LinearFractional { gamma } => SumSampler::LinearFractional {
                gamma: *gamma,
                geo: Geometric::new(1.0 / (1.0 + gamma)).map_err(|e| bad(&e))?,
            },
            DistributionSpec::Explicit { pmf } => SumSampler::Explicit {
                pmf: pmf.clone(),
                alias: WeightedAliasIndex::new(pmf.clone()).map_err(|e| bad(&e))?,
            },
        })
    }

    /// One draw of the sum of `k` independent copies.
    pub fn sample_sum<R: Rng + ?Sized>(&self, k: u64, rng: &mut R) -> u64 {
        if k == 0 {
            return 0;
        }
        match self {
            SumSampler::Geometric { success, geo } => negative_binomial(k, geo, *success, rng),
            SumSampler::Poisson { rate } => poisson(k as f64 * rate, rng),
            SumSampler::LinearFractional { gamma, geo } => {
                let q = 1.0 / (1.0 + gamma);
                let positive = if k <= LOOP_LIMIT {
                    (0..k).filter(|_| rng.random::<f64>() < q).count() as u64
                } else {
                    Binomial::new(k, q).expect("valid binomial").sample(rng)
                };
                positive + negative_binomial(positive, geo, q, rng)
            }
            SumSampler::Explicit { pmf, alias } => {
                if k <= LOOP_LIMIT.max(pmf.len() as u64) {
                    (0..k).map(|_| alias.sample(rng) as u64).sum()
                } else {
                    multinomial_sum(pmf, k, rng)
                }
            }
        }
    }
}

/// `Σ_j j N_j` for `(N_j) ~ Multinomial(k, pmf)`, drawn as a binomial chain.
fn multinomial_sum<R: Rng + ?Sized>(pmf: &[f64], k: u64, rng: &mut R) -> u64 {
    let mut remaining = k;
    let mut mass_left = 1.0;
    let mut total = 0;
    for (j, &p) in pmf.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p == 0.0 {
            continue;
        }
        let count = if p >= mass_left {
            remaining
        } else {
            Binomial::new(remaining, (p / mass_left).min(1.0)).expect("valid binomial").sample(rng)
        };
        total += j as u64 * count;
        remaining -= count;
        mass_left -= p;
    }
    // Round-off in `mass_left` can leave a few trials unassigned; they go to
    // the last atom.
    if remaining > 0 {
        let last = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        total += last as u64 * remaining;
    }
    total
}

/// Samplers for the offspring and immigration laws of a model.
#[derive(Debug, Clone)]
pub struct PathSampler {
    offspring: SumSampler,
    immigration: SumSampler,
}

impl PathSampler {
    pub fn new(model: &ModelParams) -> Result<Self> {
        Ok(Self {
            offspring: SumSampler::new(model.offspring())?,
            immigration: SumSampler::new(model.immigration())?,
        })
    }

    /// `Z_n` by the recursion `Z_k = Σ_{i ≤ Z_{k-1}} ξ_{k,i} + Y_k`, `Z_0 = 0`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> u64 {
        let mut z = 0;
        for _ in 0..n {
            z = self.offspring.sample_sum(z, rng) + self.immigration.sample_sum(1, rng);
        }
        z
    }
}

/// One draw of `Z_n`, from stream 0 of `seed`.
pub fn simulate_zn_path(model: &ModelParams, n: usize, seed: u64) -> Result<u64> {
    let sampler = PathSampler::new(model)?;
    Ok(sampler.sample(n, &mut stream_rng(seed, 0)))
}

/// Law of the increments `X_i`, always centred to mean zero.
///
/// `ShiftedPareto` is `W - α x_m/(α - 1)` with `P(W ≥ w) = (x_m / w)^α`,
/// `w ≥ x_m`. `TruncatedDiscrete` is a finitely supported law given by its
/// atoms, shifted by its raw mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementLaw {
    ShiftedPareto { alpha: f64, x_m: f64 },
    Gaussian { sigma0_sq: f64 },
    TruncatedDiscrete { values: Vec<f64>, probs: Vec<f64> },
}

impl IncrementLaw {
    pub fn check(&self) -> Result<()> {
        match self {
            IncrementLaw::ShiftedPareto { alpha, x_m } => {
                if !(*alpha > 2.0 && alpha.is_finite()) {
                    return Err(GwiError::InvalidDistribution(format!(
                        "Pareto tail index {alpha} must exceed 2 for a finite variance"
                    )));
                }
                if !(*x_m > 0.0 && x_m.is_finite()) {
                    return Err(GwiError::InvalidDistribution(format!("Pareto scale {x_m} must be positive")));
                }
            }
            IncrementLaw::Gaussian { sigma0_sq } => {
                if !(*sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
                    return Err(GwiError::InvalidDistribution(format!("variance {sigma0_sq} must be positive")));
                }
            }
            IncrementLaw::TruncatedDiscrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(GwiError::InvalidDistribution(
                        "discrete law needs matching, non-empty values and probs".into(),
                    ));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
                    return Err(GwiError::InvalidDistribution("discrete law has invalid atoms".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(GwiError::InvalidDistribution(format!("discrete probs sum to {total}")));
                }
                if !(self.sigma0_sq() > 0.0) {
                    return Err(GwiError::InvalidDistribution("discrete law is degenerate".into()));
                }
            }
        }
        Ok(())
    }

    /// Raw mean removed by the centring.
    pub fn mean_shift(&self) -> f64 {
        match self {
            IncrementLaw::ShiftedPareto { alpha, x_m } => alpha * x_m / (alpha - 1.0),
            IncrementLaw::Gaussian { .. } => 0.0,
            IncrementLaw::TruncatedDiscrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    pub fn sigma0_sq(&self) -> f64 {
        match self {
            IncrementLaw::ShiftedPareto { alpha, x_m } => {
                alpha * x_m * x_m / ((alpha - 1.0).powi(2) * (alpha - 2.0))
            }
            IncrementLaw::Gaussian { sigma0_sq } => *sigma0_sq,
            IncrementLaw::TruncatedDiscrete { values, probs } => {
                let m = self.mean_shift();
                values.iter().zip(probs).map(|(v, p)| p * (v - m).powi(2)).sum()
            }
        }
    }

    /// Tail index `α`; `None` for laws with all moments finite.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            IncrementLaw::ShiftedPareto { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// Constant `a` in `P(X₁ ≥ x) ~ a x^{-α}`.
    pub fn tail_constant(&self) -> Option<f64> {
        match self {
            IncrementLaw::ShiftedPareto { alpha, x_m } => Some(x_m.powf(*alpha)),
            _ => None,
        }
    }

    /// `P(X₁ ≥ x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match self {
            IncrementLaw::ShiftedPareto { alpha, x_m } => {
                let w = x + self.mean_shift();
                if w <= *x_m {
                    1.0
                } else {
                    (x_m / w).powf(*alpha)
                }
            }
            IncrementLaw::Gaussian { sigma0_sq } => normal_sf(x / sigma0_sq.sqrt()),
            IncrementLaw::TruncatedDiscrete { values, probs } => {
                let m = self.mean_shift();
                values
                    .iter()
                    .zip(probs)
                    .filter(|(v, _)| **v - m >= x)
                    .map(|(_, p)| p)
                    .sum()
            }
        }
    }

    /// `E[X₁^t ; 0 ≤ X₁ ≤ upper]`.
    ///
    /// Exact for the Pareto law at integer `t` (binomial expansion of
    /// `(w - s)^t`) and for discrete laws; quadrature otherwise.
    pub fn truncated_moment(&self, t: f64, upper: f64) -> Result<f64> {
        if upper <= 0.0 {
            return Ok(0.0);
        }
        match self {
            IncrementLaw::ShiftedPareto { alpha, x_m } => {
                let s = self.mean_shift();
                let density = |w: f64| alpha * x_m.powf(*alpha) * w.powf(-alpha - 1.0);
                // s > x_m, so X ≥ 0 means W ≥ s, inside the support.
                let (lo, hi) = (s, upper + s);
                if t.fract() == 0.0 && t >= 0.0 {
                    let ti = t as i32;
                    let mut total = 0.0;
                    let mut binom = 1.0;
                    for i in 0..=ti {
                        if i > 0 {
                            binom *= (ti - i + 1) as f64 / i as f64;
                        }
                        let e = i as f64 - alpha;
                        let piece = if e.abs() < 1e-12 {
                            (hi / lo).ln()
                        } else {
                            (hi.powf(e) - lo.powf(e)) / e
                        };
                        total += binom * (-s).powi(ti - i) * piece;
                    }
                    Ok(alpha * x_m.powf(*alpha) * total)
                } else {
                    let opts = QuadOptions::rel(1e-10);
                    Ok(integrate(|w| (w - s).max(0.0).powf(t) * density(w), lo, hi, opts)?.value)
                }
            }
            IncrementLaw::Gaussian { sigma0_sq } => {
                let sd = sigma0_sq.sqrt();
                let hi = upper.min(40.0 * sd);
                let opts = QuadOptions::rel(1e-10);
                Ok(integrate(|x| x.powf(t) * normal_pdf(x / sd) / sd, 0.0, hi, opts)?.value)
            }
            IncrementLaw::TruncatedDiscrete { values, probs } => {
                let m = self.mean_shift();
                Ok(values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| (v - m, p))
                    .filter(|(x, _)| *x >= 0.0 && *x <= upper)
                    .map(|(x, p)| p * x.powf(t))
                    .sum())
            }
        }
    }

    fn sampler(&self) -> Result<IncrementSampler> {
        self.check()?;
        Ok(match self {
            IncrementLaw::ShiftedPareto { alpha, x_m } => IncrementSampler::Pareto {
                inv_alpha: 1.0 / alpha,
                x_m: *x_m,
                shift: self.mean_shift(),
            },
            IncrementLaw::Gaussian { sigma0_sq } => IncrementSampler::Gaussian { sd: sigma0_sq.sqrt() },
            IncrementLaw::TruncatedDiscrete { values, probs } => IncrementSampler::Discrete {
                atoms: values.iter().map(|v| v - self.mean_shift()).collect(),
                alias: WeightedAliasIndex::new(probs.clone())
                    .map_err(|e| GwiError::InvalidDistribution(e.to_string()))?,
            },
        })
    }
}

enum IncrementSampler {
    Pareto { inv_alpha: f64, x_m: f64, shift: f64 },
    Gaussian { sd: f64 },
    Discrete { atoms: Vec<f64>, alias: WeightedAliasIndex<f64> },
}

impl IncrementSampler {
    fn one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementSampler::Pareto { inv_alpha, x_m, shift } => {
                // 1 - U lies in (0, 1]
                let u = 1.0 - rng.random::<f64>();
                x_m * u.powf(-inv_alpha) - shift
            }
            IncrementSampler::Gaussian { sd } => sd * rng.sample::<f64, _>(StandardNormal),
            IncrementSampler::Discrete { atoms, alias } => atoms[alias.sample(rng)],
        }
    }

    /// `S_k`; the Gaussian law uses `S_k ~ N(0, k σ₀²)` directly.
    fn sum<R: Rng + ?Sized>(&self, k: u64, rng: &mut R) -> f64 {
        match self {
            IncrementSampler::Gaussian { sd } => sd * (k as f64).sqrt() * rng.sample::<f64, _>(StandardNormal),
            _ => (0..k).map(|_| self.one(rng)).sum(),
        }
    }
}

/// `count` i.i.d. increments; draw `i` uses stream `i / 65536` of `seed`.
pub fn sample_increments(law: &IncrementLaw, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(GwiError::InvalidInput("count must be at least 1".into()));
    }
    let sampler = law.sampler()?;
    let mut out = vec![0.0; count];
    out.par_chunks_mut(INCREMENT_SHARD)
        .enumerate()
        .for_each(|(shard, chunk)| {
            let mut rng = stream_rng(seed, shard as u64);
            for v in chunk.iter_mut() {
                *v = sampler.one(&mut rng);
            }
        });
    Ok(out)
}

/// `k` partial sums `S_k` drawn independently; helper for tail checks.
pub fn sample_sums(law: &IncrementLaw, k: u64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 || k == 0 {
        return Err(GwiError::InvalidInput("count and k must be at least 1".into()));
    }
    let sampler = law.sampler()?;
    let mut out = vec![0.0; count];
    out.par_chunks_mut(INCREMENT_SHARD / 64)
        .enumerate()
        .for_each(|(shard, chunk)| {
            let mut rng = stream_rng(seed, shard as u64);
            for v in chunk.iter_mut() {
                *v = sampler.sum(k, &mut rng);
            }
        });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub n: usize,
    pub eps: f64,
    pub probability: f64,
    pub std_error: f64,
    pub paths: u64,
    pub seed: u64,
    pub hits: u64,
}

impl MCEstimate {
    fn from_hits(n: usize, eps: f64, hits: u64, paths: u64, seed: u64) -> Self {
        let p = hits as f64 / paths as f64;
        Self {
            n,
            eps,
            probability: p,
            std_error: (p * (1.0 - p) / paths as f64).sqrt(),
            paths,
            seed,
            hits,
        }
    }
}

/// Plain Monte Carlo estimate of `P(Z_n > 0, S_{Z_n} ≥ ε Z_n)`.
///
/// The paths are split into `SHARDS` shards; shard `i` draws from stream
/// `i` of `seed`, and the hit counts are summed in shard order.
pub fn estimate_large_deviation(
    model: &ModelParams,
    law: &IncrementLaw,
    n: usize,
    eps: f64,
    paths: u64,
    seed: u64,
) -> Result<MCEstimate> {
    if paths < MIN_PATHS {
        return Err(GwiError::InvalidInput(format!("paths = {paths} below the minimum {MIN_PATHS}")));
    }
    if !eps.is_finite() {
        return Err(GwiError::InvalidInput(format!("eps = {eps} must be finite")));
    }
    let zn = PathSampler::new(model)?;
    let increments = law.sampler()?;
    let hits: Vec<u64> = with_worker_pool(|| {
        (0..SHARDS)
            .into_par_iter()
            .map(|shard| {
                let share = paths / SHARDS + u64::from(shard < paths % SHARDS);
                let mut rng = stream_rng(seed, shard);
                let mut hits = 0;
                for _ in 0..share {
                    let z = zn.sample(n, &mut rng);
                    if z > 0 && increments.sum(z, &mut rng) >= eps * z as f64 {
                        hits += 1;
                    }
                }
                hits
            })
            .collect()
    });
    Ok(MCEstimate::from_hits(n, eps, hits.iter().sum(), paths, seed))
}

/// The two Fuk–Nagaev bounds on `P(S_k ≥ ε k)` and their minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FukNagaev {
    /// `k P(X₁ ≥ εk/r) + (e r σ₀²)^r ε^{-2r} k^{-r}`.
    pub polynomial: f64,
    /// `k P(X₁ ≥ εk/r) + exp(-2ε²k / ((t+2)² e^t σ₀²))`
    /// `+ ((t+2) r^{t-1} E[X₁^t; 0 ≤ X₁ ≤ εk] / (t ε^t k^{t-1}))^{tr/(t+2)}`.
    pub exponential: f64,
    pub bound: f64,
}

pub fn fuk_nagaev_bound(law: &IncrementLaw, k: u64, eps: f64, r: f64, t: f64) -> Result<FukNagaev> {
    if k == 0 || !(r > 1.0) || !(t >= 2.0) || !(eps > 0.0) {
        return Err(GwiError::InvalidInput(format!(
            "Fuk–Nagaev needs k >= 1, r > 1, t >= 2, eps > 0 (k={k}, r={r}, t={t}, eps={eps})"
        )));
    }
    law.check()?;
    let kf = k as f64;
    let s2 = law.sigma0_sq();
    let jump = kf * law.tail(eps * kf / r);
    let polynomial = jump + (std::f64::consts::E * r * s2).powf(r) * eps.powf(-2.0 * r) * kf.powf(-r);
    let gauss = (-2.0 * eps * eps * kf / ((t + 2.0).powi(2) * t.exp() * s2)).exp();
    let moment = law.truncated_moment(t, eps * kf)?;
    let base = (t + 2.0) * r.powf(t - 1.0) * moment / (t * eps.powf(t) * kf.powf(t - 1.0));
    let exponential = jump + gauss + base.powf(t * r / (t + 2.0));
    Ok(FukNagaev {
        polynomial,
        exponential,
        bound: polynomial.min(exponential),
    })
}

pub fn write_mc_csv<W: Write>(rows: &[MCEstimate], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,eps,paths,hits,p_hat,std_err,seed")?;
    for e in rows {
        writeln!(
            w,
            "{},{:.15e},{},{},{:.15e},{:.15e},{}",
            e.n, e.eps, e.paths, e.hits, e.probability, e.std_error, e.seed
        )?;
    }
    Ok(())
}

/// Everything needed to rerun a Monte Carlo table exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub offspring: DistributionSpec,
    pub immigration: DistributionSpec,
    pub increments: Option<IncrementLaw>,
    pub root_seed: u64,
    pub shards: u64,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub n: usize,
    pub eps: f64,
    pub paths: u64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_condition_a;

    fn geometric_model() -> ModelParams {
        validate_condition_a(&DistributionSpec::geometric(0.5), &DistributionSpec::geometric(1.0 / 3.0)).unwrap()
    }

    fn mean_and_var(spec: &DistributionSpec, k: u64, draws: usize) -> (f64, f64) {
        let s = SumSampler::new(spec).unwrap();
        let mut rng = stream_rng(5, 0);
        let xs: Vec<f64> = (0..draws).map(|_| s.sample_sum(k, &mut rng) as f64).collect();
        let m = xs.iter().sum::<f64>() / draws as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        (m, v)
    }

    #[test]
    fn sum_samplers_match_moments() {
        let specs = [
            DistributionSpec::geometric(0.5),
            DistributionSpec::poisson(1.0),
            DistributionSpec::linear_fractional(0.25),
            DistributionSpec::explicit(vec![0.25, 0.5, 0.25]),
        ];
        for spec in &specs {
            for k in [1u64, 7, 200, 5000] {
                let (m, v) = mean_and_var(spec, k, 40_000);
                let mean = k as f64 * spec.mean();
                let var = k as f64 * spec.variance();
                let se = (var / 40_000.0).sqrt();
                assert!((m - mean).abs() < 5.0 * se, "{spec:?} k={k}: mean {m} vs {mean}");
                assert!((v - var).abs() < 0.06 * var, "{spec:?} k={k}: var {v} vs {var}");
            }
        }
    }

    #[test]
    fn path_edge_cases() {
        let m = geometric_model();
        assert_eq!(simulate_zn_path(&m, 0, 1).unwrap(), 0);
        assert_eq!(simulate_zn_path(&m, 30, 9).unwrap(), simulate_zn_path(&m, 30, 9).unwrap());
    }

    #[test]
    fn pareto_constants() {
        let law = IncrementLaw::ShiftedPareto { alpha: 3.0, x_m: 1.0 };
        assert!((law.sigma0_sq() - 0.75).abs() < 1e-15);
        assert_eq!(law.tail_constant(), Some(1.0));
        assert!((law.mean_shift() - 1.5).abs() < 1e-15);
        for x in [1e2, 1e3, 1e4] {
            let ratio = law.tail(x) * x.powi(3);
            assert!((ratio - 1.0).abs() < 5.0 / x, "x={x}: {ratio}");
        }
        let g = IncrementLaw::Gaussian { sigma0_sq: 2.0 };
        assert_eq!(g.alpha(), None);
    }

    #[test]
    fn truncated_moment_routes_agree() {
        let law = IncrementLaw::ShiftedPareto { alpha: 2.5, x_m: 1.0 };
        let s = law.mean_shift();
        for t in [2.0, 3.0, 4.0] {
            for upper in [0.5, 10.0, 1000.0] {
                let exact = law.truncated_moment(t, upper).unwrap();
                let numeric = integrate(
                    |w| (w - s).powf(t) * 2.5 * w.powf(-3.5),
                    s,
                    upper + s,
                    QuadOptions::rel(1e-12),
                )
                .unwrap()
                .value;
                assert!((exact - numeric).abs() <= 1e-8 * numeric.max(1e-300), "t={t} u={upper}: {exact} vs {numeric}");
            }
        }
        // E[X^2; X ≥ 0] for N(0,1) is 1/2
        let g = IncrementLaw::Gaussian { sigma0_sq: 1.0 };
        assert!((g.truncated_moment(2.0, 1e9).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fuk_nagaev_plug_in() {
        let law = IncrementLaw::ShiftedPareto { alpha: 3.0, x_m: 1.0 };
        let fn_ = fuk_nagaev_bound(&law, 400, 0.5, 2.0, 2.0).unwrap();
        // 400 (1/101.5)^3 + (2e·3/4)^2 · 2^4 · 400^{-2}
        let e = std::f64::consts::E;
        let hand = 400.0 / 101.5f64.powi(3) + (1.5 * e).powi(2) * 16.0 / 160_000.0;
        assert!((fn_.polynomial - hand).abs() < 1e-14, "{} vs {hand}", fn_.polynomial);
        assert!(fn_.bound <= fn_.polynomial && fn_.bound <= fn_.exponential);
        let far = fuk_nagaev_bound(&law, 400, 1e8, 2.0, 2.0).unwrap();
        assert!(far.bound < 1e-20);
        assert!(fuk_nagaev_bound(&law, 0, 0.5, 2.0, 2.0).is_err());
        assert!(fuk_nagaev_bound(&law, 1, 0.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn estimate_is_deterministic_and_bounded() {
        let m = geometric_model();
        let law = IncrementLaw::Gaussian { sigma0_sq: 1.0 };
        let a = estimate_large_deviation(&m, &law, 10, 0.1, 4000, 3).unwrap();
        let b = estimate_large_deviation(&m, &law, 10, 0.1, 4000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.probability > 0.0 && a.probability < 1.0);
        let bounded = IncrementLaw::TruncatedDiscrete { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] };
        let none = estimate_large_deviation(&m, &bounded, 10, 1e6, 2000, 3).unwrap();
        assert_eq!(none.hits, 0);
        assert!(estimate_large_deviation(&m, &law, 10, 0.1, 999, 3).is_err());
    }
}
