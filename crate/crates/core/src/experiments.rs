//! Convergence studies that set exact and Monte Carlo values against the
//! limit statements, with CSV and JSON output.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GwiError, Result};
use crate::exact::{envelope_ratios, harmonic_moment_integral, law_of_zn, mu_coefficients};
use crate::limits::{
    classify_regime, i_constant, scaling_a, EpsSequence, LimitConstants, MomentCondition, RegimeReport,
};
use crate::model::ModelParams;
use crate::rng::split_seed;
use crate::series::{hn_value, iterate_value};
use crate::simulate::{estimate_large_deviation, sample_sums, IncrementLaw, ManifestEntry, RunManifest, SHARDS};
use crate::special::{gamma, normal_sf};

/// Relative size below which a `q(ε)` term ends the series.
pub const Q_SERIES_CUTOFF: f64 = 1e-8;

/// Grid for `μ_0..=μ_{j_max}`: `n ∈ {16, 32, 64} · max(64, ⌈j_max / γ⌉)`,
/// since `n^σ P(Z_n = j)` settles once `n` is large against `j / γ`.
pub fn mu_grid(j_max: usize, gamma_: f64) -> Vec<usize> {
    let base = ((j_max as f64 / gamma_).ceil() as usize).max(64);
    vec![16 * base, 32 * base, 64 * base]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Thm11Harmonic,
    Thm12Ldp,
    Thm13CriticalAlpha,
    Cor2FixedEps,
    Lemma23LocalLimit,
    Lemma22Envelope,
    #[serde(rename = "functional_eq_U", alias = "functional_eq_u")]
    FunctionalEqU,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Thm11Harmonic => "thm11_harmonic",
            Study::Thm12Ldp => "thm12_ldp",
            Study::Thm13CriticalAlpha => "thm13_critical_alpha",
            Study::Cor2FixedEps => "cor2_fixed_eps",
            Study::Lemma23LocalLimit => "lemma23_local_limit",
            Study::Lemma22Envelope => "lemma22_envelope",
            Study::FunctionalEqU => "functional_eq_U",
        }
    }

    fn is_monte_carlo(&self) -> bool {
        matches!(self, Study::Thm12Ldp | Study::Thm13CriticalAlpha | Study::Cor2FixedEps)
    }
}

/// Shape of `ε_n` for the Monte Carlo studies; `r_or_eps` supplies the
/// exponent (or the fixed value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EpsKind {
    #[default]
    Power,
    LogPower,
    Fixed,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub study: Study,
    pub model: ModelParams,
    pub law: Option<IncrementLaw>,
    pub n_grid: Vec<usize>,
    /// `r` values for the harmonic study, `ε` exponents or fixed levels for
    /// the Monte Carlo studies, `s` values for the envelope study.
    pub r_or_eps: Vec<f64>,
    pub eps_kind: EpsKind,
    pub eps_coefficient: f64,
    pub paths: u64,
    pub seed: u64,
    pub output_path: Option<std::path::PathBuf>,
}

impl ExperimentConfig {
    pub fn new(study: Study, model: ModelParams, n_grid: Vec<usize>) -> Self {
        Self {
            study,
            model,
            law: None,
            n_grid,
            r_or_eps: Vec::new(),
            eps_kind: EpsKind::Power,
            eps_coefficient: 1.0,
            paths: 100_000,
            seed: 0,
            output_path: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GwiError::InvalidInput(format!(
                "n_grid must be non-empty and strictly increasing: {:?}",
                self.n_grid
            )));
        }
        if self.study.is_monte_carlo() {
            if self.paths < crate::simulate::MIN_PATHS {
                return Err(GwiError::InvalidInput(format!("paths = {} below 1000", self.paths)));
            }
            if self.law.is_none() {
                return Err(GwiError::InvalidInput(format!("{} needs an increment law", self.study.name())));
            }
        }
        Ok(())
    }

    fn eps_sequence(&self, value: f64) -> EpsSequence {
        match self.eps_kind {
            EpsKind::Power => EpsSequence::Power {
                coefficient: self.eps_coefficient,
                exponent: value,
            },
            EpsKind::LogPower => EpsSequence::LogPower {
                coefficient: self.eps_coefficient,
                exponent: value,
            },
            EpsKind::Fixed => EpsSequence::Fixed { eps: value },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub study: String,
    pub n: usize,
    pub r_or_eps: f64,
    pub scaled_value: f64,
    pub limit_value: f64,
    /// `|scaled - limit| / |limit|`, or `|scaled|` when the limit is zero.
    pub rel_error: f64,
    pub std_error: Option<f64>,
    pub seed: Option<u64>,
}

impl ConvergenceRow {
    fn new(study: Study, n: usize, r_or_eps: f64, scaled_value: f64, limit_value: f64) -> Self {
        let rel_error = if limit_value == 0.0 {
            scaled_value.abs()
        } else {
            (scaled_value - limit_value).abs() / limit_value.abs()
        };
        Self {
            study: study.name().to_string(),
            n,
            r_or_eps,
            scaled_value,
            limit_value,
            rel_error,
            std_error: None,
            seed: None,
        }
    }
}

/// Rows of one study, the groups whose trend failed and the MC manifest.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub study: Study,
    pub rows: Vec<ConvergenceRow>,
    pub failed: Vec<String>,
    pub manifest: Option<RunManifest>,
}

impl StudyReport {
    fn new(study: Study, rows: Vec<ConvergenceRow>, manifest: Option<RunManifest>) -> Self {
        let failed = trend_failures(&rows);
        Self {
            study,
            rows,
            failed,
            manifest,
        }
    }

    pub fn worst_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    pub fn is_failed(&self) -> bool {
        !self.failed.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "study={} rows={} worst_rel_error={:.6e}{}",
            self.study.name(),
            self.rows.len(),
            self.worst_rel_error(),
            if self.is_failed() { " FAILED" } else { "" }
        )
    }
}

/// Groups (by `r_or_eps`) whose `rel_error` at the largest `n` exceeds the
/// one at the smallest `n`.
pub fn trend_failures(rows: &[ConvergenceRow]) -> Vec<String> {
    let mut keys: Vec<f64> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.to_bits() == r.r_or_eps.to_bits()) {
            keys.push(r.r_or_eps);
        }
    }
    keys.into_iter()
        .filter_map(|key| {
            let group: Vec<&ConvergenceRow> =
                rows.iter().filter(|r| r.r_or_eps.to_bits() == key.to_bits()).collect();
            let first = group.iter().min_by_key(|r| r.n)?;
            let last = group.iter().max_by_key(|r| r.n)?;
            (last.rel_error > first.rel_error).then(|| {
                format!(
                    "r_or_eps={key}: rel_error {:.4e} at n={} exceeds {:.4e} at n={}",
                    last.rel_error, last.n, first.rel_error, first.n
                )
            })
        })
        .collect()
}

/// `A(n, r) J_n(r)` against `I(r, σ)` for each `r` and `n`.
pub fn run_thm11(config: &ExperimentConfig) -> Result<StudyReport> {
    config.check()?;
    let model = &config.model;
    let sigma = model.sigma();
    let rs = if config.r_or_eps.is_empty() {
        vec![sigma / 2.0, sigma, 1.5 * sigma]
    } else {
        config.r_or_eps.clone()
    };
    let mut rows = Vec::new();
    for &r in &rs {
        let limit = i_constant(r, sigma, model.gamma(), Some(model))?;
        let values: Vec<Result<f64>> = config
            .n_grid
            .par_iter()
            .map(|&n| Ok(scaling_a(n, r, sigma)? * harmonic_moment_integral(model, n, r)?))
            .collect();
        for (&n, v) in config.n_grid.iter().zip(values) {
            rows.push(ConvergenceRow::new(config.study, n, r, v?, limit));
        }
    }
    Ok(StudyReport::new(config.study, rows, None))
}

/// Local-limit ratios `P(Z_n = k) Γ(σ) γ^σ n^σ / (k^{σ-1} e^{-k/(γn)})` over
/// `k ∈ [√n, n]`, returned as `(k, ratio)`.
pub fn local_limit_ratios(model: &ModelParams, n: usize) -> Result<Vec<(usize, f64)>> {
    let law = law_of_zn(model, n, n)?;
    let (sigma, g) = (model.sigma(), model.gamma());
    let nf = n as f64;
    let norm = gamma(sigma) * g.powf(sigma) * nf.powf(sigma);
    let k_min = (nf.sqrt().ceil() as usize).max(1);
    Ok((k_min..=n)
        .map(|k| {
            let kf = k as f64;
            let profile = kf.powf(sigma - 1.0) * (-kf / (g * nf)).exp();
            (k, law.pmf[k] * norm / profile)
        })
        .collect())
}

/// Maximum `|ratio - 1|` over the local-limit window for each `n`.
pub fn run_lemma23(config: &ExperimentConfig) -> Result<StudyReport> {
    config.check()?;
    let values: Vec<Result<f64>> = config
        .n_grid
        .par_iter()
        .map(|&n| {
            Ok(local_limit_ratios(&config.model, n)?
                .iter()
                .map(|(_, r)| (r - 1.0).abs())
                .fold(0.0, f64::max))
        })
        .collect();
    let mut rows = Vec::new();
    for (&n, v) in config.n_grid.iter().zip(values) {
        rows.push(ConvergenceRow::new(config.study, n, 0.0, v?, 0.0));
    }
    Ok(StudyReport::new(config.study, rows, None))
}

/// Envelope constants `c₁ = min`, `c₂ = max` of `H_n(e^{-s/n})(1+γs)^σ` over
/// `s ∈ (0, n]`.
///
/// Rows with `r_or_eps = 1` carry `c₁`, rows with `r_or_eps = 2` carry `c₂`;
/// the reference value is the constant at the largest `n`, so `rel_error`
/// measures how much the constant drifts along the grid.
pub fn run_lemma22(config: &ExperimentConfig) -> Result<StudyReport> {
    config.check()?;
    let constants: Vec<(usize, f64, f64)> = config
        .n_grid
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let grid: Vec<f64> = if config.r_or_eps.is_empty() {
                (0..=200).map(|i| nf * 10f64.powf(-6.0 + 6.0 * i as f64 / 200.0)).collect()
            } else {
                config.r_or_eps.iter().copied().filter(|s| *s > 0.0 && *s <= nf).collect()
            };
            let ratios = envelope_ratios(&config.model, n, &grid);
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(0.0, f64::max);
            (n, lo, hi)
        })
        .collect();
    let &(_, ref_lo, ref_hi) = constants.last().expect("grid is non-empty");
    let mut rows = Vec::new();
    for &(n, lo, hi) in &constants {
        rows.push(ConvergenceRow::new(config.study, n, 1.0, lo, ref_lo));
        rows.push(ConvergenceRow::new(config.study, n, 2.0, hi, ref_hi));
    }
    Ok(StudyReport::new(config.study, rows, None))
}

/// `max_x |h(x) Û(f(x)) - Û(x)| / Û(x)` over `x ∈ {0, 0.1, ..., 0.9}` with
/// `Û = n^σ H_n`.
pub fn functional_eq_residual(model: &ModelParams, n: usize) -> f64 {
    (0..10)
        .map(|i| {
            let x = i as f64 / 10.0;
            let fx = iterate_value(model.offspring(), 1, x);
            let lhs = model.immigration().pgf(x) * hn_value(model, n, fx);
            let rhs = hn_value(model, n, x);
            // n^σ cancels in the ratio.
            (lhs - rhs).abs() / rhs
        })
        .fold(0.0, f64::max)
}

pub fn run_functional_eq_u(config: &ExperimentConfig) -> Result<StudyReport> {
    config.check()?;
    let rows = config
        .n_grid
        .iter()
        .map(|&n| ConvergenceRow::new(config.study, n, 0.0, functional_eq_residual(&config.model, n), 0.0))
        .collect();
    Ok(StudyReport::new(config.study, rows, None))
}

fn law_constants(model: &ModelParams, law: &IncrementLaw) -> Result<(LimitConstants, MomentCondition)> {
    let tail = law.alpha().zip(law.tail_constant());
    let consts = LimitConstants::new(model.sigma(), model.gamma(), law.sigma0_sq(), tail)?;
    let moment = if tail.is_some() {
        MomentCondition::Tail
    } else {
        MomentCondition::Light
    };
    Ok((consts, moment))
}

/// Shared driver of the Monte Carlo studies: for each `r_or_eps` value and
/// each `n`, the normalized estimate against the classified limit.
fn run_monte_carlo(config: &ExperimentConfig, q_eps: impl Fn(f64) -> Result<Option<f64>>) -> Result<StudyReport> {
    let law = config.law.as_ref().expect("checked by config");
    let (consts, moment) = law_constants(&config.model, law)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut index = 0u64;
    for &value in &config.r_or_eps {
        let seq = config.eps_sequence(value);
        let report: RegimeReport = classify_regime(&consts, &seq, moment, q_eps(value)?)?;
        for &n in &config.n_grid {
            let eps = seq.at(n);
            let seed = split_seed(config.seed, index);
            index += 1;
            let est = estimate_large_deviation(&config.model, law, n, eps, config.paths, seed)?;
            let factor = report.scaling.factor(n, eps);
            let mut row = ConvergenceRow::new(config.study, n, value, factor * est.probability, report.limit_value);
            row.std_error = Some(factor * est.std_error);
            row.seed = Some(seed);
            rows.push(row);
            entries.push(ManifestEntry {
                n,
                eps,
                paths: config.paths,
                seed,
            });
        }
    }
    let manifest = RunManifest {
        offspring: config.model.offspring().clone(),
        immigration: config.model.immigration().clone(),
        increments: Some(law.clone()),
        root_seed: config.seed,
        shards: SHARDS,
        entries,
    };
    Ok(StudyReport::new(config.study, rows, Some(manifest)))
}

/// Large-deviation study for `ε_n → 0`.
pub fn run_thm12(config: &ExperimentConfig) -> Result<StudyReport> {
    config.check()?;
    run_monte_carlo(config, |_| Ok(None))
}

/// Partial sums of `q(ε) = Σ_{j≥1} μ_j P(S_j ≥ εj)`.
#[derive(Debug, Clone, Serialize)]
pub struct QSeries {
    pub value: f64,
    /// `(j, μ_j, P(S_j ≥ εj))` for every term used.
    pub terms: Vec<(usize, f64, f64)>,
    pub partial_sums: Vec<f64>,
    /// Whether a term fell below the cutoff before the coefficient limit.
    pub truncated: bool,
}

/// `P(S_j ≥ εj)`: exact for Gaussian increments, Monte Carlo otherwise.
fn sum_tail(law: &IncrementLaw, j: usize, eps: f64, paths: u64, seed: u64) -> Result<f64> {
    match law {
        IncrementLaw::Gaussian { sigma0_sq } => Ok(normal_sf(eps * (j as f64).sqrt() / sigma0_sq.sqrt())),
        _ => {
            let sums = sample_sums(law, j as u64, paths as usize, seed)?;
            let threshold = eps * j as f64;
            Ok(sums.iter().filter(|s| **s >= threshold).count() as f64 / paths as f64)
        }
    }
}

/// `q(ε)` with the series cut where a term drops below
/// `Q_SERIES_CUTOFF` times the partial sum; `μ_j` come in doubling blocks,
/// each on its own `mu_grid`.
pub fn q_series(
    model: &ModelParams,
    law: &IncrementLaw,
    eps: f64,
    paths: u64,
    seed: u64,
) -> Result<QSeries> {
    let mut out = QSeries {
        value: 0.0,
        terms: Vec::new(),
        partial_sums: Vec::new(),
        truncated: false,
    };
    let mut j_max = 64;
    let mut next = 1;
    loop {
        let mus = mu_coefficients(model, j_max, &mu_grid(j_max, model.gamma()))?;
        for mu in &mus[next..] {
            let p = sum_tail(law, mu.j, eps, paths, split_seed(seed, mu.j as u64))?;
            let term = mu.value * p;
            out.value += term;
            out.terms.push((mu.j, mu.value, p));
            out.partial_sums.push(out.value);
            if out.value > 0.0 && term < Q_SERIES_CUTOFF * out.value {
                out.truncated = true;
                return Ok(out);
            }
        }
        next = j_max + 1;
        if j_max >= crate::exact::MU_MAX_ORDER {
            return Ok(out);
        }
        j_max = (2 * j_max).min(crate::exact::MU_MAX_ORDER);
    }
}

/// Critical tail index (`α = 1 + σ`) or fixed-`ε` study.
pub fn run_thm13_and_cor2(config: &ExperimentConfig) -> Result<StudyReport> {
    config.check()?;
    let law = config.law.as_ref().expect("checked by config");
    match config.study {
        Study::Thm13CriticalAlpha => {
            let alpha = law.alpha().ok_or_else(|| {
                GwiError::InvalidInput("critical tail study needs a tail index".into())
            })?;
            if (alpha - 1.0 - config.model.sigma()).abs() > 1e-12 {
                return Err(GwiError::InvalidInput(format!(
                    "critical tail study needs alpha = 1 + sigma = {}, got {alpha}",
                    1.0 + config.model.sigma()
                )));
            }
            run_monte_carlo(config, |_| Ok(None))
        }
        Study::Cor2FixedEps => {
            if config.eps_kind != EpsKind::Fixed {
                return Err(GwiError::InvalidInput("fixed-eps study needs eps_kind = fixed".into()));
            }
            let (_, moment) = law_constants(&config.model, law)?;
            let light = moment == MomentCondition::Light
                || law.alpha().is_some_and(|a| a > 1.0 + config.model.sigma() + 1e-12);
            run_monte_carlo(config, |eps| {
                if light {
                    Ok(Some(q_series(&config.model, law, eps, config.paths, config.seed)?.value))
                } else {
                    Ok(None)
                }
            })
        }
        other => Err(GwiError::InvalidInput(format!(
            "run_thm13_and_cor2 does not handle {}",
            other.name()
        ))),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<StudyReport> {
    match config.study {
        Study::Thm11Harmonic => run_thm11(config),
        Study::Thm12Ldp => run_thm12(config),
        Study::Thm13CriticalAlpha | Study::Cor2FixedEps => run_thm13_and_cor2(config),
        Study::Lemma23LocalLimit => run_lemma23(config),
        Study::Lemma22Envelope => run_lemma22(config),
        Study::FunctionalEqU => run_functional_eq_u(config),
    }
}

/// `Σ_{k≥1} P(Z_n = k) Ψ(ε √k / σ₀)` from the exact law with `K = 8n`, the
/// value the Gaussian-increment estimate converges to. Returns the value and
/// a bound on the truncated part.
pub fn gaussian_probability_exact(model: &ModelParams, n: usize, eps: f64, sigma0_sq: f64) -> Result<(f64, f64)> {
    let law = law_of_zn(model, n, 8 * n.max(8))?;
    let sd = sigma0_sq.sqrt();
    let tail = normal_sf(eps * ((law.order() + 1) as f64).sqrt() / sd);
    Ok(law.mixture(|k| normal_sf(eps * (k as f64).sqrt() / sd), tail))
}

pub const CSV_HEADER: &str = "study,n,r_or_eps,scaled_value,limit_value,rel_error,std_error,seed";

pub fn write_rows_csv<W: Write>(rows: &[ConvergenceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let se = r.std_error.map(|v| format!("{v:.15e}")).unwrap_or_default();
        let seed = r.seed.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{:.15e},{:.15e},{:.15e},{},{}",
            r.study, r.n, r.r_or_eps, r.scaled_value, r.limit_value, r.rel_error, se, seed
        )?;
    }
    Ok(())
}

/// JSON manifest written next to a study's CSV.
#[derive(Debug, Clone, Serialize)]
pub struct StudyManifest<'a> {
    pub study: &'a str,
    pub offspring: &'a crate::model::DistributionSpec,
    pub immigration: &'a crate::model::DistributionSpec,
    pub increments: Option<&'a IncrementLaw>,
    pub n_grid: &'a [usize],
    pub r_or_eps: &'a [f64],
    pub eps_kind: EpsKind,
    pub eps_coefficient: f64,
    pub paths: u64,
    pub seed: u64,
    pub failed: &'a [String],
    pub monte_carlo: Option<&'a RunManifest>,
}

pub fn manifest_json(config: &ExperimentConfig, report: &StudyReport) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&StudyManifest {
        study: config.study.name(),
        offspring: config.model.offspring(),
        immigration: config.model.immigration(),
        increments: config.law.as_ref(),
        n_grid: &config.n_grid,
        r_or_eps: &config.r_or_eps,
        eps_kind: config.eps_kind,
        eps_coefficient: config.eps_coefficient,
        paths: config.paths,
        seed: config.seed,
        failed: &report.failed,
        monte_carlo: report.manifest.as_ref(),
    })
}
