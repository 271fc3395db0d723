//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::time::{Duration, Instant};

use gwi_core::exact::{brute_force_law, law_of_zn};
use gwi_core::experiments::{
    functional_eq_residual, gaussian_probability_exact, local_limit_ratios, manifest_json, run_experiment,
    run_thm11, run_thm12, write_rows_csv, EpsKind, ExperimentConfig, Study,
};
use gwi_core::limits::{i_below_closed_form, i_below_quadrature, upsilon, upsilon_quadrature};
use gwi_core::rng::split_seed;
use gwi_core::series::{linear_fractional_oracle, offspring_iterate};
use gwi_core::simulate::{fuk_nagaev_bound, sample_sums, IncrementLaw};
use gwi_core::{validate_condition_a, DistributionSpec, ModelParams, Result};

fn geometric() -> ModelParams {
    validate_condition_a(&DistributionSpec::geometric(0.5), &DistributionSpec::geometric(1.0 / 3.0)).unwrap()
}

fn three_point() -> ModelParams {
    validate_condition_a(
        &DistributionSpec::explicit(vec![0.25, 0.5, 0.25]),
        &DistributionSpec::explicit(vec![0.5, 0.5]),
    )
    .unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn c1_law_oracle() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for model in [geometric(), three_point()] {
        for n in 1..=5 {
            for order in [8, 32, 128, 256] {
                let a = law_of_zn(&model, n, order)?;
                let b = brute_force_law(&model, n, order)?;
                for (x, y) in a.pmf.iter().zip(&b.pmf) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |series - brute force| = {worst:.2e} (tol 1e-12)"),
    })
}

fn c2_linear_fractional() -> Result<Outcome> {
    let spec = DistributionSpec::geometric(0.5);
    let mut worst: f64 = 0.0;
    for k in 0..=50 {
        let f = offspring_iterate(&spec, k, 256)?;
        worst = worst.max((f.coeffs()[0] - k as f64 / (k as f64 + 1.0)).abs());
        worst = worst.max((f.coeffs()[0] - linear_fractional_oracle(1.0, k, 0.0)).abs());
    }
    Ok(Outcome {
        pass: worst <= 1e-9,
        detail: format!("max |f_k(0) - k/(k+1)| = {worst:.2e} (tol 1e-9)"),
    })
}

fn c3_constants() -> Result<Outcome> {
    let mut beta: f64 = 0.0;
    for r in [0.5, 1.0, 1.5] {
        for sigma in [2.0, 3.0] {
            for g in [0.5, 1.0, 2.0] {
                let q = i_below_quadrature(r, sigma, g)?;
                let c = i_below_closed_form(r, sigma, g);
                beta = beta.max(((q - c) / c).abs());
            }
        }
    }
    let formula = (upsilon(2.0, 1.0, 1.0)? - 0.75).abs();
    let mut quad: f64 = 0.0;
    for sigma in [1.5, 2.0, 3.0] {
        for g in [0.5, 1.0, 2.0] {
            quad = quad.max((upsilon_quadrature(sigma, 1.0, g)? - upsilon(sigma, 1.0, g)?).abs());
        }
    }
    Ok(Outcome {
        pass: beta <= 1e-8 && formula <= 1e-12 && quad <= 1e-8,
        detail: format!("beta grid {beta:.2e} (1e-8), upsilon formula {formula:.2e} (1e-12), upsilon quadrature {quad:.2e} (1e-8)"),
    })
}

fn c4_harmonic_trend() -> Result<Outcome> {
    let mut config = ExperimentConfig::new(Study::Thm11Harmonic, geometric(), vec![100, 200, 400, 800, 1600]);
    config.r_or_eps = vec![1.0, 2.0, 3.0];
    let report = run_thm11(&config)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [1.0, 2.0, 3.0] {
        let errs: Vec<f64> = report.rows.iter().filter(|row| row.r_or_eps == r).map(|row| row.rel_error).collect();
        let last = *errs.last().expect("grid is non-empty");
        let decreasing = strictly_decreasing(&errs);
        let within = match r {
            r if r < 2.0 => last < 0.10,
            r if r == 2.0 => last < 0.25,
            _ => true,
        };
        pass &= decreasing && within;
        let shown: Vec<String> = errs.iter().map(|e| format!("{e:.4}")).collect();
        parts.push(format!(
            "r={r}: [{}] decreasing={decreasing} final_ok={within}",
            shown.join(", ")
        ));
    }
    Ok(Outcome {
        pass,
        detail: parts.join("; "),
    })
}

fn c5_local_limit() -> Result<Outcome> {
    let model = geometric();
    let dev = |n| -> Result<f64> {
        Ok(local_limit_ratios(&model, n)?
            .iter()
            .map(|(_, r)| (r - 1.0).abs())
            .fold(0.0, f64::max))
    };
    let (d500, d1000) = (dev(500)?, dev(1000)?);
    Ok(Outcome {
        pass: d500 < 0.10 && d1000 < d500,
        detail: format!("max window deviation n=500 {d500:.4} (< 0.10), n=1000 {d1000:.4}"),
    })
}

fn c6_monte_carlo() -> Result<Outcome> {
    let model = geometric();
    let mut config = ExperimentConfig::new(Study::Thm12Ldp, model.clone(), vec![100, 400]);
    config.law = Some(IncrementLaw::Gaussian { sigma0_sq: 1.0 });
    config.r_or_eps = vec![0.4];
    config.eps_kind = EpsKind::Power;
    config.paths = 10_000_000;
    config.seed = 20_240_611;
    let report = run_thm12(&config)?;
    let target = upsilon(2.0, 1.0, 1.0)?;
    let mut parts = Vec::new();
    let mut devs = Vec::new();
    for row in &report.rows {
        let n = row.n;
        let eps = (n as f64).powf(-0.4);
        let factor = eps.powi(4) * (n as f64).powi(2);
        let (exact, _) = gaussian_probability_exact(&model, n, eps, 1.0)?;
        let se = row.std_error.unwrap_or(0.0);
        devs.push((row.scaled_value - target).abs());
        parts.push(format!(
            "n={n}: scaled {:.4} ± {se:.4} (exact {:.4}), rel dev {:.3}",
            row.scaled_value,
            factor * exact,
            row.rel_error
        ));
    }
    let last = report.rows.last().expect("two rows");
    let band = (0.30 * target).max(3.0 * last.std_error.unwrap_or(0.0));
    let within = devs[1] <= band;
    let trend = devs[1] <= devs[0];
    parts.push(format!("band at n=400 ±{band:.4} within={within} trend={trend}"));
    Ok(Outcome {
        pass: within && trend,
        detail: parts.join("; "),
    })
}

fn c7_fuk_nagaev() -> Result<Outcome> {
    let laws = [
        IncrementLaw::ShiftedPareto { alpha: 3.0, x_m: 1.0 },
        IncrementLaw::ShiftedPareto { alpha: 2.5, x_m: 1.0 },
        IncrementLaw::Gaussian { sigma0_sq: 1.0 },
    ];
    let mut checks = 0;
    let mut violations = Vec::new();
    for (l, law) in laws.iter().enumerate() {
        for k in [100u64, 400] {
            let sums = sample_sums(law, k, 1_000_000, split_seed(7_000 + l as u64, k))?;
            for eps in [0.25, 0.5] {
                let level = eps * k as f64;
                let hat = sums.iter().filter(|s| **s >= level).count() as f64 / sums.len() as f64;
                for r in [1.5, 2.0, 3.0] {
                    for t in [2.0, 3.0] {
                        let fk = fuk_nagaev_bound(law, k, eps, r, t)?;
                        for bound in [fk.polynomial, fk.exponential] {
                            checks += 1;
                            if hat > bound {
                                violations.push(format!("law {l} k={k} eps={eps} r={r} t={t}: {hat:.3e} > {bound:.3e}"));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Outcome {
        pass: violations.is_empty(),
        detail: format!("{checks} bound evaluations, {} violations {:?}", violations.len(), violations),
    })
}

fn c8_functional_equation() -> Result<Outcome> {
    let model = geometric();
    let res: Vec<f64> = [256, 512, 1024].iter().map(|&n| functional_eq_residual(&model, n)).collect();
    let shown: Vec<String> = res.iter().map(|r| format!("{r:.3e}")).collect();
    Ok(Outcome {
        pass: res[2] < 0.02 && strictly_decreasing(&res),
        detail: format!("residual at n*=256,512,1024: [{}]", shown.join(", ")),
    })
}

fn study_bytes(config: &ExperimentConfig) -> Result<Vec<u8>> {
    let report = run_experiment(config)?;
    let mut out = Vec::new();
    write_rows_csv(&report.rows, &mut out)?;
    out.extend(manifest_json(config, &report).expect("manifest serializes").into_bytes());
    Ok(out)
}

fn c9_determinism() -> Result<Outcome> {
    let mut mc = ExperimentConfig::new(Study::Thm12Ldp, three_point(), vec![50, 100]);
    mc.law = Some(IncrementLaw::ShiftedPareto { alpha: 2.5, x_m: 1.0 });
    mc.r_or_eps = vec![0.2, 0.4];
    mc.paths = 50_000;
    mc.seed = 99;
    let mut harmonic = ExperimentConfig::new(Study::Thm11Harmonic, geometric(), vec![50, 100, 200]);
    harmonic.r_or_eps = vec![1.0, 3.0];
    let mut same = true;
    for config in [&mc, &harmonic] {
        let first = study_bytes(config)?;
        std::env::set_var("GWI_THREADS", "3");
        let second = study_bytes(config)?;
        std::env::remove_var("GWI_THREADS");
        same &= first == second && !first.is_empty();
    }
    Ok(Outcome {
        pass: same,
        detail: "Monte Carlo and harmonic studies rerun with identical CSV and manifest bytes".into(),
    })
}

type Criterion = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(&str, Criterion, Option<Duration>); 9] = [
        ("1 exact law vs brute force", c1_law_oracle, Some(Duration::from_secs(5))),
        ("2 linear-fractional iterate", c2_linear_fractional, Some(Duration::from_secs(5))),
        ("3 closed-form constants", c3_constants, Some(Duration::from_secs(10))),
        ("4 harmonic moment trend", c4_harmonic_trend, Some(Duration::from_secs(600))),
        ("5 local-limit window", c5_local_limit, Some(Duration::from_secs(600))),
        ("6 gaussian large deviation MC", c6_monte_carlo, Some(Duration::from_secs(1800))),
        ("7 Fuk-Nagaev dominance", c7_fuk_nagaev, Some(Duration::from_secs(300))),
        ("8 functional equation residual", c8_functional_equation, Some(Duration::from_secs(120))),
        ("9 determinism", c9_determinism, None),
    ];
    let mut failures = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error {}: {e}", e.name())),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
