use gwi_core::exact::{
    brute_force_law, harmonic_moment_integral, harmonic_moment_sum, law_of_zn, mu_coefficient,
};
use gwi_core::experiments::{run_lemma22, ExperimentConfig, Study};
use gwi_core::limits::i_constant;
use gwi_core::series::{hn_value, iterate_pgf, linear_fractional_oracle, offspring_iterate};
use gwi_core::{validate_condition_a, DistributionSpec, ModelParams};

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

#[test]
fn series_law_matches_direct_convolution() {
    for model in [geometric(), three_point()] {
        for n in 1..=5 {
            for order in [16, 64, 256] {
                let a = law_of_zn(&model, n, order).unwrap();
                let b = brute_force_law(&model, n, order).unwrap();
                assert_eq!(a.pmf.len(), b.pmf.len());
                for (k, (x, y)) in a.pmf.iter().zip(&b.pmf).enumerate() {
                    assert!((x - y).abs() <= 1e-12, "n={n} K={order} k={k}: {x} vs {y}");
                }
            }
        }
    }
}

#[test]
fn law_invariants() {
    for model in [geometric(), three_point()] {
        for n in [1, 7, 40] {
            let law = law_of_zn(&model, n, 512).unwrap();
            assert!((law.survival - (1.0 - law.pmf[0])).abs() <= 1e-12);
            let total: f64 = law.pmf.iter().sum();
            assert!((total + law.tail_mass - 1.0).abs() <= 1e-9);
            assert!(law.pmf.iter().all(|p| *p >= 0.0));
        }
    }
}

#[test]
fn harmonic_first_generation() {
    // Σ (1/3)(2/3)^k / k = ln 3 / 3, divided by the survival 2/3.
    let model = geometric();
    let want = 3f64.ln() / 2.0;
    let law = law_of_zn(&model, 1, 2048).unwrap();
    let sum = harmonic_moment_sum(&law, 1.0).unwrap();
    assert!((sum.value - want).abs() < 1e-12, "{}", sum.value);
    let integral = harmonic_moment_integral(&model, 1, 1.0).unwrap();
    assert!((integral - want).abs() < 1e-9, "{integral}");
}

#[test]
fn harmonic_routes_agree() {
    for model in [geometric(), three_point()] {
        for n in [1, 10, 100] {
            let law = law_of_zn(&model, n, 2048).unwrap();
            for r in [0.5, 1.0, 2.0, 3.0] {
                let sum = harmonic_moment_sum(&law, r).unwrap();
                let integral = harmonic_moment_integral(&model, n, r).unwrap();
                let tol = sum.remainder.max(1e-8);
                assert!(
                    (sum.value - integral).abs() <= tol,
                    "n={n} r={r}: sum {} integral {integral}",
                    sum.value
                );
            }
        }
    }
    let law = law_of_zn(&geometric(), 100, 2048).unwrap();
    let sum = harmonic_moment_sum(&law, 1.0).unwrap().value;
    let integral = harmonic_moment_integral(&geometric(), 100, 1.0).unwrap();
    assert!((sum - integral).abs() < 1e-6);
}

#[test]
fn harmonic_above_sigma_near_limit() {
    let model = geometric();
    let scaled = 500f64.powi(2) * harmonic_moment_integral(&model, 500, 3.0).unwrap();
    let limit = i_constant(3.0, 2.0, 1.0, Some(&model)).unwrap();
    assert!((scaled - limit).abs() / limit < 0.10, "{scaled} vs {limit}");
}

#[test]
fn mu_zero_extrapolation() {
    let model = geometric();
    let grid = [128, 256, 512, 1024];
    let mu = mu_coefficient(&model, 0, &grid).unwrap();
    assert!(mu.value > 0.0 && mu.value.is_finite());
    for w in mu.sequence.windows(2) {
        assert!((w[1] - w[0]).abs() / w[1] < 0.02, "{:?}", mu.sequence);
    }
    // The closed form H_n(0) = 2/((n+1)(n+2)) gives μ₀ = 2.
    assert!((mu.value - 2.0).abs() / 2.0 < 1e-3, "{}", mu.value);
    let direct = 1024f64.powi(2) * hn_value(&model, 1024, 0.0);
    assert!((direct - mu.value).abs() / mu.value < 0.03);
    assert!(mu_coefficient(&model, 5000, &grid).is_err());
}

#[test]
fn inverse_k_bound_transfers_between_models() {
    let fit = |model: &ModelParams| -> f64 {
        [10, 50, 200]
            .iter()
            .map(|&n| law_of_zn(model, n, 8 * n).unwrap().max_weighted_mass())
            .fold(0.0, f64::max)
    };
    // Both models share the asymptotic peak σ^σ e^{-σ}/Γ(σ), so C carries slack.
    let c = 1.1 * fit(&geometric());
    assert!(c.is_finite() && c > 0.0);
    let other = fit(&three_point());
    assert!(other <= c, "k P(Z_n = k) reaches {other} > C = {c}");
}

#[test]
fn envelope_constants_are_stable() {
    for model in [geometric(), three_point()] {
        let config = ExperimentConfig::new(Study::Lemma22Envelope, model, vec![50, 200, 800]);
        let report = run_lemma22(&config).unwrap();
        for which in [1.0, 2.0] {
            let drift: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.r_or_eps == which)
                .map(|r| {
                    assert!(r.scaled_value > 0.0 && r.scaled_value.is_finite());
                    r.rel_error
                })
                .collect();
            assert_eq!(drift.len(), 3);
            assert!(drift[1] <= drift[0] && drift[1] < 0.05, "{drift:?}");
        }
    }
}

#[test]
fn iterates_match_linear_fractional_closed_form() {
    for gamma in [1.0, 0.25, 2.0] {
        let spec = if gamma == 1.0 {
            DistributionSpec::geometric(0.5)
        } else {
            DistributionSpec::linear_fractional(gamma)
        };
        for k in 0..=50 {
            let f = offspring_iterate(&spec, k, 256).unwrap();
            for s in [0.0, 0.3, 0.7] {
                let got = f.evaluate(s);
                let want = linear_fractional_oracle(gamma, k, s);
                assert!((got - want).abs() <= 1e-9, "gamma={gamma} k={k} s={s}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn extinction_complement_trend() {
    let poisson = validate_condition_a(&DistributionSpec::poisson(1.0), &DistributionSpec::poisson(1.0)).unwrap();
    for model in [geometric(), three_point(), poisson] {
        let g = model.gamma();
        let dev: Vec<f64> = (10..=200)
            .step_by(10)
            .map(|k| {
                let f = offspring_iterate(model.offspring(), k, 1).unwrap();
                (k as f64 * g * (1.0 - f.coeffs()[0]) - 1.0).abs()
            })
            .collect();
        for w in dev.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{dev:?}");
        }
        assert!(dev.last().unwrap() < &0.05);
    }
}

#[test]
fn product_is_monotone_in_n() {
    let model = three_point();
    let trace: Vec<Vec<f64>> = (0..30)
        .map(|n| {
            let h = iterate_pgf(&model, n, 64).unwrap().h_n;
            (0..10).map(|i| h.evaluate(i as f64 / 10.0)).collect()
        })
        .collect();
    for w in trace.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            assert!(b <= &(a + 1e-15));
        }
    }
}
