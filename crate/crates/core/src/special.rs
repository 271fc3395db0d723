//! Special functions used by the limit constants.
//!
//! Γ and erfc come from `libm` (a port of the musl implementations; `tgamma`
//! is a Lanczos approximation with relative error around 1e-15 on the
//! positive axis).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Upper tail of the standard normal, `P(N >= x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-15);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        let half = PI.sqrt();
        assert!((gamma(0.5) - half).abs() / half < 1e-14);
        // Γ(2.5) = (3/4)√π
        assert!((gamma(2.5) - 0.75 * half).abs() / (0.75 * half) < 1e-14);
        assert!((ln_gamma(10.0) - 362880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn normal_tail() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-16);
        // P(N >= 1.959963984540054) = 0.025
        assert!((normal_sf(1.959963984540054) - 0.025).abs() < 1e-15);
        assert!((normal_sf(-1.0) + normal_sf(1.0) - 1.0).abs() < 1e-15);
        // far tail keeps relative accuracy
        let x: f64 = 10.0;
        let mills = normal_pdf(x) / x * (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4));
        assert!((normal_sf(x) - mills).abs() / mills < 1e-3);
    }
}
