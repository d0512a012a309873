//! Special functions not covered by `libm`.

use std::f64::consts::PI;

pub use libm::{erf, erfc, tgamma};

const GAMMA_3_4: f64 = 1.225_416_702_465_177_6;
const GAMMA_5_4: f64 = 0.906_402_477_055_477_1;

/// Exponentially scaled modified Bessel function `e^{-z} I_ν(z)` for `ν = ±1/4`, `z ≥ 0`.
pub fn bessel_i_quarter_scaled(nu_positive: bool, z: f64) -> f64 {
    assert!(z >= 0.0);
    let nu = if nu_positive { 0.25 } else { -0.25 };
    if z > 30.0 {
        return asymptotic_scaled(nu, z);
    }
    if z == 0.0 {
        return if nu_positive { 0.0 } else { f64::INFINITY };
    }
    let g = if nu_positive { GAMMA_5_4 } else { GAMMA_3_4 };
    let half = 0.5 * z;
    let (s, _) = power_series(nu, half * half, g);
    s * half.powf(nu) * (-z).exp()
}

fn power_series(nu: f64, q: f64, gamma_nu1: f64) -> (f64, usize) {
    let mut term = 1.0 / gamma_nu1;
    let mut sum = term;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= q / (k as f64 * (k as f64 + nu));
        sum += term;
        if term < 1e-18 * sum || k > 500 {
            return (sum, k);
        }
    }
}

fn asymptotic_scaled(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum / (2.0 * PI * z).sqrt()
}

/// `J(c) = ∫₀^∞ e^{-y²/2}[cos(cy) + sin(cy)]/√y dy` in closed form:
/// `(π√c/2)·e^{-z}[I_{-1/4}(z) + I_{1/4}(z)]` with `z = c²/4`.
pub fn cos_sin_gauss_integral(c: f64) -> f64 {
    assert!(c >= 0.0);
    let z = 0.25 * c * c;
    if z > 30.0 {
        let s = bessel_i_quarter_scaled(false, z) + bessel_i_quarter_scaled(true, z);
        return 0.5 * PI * c.sqrt() * s;
    }
    // √c (z/2)^ν = 8^{-ν} c^{2ν + 1/2}, kept finite at c = 0.
    let q = z * z / 4.0;
    let (sm, _) = power_series(-0.25, q, GAMMA_3_4);
    let (sp, _) = power_series(0.25, q, GAMMA_5_4);
    let minus = sm * 8f64.powf(0.25);
    let plus = sp * 8f64.powf(-0.25) * c;
    0.5 * PI * (minus + plus) * (-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_constants() {
        assert!((tgamma(0.75) - GAMMA_3_4).abs() < 1e-15);
        assert!((tgamma(1.25) - GAMMA_5_4).abs() < 1e-15);
    }

    #[test]
    fn series_and_asymptotic_meet() {
        for &nu in &[true, false] {
            let nu_f = if nu { 0.25 } else { -0.25 };
            let g = tgamma(nu_f + 1.0);
            let z: f64 = 30.0;
            let (s, _) = power_series(nu_f, z * z / 4.0, g);
            let series = s * (z / 2.0).powf(nu_f) * (-z).exp();
            let asym = asymptotic_scaled(nu_f, z);
            assert!((series - asym).abs() / asym < 1e-13, "{series} {asym}");
        }
    }

    #[test]
    fn integral_at_zero() {
        let exact = tgamma(0.25) / 2f64.powf(0.75);
        assert!((cos_sin_gauss_integral(0.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn integral_large_c_limit() {
        let c: f64 = 400.0;
        let approx = (2.0 * PI / c).sqrt();
        assert!((cos_sin_gauss_integral(c) - approx).abs() / approx < 1e-4);
    }
}
