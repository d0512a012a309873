//! Two-level regularized projector: `lim_{x→∞} exp(-iHt - Vt)` with
//! `H = [[0, ε], [ε, 0]]`, `V = diag(x, y)`, `E = diag(0, 1)`.

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoToyModel {
    pub epsilon: f64,
    /// Starting regulator `x`; increased tenfold until convergence.
    pub x_rate: f64,
    pub y_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoReport {
    pub k: Matrix2<C64>,
    /// `e^{-yt} E`.
    pub reference: Matrix2<C64>,
    /// Largest entrywise `|K - e^{-yt}E|`.
    pub deviation: f64,
    pub x_final: f64,
    pub iterations: usize,
}

impl ZenoToyModel {
    pub fn validate(&self) -> Result<()> {
        ensure(self.epsilon.is_finite(), "epsilon", "must be finite")?;
        ensure(self.y_rate >= 0.0, "y_rate", "must be >= 0")?;
        ensure(self.x_rate >= self.y_rate, "x_rate", "must be >= y_rate")?;
        Ok(())
    }

    /// `exp(-iHt - Vt)` at regulator `x`, in a form free of cancellation for `x ≫ y, ε`.
    pub fn propagator(&self, x: f64, t: f64) -> Matrix2<C64> {
        let (y, eps) = (self.y_rate, self.epsilon);
        let m = -(x + y) * t / 2.0;
        let u = (x - y) * t / 2.0;
        let off = C64::new(0.0, -eps * t);
        let d = C64::new(u * u - eps * eps * t * t, 0.0).sqrt();
        if d.norm() < 1e-6 {
            let em = m.exp();
            let c = em * (1.0 + d * d / 2.0);
            let s = em * (1.0 + d * d / 6.0);
            return Matrix2::new(c - s * u, s * off, s * off, c + s * u);
        }
        // m + Δ = -(xy + ε²)t² / (Δ + (x+y)t/2); q = 1 - u/Δ = -ε²t² / (Δ(Δ + u)).
        let sum = (x + y) * t / 2.0;
        let mp = -(x * y + eps * eps) * t * t / (d + sum);
        let mm = m - d;
        let ep = mp.exp();
        let em = mm.exp();
        let q = -(eps * eps * t * t) / (d * (d + u));
        let ul = (ep * q + em * (2.0 - q)) / 2.0;
        let lr = (ep * (2.0 - q) + em * q) / 2.0;
        let od = off * (ep - em) / (2.0 * d);
        Matrix2::new(ul, od, od, lr)
    }
}

/// `K̂ᵗ_y = lim_{x→∞} exp(-iHt - Vt)`, iterating `x → 10x` until the entrywise change is below `1e-10`.
///
/// At `t = 0` the limit `t → 0⁺` is returned, which is `E`.
pub fn zeno_robustness_2x2(model: &ZenoToyModel, t: f64) -> Result<ZenoReport> {
    model.validate()?;
    ensure(t >= 0.0 && t.is_finite(), "t", "must be non-negative")?;
    let one = C64::new(1.0, 0.0);
    let zero = C64::default();
    let reference = Matrix2::new(zero, zero, zero, one * (-model.y_rate * t).exp());
    let (k, x_final, iterations) = if t == 0.0 {
        (Matrix2::new(zero, zero, zero, one), f64::INFINITY, 0)
    } else {
        let mut x = model.x_rate.max(1.0);
        let mut prev = model.propagator(x, t);
        let mut it = 0;
        loop {
            it += 1;
            x *= 10.0;
            let next = model.propagator(x, t);
            let change = (next - prev).iter().map(|c| c.norm()).fold(0.0, f64::max);
            prev = next;
            if change < 1e-10 || it >= 200 {
                break;
            }
        }
        (prev, x, it)
    };
    let deviation = (k - reference).iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(ZenoReport {
        k,
        reference,
        deviation,
        x_final,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expm_series(model: &ZenoToyModel, x: f64, t: f64) -> Matrix2<C64> {
        let g = Matrix2::new(
            C64::new(-x * t, 0.0),
            C64::new(0.0, -model.epsilon * t),
            C64::new(0.0, -model.epsilon * t),
            C64::new(-model.y_rate * t, 0.0),
        );
        // Scaling and squaring with a Taylor core.
        let s = 20;
        let gs = g / C64::new(2f64.powi(s), 0.0);
        let mut term = Matrix2::identity();
        let mut sum = Matrix2::identity();
        for k in 1..30 {
            term = term * gs / C64::new(k as f64, 0.0);
            sum += term;
        }
        for _ in 0..s {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn closed_form_matches_series() {
        let m = ZenoToyModel {
            epsilon: 0.7,
            x_rate: 3.0,
            y_rate: 0.2,
        };
        for &(x, t) in &[(0.3, 1.0), (3.0, 2.0), (1.6, 0.5), (40.0, 1.0)] {
            let a = m.propagator(x, t);
            let b = expm_series(&m, x, t);
            let err = (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "x={x} t={t} err={err}");
        }
    }

    #[test]
    fn limit_is_decaying_projector() {
        let m = ZenoToyModel {
            epsilon: 1.0,
            x_rate: 1.0,
            y_rate: 0.1,
        };
        let r = zeno_robustness_2x2(&m, 10.0).unwrap();
        assert!(r.deviation < 1e-8, "{}", r.deviation);
        let norm = r.k.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!((norm - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_time_gives_projector() {
        let m = ZenoToyModel {
            epsilon: 1.0,
            x_rate: 1.0,
            y_rate: 0.0,
        };
        let r = zeno_robustness_2x2(&m, 0.0).unwrap();
        assert_eq!(r.deviation, 0.0);
    }
}
