//! Product quadrature for `∬ f(t) g*(t') K(t' - t)` with `K(s) ∝ |s|^{-1/2} e^{∓iπ/4}`.
//!
//! `f` and `g` are linear on each time cell. Cell-pair weights are exact up to
//! the accuracy of a 1D adaptive rule on the remaining smooth factor.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::numerics::adaptive_gk;

/// `κ_ab(s) = ∫ b_a(u) b_b(u + s) du` over `u, u+s ∈ [0,1]`, with `b_0 = 1-u`, `b_1 = u`.
fn kappa(a: usize, b: usize, s: f64) -> f64 {
    let lo = (-s).max(0.0);
    let hi = (1.0 - s).min(1.0);
    if hi <= lo {
        return 0.0;
    }
    let basis = |k: usize, u: f64| if k == 0 { 1.0 - u } else { u };
    // Three-point Gauss–Legendre: exact for the quadratic integrand.
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let r = (0.6f64).sqrt();
    [(-r, 5.0 / 9.0), (0.0, 8.0 / 9.0), (r, 5.0 / 9.0)]
        .iter()
        .map(|&(x, w)| {
            let u = c + h * x;
            w * basis(a, u) * basis(b, u + s)
        })
        .sum::<f64>()
        * h
}

/// `∫ κ(s) |m + s|^{-1/2} e^{iw(m+s)}` split by the sign of `m + s` over `[lo, hi]`.
fn weighted(a: usize, b: usize, m: f64, w: f64, lo: f64, hi: f64) -> (C64, C64) {
    let tol = 1e-13;
    let piece = |sign: f64, r_min: f64, r_max: f64| -> C64 {
        if r_max <= r_min {
            return C64::default();
        }
        // |m + s| = r², ds = 2r dr.
        let f = |r: f64, im: bool| {
            let u = sign * r * r;
            let k = 2.0 * kappa(a, b, u - m);
            if im {
                k * (w * u).sin()
            } else {
                k * (w * u).cos()
            }
        };
        let re = adaptive_gk(|r| f(r, false), r_min, r_max, tol, tol).0;
        let im = if w == 0.0 {
            0.0
        } else {
            adaptive_gk(|r| f(r, true), r_min, r_max, tol, tol).0
        };
        C64::new(re, im)
    };
    let sing = -m;
    let mut pos = C64::default();
    let mut neg = C64::default();
    if sing > lo {
        let top = hi.min(sing);
        neg = piece(-1.0, (sing - top).max(0.0).sqrt(), (sing - lo).sqrt());
    }
    if sing < hi {
        let bot = lo.max(sing);
        pos = piece(1.0, (bot - sing).sqrt(), (hi - sing).sqrt());
    }
    (pos, neg)
}

/// Cell-pair weights `W_ab(m)` for offsets `m = c' - c ∈ [-(n-1), n-1]`.
pub struct CellWeights {
    n_cells: usize,
    table: Vec<[C64; 4]>,
}

impl CellWeights {
    pub fn new(n_cells: usize, h: f64, mass: f64) -> Self {
        Self::with_frequency(n_cells, h, mass, 0.0)
    }

    /// Kernel `K(s) e^{iωs}`, for amplitudes demodulated by `e^{iωt}`.
    pub fn with_frequency(n_cells: usize, h: f64, mass: f64, omega: f64) -> Self {
        let wh = omega * h;
        let pref = h.powf(1.5) * (mass / (2.0 * PI)).sqrt();
        // s = t' - t > 0 carries √(1/i) = e^{-iπ/4}, s < 0 carries e^{+iπ/4}.
        let ph_pos = C64::from_polar(pref, -PI / 4.0);
        let ph_neg = C64::from_polar(pref, PI / 4.0);
        let offsets: Vec<i64> = (-(n_cells as i64 - 1)..=(n_cells as i64 - 1)).collect();
        let table = offsets
            .par_iter()
            .map(|&m| {
                let mut w = [C64::default(); 4];
                for a in 0..2 {
                    for b in 0..2 {
                        let (p1, n1) = weighted(a, b, m as f64, wh, -1.0, 0.0);
                        let (p2, n2) = weighted(a, b, m as f64, wh, 0.0, 1.0);
                        w[2 * a + b] = ph_pos * (p1 + p2) + ph_neg * (n1 + n2);
                    }
                }
                w
            })
            .collect();
        Self { n_cells, table }
    }

    pub fn get(&self, m: i64) -> &[C64; 4] {
        &self.table[(m + self.n_cells as i64 - 1) as usize]
    }

    /// `∬ f(t) g*(t') K(t'-t)` with `t` over the cells in `cells_f` and `t'` over `cells_g`;
    /// `f`, `g` are nodal values (length `n_cells + 1`).
    pub fn bilinear(&self, f: &[C64], cells_f: &[usize], g: &[C64], cells_g: &[usize]) -> C64 {
        cells_f
            .par_iter()
            .map(|&c| {
                let fa = [f[c], f[c + 1]];
                let mut acc = C64::default();
                for &cp in cells_g {
                    let w = self.get(cp as i64 - c as i64);
                    let gb = [g[cp].conj(), g[cp + 1].conj()];
                    acc += fa[0] * (w[0] * gb[0] + w[1] * gb[1]) + fa[1] * (w[2] * gb[0] + w[3] * gb[1]);
                }
                acc
            })
            .collect::<Vec<C64>>()
            .iter()
            .sum()
    }
}
