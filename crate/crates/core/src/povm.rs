//! Arrival-time POVMs for the free particle: the smeared-time construction, the
//! Kijowski distribution, its time-extended counterpart, and sequential position
//! measurements.
//!
//! Momentum amplitudes here are unitary, `∫|ψ(p)|² dp = 1`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{ensure, invalid, Result, ToaError};
use crate::histories::DecoherenceDensity;
use crate::numerics::special::{cos_sin_gauss_integral, erfc, tgamma};
use crate::numerics::wave::require_left_support;
use crate::numerics::{adaptive_gk, integrate, GaussianSpec, Representation, TimeGrid, WavePacket};
use crate::toa::ToaDistribution;

/// Normalization applied to the smeared bi-density so that the large-`ετ`
/// density integrates to one for one-sided states.
pub const POVM_NORMALIZATION: f64 = 0.5;

/// Momentum amplitudes on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSamples {
    pub p: Vec<f64>,
    pub amp: Vec<C64>,
    pub dp: f64,
    pub mass: f64,
}

impl MomentumSamples {
    /// Samples `f` on `n` points of `[p_lo, p_hi]` and normalizes.
    pub fn from_fn(p_lo: f64, p_hi: f64, n: usize, mass: f64, f: impl Fn(f64) -> C64) -> Result<Self> {
        ensure(n >= 8, "n_p", "must be >= 8")?;
        ensure(p_hi > p_lo, "p range", "must be non-empty")?;
        ensure(mass > 0.0, "mass", "must be positive")?;
        let dp = (p_hi - p_lo) / (n - 1) as f64;
        let p: Vec<f64> = (0..n).map(|k| p_lo + k as f64 * dp).collect();
        let amp = p.iter().map(|&q| f(q)).collect();
        let mut s = Self { p, amp, dp, mass };
        s.normalize()?;
        Ok(s)
    }

    /// Gaussian state on `p̄ ± 8/a`.
    pub fn gaussian(spec: &GaussianSpec, mass: f64, n_p: usize) -> Result<Self> {
        spec.validate()?;
        let half = 8.0 / spec.a();
        let p0 = spec.mean_momentum;
        Self::from_fn(p0 - half, p0 + half, n_p, mass, |p| spec.momentum_amplitude(p))
    }

    /// Superposition `Σ cᵢψᵢ` of Gaussians on the union of their `p̄ᵢ ± 8/aᵢ` ranges.
    pub fn gaussian_superposition(parts: &[(C64, GaussianSpec)], mass: f64, n_p: usize) -> Result<Self> {
        ensure(!parts.is_empty(), "parts", "must be non-empty")?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (_, s) in parts {
            s.validate()?;
            lo = lo.min(s.mean_momentum - 8.0 / s.a());
            hi = hi.max(s.mean_momentum + 8.0 / s.a());
        }
        Self::from_fn(lo, hi, n_p, mass, |p| parts.iter().map(|(c, s)| c * s.momentum_amplitude(p)).sum())
    }

    /// Momentum amplitudes of a wave packet, restricted to where `|ψ(p)|²` exceeds
    /// `1e-16` of its peak. The native grid is thinned only as far as the position
    /// period `2π/dp` keeps periodic images from reaching `x = 0` before `t_max`.
    pub fn from_wave_packet(w: &WavePacket, n_max: usize, t_max: f64) -> Result<Self> {
        ensure(n_max >= 8, "n_max", "must be >= 8")?;
        let grid = *w.grid();
        let pos = w.in_position();
        let xpeak = pos.amplitudes().iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        let xs: Vec<f64> = (0..grid.len())
            .filter(|&j| pos.amplitudes()[j].norm_sqr() > 1e-16 * xpeak)
            .map(|j| grid.x(j))
            .collect();
        let m = w.in_momentum();
        let mg = m.momentum_grid();
        let a = m.amplitudes();
        let peak = a.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        ensure(peak > 0.0 && !xs.is_empty(), "state", "is zero")?;
        let keep = |c: &C64| c.norm_sqr() > 1e-16 * peak;
        let lo = a.iter().position(keep).unwrap_or(0).saturating_sub(4);
        let hi = (a.len() - 1 - a.iter().rev().position(keep).unwrap_or(0) + 4).min(a.len() - 1);
        let (p_lo, p_hi) = (mg.p(lo), mg.p(hi));
        let (x_lo, x_hi) = (xs[0], xs[xs.len() - 1]);
        let travel = t_max / w.mass();
        let period = (x_hi + p_hi.max(0.0) * travel).max(-x_lo + (-p_lo).max(0.0) * travel) * 1.1;
        let native = 2.0 * PI / mg.dp();
        let stride = ((native / period).floor() as usize).max(1);
        let count = (hi - lo) / stride + 1;
        if count > n_max {
            return Err(invalid(
                "state",
                format!("needs {count} momentum samples without aliasing, above the limit {n_max}"),
            ));
        }
        let s = 1.0 / (2.0 * PI).sqrt();
        let idx: Vec<usize> = (lo..=hi).step_by(stride).collect();
        let mut out = Self {
            p: idx.iter().map(|&k| mg.p(k)).collect(),
            amp: idx.iter().map(|&k| a[k] * s).collect(),
            dp: mg.dp() * stride as f64,
            mass: w.mass(),
        };
        out.normalize()?;
        Ok(out)
    }

    fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sq();
        ensure(n > 0.0 && n.is_finite(), "state", "cannot be normalized")?;
        let s = 1.0 / n.sqrt();
        self.amp.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dp
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    fn energy(&self, k: usize) -> f64 {
        self.p[k] * self.p[k] / (2.0 * self.mass)
    }

    /// `ψ(p) → ψ(-p)`.
    pub fn mirrored(&self) -> Self {
        Self {
            p: self.p.iter().rev().map(|p| -p).collect(),
            amp: self.amp.iter().rev().copied().collect(),
            dp: self.dp,
            mass: self.mass,
        }
    }

    /// `ψ(p) → conj ψ(-p)`.
    pub fn time_reversed(&self) -> Self {
        let mut m = self.mirrored();
        m.amp.iter_mut().for_each(|a| *a = a.conj());
        m
    }

    /// `∫ conj ψ(-p) ψ(p) dp` by interpolating the mirrored samples.
    pub fn mirror_overlap(&self) -> C64 {
        let lo = self.p[0];
        let n = self.len();
        let at = |q: f64| -> C64 {
            let x = (q - lo) / self.dp;
            if x < 0.0 || x > (n - 1) as f64 {
                return C64::default();
            }
            let i = (x.floor() as usize).min(n - 2);
            let f = x - i as f64;
            self.amp[i] * (1.0 - f) + self.amp[i + 1] * f
        };
        let v: Vec<C64> = self.p.iter().zip(&self.amp).map(|(&p, a)| at(-p).conj() * a).collect();
        integrate(&v, self.dp)
    }
}

/// The resolution kernel `r(ε)` for temporal resolution `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelR {
    pub tau: f64,
    pub mass: f64,
}

impl KernelR {
    pub fn new(tau: f64, mass: f64) -> Result<Self> {
        ensure(tau > 0.0 && tau.is_finite(), "tau", "must be positive")?;
        ensure(mass > 0.0 && mass.is_finite(), "mass", "must be positive")?;
        Ok(Self { tau, mass })
    }

    fn prefactor(&self) -> f64 {
        (2.0 * self.mass * self.tau / PI).sqrt()
    }

    /// Modified-Bessel closed form.
    pub fn closed_form(&self, eps: f64) -> f64 {
        self.prefactor() * cos_sin_gauss_integral(2.0 * eps.max(0.0) * self.tau)
    }

    /// Adaptive quadrature of `2∫₀^∞ e^{-s⁴/2}[cos(cs²) + sin(cs²)] ds`, `c = 2ετ`.
    pub fn quadrature(&self, eps: f64) -> f64 {
        let c = 2.0 * eps.max(0.0) * self.tau;
        // e^{-s⁴/2} < 1e-22 beyond s = 3.2.
        let f = |s: f64| {
            let u = c * s * s;
            2.0 * (-0.5 * s.powi(4)).exp() * (u.cos() + u.sin())
        };
        // Split at zeros of the oscillation so each panel holds few periods.
        let n_panels = ((c * 3.2 * 3.2) / PI).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..=n_panels)
            .map(|k| (k as f64 * PI / c.max(1e-300)).sqrt())
            .filter(|&s| s < 3.2)
            .collect();
        if edges.is_empty() || edges[0] != 0.0 {
            edges.insert(0, 0.0);
        }
        edges.push(3.2);
        let v: f64 = edges
            .windows(2)
            .map(|w| adaptive_gk(f, w[0], w[1], 1e-15, 1e-13).0)
            .sum();
        self.prefactor() * v
    }

    /// `ετ → 0`: `Γ(1/4)/2^{3/4}·√(2Mτ/π)`.
    pub fn small_limit(&self) -> f64 {
        tgamma(0.25) / 2f64.powf(0.75) * self.prefactor()
    }

    /// `ετ → ∞`: `√(2M/ε)`.
    pub fn large_limit(&self, eps: f64) -> f64 {
        (2.0 * self.mass / eps).sqrt()
    }
}

/// `r(ε)` by adaptive quadrature.
pub fn kernel_r(eps: f64, tau: f64, mass: f64) -> Result<f64> {
    ensure(eps >= 0.0, "epsilon", "must be >= 0")?;
    Ok(KernelR::new(tau, mass)?.quadrature(eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmearingKind {
    /// `(1/2T) Σ_{|n| ≤ [T/τ]} e^{inπ(s-s')/T}`.
    FourierSum,
    /// `e^{-(s-s')²/2τ²}/(√(2π)τ)`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmearingFamily {
    pub tau: f64,
    pub t_max: f64,
    pub kind: SmearingKind,
}

impl SmearingFamily {
    pub fn new(tau: f64, t_max: f64, kind: SmearingKind) -> Result<Self> {
        ensure(tau > 0.0, "tau", "must be positive")?;
        ensure(t_max > tau, "t_max", "must exceed tau")?;
        Ok(Self { tau, t_max, kind })
    }

    pub fn value(&self, s: f64, sp: f64) -> f64 {
        let d = s - sp;
        match self.kind {
            SmearingKind::Gaussian => (-d * d / (2.0 * self.tau * self.tau)).exp() / ((2.0 * PI).sqrt() * self.tau),
            SmearingKind::FourierSum => {
                let n = (self.t_max / self.tau).floor() as i64;
                let th = PI * d / self.t_max;
                (1.0 + 2.0 * (1..=n).map(|k| (k as f64 * th).cos()).sum::<f64>()) / (2.0 * self.t_max)
            }
        }
    }

    /// `√f`, defined where `f ≥ 0`.
    pub fn sqrt_value(&self, s: f64, sp: f64) -> Result<f64> {
        let v = self.value(s, sp);
        if v < 0.0 {
            if v > -1e-14 {
                return Ok(0.0);
            }
            return Err(ToaError::Regime(format!("smearing function negative ({v:e}) at {s}, {sp}")));
        }
        Ok(v.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PovmRegime {
    /// Kernel `r((E_p + E_p')/2)` at finite `τ`, with the smearing centre treated as a delta.
    Full,
    /// `Full` times `exp(-(E_p - E_p')²τ²/2)`, the exact Gaussian smearing of the bi-density.
    Smeared,
    /// `ετ ≫ 1` limit, independent of `τ`.
    LargeEtau,
}

impl PovmRegime {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Smeared => "smeared",
            Self::LargeEtau => "large_etau",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToaPovm {
    pub times: TimeGrid,
    pub density: Vec<f64>,
    pub no_detect: f64,
    pub tau: f64,
    pub regime: PovmRegime,
    /// `min ε τ` over the momentum support, with `ε = E_p`.
    pub min_etau: f64,
    pub warnings: Vec<String>,
    /// Number of retained eigenpairs of the momentum kernel.
    pub rank: usize,
}

impl ToaPovm {
    pub fn detected(&self) -> f64 {
        integrate(&self.density, self.times.dt())
    }

    pub fn distribution(&self) -> Result<ToaDistribution> {
        ToaDistribution::new(self.times, self.density.clone(), self.no_detect)
    }
}

/// Real symmetric momentum kernel `G(p, q)` with `p(t) = Σ c_k c_l* G(p_k, p_l)`,
/// `c_k = ψ_k e^{-iE_k t} dp`, stored as `Σ λ u(p_k) u(p_l)`.
struct MomentumKernel {
    /// Eigenvalues with `|λ| > 1e-14 max|λ|` and eigenfunctions at the sample momenta.
    pairs: Vec<(f64, Vec<f64>)>,
}

const PANEL_ORDER: usize = 16;

impl MomentumKernel {
    /// Direct eigendecomposition when the samples are few; otherwise a Nyström
    /// factorization on Gauss–Legendre panels no wider than `max_panel`.
    fn build(p: &[f64], g: impl Fn(f64, f64) -> f64 + Sync, max_panel: f64) -> Self {
        let (lo, hi) = (p[0], p[p.len() - 1]);
        let mut breaks = vec![lo];
        if lo < 0.0 && hi > 0.0 {
            breaks.push(0.0);
        }
        breaks.push(hi);
        let mut nodes = vec![];
        let mut weights = vec![];
        let (gx, gw) = crate::numerics::gauss_legendre(PANEL_ORDER);
        let mut panels = vec![];
        for w in breaks.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            // The large-ετ kernel is conical at p = q = 0: grade geometrically towards it.
            let tiny = 1e-8 * (hi - lo);
            while a == 0.0 && b - a > tiny && b - a > 0.15 * (w[1] - w[0]) * 1e-3 {
                let m = a + 0.15 * (b - a);
                panels.push((m, b));
                b = m;
            }
            while b == 0.0 && b - a > tiny && b - a > 0.15 * (w[1] - w[0]) * 1e-3 {
                let m = b - 0.15 * (b - a);
                panels.push((a, m));
                a = m;
            }
            let k = ((b - a) / max_panel).ceil().max(1.0) as usize;
            let h = (b - a) / k as f64;
            panels.extend((0..k).map(|j| (a + j as f64 * h, a + (j + 1) as f64 * h)));
        }
        for (a, b) in panels {
            let (c, h) = (0.5 * (a + b), b - a);
            for (x, wt) in gx.iter().zip(&gw) {
                nodes.push(c + 0.5 * h * x);
                weights.push(0.5 * h * wt);
            }
        }
        if 2 * nodes.len() >= p.len() {
            Self::direct(p, g)
        } else {
            Self::nystrom(p, &nodes, &weights, g)
        }
    }

    fn symmetric(n: usize, g: impl Fn(usize, usize) -> f64 + Sync) -> DMatrix<f64> {
        let entries: Vec<(usize, usize, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|k| {
                let g = &g;
                (k..n).map(move |l| (k, l, g(k, l)))
            })
            .collect();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (k, l, v) in entries {
            m[(k, l)] = v;
            m[(l, k)] = v;
        }
        m
    }

    fn leading(m: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
        let eig = SymmetricEigen::new(m);
        let lmax = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut pairs: Vec<(f64, Vec<f64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 1e-14 * lmax)
            .map(|(i, &v)| (v, eig.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        pairs.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
        pairs
    }

    fn direct(p: &[f64], g: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let m = Self::symmetric(p.len(), |k, l| g(p[k], p[l]));
        Self { pairs: Self::leading(m) }
    }

    /// `G(p, q) ≈ Σ λ u(p) u(q)` with `u(p) = λ⁻¹ Σ_j G(p, q_j) w_j u(q_j)`.
    fn nystrom(p: &[f64], nodes: &[f64], weights: &[f64], g: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let m = Self::symmetric(nodes.len(), |k, l| sw[k] * g(nodes[k], nodes[l]) * sw[l]);
        let coarse = Self::leading(m);
        let cross: Vec<Vec<f64>> = p
            .par_iter()
            .map(|&x| nodes.iter().map(|&q| g(x, q)).collect())
            .collect();
        let pairs = coarse
            .into_iter()
            .map(|(l, v)| {
                // Weighted eigenvector values are √w u(q_j).
                let wu: Vec<f64> = v.iter().zip(&sw).map(|(v, s)| v * s).collect();
                let u = cross
                    .iter()
                    .map(|row| row.iter().zip(&wu).map(|(a, b)| a * b).sum::<f64>() / l)
                    .collect();
                (l, u)
            })
            .collect();
        Self { pairs }
    }

    fn eval(&self, c: &[C64]) -> f64 {
        self.pairs
            .iter()
            .map(|(l, u)| {
                let s: C64 = u.iter().zip(c).map(|(x, y)| y * x).sum();
                l * s.norm_sqr()
            })
            .sum()
    }
}

fn coefficients(s: &MomentumSamples, t: f64) -> Vec<C64> {
    (0..s.len())
        .map(|k| s.amp[k] * C64::from_polar(s.dp, -s.energy(k) * t))
        .collect()
}

fn large_etau_entry(p: f64, q: f64, mass: f64) -> f64 {
    let rms = (0.5 * (p * p + q * q)).sqrt();
    if rms == 0.0 {
        return 0.0;
    }
    p * q / (mass * rms)
}

fn kernel_value(p: f64, q: f64, r: &KernelR, regime: PovmRegime) -> f64 {
    let m = r.mass;
    let (ea, eb) = (p * p / (2.0 * m), q * q / (2.0 * m));
    match regime {
        PovmRegime::LargeEtau => large_etau_entry(p, q, m) / PI,
        PovmRegime::Full | PovmRegime::Smeared => {
            let g = p * q * r.closed_form(0.5 * (ea + eb)) / (2.0 * PI * m * m);
            if regime == PovmRegime::Smeared {
                g * (-0.5 * ((ea - eb) * r.tau).powi(2)).exp()
            } else {
                g
            }
        }
    }
}

/// Widest Gauss–Legendre panel that resolves the kernel in `p`.
fn panel_width(s: &MomentumSamples, tau: f64, regime: PovmRegime) -> f64 {
    let range = s.p[s.len() - 1] - s.p[0];
    let mut w = range / 8.0;
    if regime == PovmRegime::Smeared {
        // exp(-(E-E')²τ²/2) has width M/(|p|τ) in p - p'.
        let p_abs = s.p.iter().map(|p| p.abs()).fold(0.0, f64::max);
        w = w.min(3.0 * s.mass / (p_abs * tau));
    }
    w
}

/// Regime of the large-`ετ` kernel: momenta must satisfy `|p| ≥ 5√(2M/τ)`.
fn regime_warning(s: &MomentumSamples, tau: f64) -> Option<String> {
    let bound = 5.0 * (2.0 * s.mass / tau).sqrt();
    let low: f64 = s
        .p
        .iter()
        .zip(&s.amp)
        .filter(|(p, _)| p.abs() < bound)
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        * s.dp;
    (low > 1e-6).then(|| format!("{low:.2e} of the momentum mass lies below |p| = {bound:.3} where the large-etau form is invalid"))
}

/// Smeared-time arrival density on `[0, T]` for a left-supported state.
pub fn toa_povm_density(
    psi: &WavePacket,
    tau: f64,
    t_max: f64,
    n_steps: usize,
    regime: PovmRegime,
    n_p_max: usize,
) -> Result<ToaPovm> {
    require_left_support(psi, 1e-6)?;
    let s = MomentumSamples::from_wave_packet(psi, n_p_max, t_max)?;
    povm_from_samples(&s, tau, t_max, n_steps, regime)
}

/// As [`toa_povm_density`] for momentum samples whose position support the caller
/// has checked.
pub fn povm_from_samples(
    s: &MomentumSamples,
    tau: f64,
    t_max: f64,
    n_steps: usize,
    regime: PovmRegime,
) -> Result<ToaPovm> {
    ensure(tau > 0.0, "tau", "must be positive")?;
    ensure(tau < t_max / 20.0, "tau", format!("must be below T/20 = {}", t_max / 20.0))?;
    let times = TimeGrid::new(t_max, n_steps)?;
    let mass = s.mass;
    let r = KernelR::new(tau, mass)?;
    let kernel = MomentumKernel::build(
        &s.p,
        |p, q| POVM_NORMALIZATION * kernel_value(p, q, &r, regime),
        panel_width(s, tau, regime),
    );
    let density: Vec<f64> = times
        .ts()
        .par_iter()
        .map(|&t| kernel.eval(&coefficients(s, t)))
        .collect();
    let detected = integrate(&density, times.dt());
    let min_etau = (0..s.len())
        .filter(|&k| s.amp[k].norm_sqr() * s.dp > 1e-12)
        .map(|k| s.energy(k) * tau)
        .fold(f64::INFINITY, f64::min);
    let mut warnings = vec![];
    let p_abs = (0..s.len())
        .filter(|&k| s.amp[k].norm_sqr() * s.dp > 1e-12)
        .map(|k| s.p[k].abs())
        .fold(0.0, f64::max);
    if 2.0 * PI / s.dp < p_abs * t_max / mass {
        let w = format!("momentum spacing {:.3e} aliases positions within the flight range", s.dp);
        log::warn!("{w}");
        warnings.push(w);
    }
    if regime == PovmRegime::LargeEtau {
        if let Some(w) = regime_warning(s, tau) {
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    Ok(ToaPovm {
        times,
        density,
        no_detect: 1.0 - detected,
        tau,
        regime,
        min_etau,
        warnings,
        rank: kernel.pairs.len(),
    })
}

/// Direct double sum of the POVM density at one time, complex before truncation.
pub fn povm_density_direct(s: &MomentumSamples, tau: f64, t: f64, regime: PovmRegime) -> Result<C64> {
    let r = KernelR::new(tau, s.mass)?;
    let c = coefficients(s, t);
    let v: C64 = (0..s.len())
        .into_par_iter()
        .map(|a| {
            (0..s.len())
                .map(|b| c[a] * c[b].conj() * kernel_value(s.p[a], s.p[b], &r, regime))
                .sum::<C64>()
        })
        .collect::<Vec<C64>>()
        .iter()
        .sum();
    Ok(v * POVM_NORMALIZATION)
}

/// `p^τ(t) = κ ∬ √f(t,s) √f(t,s') ρ(s,s')` straight from a bi-density.
pub fn smeared_density_from_histories(d: &DecoherenceDensity, family: &SmearingFamily, t: f64) -> Result<f64> {
    let w: Vec<f64> = d
        .times
        .ts()
        .iter()
        .map(|&s| family.sqrt_value(t, s))
        .collect::<Result<_>>()?;
    Ok(POVM_NORMALIZATION * d.weighted_functional(&w)?.re)
}

/// Kijowski density at each time.
pub fn kijowski_density(s: &MomentumSamples, times: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = s.p.iter().map(|p| (p.abs() / (2.0 * PI * s.mass)).sqrt() * s.dp).collect();
    times
        .par_iter()
        .map(|&t| {
            let mut pos = C64::default();
            let mut neg = C64::default();
            for k in 0..s.len() {
                let v = s.amp[k] * C64::from_polar(w[k], -s.energy(k) * t);
                if s.p[k] > 0.0 {
                    pos += v;
                } else if s.p[k] < 0.0 {
                    neg += v;
                }
            }
            pos.norm_sqr() + neg.norm_sqr()
        })
        .collect()
}

/// Large-`ετ` density extended to all real times by the parity-time-reversal image.
pub fn extended_density(s: &MomentumSamples, times: &[f64]) -> Vec<f64> {
    let k = POVM_NORMALIZATION / PI;
    let range = s.p[s.len() - 1] - s.p[0];
    let kernel = MomentumKernel::build(&s.p, |p, q| k * large_etau_entry(p, q, s.mass), range / 8.0);
    times.par_iter().map(|&t| kernel.eval(&coefficients(s, t))).collect()
}

/// `p_δ(U₁,0; U₂,t) = Σ_{i∈U₁} Σ_{j∈U₂} ‖P_j U_t P_i ψ‖²` for bins of width `delta_pos`
/// laid from the left edge of the grid. Windows are unions of bins.
pub fn sequential_two_time_probability(
    psi: &WavePacket,
    t: f64,
    delta_pos: f64,
    u1: &[(f64, f64)],
    u2: &[(f64, f64)],
) -> Result<f64> {
    let grid = *psi.grid();
    let dx = grid.dx();
    let k = (delta_pos / dx).round();
    ensure(k >= 1.0 && (k * dx - delta_pos).abs() < 1e-9 * dx.max(delta_pos), "delta_pos", "must be a positive multiple of dx")?;
    let k = k as usize;
    let n_bins = grid.len() / k;
    let to_bins = |u: &[(f64, f64)]| -> Result<Vec<usize>> {
        let mut out = vec![];
        for &(a, b) in u {
            let fa = (a - grid.x_min()) / delta_pos;
            let fb = (b - grid.x_min()) / delta_pos;
            let (ia, ib) = (fa.round(), fb.round());
            if (fa - ia).abs() > 1e-6 || (fb - ib).abs() > 1e-6 || ia < 0.0 || ib > n_bins as f64 || ib < ia {
                return Err(ToaError::Window(format!("[{a}, {b}] is not aligned to bins of width {delta_pos}")));
            }
            out.extend(ia as usize..ib as usize);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    };
    let b1 = to_bins(u1)?;
    let b2 = to_bins(u2)?;
    let mut mask2 = vec![false; grid.len()];
    for &j in &b2 {
        mask2[j * k..(j + 1) * k].iter_mut().for_each(|m| *m = true);
    }
    let pos = psi.in_position();
    let amps = pos.amplitudes();
    b1.par_iter()
        .map(|&i| -> Result<f64> {
            let mut v = vec![C64::default(); grid.len()];
            v[i * k..(i + 1) * k].copy_from_slice(&amps[i * k..(i + 1) * k]);
            let e = WavePacket::from_parts(grid, Representation::Position, v, psi.mass()).evolve_free(t)?;
            Ok(e.in_position()
                .amplitudes()
                .iter()
                .zip(&mask2)
                .filter(|(_, &m)| m)
                .map(|(a, _)| a.norm_sqr())
                .sum::<f64>()
                * dx)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.iter().sum())
}

/// Kijowski and large-`ετ` densities for `ψ ∝ ψ₁ + ψ₂`, two Gaussians sharing `a` and `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoGaussianReport {
    pub times: Vec<f64>,
    pub kijowski: Vec<f64>,
    pub povm: Vec<f64>,
    /// Density minus the two single-component densities.
    pub kijowski_cross: Vec<f64>,
    pub povm_cross: Vec<f64>,
    pub window: (f64, f64),
    pub amplitude_kijowski: f64,
    pub amplitude_povm: f64,
    pub ratio: f64,
    pub predicted_ratio: f64,
    /// Relative difference of the two densities at each classical arrival time.
    pub peak_agreement: [f64; 2],
    pub t_cl: [f64; 2],
}

pub fn two_gaussian_comparison(
    p1: f64,
    p2: f64,
    a: f64,
    l_dist: f64,
    mass: f64,
    t_max: f64,
    n_steps: usize,
) -> Result<TwoGaussianReport> {
    ensure(a > 0.0 && l_dist > 0.0 && mass > 0.0, "parameters", "a, L and M must be positive")?;
    ensure(a * p1 >= 5.0 && a * p2 >= 5.0, "momenta", "a·p̄ must be >= 5 for both components")?;
    if p1 != p2 {
        ensure(a * (p1 - p2).abs() >= 5.0, "momenta", "a·|p̄₁ - p̄₂| must be >= 5")?;
    }
    let g1 = GaussianSpec::with_a(l_dist, p1, a);
    let g2 = GaussianSpec::with_a(l_dist, p2, a);
    for g in [&g1, &g2] {
        if 0.5 * erfc(l_dist / g.sigma0()) > 1e-6 {
            return Err(ToaError::SupportViolation {
                mass: 0.5 * erfc(l_dist / g.sigma0()),
            });
        }
    }
    let n_p = 1024;
    let one = C64::new(1.0, 0.0);
    let both = MomentumSamples::gaussian_superposition(&[(one, g1), (one, g2)], mass, n_p)?;
    // Same grid and normalization for the single components.
    let norm = {
        let raw = MomentumSamples {
            p: both.p.clone(),
            amp: both.p.iter().map(|&p| g1.momentum_amplitude(p) + g2.momentum_amplitude(p)).collect(),
            dp: both.dp,
            mass,
        };
        raw.norm_sq().sqrt()
    };
    let single = |g: &GaussianSpec| MomentumSamples {
        p: both.p.clone(),
        amp: both.p.iter().map(|&p| g.momentum_amplitude(p) / norm).collect(),
        dp: both.dp,
        mass,
    };
    let s1 = single(&g1);
    let s2 = single(&g2);
    let times = TimeGrid::new(t_max, n_steps)?.ts();
    let kij = kijowski_density(&both, &times);
    let k1 = kijowski_density(&s1, &times);
    let k2 = kijowski_density(&s2, &times);
    let povm = extended_density(&both, &times);
    let q1 = extended_density(&s1, &times);
    let q2 = extended_density(&s2, &times);
    let kc: Vec<f64> = (0..times.len()).map(|i| kij[i] - k1[i] - k2[i]).collect();
    let pc: Vec<f64> = (0..times.len()).map(|i| povm[i] - q1[i] - q2[i]).collect();
    let t_cl = [mass * l_dist / p1, mass * l_dist / p2];
    let center = 0.5 * (t_cl[0] + t_cl[1]);
    let width = a * mass / p1.min(p2);
    let window = (center - 0.5 * width, center + 0.5 * width);
    let envelope = |v: &[f64]| {
        times
            .iter()
            .zip(v)
            .filter(|(t, _)| **t >= window.0 && **t <= window.1)
            .map(|(_, x)| x.abs())
            .fold(0.0, f64::max)
    };
    let amp_k = envelope(&kc);
    let amp_p = envelope(&pc);
    let ratio = if amp_k > 0.0 { amp_p / amp_k } else { f64::NAN };
    let at = |v: &[f64], t: f64| crate::toa::interp(&times, v, t);
    let peak_agreement = t_cl.map(|t| {
        let k = at(&kij, t);
        (at(&povm, t) - k).abs() / k
    });
    Ok(TwoGaussianReport {
        times,
        kijowski: kij,
        povm,
        kijowski_cross: kc,
        povm_cross: pc,
        window,
        amplitude_kijowski: amp_k,
        amplitude_povm: amp_p,
        ratio,
        predicted_ratio: 0.5 * (p1 / p2 + p2 / p1),
        peak_agreement,
        t_cl,
    })
}

/// `√(2/π)·p̄/(Ma)·exp(-2(L - p̄t/M)²/a²)`, the normalized leading order of the
/// large-`ετ` density for a Gaussian with `a p̄ ≫ 1`.
pub fn gaussian_leading_order(spec: &GaussianSpec, mass: f64, t: f64) -> f64 {
    let a = spec.a();
    let p = spec.mean_momentum;
    let d = spec.l_dist() - p * t / mass;
    (2.0 / PI).sqrt() * p / (mass * a) * (-2.0 * d * d / (a * a)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_quadrature_matches_closed_form() {
        let r = KernelR::new(0.3, 1.3).unwrap();
        for et in [0.0, 0.01, 0.3, 1.0, 7.0, 100.0] {
            let eps = et / r.tau;
            let q = r.quadrature(eps);
            let c = r.closed_form(eps);
            assert!((q - c).abs() < 1e-10 * c.abs().max(1.0), "{et}: {q} {c}");
        }
    }

    #[test]
    fn kernel_limits() {
        let r = KernelR::new(0.05, 1.0).unwrap();
        assert!((r.quadrature(0.0) / r.small_limit() - 1.0).abs() < 1e-10);
        let eps = 1e4;
        assert!((r.closed_form(eps) / r.large_limit(eps) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gaussian_smearing_integrates_to_one() {
        let f = SmearingFamily::new(0.05, 2.0, SmearingKind::Gaussian).unwrap();
        let g = TimeGrid::new(2.0, 4000).unwrap();
        // At exactly 3τ from an edge the Gaussian tail beyond the edge is 1.35e-3.
        for sp in [0.165, 1.0, 1.835] {
            let v: Vec<f64> = g.ts().iter().map(|&s| f.value(s, sp)).collect();
            let i = integrate(&v, g.dt());
            assert!((i - 1.0).abs() < 1e-3, "{sp}: {i}");
        }
    }

    #[test]
    fn fourier_smearing_converges_to_one() {
        // Truncated square wave: the interior error falls like τ/T.
        let g = TimeGrid::new(2.0, 40000).unwrap();
        let err = |tau: f64| {
            let f = SmearingFamily::new(tau, 2.0, SmearingKind::FourierSum).unwrap();
            [0.5, 0.8, 1.0, 1.3]
                .iter()
                .map(|&sp| {
                    let v: Vec<f64> = g.ts().iter().map(|&s| f.value(s, sp)).collect();
                    (integrate(&v, g.dt()) - 1.0).abs()
                })
                .fold(0.0, f64::max)
        };
        let e = [err(0.05), err(0.0125), err(0.003125)];
        assert!(e[1] < 0.5 * e[0] && e[2] < 0.5 * e[1], "{e:?}");
    }

    #[test]
    fn samples_normalized() {
        let g = GaussianSpec::with_a(10.0, 10.0, 1.0);
        let s = MomentumSamples::gaussian(&g, 1.0, 512).unwrap();
        assert!((s.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nystrom_matches_direct_factorization() {
        let parts = [
            (C64::new(1.0, 0.0), GaussianSpec::with_a(10.0, 10.0, 1.0)),
            (C64::new(0.3, 0.4), GaussianSpec::with_a(8.0, -2.0, 1.0)),
        ];
        let s = MomentumSamples::gaussian_superposition(&parts, 1.0, 1200).unwrap();
        for regime in [PovmRegime::Full, PovmRegime::Smeared, PovmRegime::LargeEtau] {
            let r = KernelR::new(0.05, 1.0).unwrap();
            let g = |p: f64, q: f64| kernel_value(p, q, &r, regime);
            let fast = MomentumKernel::build(&s.p, g, panel_width(&s, 0.05, regime));
            let slow = MomentumKernel::direct(&s.p, g);
            for t in [0.3, 0.9, 1.0, 1.4] {
                let c = coefficients(&s, t);
                let (a, b) = (fast.eval(&c), slow.eval(&c));
                // Densities peak near 3.6 here.
                assert!((a - b).abs() < 1e-7, "{regime:?} {t}: {a} {b}");
            }
        }
    }
}
