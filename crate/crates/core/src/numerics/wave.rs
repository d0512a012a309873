use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::grid::{Grid1D, MomentumGrid};
use crate::error::{ensure, invalid, Result, ToaError};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static P: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub(crate) fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    (p.plan_fft_forward(n), p.plan_fft_inverse(n))
}

/// Momentum of FFT bin `k` in native (unshifted) ordering.
pub(crate) fn fft_momentum(grid: &Grid1D, k: usize) -> f64 {
    let n = grid.len();
    let dp = grid.momentum().dp();
    if k < n / 2 {
        k as f64 * dp
    } else {
        (k as f64 - n as f64) * dp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

/// Pure state on a [`Grid1D`], stored in one representation.
///
/// Position amplitudes are normalized as `Σ|ψ|²dx = 1`; momentum amplitudes follow
/// `ψ̃(p) = ∫dx e^{-ipx}ψ(x)` and `Σ|ψ̃|²dp/2π = 1`.
#[derive(Debug, Clone)]
pub struct WavePacket {
    grid: Grid1D,
    repr: Representation,
    amps: Vec<C64>,
    mass: f64,
}

impl WavePacket {
    /// Builds a position-space state and rescales it to unit norm.
    pub fn from_position(grid: Grid1D, amps: Vec<C64>, mass: f64) -> Result<Self> {
        Self::build(grid, Representation::Position, amps, mass)
    }

    /// Builds a momentum-space state (centered ordering `p_k = (k - n/2)dp`) with unit norm.
    pub fn from_momentum(grid: Grid1D, amps: Vec<C64>, mass: f64) -> Result<Self> {
        Self::build(grid, Representation::Momentum, amps, mass)
    }

    fn build(grid: Grid1D, repr: Representation, amps: Vec<C64>, mass: f64) -> Result<Self> {
        ensure(mass > 0.0 && mass.is_finite(), "mass", "must be positive")?;
        ensure(amps.len() == grid.len(), "amplitudes", "length must match the grid")?;
        let mut w = Self {
            grid,
            repr,
            amps,
            mass,
        };
        let n2 = w.norm_sq();
        ensure(n2 > 0.0 && n2.is_finite(), "amplitudes", "state has zero or non-finite norm")?;
        let s = 1.0 / n2.sqrt();
        w.amps.iter_mut().for_each(|a| *a *= s);
        Ok(w)
    }

    pub(crate) fn from_parts(grid: Grid1D, repr: Representation, amps: Vec<C64>, mass: f64) -> Self {
        Self {
            grid,
            repr,
            amps,
            mass,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn momentum_grid(&self) -> MomentumGrid {
        self.grid.momentum()
    }
    pub fn representation(&self) -> Representation {
        self.repr
    }
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }
    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn norm_sq(&self) -> f64 {
        let w = match self.repr {
            Representation::Position => self.grid.dx(),
            Representation::Momentum => self.grid.momentum().dp() / (2.0 * PI),
        };
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * w
    }

    pub fn to_momentum(&self) -> Result<WavePacket> {
        if self.repr != Representation::Position {
            return Err(ToaError::WrongRepresentation {
                expected: "position",
            });
        }
        let n = self.grid.len();
        let (fwd, _) = fft_pair(n);
        let mut buf: Vec<C64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, &a)| if j % 2 == 0 { a } else { -a })
            .collect();
        fwd.process(&mut buf);
        let mg = self.grid.momentum();
        let dx = self.grid.dx();
        let x0 = self.grid.x_min();
        for (k, b) in buf.iter_mut().enumerate() {
            *b *= C64::from_polar(dx, -mg.p(k) * x0);
        }
        Ok(Self::from_parts(self.grid, Representation::Momentum, buf, self.mass))
    }

    pub fn to_position(&self) -> Result<WavePacket> {
        if self.repr != Representation::Momentum {
            return Err(ToaError::WrongRepresentation {
                expected: "momentum",
            });
        }
        let n = self.grid.len();
        let (_, inv) = fft_pair(n);
        let mg = self.grid.momentum();
        let x0 = self.grid.x_min();
        let mut buf: Vec<C64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, &a)| a * C64::from_polar(1.0, mg.p(k) * x0))
            .collect();
        inv.process(&mut buf);
        let s = 1.0 / (n as f64 * self.grid.dx());
        for (j, b) in buf.iter_mut().enumerate() {
            *b *= if j % 2 == 0 { s } else { -s };
        }
        Ok(Self::from_parts(self.grid, Representation::Position, buf, self.mass))
    }

    pub fn in_position(&self) -> WavePacket {
        match self.repr {
            Representation::Position => self.clone(),
            Representation::Momentum => self.to_position().expect("momentum representation"),
        }
    }

    pub fn in_momentum(&self) -> WavePacket {
        match self.repr {
            Representation::Momentum => self.clone(),
            Representation::Position => self.to_momentum().expect("position representation"),
        }
    }

    /// `|ψ(x_j)|²` on the position grid.
    pub fn position_density(&self) -> Vec<f64> {
        self.in_position().amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨P₊⟩`: probability on `x ≥ 0`.
    pub fn mass_right(&self) -> f64 {
        let p = self.in_position();
        let j0 = p.grid.zero_index();
        p.amps[j0..].iter().map(|a| a.norm_sqr()).sum::<f64>() * p.grid.dx()
    }

    /// Probability in the outer sixteenth of the grid on either side.
    pub fn edge_mass(&self) -> f64 {
        let p = self.in_position();
        let n = p.grid.len();
        let w = n / 16;
        let s: f64 = p.amps[..w]
            .iter()
            .chain(p.amps[n - w..].iter())
            .map(|a| a.norm_sqr())
            .sum();
        s * p.grid.dx()
    }

    pub fn mean_position(&self) -> f64 {
        let p = self.in_position();
        p.amps
            .iter()
            .enumerate()
            .map(|(j, a)| a.norm_sqr() * p.grid.x(j))
            .sum::<f64>()
            * p.grid.dx()
    }

    /// `⟨φ|ψ⟩` for two states on the same grid.
    pub fn inner(&self, other: &WavePacket) -> C64 {
        let a = self.in_position();
        let b = other.in_position();
        a.amps
            .iter()
            .zip(&b.amps)
            .map(|(x, y)| x.conj() * y)
            .sum::<C64>()
            * a.grid.dx()
    }

    /// L² distance in position representation.
    pub fn distance(&self, other: &WavePacket) -> f64 {
        let a = self.in_position();
        let b = other.in_position();
        (a.amps
            .iter()
            .zip(&b.amps)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            * a.grid.dx())
        .sqrt()
    }

    /// Free evolution `e^{-ip²t/2M}`; the result keeps the input representation.
    pub fn evolve_free(&self, t: f64) -> Result<WavePacket> {
        ensure(t >= 0.0 && t.is_finite(), "t", "must be non-negative")?;
        Ok(self.evolve_free_signed(t))
    }

    /// Free evolution for any real `t` (negative `t` runs backwards).
    pub fn evolve_free_signed(&self, t: f64) -> WavePacket {
        let mut m = self.in_momentum();
        let mg = m.grid.momentum();
        let mass = m.mass;
        for (k, a) in m.amps.iter_mut().enumerate() {
            let p = mg.p(k);
            *a *= C64::from_polar(1.0, -p * p * t / (2.0 * mass));
        }
        let out = match self.repr {
            Representation::Momentum => m,
            Representation::Position => m.to_position().expect("momentum representation"),
        };
        warn_edges(&out);
        out
    }

    /// Strang-split evolution under `p²/2M + V(x)`.
    pub fn evolve_split_step(&self, v: &[f64], t: f64, n_substeps: usize) -> Result<WavePacket> {
        ensure(v.len() == self.grid.len(), "V", "length must match the grid")?;
        ensure(v.iter().all(|x| x.is_finite()), "V", "must be finite (bounded below)")?;
        ensure(n_substeps >= 1, "n_substeps", "must be at least 1")?;
        ensure(t >= 0.0 && t.is_finite(), "t", "must be non-negative")?;
        let h = t / n_substeps as f64;
        let mut st = FreeStepper::new(&self.grid, self.mass, h);
        let half: Vec<C64> = v.iter().map(|&x| C64::from_polar(1.0, -0.5 * h * x)).collect();
        let mut psi = self.in_position().amps;
        for _ in 0..n_substeps {
            psi.iter_mut().zip(&half).for_each(|(a, b)| *a *= b);
            st.step(&mut psi);
            psi.iter_mut().zip(&half).for_each(|(a, b)| *a *= b);
        }
        let out = Self::from_parts(self.grid, Representation::Position, psi, self.mass);
        warn_edges(&out);
        Ok(match self.repr {
            Representation::Position => out,
            Representation::Momentum => out.to_momentum()?,
        })
    }

    /// `ψ(0)` from the grid sample at the origin.
    pub fn value_at_zero(&self) -> C64 {
        let p = self.in_position();
        p.amps[p.grid.zero_index()]
    }

    /// Spectral derivative `ψ'(0) = Σ_k (dp/2π) i p_k ψ̃_k`, Nyquist mode dropped.
    pub fn derivative_at_zero(&self) -> C64 {
        let m = self.in_momentum();
        let mg = m.grid.momentum();
        let x0 = m.grid.x(m.grid.zero_index());
        let s: C64 = m
            .amps
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| {
                let p = mg.p(k);
                a * C64::new(0.0, p) * C64::from_polar(1.0, p * x0)
            })
            .sum();
        s * (mg.dp() / (2.0 * PI))
    }
}

fn warn_edges(w: &WavePacket) {
    let e = w.edge_mass();
    if e > 1e-6 {
        log::warn!("wave packet reached the grid edge (edge mass {e:.2e}); results may alias");
    }
}

/// Repeated free evolution by a fixed step on raw position amplitudes.
pub struct FreeStepper {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    phase: Vec<C64>,
    scratch: Vec<C64>,
}

impl FreeStepper {
    pub fn new(grid: &Grid1D, mass: f64, dt: f64) -> Self {
        let n = grid.len();
        let (fwd, inv) = fft_pair(n);
        let norm = 1.0 / n as f64;
        let phase = (0..n)
            .map(|k| {
                let p = fft_momentum(grid, k);
                C64::from_polar(norm, -p * p * dt / (2.0 * mass))
            })
            .collect();
        let scratch = vec![C64::default(); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
        Self {
            fwd,
            inv,
            phase,
            scratch,
        }
    }

    pub fn step(&mut self, psi: &mut [C64]) {
        self.fwd.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(&self.phase).for_each(|(a, b)| *a *= b);
        self.inv.process_with_scratch(psi, &mut self.scratch);
    }
}

/// Position-space width convention of a Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianWidth {
    /// `|ψ|² ∝ exp(-(x - x₀)²/σ₀²)`.
    Sigma0(f64),
    /// Momentum-space form `ψ̃ ∝ exp(-a²(p - p̄)²/4)`, i.e. `σ₀ = a/√2`.
    A(f64),
}

/// Gaussian wave packet centred at `center = -L_dist` with mean momentum `p̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub center: f64,
    pub mean_momentum: f64,
    pub width: GaussianWidth,
}

impl GaussianSpec {
    pub fn with_sigma0(l_dist: f64, mean_momentum: f64, sigma0: f64) -> Self {
        Self {
            center: -l_dist,
            mean_momentum,
            width: GaussianWidth::Sigma0(sigma0),
        }
    }

    pub fn with_a(l_dist: f64, mean_momentum: f64, a: f64) -> Self {
        Self {
            center: -l_dist,
            mean_momentum,
            width: GaussianWidth::A(a),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = match self.width {
            GaussianWidth::Sigma0(s) | GaussianWidth::A(s) => s,
        };
        ensure(w > 0.0 && w.is_finite(), "width", format!("must be positive, got {w}"))?;
        ensure(self.center.is_finite(), "center", "must be finite")?;
        ensure(self.mean_momentum.is_finite(), "mean_momentum", "must be finite")
    }

    pub fn sigma0(&self) -> f64 {
        match self.width {
            GaussianWidth::Sigma0(s) => s,
            GaussianWidth::A(a) => a / 2f64.sqrt(),
        }
    }

    pub fn a(&self) -> f64 {
        self.sigma0() * 2f64.sqrt()
    }

    pub fn l_dist(&self) -> f64 {
        -self.center
    }

    /// Momentum standard deviation `1/(√2 σ₀) = 1/a`.
    pub fn momentum_spread(&self) -> f64 {
        1.0 / self.a()
    }

    pub fn t_cl(&self, mass: f64) -> f64 {
        mass * self.l_dist() / self.mean_momentum
    }

    /// Temporal width of the arrival peak, `(Mσ₀/p̄)√(1 + L²/(σ₀⁴p̄²))`.
    pub fn arrival_width(&self, mass: f64) -> f64 {
        let s = self.sigma0();
        let p = self.mean_momentum;
        let l = self.l_dist();
        mass * s / p * (1.0 + l * l / (s.powi(4) * p * p)).sqrt()
    }

    /// Analytic amplitude `ψ(x) = (πσ₀²)^{-1/4} exp(-(x-x₀)²/2σ₀² + ip̄(x-x₀))`.
    pub fn amplitude(&self, x: f64) -> C64 {
        let s = self.sigma0();
        let d = x - self.center;
        let env = (PI * s * s).powf(-0.25) * (-d * d / (2.0 * s * s)).exp();
        C64::from_polar(env, self.mean_momentum * d)
    }

    /// Analytic momentum amplitude in the `∫dx e^{-ipx}ψ` convention.
    pub fn momentum_amplitude(&self, p: f64) -> C64 {
        let a = self.a();
        let q = p - self.mean_momentum;
        let env = (2.0 * PI).sqrt() * (a * a / (2.0 * PI)).powf(0.25) * (-a * a * q * q / 4.0).exp();
        C64::from_polar(env, -p * self.center)
    }

    pub fn wave_packet(&self, grid: Grid1D, mass: f64) -> Result<WavePacket> {
        self.validate()?;
        let amps = (0..grid.len()).map(|j| self.amplitude(grid.x(j))).collect();
        WavePacket::from_position(grid, amps, mass)
    }

    /// Like [`Self::wave_packet`] but requires `⟨P₊⟩ < 1e-6`.
    pub fn left_supported(&self, grid: Grid1D, mass: f64) -> Result<WavePacket> {
        let w = self.wave_packet(grid, mass)?;
        require_left_support(&w, 1e-6)?;
        Ok(w)
    }
}

pub fn require_left_support(w: &WavePacket, tol: f64) -> Result<()> {
    let m = w.mass_right();
    if m >= tol {
        return Err(ToaError::SupportViolation { mass: m });
    }
    Ok(())
}

/// Default grid `[-8L, 8L]` with 4096 points.
pub fn default_grid(l_dist: f64) -> Result<Grid1D> {
    if !(l_dist > 0.0) {
        return Err(invalid("l_dist", "must be positive"));
    }
    Grid1D::symmetric(8.0 * l_dist, 4096)
}
