//! Decoherence-functional densities for first-crossing histories.

mod detector;
pub mod quadrature;
mod zeno2x2;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{ensure, invalid, Result, ToaError};
use crate::numerics::special::erfc;
use crate::numerics::tridiag;
use crate::numerics::wave::{fft_pair, require_left_support};
use crate::numerics::{Grid1D, Hamiltonian, Representation, TimeGrid, WavePacket};

pub use detector::{detector_model_density, TwoLevelDetectorModel};
pub use quadrature::CellWeights;
pub use zeno2x2::{zeno_robustness_2x2, ZenoToyModel};

/// How the restricted propagator `Ĉ_t` is realized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestrictedMethod {
    /// Free particle only: `Ĉ_tψ = χ₋ Û_t(ψ - Rψ)` with `Rψ(x) = ψ(-x)`.
    Images,
    /// `(P₋ e^{-iĤδ} P₋)ⁿ` with projection interval `δ ≤ dt`.
    TrotterProjection { dt: f64 },
    /// Crank–Nicolson on `x < 0` with a fourth-order compact Laplacian and `ψ(0) = 0`.
    DirichletPde { dt: f64 },
}

impl RestrictedMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Images => "images",
            Self::TrotterProjection { .. } => "trotter_projection",
            Self::DirichletPde { .. } => "dirichlet_pde",
        }
    }
}

fn reflect_index(n: usize, j: usize) -> usize {
    (n - j) % n
}

fn check_symmetric(grid: &Grid1D) -> Result<()> {
    ensure(
        grid.zero_index() * 2 == grid.len() && grid.x(grid.zero_index()) == 0.0,
        "grid",
        "method requires a grid symmetric about x = 0",
    )
}

/// Steps a state restricted to `x < 0` by a fixed interval.
pub(crate) struct RestrictedStepper {
    inner: StepKind,
    j0: usize,
}

enum StepKind {
    Images(crate::numerics::FreeStepper, usize),
    Trotter(crate::numerics::Evolver, usize),
    Pde(PdeStepper, usize),
}

impl RestrictedStepper {
    pub(crate) fn new(grid: &Grid1D, mass: f64, h: &Hamiltonian, interval: f64, method: RestrictedMethod) -> Result<Self> {
        h.validate(grid)?;
        let j0 = grid.zero_index();
        let inner = match method {
            RestrictedMethod::Images => {
                if !h.is_free() {
                    return Err(ToaError::Unsupported("images method requires the free Hamiltonian".into()));
                }
                check_symmetric(grid)?;
                StepKind::Images(crate::numerics::FreeStepper::new(grid, mass, interval), grid.len())
            }
            RestrictedMethod::TrotterProjection { dt } => {
                ensure(dt > 0.0, "dt", "must be positive")?;
                let k = ((interval / dt).round() as usize).max(1);
                StepKind::Trotter(h.evolver(grid, mass, interval / k as f64), k)
            }
            RestrictedMethod::DirichletPde { dt } => {
                ensure(dt > 0.0, "dt", "must be positive")?;
                let k = ((interval / dt).ceil() as usize).max(1);
                StepKind::Pde(PdeStepper::new(grid, mass, h, interval / k as f64), k)
            }
        };
        Ok(Self { inner, j0 })
    }

    /// Advances a full-grid amplitude vector that vanishes on `x ≥ 0`.
    pub(crate) fn step(&mut self, psi: &mut Vec<C64>) {
        let j0 = self.j0;
        match &mut self.inner {
            StepKind::Images(st, n) => {
                let n = *n;
                let mut odd = odd_extension(psi, n);
                st.step(&mut odd);
                psi.copy_from_slice(&odd);
                psi[j0..].iter_mut().for_each(|a| *a = C64::default());
            }
            StepKind::Trotter(ev, k) => {
                for _ in 0..*k {
                    ev.step(psi);
                    psi[j0..].iter_mut().for_each(|a| *a = C64::default());
                }
            }
            StepKind::Pde(p, k) => {
                for _ in 0..*k {
                    p.step(&mut psi[1..j0]);
                }
            }
        }
    }
}

fn odd_extension(psi: &[C64], n: usize) -> Vec<C64> {
    (0..n).map(|j| psi[j] - psi[reflect_index(n, j)]).collect()
}

/// Compact fourth-order Crank–Nicolson on the interior points `1..j0`.
struct PdeStepper {
    lhs: (Vec<C64>, Vec<C64>, Vec<C64>),
    rhs_op: (Vec<C64>, Vec<C64>, Vec<C64>),
    work: Vec<C64>,
    buf: Vec<C64>,
}

impl PdeStepper {
    fn new(grid: &Grid1D, mass: f64, h: &Hamiltonian, dt: f64) -> Self {
        let j0 = grid.zero_index();
        let m = j0 - 1;
        let dx = grid.dx();
        let v: Vec<f64> = match h {
            Hamiltonian::Potential { v, .. } => v[1..j0].to_vec(),
            _ => vec![0.0; m],
        };
        let zero_h = matches!(h, Hamiltonian::Zero);
        let kin = if zero_h { 0.0 } else { 1.0 / (2.0 * mass * dx * dx) };
        // B ψ_t = -i Hm ψ with B = I + (dx²/12)Δ_h, Hm = -(1/2M)Δ_h + B V.
        let mut lo = vec![C64::default(); m];
        let mut di = vec![C64::default(); m];
        let mut up = vec![C64::default(); m];
        let mut rlo = lo.clone();
        let mut rdi = di.clone();
        let mut rup = up.clone();
        let half = C64::new(0.0, 0.5 * dt);
        for j in 0..m {
            let b_off = 1.0 / 12.0;
            let b_diag = 10.0 / 12.0;
            let h_diag = 2.0 * kin + b_diag * v[j];
            di[j] = b_diag + half * h_diag;
            rdi[j] = b_diag - half * h_diag;
            if j > 0 {
                let h_off = -kin + b_off * v[j - 1];
                lo[j] = b_off + half * h_off;
                rlo[j] = b_off - half * h_off;
            }
            if j + 1 < m {
                let h_off = -kin + b_off * v[j + 1];
                up[j] = b_off + half * h_off;
                rup[j] = b_off - half * h_off;
            }
        }
        Self {
            lhs: (lo, di, up),
            rhs_op: (rlo, rdi, rup),
            work: Vec::with_capacity(m),
            buf: vec![C64::default(); m],
        }
    }

    fn step(&mut self, psi: &mut [C64]) {
        let m = psi.len();
        let (l, d, u) = &self.rhs_op;
        for j in 0..m {
            let mut s = d[j] * psi[j];
            if j > 0 {
                s += l[j] * psi[j - 1];
            }
            if j + 1 < m {
                s += u[j] * psi[j + 1];
            }
            self.buf[j] = s;
        }
        let (l, d, u) = &self.lhs;
        tridiag::solve(l, d, u, &mut self.buf, &mut self.work);
        psi.copy_from_slice(&self.buf);
    }
}

/// Applies `Ĉ_t` to a left-supported state.
pub fn restricted_propagate(psi: &WavePacket, h: &Hamiltonian, t: f64, method: RestrictedMethod) -> Result<WavePacket> {
    ensure(t >= 0.0 && t.is_finite(), "t", "must be non-negative")?;
    require_left_support(psi, 1e-6)?;
    let grid = *psi.grid();
    let j0 = grid.zero_index();
    let mut amps = psi.in_position().into_amplitudes();
    amps[j0..].iter_mut().for_each(|a| *a = C64::default());
    if let RestrictedMethod::DirichletPde { .. } = method {
        amps[0] = C64::default();
    }
    if t > 0.0 {
        let mut st = RestrictedStepper::new(&grid, psi.mass(), h, t, method)?;
        st.step(&mut amps);
    } else {
        // Validate the method even when nothing moves.
        RestrictedStepper::new(&grid, psi.mass(), h, 1.0, method)?;
    }
    Ok(WavePacket::from_parts(grid, Representation::Position, amps, psi.mass()))
}

/// `∂ₓφ(0⁻)` for `φ` vanishing on `x ≥ 0`: spectral derivative of the odd extension.
pub fn boundary_derivative(phi: &WavePacket) -> Result<C64> {
    let grid = *phi.grid();
    check_symmetric(&grid)?;
    let p = phi.in_position();
    let odd = odd_extension(p.amplitudes(), grid.len());
    Ok(WavePacket::from_parts(grid, Representation::Position, odd, phi.mass()).derivative_at_zero())
}

/// Boundary amplitude `A(t) = (p̂/M Û_tψ₀)(0)` on a time grid, from momentum amplitudes.
fn free_boundary_amplitudes(psi0: &WavePacket, times: &TimeGrid) -> Vec<C64> {
    let m = psi0.in_momentum();
    let mg = m.momentum_grid();
    let mass = m.mass();
    let x0 = m.grid().x(m.grid().zero_index());
    let w = mg.dp() / (2.0 * PI);
    let base: Vec<C64> = m
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let p = mg.p(k);
            a * (p / mass) * C64::from_polar(w, p * x0)
        })
        .collect();
    let energies: Vec<f64> = (0..mg.len()).map(|k| mg.p(k).powi(2) / (2.0 * mass)).collect();
    times
        .ts()
        .par_iter()
        .map(|&t| {
            base.iter()
                .zip(&energies)
                .map(|(b, e)| b * C64::from_polar(1.0, -e * t))
                .sum()
        })
        .collect()
}

/// `(Û_{t-T} φ)(0)` on a time grid, free evolution.
fn free_values_at_zero(phi: &WavePacket, times: &TimeGrid, t_end: f64) -> Vec<C64> {
    let m = phi.in_momentum();
    let mg = m.momentum_grid();
    let mass = m.mass();
    let x0 = m.grid().x(m.grid().zero_index());
    let w = mg.dp() / (2.0 * PI);
    let base: Vec<C64> = m
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| a * C64::from_polar(w, mg.p(k) * x0))
        .collect();
    let energies: Vec<f64> = (0..mg.len()).map(|k| mg.p(k).powi(2) / (2.0 * mass)).collect();
    times
        .ts()
        .par_iter()
        .map(|&t| {
            base.iter()
                .zip(&energies)
                .map(|(b, e)| b * C64::from_polar(1.0, -e * (t - t_end)))
                .sum()
        })
        .collect()
}

fn mean_energy(psi: &WavePacket) -> f64 {
    let m = psi.in_momentum();
    let mg = m.momentum_grid();
    m.amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm_sqr() * mg.p(k).powi(2) / (2.0 * psi.mass()))
        .sum::<f64>()
        * mg.dp()
        / (2.0 * PI)
}

#[derive(Clone)]
pub(crate) enum Kernel {
    /// `ρ(t,t') = A(t)A*(t')√(M/2πi(t'-t))`; windows via product quadrature on the
    /// demodulated amplitudes `A(t)e^{iω₀t}`.
    Singular { demod: Vec<C64>, weights: Arc<CellWeights> },
    /// Bounded `ρ`; windows via the bilinear cell rule on the stored matrix.
    Smooth,
}

/// Bi-density `ρ(tᵢ,tⱼ)`, no-detection column `d(tᵢ,N)` and `d(N,N)`.
#[derive(Clone)]
pub struct DecoherenceDensity {
    pub times: TimeGrid,
    /// Row-major `ρ(tᵢ,tⱼ)`, `(n_bins+1)²` entries.
    pub rho: Vec<C64>,
    pub no_detect_column: Vec<C64>,
    pub dnn: f64,
    pub diag_singularity_note: String,
    pub warnings: Vec<String>,
    /// Boundary amplitudes `A(tᵢ)` when the density factorizes.
    pub boundary_amplitudes: Vec<C64>,
    pub(crate) kernel: Kernel,
    pub(crate) scale: f64,
    pub(crate) conditioned: bool,
}

impl std::fmt::Debug for DecoherenceDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DecoherenceDensity")
            .field("n_samples", &self.times.n_samples())
            .field("dnn", &self.dnn)
            .field("conditioned", &self.conditioned)
            .finish()
    }
}

/// A proposition about the crossing time: a union of windows in `[0, T]`, or `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryProposition {
    pub label: String,
    pub windows: Vec<(f64, f64)>,
    pub no_detection: bool,
}

impl HistoryProposition {
    pub fn window(label: impl Into<String>, t1: f64, t2: f64) -> Self {
        Self {
            label: label.into(),
            windows: vec![(t1, t2)],
            no_detection: false,
        }
    }

    pub fn no_detection() -> Self {
        Self {
            label: "N".into(),
            windows: vec![],
            no_detection: true,
        }
    }

    /// `[0, T]` minus the union of this proposition's windows.
    pub fn complement(&self, label: impl Into<String>, t_max: f64) -> Self {
        let mut w = self.windows.clone();
        w.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Vec::new();
        let mut cur = 0.0;
        for (a, b) in w {
            let a = a.max(0.0);
            if a > cur {
                out.push((cur, a));
            }
            cur = cur.max(b.min(t_max));
        }
        if cur < t_max {
            out.push((cur, t_max));
        }
        Self {
            label: label.into(),
            windows: out,
            no_detection: false,
        }
    }

    fn cells(&self, times: &TimeGrid) -> Result<Vec<usize>> {
        let h = times.dt();
        let n = times.n_steps();
        let mut cells = Vec::new();
        for &(a, b) in &self.windows {
            if !(a >= -1e-12 && b <= times.t_max() + 1e-12 && a <= b) {
                return Err(ToaError::Window(format!("[{a}, {b}] not inside [0, {}]", times.t_max())));
            }
            let i1 = ((a / h).round() as usize).min(n);
            let i2 = ((b / h).round() as usize).min(n);
            cells.extend(i1..i2);
        }
        cells.sort_unstable();
        let before = cells.len();
        cells.dedup();
        if cells.len() != before {
            return Err(ToaError::Window(format!("windows of `{}` overlap", self.label)));
        }
        Ok(cells)
    }
}

impl DecoherenceDensity {
    pub fn n_samples(&self) -> usize {
        self.times.n_samples()
    }

    pub fn rho_at(&self, i: usize, j: usize) -> C64 {
        self.rho[i * self.n_samples() + j]
    }

    pub fn is_conditioned(&self) -> bool {
        self.conditioned
    }

    /// `∫_{W1}dt ∫_{W2}dt' ρ(t,t')` over cell-aligned windows.
    fn cells_integral(&self, c1: &[usize], c2: &[usize]) -> C64 {
        let v = match &self.kernel {
            Kernel::Singular { demod, weights } => weights.bilinear(demod, c1, demod, c2),
            Kernel::Smooth => {
                let h = self.times.dt();
                let n = self.n_samples();
                c1.par_iter()
                    .map(|&c| {
                        let mut acc = C64::default();
                        for &cp in c2 {
                            acc += self.rho[c * n + cp]
                                + self.rho[(c + 1) * n + cp]
                                + self.rho[c * n + cp + 1]
                                + self.rho[(c + 1) * n + cp + 1];
                        }
                        acc * (0.25 * h * h)
                    })
                    .collect::<Vec<C64>>()
                    .iter()
                    .sum()
            }
        };
        v * self.scale
    }

    fn column_integral(&self, cells: &[usize]) -> C64 {
        let h = self.times.dt();
        let col = &self.no_detect_column;
        cells.iter().map(|&c| (col[c] + col[c + 1]) * (0.5 * h)).sum::<C64>() * self.scale
    }

    /// Decoherence functional `d(α, α')` between two propositions.
    pub fn functional(&self, a: &HistoryProposition, b: &HistoryProposition) -> Result<C64> {
        match (a.no_detection, b.no_detection) {
            (true, true) => Ok(C64::new(self.dnn, 0.0)),
            (false, true) => {
                self.require_unconditioned()?;
                Ok(self.column_integral(&a.cells(&self.times)?))
            }
            (true, false) => {
                self.require_unconditioned()?;
                Ok(self.column_integral(&b.cells(&self.times)?).conj())
            }
            (false, false) => Ok(self.cells_integral(&a.cells(&self.times)?, &b.cells(&self.times)?)),
        }
    }

    fn require_unconditioned(&self) -> Result<()> {
        if self.conditioned {
            return Err(invalid("proposition", "N is removed by conditioning"));
        }
        Ok(())
    }

    fn full(&self) -> HistoryProposition {
        HistoryProposition::window("[0,T]", 0.0, self.times.t_max())
    }

    /// `∬ w(t) w(t') ρ(t,t')` over `[0, T]²` for a real weight sampled on the time grid.
    pub fn weighted_functional(&self, w: &[f64]) -> Result<C64> {
        ensure(w.len() == self.n_samples(), "weights", "length must match the time grid")?;
        let cells: Vec<usize> = (0..self.times.n_steps()).collect();
        let v = match &self.kernel {
            Kernel::Singular { demod, weights } => {
                let f: Vec<C64> = demod.iter().zip(w).map(|(a, x)| a * x).collect();
                weights.bilinear(&f, &cells, &f, &cells)
            }
            Kernel::Smooth => {
                let h = self.times.dt();
                let n = self.n_samples();
                let rw: Vec<f64> = (0..n)
                    .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
                    .collect();
                (0..n)
                    .into_par_iter()
                    .map(|i| (0..n).map(|j| self.rho[i * n + j] * (w[i] * w[j] * rw[i] * rw[j])).sum::<C64>())
                    .collect::<Vec<C64>>()
                    .iter()
                    .sum()
            }
        };
        Ok(v * self.scale)
    }

    /// `d([0,T],[0,T])`.
    pub fn arrival_mass(&self) -> f64 {
        let f = self.full();
        self.functional(&f, &f).map(|c| c.re).unwrap_or(f64::NAN)
    }

    /// `d([0,T],[0,T]) + 2 Re d([0,T],N) + d(N,N) - 1`, zero when the functional is normalized.
    pub fn normalization_defect(&self) -> Result<f64> {
        let f = self.full();
        let dn = self.functional(&f, &HistoryProposition::no_detection())?;
        Ok(self.arrival_mass() + 2.0 * dn.re + self.dnn - 1.0)
    }

    /// `d([0,T],[0,T]) + 2 Re d([0,T],N)`.
    pub fn identity_defect(&self) -> Result<f64> {
        let f = self.full();
        let dn = self.functional(&f, &HistoryProposition::no_detection())?;
        Ok(self.arrival_mass() + 2.0 * dn.re)
    }

    /// `max |ρ(t,t') - conj ρ(t',t)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n_samples();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| (self.rho[i * n + j] - self.rho[j * n + i].conj()).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Bi-density of first-crossing histories for a left-supported pure state.
///
/// Free evolution only: the kernel `√(M/2πi(t'-t))` is the free propagator at
/// the origin. `method` selects how `Ĉ_t` and the boundary derivatives are computed.
pub fn decoherence_density(
    psi0: &WavePacket,
    h: &Hamiltonian,
    t_max: f64,
    n_bins: usize,
    method: RestrictedMethod,
) -> Result<DecoherenceDensity> {
    require_left_support(psi0, 1e-6)?;
    if !h.is_free() {
        return Err(ToaError::Unsupported(
            "the bi-density kernel is implemented for free evolution".into(),
        ));
    }
    let times = TimeGrid::new(t_max, n_bins)?;
    let mass = psi0.mass();
    let amps = match method {
        RestrictedMethod::Images => free_boundary_amplitudes(psi0, &times),
        _ => restricted_boundary_amplitudes(psi0, h, &times, method)?,
    };
    let ct = restricted_propagate(psi0, h, t_max, method)?;
    let dnn = ct.norm_sq();
    let w = free_values_at_zero(&ct, &times, t_max);
    // d(t,N) = -i (∂C_tψ(0)/2M) conj((U_{t-T} C_Tψ)(0)) with ∂C_tψ(0) = 2iM A(t).
    let column: Vec<C64> = amps.iter().zip(&w).map(|(a, b)| a * b.conj()).collect();
    Ok(singular_density(times, amps, column, dnn, mass, mean_energy(psi0)))
}

fn singular_density(times: TimeGrid, amps: Vec<C64>, column: Vec<C64>, dnn: f64, mass: f64, omega: f64) -> DecoherenceDensity {
    let n = times.n_samples();
    let h = times.dt();
    let pref = (mass / (2.0 * PI)).sqrt();
    let rho: Vec<C64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ai = amps[i];
            let amps = &amps;
            (0..n).map(move |j| {
                if i == j {
                    return C64::default();
                }
                let s = (j as f64 - i as f64) * h;
                let phase = if s > 0.0 { -PI / 4.0 } else { PI / 4.0 };
                ai * amps[j].conj() * C64::from_polar(pref / s.abs().sqrt(), phase)
            })
        })
        .collect();
    let demod: Vec<C64> = amps
        .iter()
        .enumerate()
        .map(|(i, a)| a * C64::from_polar(1.0, omega * times.t(i)))
        .collect();
    let weights = Arc::new(CellWeights::with_frequency(times.n_steps(), h, mass, omega));
    DecoherenceDensity {
        times,
        rho,
        no_detect_column: column,
        dnn,
        diag_singularity_note: "rho(t,t) diverges as |t-t'|^(-1/2); diagonal entries are stored as 0 and \
                                window integrals use product quadrature exact for the singular weight"
            .into(),
        warnings: vec![],
        boundary_amplitudes: amps,
        kernel: Kernel::Singular { demod, weights },
        scale: 1.0,
        conditioned: false,
    }
}

/// `A(t) = ∂ₓ(Ĉ_tψ₀)(0)/(2iM)` from restricted-propagated states.
fn restricted_boundary_amplitudes(
    psi0: &WavePacket,
    h: &Hamiltonian,
    times: &TimeGrid,
    method: RestrictedMethod,
) -> Result<Vec<C64>> {
    let grid = *psi0.grid();
    check_symmetric(&grid)?;
    let mass = psi0.mass();
    let j0 = grid.zero_index();
    let mut st = RestrictedStepper::new(&grid, mass, h, times.dt(), method)?;
    let mut amps = psi0.in_position().into_amplitudes();
    amps[j0..].iter_mut().for_each(|a| *a = C64::default());
    amps[0] = C64::default();
    let n = grid.len();
    let (fwd, _) = fft_pair(n);
    let mut out = Vec::with_capacity(times.n_samples());
    let to_amp = |phi: &[C64]| -> C64 {
        let mut odd = odd_extension(phi, n);
        fwd.process(&mut odd);
        // Native FFT ordering; origin at index n/2 gives the (-1)^k factor.
        let s: C64 = odd
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != n / 2)
            .map(|(k, a)| {
                let p = crate::numerics::wave::fft_momentum(&grid, k);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                a * C64::new(0.0, p * sign)
            })
            .sum();
        s / (n as f64) / C64::new(0.0, 2.0 * mass)
    };
    out.push(to_amp(&amps));
    for _ in 0..times.n_steps() {
        st.step(&mut amps);
        out.push(to_amp(&amps));
    }
    Ok(out)
}

/// Renormalizes onto arrival: `ρ_c = ρ / d([0,T],[0,T])`, no-detection entries removed.
pub fn condition_decoherence(d: &DecoherenceDensity) -> Result<DecoherenceDensity> {
    let mass = d.arrival_mass();
    if !(mass > 1e-12) {
        return Err(ToaError::NoArrival(mass));
    }
    let mut out = d.clone();
    let s = 1.0 / mass;
    out.scale *= s;
    out.rho.par_iter_mut().for_each(|r| *r *= s);
    out.no_detect_column = vec![];
    out.dnn = 0.0;
    out.conditioned = true;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// `d_c(α, α')`.
    pub cross: C64,
    /// `|Re d_c(α, α')|`.
    pub defect: f64,
    pub diag_alpha: f64,
    pub diag_alpha_prime: f64,
}

/// Window integrals of the (conditioned) functional for two disjoint propositions.
pub fn coarse_grained_consistency(
    d: &DecoherenceDensity,
    a: &HistoryProposition,
    b: &HistoryProposition,
) -> Result<ConsistencyReport> {
    if !a.no_detection && !b.no_detection {
        let ca = a.cells(&d.times)?;
        let cb = b.cells(&d.times)?;
        if ca.iter().any(|c| cb.binary_search(c).is_ok()) {
            return Err(ToaError::Window(format!("`{}` and `{}` overlap", a.label, b.label)));
        }
    } else if a.no_detection && b.no_detection {
        return Err(ToaError::Window("N paired with itself".into()));
    }
    let cross = d.functional(a, b)?;
    Ok(ConsistencyReport {
        cross,
        defect: cross.re.abs(),
        diag_alpha: d.functional(a, a)?.re,
        diag_alpha_prime: d.functional(b, b)?.re,
    })
}

/// Gaussian width fitted to `log|A(t)|²` within `±span` of its maximum.
pub fn fitted_arrival_width(d: &DecoherenceDensity, span: f64) -> Result<f64> {
    let a = &d.boundary_amplitudes;
    ensure(!a.is_empty(), "density", "no boundary amplitudes")?;
    let (imax, _) = a
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v.norm_sqr() > acc.1 { (i, v.norm_sqr()) } else { acc });
    let tc = d.times.t(imax);
    let pts: Vec<(f64, f64)> = a
        .iter()
        .enumerate()
        .filter(|(i, v)| (d.times.t(*i) - tc).abs() <= span && v.norm_sqr() > 0.0)
        .map(|(i, v)| (d.times.t(i) - tc, v.norm_sqr().ln()))
        .collect();
    ensure(pts.len() >= 5, "span", "too few samples for a fit")?;
    // Least-squares parabola y = c0 + c1 x + c2 x².
    let mut s = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for &(x, y) in &pts {
        let b = [1.0, x, x * x];
        for i in 0..3 {
            r[i] += b[i] * y;
            for j in 0..3 {
                s[i][j] += b[i] * b[j];
            }
        }
    }
    let m = nalgebra::Matrix3::from_fn(|i, j| s[i][j]);
    let c = m
        .lu()
        .solve(&nalgebra::Vector3::new(r[0], r[1], r[2]))
        .ok_or_else(|| invalid("fit", "singular normal equations"))?;
    ensure(c[2] < 0.0, "fit", "log-density is not concave near the peak")?;
    Ok((-1.0 / c[2]).sqrt())
}

/// Survival `‖(Q Û(T/n) Q)ⁿψ₀‖²` with the smooth mask `Q(x) = ½ erfc(x/η)`
/// standing in for `P₋`.
pub fn smeared_zeno_survival(psi0: &WavePacket, h: &Hamiltonian, eta: f64, t_max: f64, n: usize) -> Result<f64> {
    ensure(eta > 0.0, "eta", "must be positive")?;
    ensure(n >= 1, "n", "must be >= 1")?;
    let grid = *psi0.grid();
    h.validate(&grid)?;
    let q: Vec<f64> = grid.xs().iter().map(|&x| 0.5 * erfc(x / eta)).collect();
    let mut ev = h.evolver(&grid, psi0.mass(), t_max / n as f64);
    let mut psi = psi0.in_position().into_amplitudes();
    psi.iter_mut().zip(&q).for_each(|(a, m)| *a *= m);
    for _ in 0..n {
        ev.step(&mut psi);
        psi.iter_mut().zip(&q).for_each(|(a, m)| *a *= m);
    }
    Ok(psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx())
}
