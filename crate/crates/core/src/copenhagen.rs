//! Sequential-reduction chains and the no-reduction continuum densities.

use num_complex::Complex64 as C64;

use crate::error::{ensure, invalid, Result};
use crate::numerics::wave::require_left_support;
use crate::numerics::{cumulative, Grid1D, Hamiltonian, TimeGrid, WavePacket};
use crate::toa::ToaDistribution;

/// Diagonal position masks for `(-∞, 0)` and `[0, ∞)`.
#[derive(Debug, Clone)]
pub struct HalfLineProjectors {
    pub p_minus: Vec<f64>,
    pub p_plus: Vec<f64>,
}

impl HalfLineProjectors {
    pub fn new(grid: &Grid1D) -> Self {
        let j0 = grid.zero_index();
        let p_minus: Vec<f64> = (0..grid.len()).map(|j| if j < j0 { 1.0 } else { 0.0 }).collect();
        let p_plus = p_minus.iter().map(|m| 1.0 - m).collect();
        Self { p_minus, p_plus }
    }

    /// Mask of the strip `[-δx/2, δx/2]`.
    pub fn strip(grid: &Grid1D, delta_x: f64) -> Result<Vec<f64>> {
        ensure(delta_x >= grid.dx(), "delta_x", "strip must be at least one cell wide")?;
        Ok(grid
            .xs()
            .iter()
            .map(|x| if x.abs() <= 0.5 * delta_x + 1e-12 * grid.dx() { 1.0 } else { 0.0 })
            .collect())
    }
}

pub(crate) fn project(psi: &mut [C64], j0: usize, keep_left: bool) {
    if keep_left {
        psi[j0..].iter_mut().for_each(|a| *a = C64::default());
    } else {
        psi[..j0].iter_mut().for_each(|a| *a = C64::default());
    }
}

fn mass(psi: &[C64], dx: f64) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx
}

/// Detector resolution parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub tau: f64,
    pub v: f64,
    pub delta_x: f64,
}

impl DetectorConfig {
    pub fn validate(&self, t_max: f64, dx: f64) -> Result<()> {
        ensure(self.tau > 0.0 && self.tau < t_max, "tau", "need 0 < tau < T")?;
        ensure(self.v > 0.0, "v", "must be positive")?;
        ensure(self.delta_x >= dx, "delta_x", "must be >= dx")
    }
}

/// `p_k = ‖P₊U(δt)[P₋U(δt)]^{k-1}ψ₀‖²` with `δt = T/n`; not additive over `k`.
pub fn reduction_chain_probability(
    psi0: &WavePacket,
    h: &Hamiltonian,
    k: usize,
    n: usize,
    t_max: f64,
) -> Result<f64> {
    ensure(n >= 1 && (1..=n).contains(&k), "k", format!("need 1 <= k <= n, got k={k}, n={n}"))?;
    ensure(t_max > 0.0, "T", "must be positive")?;
    require_left_support(psi0, 1e-6)?;
    let grid = *psi0.grid();
    h.validate(&grid)?;
    let j0 = grid.zero_index();
    let mut ev = h.evolver(&grid, psi0.mass(), t_max / n as f64);
    let mut psi = psi0.in_position().into_amplitudes();
    for _ in 1..k {
        ev.step(&mut psi);
        project(&mut psi, j0, true);
    }
    ev.step(&mut psi);
    project(&mut psi, j0, false);
    Ok(mass(&psi, grid.dx()))
}

/// All chain values `p_1..p_n` in one sweep.
pub fn reduction_chain(psi0: &WavePacket, h: &Hamiltonian, n: usize, t_max: f64) -> Result<Vec<f64>> {
    ensure(n >= 1, "n", "must be >= 1")?;
    require_left_support(psi0, 1e-6)?;
    let grid = *psi0.grid();
    h.validate(&grid)?;
    let j0 = grid.zero_index();
    let mut ev = h.evolver(&grid, psi0.mass(), t_max / n as f64);
    let mut psi = psi0.in_position().into_amplitudes();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        ev.step(&mut psi);
        out.push(psi[j0..].iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx());
        project(&mut psi, j0, true);
    }
    Ok(out)
}

/// `‖(P₋U(T/n)P₋)ⁿψ₀‖²`.
pub fn zeno_survival(psi0: &WavePacket, h: &Hamiltonian, t_max: f64, n: usize) -> Result<f64> {
    ensure(n >= 1, "n", "must be >= 1")?;
    ensure(t_max >= 0.0, "T", "must be >= 0")?;
    require_left_support(psi0, 1e-6)?;
    let grid = *psi0.grid();
    h.validate(&grid)?;
    let j0 = grid.zero_index();
    let mut ev = h.evolver(&grid, psi0.mass(), t_max / n as f64);
    let mut psi = psi0.in_position().into_amplitudes();
    project(&mut psi, j0, true);
    for _ in 0..n {
        ev.step(&mut psi);
        project(&mut psi, j0, true);
    }
    Ok(mass(&psi, grid.dx()))
}

/// `Tr(ρ̂_t P̂₊)` and `|ψ_t(0)|²` on a time grid.
pub struct Snapshots {
    pub times: TimeGrid,
    pub right_mass: Vec<f64>,
    pub density_at_zero: Vec<f64>,
}

pub fn snapshots(psi0: &WavePacket, h: &Hamiltonian, t_max: f64, n_steps: usize) -> Result<Snapshots> {
    let times = TimeGrid::new(t_max, n_steps)?;
    let grid = *psi0.grid();
    h.validate(&grid)?;
    let j0 = grid.zero_index();
    let dx = grid.dx();
    let x0 = grid.x(j0);
    let mut ev = h.evolver(&grid, psi0.mass(), times.dt());
    let mut psi = psi0.in_position().into_amplitudes();
    let mut right_mass = Vec::with_capacity(times.n_samples());
    let mut density_at_zero = Vec::with_capacity(times.n_samples());
    for i in 0..=n_steps {
        if i > 0 {
            ev.step(&mut psi);
        }
        right_mass.push((psi[j0..].iter().map(|a| a.norm_sqr()).sum::<f64>() * dx).min(1.0));
        // Quadratic through the three samples around the origin, evaluated at x = 0.
        let (a, b, c) = (psi[j0 - 1].norm_sqr(), psi[j0].norm_sqr(), psi[j0 + 1].norm_sqr());
        let u = -x0 / dx;
        let v = b + 0.5 * u * (c - a) + 0.5 * u * u * (a - 2.0 * b + c);
        density_at_zero.push(v.max(0.0));
    }
    Ok(Snapshots {
        times,
        right_mass,
        density_at_zero,
    })
}

/// Density from a hazard rate `λ(t)`: `p = λ e^{-∫λ}`, `p_N = e^{-∫₀ᵀλ}`.
fn from_hazard(times: TimeGrid, hazard: Vec<f64>) -> Result<ToaDistribution> {
    let log_survival = cumulative(&hazard, times.dt());
    let density = hazard
        .iter()
        .zip(&log_survival)
        .map(|(l, g)| (l * (-g).exp()).max(0.0))
        .collect();
    let p_n = (-log_survival[log_survival.len() - 1]).exp();
    ToaDistribution::new(times, density, p_n)
}

/// Continuum form of the no-reduction recursion with temporal resolution `τ`:
/// hazard `-(1/τ) ln(1 - Tr ρ̂_t P̂₊)`, survival `exp[(1/τ)∫ ln Tr ρ̂_s P̂₋]`.
pub fn no_reduction_density_tau(
    psi0: &WavePacket,
    h: &Hamiltonian,
    tau: f64,
    t_max: f64,
    n_steps: usize,
) -> Result<ToaDistribution> {
    let s = snapshots(psi0, h, t_max, n_steps)?;
    if !(tau >= 5.0 * s.times.dt()) {
        return Err(invalid("tau", format!("tau = {tau} must be >= 5 dt = {}", 5.0 * s.times.dt())));
    }
    hazard_tau(&s, tau)
}

pub(crate) fn hazard_tau(s: &Snapshots, tau: f64) -> Result<ToaDistribution> {
    let hazard = s
        .right_mass
        .iter()
        .map(|&p| -(1.0 - p).max(1e-300).ln() / tau)
        .collect();
    from_hazard(s.times, hazard)
}

/// Strip detector: `p(t) = v ρ_t(0) exp[-v∫₀ᵗ ρ_s(0) ds]`.
pub fn strip_detector_density(
    psi0: &WavePacket,
    h: &Hamiltonian,
    v: f64,
    t_max: f64,
    n_steps: usize,
) -> Result<ToaDistribution> {
    ensure(v >= 0.0 && v.is_finite(), "v", "must be >= 0")?;
    let s = snapshots(psi0, h, t_max, n_steps)?;
    hazard_strip(&s, v)
}

pub(crate) fn hazard_strip(s: &Snapshots, v: f64) -> Result<ToaDistribution> {
    from_hazard(s.times, s.density_at_zero.iter().map(|r| v * r).collect())
}

/// The discrete recursion `p_k = Tr(ρ̂_{t_k}P̂₊) Π_{i<k}[1 - Tr(ρ̂_{t_i}P̂₊)]` at `t_k = kτ`.
pub fn no_reduction_discrete(psi0: &WavePacket, h: &Hamiltonian, tau: f64, n_bins: usize) -> Result<(Vec<f64>, f64)> {
    ensure(tau > 0.0, "tau", "must be positive")?;
    let s = snapshots(psi0, h, tau * n_bins as f64, n_bins)?;
    let mut surv = 1.0;
    let mut out = Vec::with_capacity(n_bins);
    for &p in &s.right_mass[1..] {
        out.push(p * surv);
        surv *= 1.0 - p;
    }
    Ok((out, surv))
}

/// `max_t |p_τ - p_{2τ}| / max p_τ`.
pub fn tau_sensitivity(psi0: &WavePacket, h: &Hamiltonian, tau: f64, t_max: f64, n_steps: usize) -> Result<f64> {
    let s = snapshots(psi0, h, t_max, n_steps)?;
    if !(tau >= 5.0 * s.times.dt()) {
        return Err(invalid("tau", "must be >= 5 dt"));
    }
    let a = hazard_tau(&s, tau)?;
    let b = hazard_tau(&s, 2.0 * tau)?;
    let peak = a.density.iter().copied().fold(0.0, f64::max);
    let diff = a
        .density
        .iter()
        .zip(&b.density)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(diff / peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::GaussianSpec;

    fn packet() -> WavePacket {
        let grid = Grid1D::symmetric(40.0, 1024).unwrap();
        GaussianSpec::with_sigma0(6.0, 5.0, 1.0).left_supported(grid, 1.0).unwrap()
    }

    #[test]
    fn projectors_partition() {
        let g = Grid1D::symmetric(4.0, 64).unwrap();
        let p = HalfLineProjectors::new(&g);
        for j in 0..64 {
            assert_eq!(p.p_minus[j] + p.p_plus[j], 1.0);
            assert_eq!(p.p_minus[j] * p.p_plus[j], 0.0);
        }
        let s = HalfLineProjectors::strip(&g, 0.5).unwrap();
        assert_eq!(s.iter().sum::<f64>(), 5.0);
        assert!(HalfLineProjectors::strip(&g, 0.01).is_err());
    }

    #[test]
    fn static_hamiltonian_never_crosses() {
        let w = packet();
        for k in 1..=5 {
            assert!(reduction_chain_probability(&w, &Hamiltonian::Zero, k, 5, 2.0).unwrap() < 1e-12);
        }
        assert!((zeno_survival(&w, &Hamiltonian::Zero, 2.0, 7).unwrap() - 1.0).abs() < 1e-10);
        let d = no_reduction_density_tau(&w, &Hamiltonian::Zero, 0.1, 2.0, 200).unwrap();
        assert!(d.density.iter().all(|p| *p < 1e-12));
        assert!((d.no_detect - 1.0).abs() < 1e-10);
        let s = strip_detector_density(&w, &Hamiltonian::Free, 0.0, 2.0, 200).unwrap();
        assert!(s.density.iter().all(|p| *p == 0.0));
        assert_eq!(s.no_detect, 1.0);
    }

    #[test]
    fn chain_of_length_one_is_direct_evolution() {
        let w = packet();
        let p1 = reduction_chain_probability(&w, &Hamiltonian::Free, 1, 10, 2.0).unwrap();
        let direct = w.evolve_free(0.2).unwrap().mass_right();
        assert!((p1 - direct).abs() < 1e-12);
        let s1 = zeno_survival(&w, &Hamiltonian::Free, 2.0, 1).unwrap();
        let direct = 1.0 - w.evolve_free(2.0).unwrap().mass_right();
        assert!((s1 - direct).abs() < 1e-10, "{s1} {direct}");
        assert!(reduction_chain_probability(&w, &Hamiltonian::Free, 0, 10, 2.0).is_err());
        assert!(reduction_chain_probability(&w, &Hamiltonian::Free, 11, 10, 2.0).is_err());
    }

    #[test]
    fn tau_must_exceed_step() {
        let w = packet();
        assert!(no_reduction_density_tau(&w, &Hamiltonian::Free, 0.01, 2.0, 400).is_err());
    }
}
