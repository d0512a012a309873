//! Classical time of arrival as a first-passage problem for a generator `L`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure, invalid, Result, ToaError};
use crate::numerics::special::{erf, erfc};
use crate::numerics::{integrate, tridiag, Grid1D, TimeGrid};
use crate::toa::ToaDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StochasticGenerator {
    /// `∂ρ/∂t = (D/2)∂²ρ`, i.e. `⟨x²⟩ = Dt`.
    Diffusion { d: f64 },
    /// Two states; `rate_b` moves 0 → 1 (the crossing), `rate_a` moves 1 → 0.
    TwoLevel { rate_a: f64, rate_b: f64 },
}

impl StochasticGenerator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Diffusion { d } => ensure(d > 0.0 && d.is_finite(), "D", "must be positive"),
            Self::TwoLevel { rate_a, rate_b } => {
                ensure(rate_a >= 0.0 && rate_a.is_finite(), "rate_a", "must be >= 0")?;
                ensure(rate_b >= 0.0 && rate_b.is_finite(), "rate_b", "must be >= 0")
            }
        }
    }

    fn diffusion_constant(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::Diffusion { d } => Ok(d),
            Self::TwoLevel { .. } => Err(ToaError::Unsupported(
                "two-level generator has no spatial boundary".into(),
            )),
        }
    }

    /// Lattice form on `grid` with reflecting outer ends.
    pub fn discretize(&self, grid: &Grid1D) -> Result<DiscreteGenerator> {
        let d = self.diffusion_constant()?;
        Ok(DiscreteGenerator::build(d, grid.dx(), grid.len(), false))
    }

    /// Two-level rate matrix acting on `(ρ₀, ρ₁)`.
    pub fn two_level_matrix(&self) -> Result<[[f64; 2]; 2]> {
        self.validate()?;
        match *self {
            Self::TwoLevel { rate_a, rate_b } => Ok([[-rate_b, rate_a], [rate_b, -rate_a]]),
            Self::Diffusion { .. } => Err(ToaError::Unsupported("not a two-level generator".into())),
        }
    }
}

/// Tridiagonal lattice generator `(D/2dx²)(ρ_{j-1} - 2ρ_j + ρ_{j+1})`.
///
/// The left end reflects. The right end reflects too unless `absorbing`, in
/// which case mass leaving the last site is lost.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DiscreteGenerator {
    fn build(d: f64, dx: f64, m: usize, absorbing: bool) -> Self {
        let c = 0.5 * d / (dx * dx);
        let mut lower = vec![c; m];
        let mut upper = vec![c; m];
        let mut diag = vec![-2.0 * c; m];
        lower[0] = 0.0;
        upper[m - 1] = 0.0;
        diag[0] = -c;
        if !absorbing {
            diag[m - 1] = -c;
        }
        Self { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }
    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Column sums; zero for a conservative generator.
    pub fn column_sums(&self) -> Vec<f64> {
        let m = self.len();
        (0..m)
            .map(|j| {
                let mut s = self.diag[j];
                if j > 0 {
                    s += self.upper[j - 1];
                }
                if j + 1 < m {
                    s += self.lower[j + 1];
                }
                s
            })
            .collect()
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.lower[1..]
            .iter()
            .chain(&self.upper[..self.len() - 1])
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let m = self.len();
        (0..m)
            .map(|j| {
                let mut s = self.diag[j] * rho[j];
                if j > 0 {
                    s += self.lower[j] * rho[j - 1];
                }
                if j + 1 < m {
                    s += self.upper[j] * rho[j + 1];
                }
                s
            })
            .collect()
    }
}

/// Implicit stepper for `dρ/dt = Aρ`: Crank–Nicolson with backward-Euler start-up.
struct Stepper {
    a: DiscreteGenerator,
    h: f64,
    cn_lhs: (Vec<f64>, Vec<f64>, Vec<f64>),
    be_lhs: (Vec<f64>, Vec<f64>, Vec<f64>),
    work: Vec<f64>,
    rhs: Vec<f64>,
}

impl Stepper {
    fn new(a: DiscreteGenerator, h: f64) -> Self {
        let lhs = |s: f64| {
            (
                a.lower.iter().map(|x| -s * x).collect::<Vec<_>>(),
                a.diag.iter().map(|x| 1.0 - s * x).collect::<Vec<_>>(),
                a.upper.iter().map(|x| -s * x).collect::<Vec<_>>(),
            )
        };
        let cn_lhs = lhs(0.5 * h);
        let be_lhs = lhs(0.5 * h);
        let m = a.len();
        Self {
            a,
            h,
            cn_lhs,
            be_lhs,
            work: Vec::with_capacity(m),
            rhs: vec![0.0; m],
        }
    }

    fn cn(&mut self, rho: &mut [f64]) {
        let m = rho.len();
        let s = 0.5 * self.h;
        for j in 0..m {
            let mut v = (1.0 + s * self.a.diag[j]) * rho[j];
            if j > 0 {
                v += s * self.a.lower[j] * rho[j - 1];
            }
            if j + 1 < m {
                v += s * self.a.upper[j] * rho[j + 1];
            }
            self.rhs[j] = v;
        }
        let (l, d, u) = &self.cn_lhs;
        tridiag::solve(l, d, u, &mut self.rhs, &mut self.work);
        rho.copy_from_slice(&self.rhs);
    }

    /// Backward Euler with step h/2.
    fn half_be(&mut self, rho: &mut [f64]) {
        let (l, d, u) = &self.be_lhs;
        tridiag::solve(l, d, u, rho, &mut self.work);
    }

    /// Advances by `k` steps of size `h`; the first step is replaced by two
    /// damped half steps when `smooth_start`.
    fn advance(&mut self, rho: &mut [f64], k: usize, smooth_start: bool) {
        for i in 0..k {
            if i == 0 && smooth_start {
                self.half_be(rho);
                self.half_be(rho);
            } else {
                self.cn(rho);
            }
        }
    }
}

fn substeps(d: f64, dx: f64, span: f64) -> usize {
    let h_max = 4.0 * dx * dx / d;
    ((span / h_max).ceil() as usize).max(4)
}

/// Probability density sampled on a grid.
#[derive(Debug, Clone)]
pub struct ClassicalDensity {
    grid: Grid1D,
    values: Vec<f64>,
}

impl ClassicalDensity {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        ensure(values.len() == grid.len(), "rho", "length must match the grid")?;
        ensure(
            values.iter().all(|v| *v >= 0.0 && v.is_finite()),
            "rho",
            "must be non-negative and finite",
        )?;
        let mass: f64 = values.iter().sum::<f64>() * grid.dx();
        ensure((mass - 1.0).abs() < 1e-8, "rho", format!("must integrate to 1, got {mass}"))?;
        Ok(Self { grid, values })
    }

    /// Narrow Gaussian of standard deviation `2dx` standing in for `δ(x - x0)`.
    pub fn point_mass(grid: Grid1D, x0: f64) -> Result<Self> {
        let s = 2.0 * grid.dx();
        let mut v: Vec<f64> = grid.xs().iter().map(|x| (-(x - x0).powi(2) / (2.0 * s * s)).exp()).collect();
        let tot: f64 = v.iter().sum::<f64>() * grid.dx();
        ensure(tot > 0.0, "x0", "outside the grid")?;
        v.iter_mut().for_each(|x| *x /= tot);
        Self::new(grid, v)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn mass_right(&self) -> f64 {
        self.values[self.grid.zero_index()..].iter().sum::<f64>() * self.grid.dx()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictionMethod {
    /// Absorbing (Dirichlet) boundary at `x = 0`.
    Dirichlet,
    /// `(χ₋ e^{Lt/n} χ₋)ⁿ` with the unrestricted semigroup on the full grid.
    Trotter { n: usize },
}

/// Restricted semigroup `K_t` acting on densities supported on `x < 0`.
#[derive(Debug, Clone)]
pub struct ClassicalKernel {
    grid: Grid1D,
    d: f64,
    t: f64,
    method: RestrictionMethod,
}

pub fn restricted_classical_propagator(
    gen: &StochasticGenerator,
    grid: Grid1D,
    t: f64,
    method: RestrictionMethod,
) -> Result<ClassicalKernel> {
    let d = gen.diffusion_constant()?;
    ensure(t > 0.0 && t.is_finite(), "t", "must be positive")?;
    if let RestrictionMethod::Trotter { n } = method {
        ensure(n >= 1, "n", "Trotter steps must be >= 1")?;
    }
    Ok(ClassicalKernel { grid, d, t, method })
}

impl ClassicalKernel {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// `K_t ρ` on the full grid (zero on `x ≥ 0`).
    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let j0 = self.grid.zero_index();
        let dx = self.grid.dx();
        match self.method {
            RestrictionMethod::Dirichlet => {
                let a = DiscreteGenerator::build(self.d, dx, j0, true);
                let k = substeps(self.d, dx, self.t);
                let mut st = Stepper::new(a, self.t / k as f64);
                let mut r = rho[..j0].to_vec();
                st.advance(&mut r, k, true);
                r.resize(n, 0.0);
                r
            }
            RestrictionMethod::Trotter { n: steps } => {
                let a = DiscreteGenerator::build(self.d, dx, n, false);
                let span = self.t / steps as f64;
                let k = substeps(self.d, dx, span);
                let mut st = Stepper::new(a, span / k as f64);
                let mut r = rho.to_vec();
                r[j0..].iter_mut().for_each(|x| *x = 0.0);
                for _ in 0..steps {
                    st.advance(&mut r, k, true);
                    r[j0..].iter_mut().for_each(|x| *x = 0.0);
                }
                r
            }
        }
    }

    /// Kernel column `K_t(·, x_j)` as a density in `x`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.grid.len()];
        e[j] = 1.0 / self.grid.dx();
        self.apply(&e)
    }
}

/// Free-space Wiener kernel with an absorbing wall at 0 (method of images).
pub fn wiener_restricted_kernel(d: f64, x: f64, x_prime: f64, t: f64) -> f64 {
    if x >= 0.0 || x_prime >= 0.0 {
        return 0.0;
    }
    let s = 2.0 * d * t;
    ((-(x - x_prime).powi(2) / s).exp() - (-(x + x_prime).powi(2) / s).exp()) / (PI * s).sqrt()
}

/// First-passage density of Brownian motion started a distance `l` from the wall.
pub fn wiener_first_passage_density(d: f64, l: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (l / t) * (1.0 / (2.0 * PI * d * t)).sqrt() * (-l * l / (2.0 * d * t)).exp()
}

/// Probability of not having reached the wall by `T`: `erf(l/√(2DT))`.
pub fn wiener_survival(d: f64, l: f64, t: f64) -> f64 {
    erf(l / (2.0 * d * t).sqrt())
}

/// Probability of arrival in `[0, t]`: `erfc(l/√(2Dt))`.
pub fn wiener_arrival_cdf(d: f64, l: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    erfc(l / (2.0 * d * t).sqrt())
}

/// `p(t) = ∫dx [χ₊ L K_t ρ₀](x)` on a time grid, with `p_N = ∫K_Tρ₀`.
pub fn first_passage_density(
    gen: &StochasticGenerator,
    rho0: &ClassicalDensity,
    t_max: f64,
    n_steps: usize,
) -> Result<ToaDistribution> {
    let d = gen.diffusion_constant()?;
    let disc = gen.discretize(rho0.grid())?;
    let scale = disc.diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if disc.column_sums().iter().any(|s| s.abs() > 1e-12 * scale) || disc.min_off_diagonal() < 0.0 {
        return Err(invalid("generator", "not conservative"));
    }
    let right = rho0.mass_right();
    if right > 1e-8 {
        return Err(ToaError::SupportViolation { mass: right });
    }
    let times = TimeGrid::new(t_max, n_steps)?;
    let grid = rho0.grid();
    let dx = grid.dx();
    let j0 = grid.zero_index();
    let a = DiscreteGenerator::build(d, dx, j0, true);
    let c = a.upper[0];
    let k = substeps(d, dx, times.dt());
    let mut st = Stepper::new(a, times.dt() / k as f64);
    let mut r = rho0.values()[..j0].to_vec();
    let mut density = Vec::with_capacity(times.n_samples());
    density.push(c * r[j0 - 1] * dx);
    for i in 0..n_steps {
        st.advance(&mut r, k, i == 0);
        density.push(c * r[j0 - 1] * dx);
    }
    let survival = r.iter().sum::<f64>() * dx;
    ToaDistribution::new(times, density, survival)
}

/// Discrete-time first-passage bins `P_n = ∫dx [χ₊ e^{Lδt}(χ₋ e^{Lδt})^{n}ρ₀]`,
/// `n = 0..n_bins`, and the survival after the last bin.
pub fn discrete_passage_bins(
    gen: &StochasticGenerator,
    rho0: &ClassicalDensity,
    dt: f64,
    n_bins: usize,
    substeps_per_bin: usize,
) -> Result<(Vec<f64>, f64)> {
    let d = gen.diffusion_constant()?;
    ensure(dt > 0.0, "dt", "must be positive")?;
    ensure(substeps_per_bin >= 1, "substeps_per_bin", "must be >= 1")?;
    let grid = rho0.grid();
    let dx = grid.dx();
    let j0 = grid.zero_index();
    let a = DiscreteGenerator::build(d, dx, grid.len(), false);
    let mut st = Stepper::new(a, dt / substeps_per_bin as f64);
    let mut r = rho0.values().to_vec();
    r[j0..].iter_mut().for_each(|x| *x = 0.0);
    let mut bins = Vec::with_capacity(n_bins);
    for _ in 0..n_bins {
        // Each projection introduces a kink; restart with damped steps.
        st.advance(&mut r, substeps_per_bin, true);
        bins.push(r[j0..].iter().sum::<f64>() * dx);
        r[j0..].iter_mut().for_each(|x| *x = 0.0);
    }
    let survival = r.iter().sum::<f64>() * dx;
    Ok((bins, survival))
}

/// `p(t) = b e^{-bt}`, `p_N = e^{-bT}` for the decay 0 → 1 from state 0.
pub fn two_level_transition_density(rate_b: f64, t_max: f64, n_steps: usize) -> Result<ToaDistribution> {
    let gen = StochasticGenerator::TwoLevel { rate_a: 0.0, rate_b };
    let m = gen.two_level_matrix()?;
    let times = TimeGrid::new(t_max, n_steps)?;
    // Restricted to {0} the generator is the 1×1 block m[0][0]; the flux into 1 is m[1][0]·K_t.
    let k = |t: f64| (m[0][0] * t).exp();
    let density = times.ts().iter().map(|&t| m[1][0] * k(t)).collect();
    ToaDistribution::new(times, density, k(t_max))
}

/// Arrival sample from [`monte_carlo_first_passage`].
#[derive(Debug, Clone)]
pub struct EmpiricalToa {
    /// Sorted arrival times of the walkers that reached `x = 0` before `T`.
    pub arrivals: Vec<f64>,
    pub n_walkers: usize,
    pub no_detect: f64,
    pub no_detect_stderr: f64,
    pub histogram: ToaDistribution,
    pub n_streams: usize,
}

impl EmpiricalToa {
    /// Kolmogorov–Smirnov distance between the empirical arrival sub-distribution
    /// and `cdf(t) = P(arrival ≤ t)`.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.n_walkers as f64;
        let mut worst = 0.0f64;
        for (i, &t) in self.arrivals.iter().enumerate() {
            let f = cdf(t);
            worst = worst.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
        }
        let t_end = self.histogram.times.t_max();
        worst.max((cdf(t_end) - self.arrivals.len() as f64 / n).abs())
    }
}

const MC_STREAMS: usize = 256;

/// Euler–Maruyama walkers with a Brownian-bridge crossing test between steps.
///
/// Walkers are split into a fixed number of independent ChaCha streams derived
/// from `seed`, so the result does not depend on the thread count.
pub fn monte_carlo_first_passage(
    gen: &StochasticGenerator,
    rho0: &ClassicalDensity,
    t_max: f64,
    n_walkers: usize,
    seed: u64,
    n_time_steps: usize,
    n_bins: usize,
) -> Result<EmpiricalToa> {
    let d = gen.diffusion_constant()?;
    ensure(n_walkers >= 10_000, "n_walkers", "must be >= 1e4")?;
    ensure(n_time_steps >= 1, "n_time_steps", "must be >= 1")?;
    let right = rho0.mass_right();
    if right > 1e-8 {
        return Err(ToaError::SupportViolation { mass: right });
    }
    let grid = *rho0.grid();
    let dx = grid.dx();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for v in rho0.values() {
        acc += v * dx;
        cdf.push(acc);
    }
    let h = t_max / n_time_steps as f64;
    let sd = (d * h).sqrt();
    let per = n_walkers.div_ceil(MC_STREAMS);
    let mut arrivals: Vec<f64> = (0..MC_STREAMS)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let count = per.min(n_walkers.saturating_sub(s * per));
            let mut out = Vec::new();
            for _ in 0..count {
                let u: f64 = rng.random::<f64>() * acc;
                let j = cdf.partition_point(|&c| c < u).min(grid.len() - 1);
                let mut x = grid.x(j) + (rng.random::<f64>() - 0.5) * dx;
                if x >= 0.0 {
                    out.push(0.0);
                    continue;
                }
                for k in 0..n_time_steps {
                    let z: f64 = rng.sample(StandardNormal);
                    let y = x + sd * z;
                    let t0 = k as f64 * h;
                    if y >= 0.0 {
                        out.push(t0 + h * (-x) / (y - x));
                        break;
                    }
                    let pc = (-2.0 * x * y / (d * h)).exp();
                    if rng.random::<f64>() < pc {
                        out.push(t0 + h * rng.random::<f64>());
                        break;
                    }
                    x = y;
                }
            }
            out
        })
        .collect();
    arrivals.sort_by(|a, b| a.total_cmp(b));
    let n = n_walkers as f64;
    let p_n = 1.0 - arrivals.len() as f64 / n;
    let times = TimeGrid::new(t_max, n_bins)?;
    let bw = times.dt();
    let mut counts = vec![0.0; n_bins + 1];
    for &t in &arrivals {
        let i = ((t / bw).round() as usize).min(n_bins);
        counts[i] += 1.0;
    }
    let mut density: Vec<f64> = counts.iter().map(|c| c / (n * bw)).collect();
    // Edge samples own half a bin.
    density[0] *= 2.0;
    density[n_bins] *= 2.0;
    let histogram = ToaDistribution::new(times, density, p_n)?;
    Ok(EmpiricalToa {
        arrivals,
        n_walkers,
        no_detect: p_n,
        no_detect_stderr: (p_n * (1.0 - p_n) / n).sqrt(),
        histogram,
        n_streams: MC_STREAMS,
    })
}

/// L¹ distance between a sampled density and a reference function on the same grid.
pub fn l1_error<F: Fn(f64) -> f64>(dist: &ToaDistribution, reference: F) -> f64 {
    let e: Vec<f64> = dist
        .times
        .ts()
        .iter()
        .zip(&dist.density)
        .map(|(&t, p)| (p - reference(t)).abs())
        .collect();
    integrate(&e, dist.times.dt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::symmetric(16.0, 512).unwrap()
    }

    #[test]
    fn generator_is_conservative() {
        let g = StochasticGenerator::Diffusion { d: 1.3 };
        let a = g.discretize(&grid()).unwrap();
        let scale = a.diag[1].abs();
        assert!(a.column_sums().iter().all(|s| s.abs() < 1e-14 * scale));
        assert!(a.min_off_diagonal() >= 0.0);
        assert!(StochasticGenerator::Diffusion { d: -1.0 }.validate().is_err());
        assert!(StochasticGenerator::TwoLevel { rate_a: 0.0, rate_b: 1.0 }
            .discretize(&grid())
            .is_err());
    }

    #[test]
    fn two_level_rejected_by_kernel() {
        let g = StochasticGenerator::TwoLevel { rate_a: 1.0, rate_b: 1.0 };
        assert!(restricted_classical_propagator(&g, grid(), 1.0, RestrictionMethod::Dirichlet).is_err());
    }

    #[test]
    fn two_level_decay() {
        let d = two_level_transition_density(0.5, 40.0, 4000).unwrap();
        assert!((d.density[0] - 0.5).abs() < 1e-15);
        assert!((d.no_detect - (-20.0f64).exp()).abs() < 1e-15);
        assert!(d.mass_defect() < 1e-10);
        let mean = d.mean_arrival_time().unwrap();
        assert!((mean - 2.0).abs() / 2.0 < 0.01);
        let z = two_level_transition_density(0.0, 5.0, 10).unwrap();
        assert!(z.density.iter().all(|p| *p == 0.0));
        assert_eq!(z.no_detect, 1.0);
    }

    #[test]
    fn conditional_two_level() {
        let b = 0.5;
        let t = 3.0;
        let d = two_level_transition_density(b, t, 600).unwrap();
        let c = d.condition_on_arrival().unwrap();
        for (i, p) in c.density.iter().enumerate() {
            let tt = c.times.t(i);
            let expect = b * (-b * tt).exp() / (1.0 - (-b * t).exp());
            assert!((p - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn support_violation() {
        let g = StochasticGenerator::Diffusion { d: 1.0 };
        let rho = ClassicalDensity::point_mass(grid(), 1.0).unwrap();
        assert!(matches!(
            first_passage_density(&g, &rho, 1.0, 10),
            Err(ToaError::SupportViolation { .. })
        ));
    }
}
