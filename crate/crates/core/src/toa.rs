use crate::error::{ensure, Result, ToaError};
use crate::numerics::{cumulative, integrate, TimeGrid};

/// Distribution on the sample space `[0, T] ∪ {N}`: a sampled density plus the
/// isolated no-detection mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaDistribution {
    pub times: TimeGrid,
    pub density: Vec<f64>,
    pub no_detect: f64,
}

impl ToaDistribution {
    pub fn new(times: TimeGrid, density: Vec<f64>, no_detect: f64) -> Result<Self> {
        ensure(
            density.len() == times.n_samples(),
            "density",
            format!("expected {} samples, got {}", times.n_samples(), density.len()),
        )?;
        ensure(
            density.iter().all(|p| p.is_finite()),
            "density",
            "contains non-finite values",
        )?;
        ensure(
            no_detect.is_finite(),
            "no_detect",
            "must be finite",
        )?;
        Ok(Self {
            times,
            density,
            no_detect,
        })
    }

    pub fn detected(&self) -> f64 {
        integrate(&self.density, self.times.dt())
    }

    /// `|∫p + p_N - 1|`.
    pub fn mass_defect(&self) -> f64 {
        (self.detected() + self.no_detect - 1.0).abs()
    }

    pub fn min_density(&self) -> f64 {
        self.density.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Probability of detection inside `[t1, t2]`, from the running integral.
    pub fn window(&self, t1: f64, t2: f64) -> f64 {
        let c = self.cdf();
        interp(&self.times.ts(), &c, t2) - interp(&self.times.ts(), &c, t1)
    }

    /// Running detected mass `∫₀ᵗ p`.
    pub fn cdf(&self) -> Vec<f64> {
        cumulative(&self.density, self.times.dt())
    }

    /// Time of the largest density sample, refined by a parabola through its neighbours.
    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let dt = self.times.dt();
        if i == 0 || i + 1 >= self.density.len() {
            return self.times.t(i);
        }
        let (a, b, c) = (self.density[i - 1], self.density[i], self.density[i + 1]);
        let den = a - 2.0 * b + c;
        let shift = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
        self.times.t(i) + shift * dt
    }

    /// Renormalizes onto detected outcomes: density / (1 - p_N), p_N = 0.
    pub fn condition_on_arrival(&self) -> Result<ToaDistribution> {
        let arrived = self.detected();
        if !(arrived > 0.0) || self.no_detect >= 1.0 {
            return Err(ToaError::NoArrival(arrived));
        }
        let s = 1.0 / arrived;
        Ok(Self {
            times: self.times,
            density: self.density.iter().map(|p| p * s).collect(),
            no_detect: 0.0,
        })
    }

    /// Mean arrival time of the conditional distribution.
    pub fn mean_arrival_time(&self) -> Result<f64> {
        let c = self.condition_on_arrival()?;
        let tp: Vec<f64> = c
            .density
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.times.t(i))
            .collect();
        Ok(integrate(&tp, self.times.dt()))
    }
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let h = xs[1] - xs[0];
    let i = (((x - xs[0]) / h).floor() as usize).min(n - 2);
    let w = (x - xs[i]) / h;
    ys[i] * (1.0 - w) + ys[i + 1] * w
}
