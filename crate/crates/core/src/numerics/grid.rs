use std::f64::consts::PI;

use crate::error::{ensure, Result};

/// Uniform periodic position grid with `n_points` cells on `[x_min, x_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        ensure(
            n_points >= 16 && n_points.is_power_of_two(),
            "n_points",
            format!("{n_points} must be a power of two >= 16"),
        )?;
        ensure(
            x_min.is_finite() && x_max.is_finite() && x_max > x_min,
            "x_max",
            format!("need x_min < x_max, got [{x_min}, {x_max}]"),
        )?;
        let g = Self {
            x_min,
            x_max,
            n_points,
        };
        let j0 = g.zero_index();
        let off = (g.x(j0)).abs();
        ensure(
            j0 > 0 && j0 + 1 < n_points && off <= 0.5 * g.dx() + 1e-12 * g.dx(),
            "x_min",
            "grid must contain x = 0 as an interior point",
        )?;
        Ok(g)
    }

    /// Grid on `[-half_width, half_width)`; `x = 0` is the sample `n_points/2` exactly.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        ensure(half_width > 0.0, "half_width", "must be positive")?;
        Self::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn len(&self) -> usize {
        self.n_points
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }
    /// Index of the sample nearest to x = 0.
    pub fn zero_index(&self) -> usize {
        ((-self.x_min) / self.dx()).round().max(0.0) as usize
    }
    pub fn momentum(&self) -> MomentumGrid {
        MomentumGrid {
            dp: 2.0 * PI / (self.n_points as f64 * self.dx()),
            n_points: self.n_points,
        }
    }
}

/// Momentum samples `p_k = (k - n/2) dp`, dual to a [`Grid1D`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumGrid {
    dp: f64,
    n_points: usize,
}

impl MomentumGrid {
    pub fn dp(&self) -> f64 {
        self.dp
    }
    pub fn len(&self) -> usize {
        self.n_points
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn p(&self, k: usize) -> f64 {
        (k as f64 - (self.n_points / 2) as f64) * self.dp
    }
    pub fn ps(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.p(k)).collect()
    }
    pub fn p_max(&self) -> f64 {
        self.p(self.n_points - 1)
    }
}

/// Samples `t_i = i·T/n_steps`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        ensure(t_max > 0.0 && t_max.is_finite(), "t_max", "must be positive")?;
        ensure(n_steps >= 1, "n_steps", "must be at least 1")?;
        Ok(Self { t_max, n_steps })
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }
    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }
    pub fn t(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_max
        } else {
            i as f64 * self.dt()
        }
    }
    pub fn ts(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.t(i)).collect()
    }
}
