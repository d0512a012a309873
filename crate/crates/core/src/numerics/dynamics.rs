use num_complex::Complex64 as C64;

use super::grid::Grid1D;
use super::wave::FreeStepper;
use crate::error::{ensure, Result};

/// Hamiltonian choices shared by the physics modules.
#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian {
    /// `Ĥ = 0`: no evolution.
    Zero,
    /// `Ĥ = p²/2M`.
    Free,
    /// `Ĥ = p²/2M + V(x)`, Strang-split with substeps no longer than `max_substep`.
    Potential { v: Vec<f64>, max_substep: f64 },
}

impl Hamiltonian {
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        if let Self::Potential { v, max_substep } = self {
            ensure(v.len() == grid.len(), "V", "length must match the grid")?;
            ensure(v.iter().all(|x| x.is_finite()), "V", "must be finite (bounded below)")?;
            ensure(*max_substep > 0.0, "max_substep", "must be positive")?;
        }
        Ok(())
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Self::Free)
    }

    pub fn evolver(&self, grid: &Grid1D, mass: f64, dt: f64) -> Evolver {
        match self {
            Self::Zero => Evolver::Zero,
            Self::Free => Evolver::Free(FreeStepper::new(grid, mass, dt)),
            Self::Potential { v, max_substep } => {
                let n = ((dt.abs() / max_substep).ceil() as usize).max(1);
                let h = dt / n as f64;
                Evolver::Split {
                    kinetic: FreeStepper::new(grid, mass, h),
                    half: v.iter().map(|&x| C64::from_polar(1.0, -0.5 * h * x)).collect(),
                    n,
                }
            }
        }
    }
}

/// Fixed-step evolution `e^{-iĤδt}` on position amplitudes.
pub enum Evolver {
    Zero,
    Free(FreeStepper),
    Split {
        kinetic: FreeStepper,
        half: Vec<C64>,
        n: usize,
    },
}

impl Evolver {
    pub fn step(&mut self, psi: &mut [C64]) {
        match self {
            Self::Zero => {}
            Self::Free(s) => s.step(psi),
            Self::Split { kinetic, half, n } => {
                for _ in 0..*n {
                    psi.iter_mut().zip(half.iter()).for_each(|(a, b)| *a *= b);
                    kinetic.step(psi);
                    psi.iter_mut().zip(half.iter()).for_each(|(a, b)| *a *= b);
                }
            }
        }
    }
}
