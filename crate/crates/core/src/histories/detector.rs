//! Perturbative two-level pointer coupled on `x > 0`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::{DecoherenceDensity, Kernel};
use crate::error::{ensure, Result, ToaError};
use crate::numerics::wave::require_left_support;
use crate::numerics::{Representation, TimeGrid, WavePacket};

/// Pointer with gap `omega` coupled with strength `epsilon` to `P₊`.
///
/// To second order in `ε` the gap enters only through the pointer phase, which
/// drops out of the displayed densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelDetectorModel {
    pub omega: f64,
    pub epsilon: f64,
}

impl TwoLevelDetectorModel {
    pub fn validate(&self) -> Result<()> {
        ensure(self.epsilon >= 0.0 && self.epsilon.is_finite(), "epsilon", "must be >= 0")?;
        ensure(self.omega.is_finite(), "omega", "must be finite")?;
        Ok(())
    }

    /// `ε²T`, which must be small for the truncation to hold.
    pub fn perturbative_parameter(&self, t_max: f64) -> f64 {
        self.epsilon * self.epsilon * t_max
    }
}

/// Free-particle densities to `O(ε²)`:
/// `ρ(t,t') = ε²⟨Φ(t')|Φ(t)⟩`, `d(t,N) = ε⟨Û_{-T}ψ₀|Φ(t)⟩`, `d(N,N) = 1`,
/// with `Φ(t) = Û_{-t} P₊ Û_t ψ₀`.
pub fn detector_model_density(
    model: &TwoLevelDetectorModel,
    psi0: &WavePacket,
    t_max: f64,
    n_bins: usize,
) -> Result<DecoherenceDensity> {
    model.validate()?;
    require_left_support(psi0, 1e-6)?;
    let times = TimeGrid::new(t_max, n_bins)?;
    let grid = *psi0.grid();
    let j0 = grid.zero_index();
    let mass = psi0.mass();
    let mut warnings = vec![];
    let eps2t = model.perturbative_parameter(t_max);
    if eps2t > 0.1 {
        let msg = format!("perturbative parameter eps^2 T = {eps2t:.3} is not small");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let phis: Vec<Vec<C64>> = times
        .ts()
        .par_iter()
        .map(|&t| -> Result<Vec<C64>> {
            let mut pos = psi0.evolve_free_signed(t).in_position().into_amplitudes();
            pos[..j0].iter_mut().for_each(|a| *a = C64::default());
            let back = WavePacket::from_parts(grid, Representation::Position, pos, mass).evolve_free_signed(-t);
            Ok(back.in_momentum().into_amplitudes())
        })
        .collect::<Result<_>>()?;
    let w = grid.momentum().dp() / (2.0 * std::f64::consts::PI);
    let inner = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>() * w };
    let n = times.n_samples();
    let e2 = model.epsilon * model.epsilon;
    let mut rho = vec![C64::default(); n * n];
    let upper: Vec<(usize, usize, C64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let phis = &phis;
            (i..n).map(move |j| (i, j, e2 * inner(&phis[j], &phis[i])))
        })
        .collect();
    for (i, j, v) in upper {
        rho[i * n + j] = v;
        rho[j * n + i] = v.conj();
    }
    let end = psi0.evolve_free_signed(-t_max).in_momentum().into_amplitudes();
    let column: Vec<C64> = phis.iter().map(|p| model.epsilon * inner(&end, p)).collect();
    if column.iter().any(|c| !c.is_finite()) {
        return Err(ToaError::Regime("non-finite detector amplitudes".into()));
    }
    Ok(DecoherenceDensity {
        times,
        rho,
        no_detect_column: column,
        dnn: 1.0,
        diag_singularity_note: "bounded kernel; diagonal stored directly".into(),
        warnings,
        boundary_amplitudes: vec![],
        kernel: Kernel::Smooth,
        scale: 1.0,
        conditioned: false,
    })
}
