#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::Rng;
use toa_core::numerics::{default_grid, GaussianSpec, WavePacket};

/// Reference Gaussian: `σ₀ = 1`, `p̄ = 10`, `L = 10`, `M = 1`, so `t_cl = 1`.
pub fn reference() -> GaussianSpec {
    GaussianSpec::with_sigma0(10.0, 10.0, 1.0)
}

pub fn reference_packet() -> WavePacket {
    reference().left_supported(default_grid(10.0).unwrap(), 1.0).unwrap()
}

/// One to three Gaussians with random complex weights on the default grid of `L = 10`,
/// rejected until the right half-line holds less than 1e-6.
pub fn random_state<R: Rng>(rng: &mut R) -> WavePacket {
    let grid = default_grid(10.0).unwrap();
    loop {
        let n = rng.random_range(1..=3);
        let parts: Vec<(C64, GaussianSpec)> = (0..n)
            .map(|_| {
                let w = C64::from_polar(rng.random_range(0.2..1.0), rng.random_range(0.0..std::f64::consts::TAU));
                let g = GaussianSpec::with_sigma0(
                    rng.random_range(6.0..12.0),
                    rng.random_range(-3.0..15.0),
                    rng.random_range(0.7..1.5),
                );
                (w, g)
            })
            .collect();
        let amps = (0..grid.len())
            .map(|j| parts.iter().map(|(w, g)| w * g.amplitude(grid.x(j))).sum())
            .collect();
        let psi = WavePacket::from_position(grid, amps, 1.0).unwrap();
        if psi.mass_right() < 1e-6 {
            return psi;
        }
    }
}

pub fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

pub fn argmax(times: &[f64], v: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    times[best]
}
