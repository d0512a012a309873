pub mod dynamics;
pub mod grid;
pub mod quad;
pub mod special;
pub mod tridiag;
pub mod wave;

pub use dynamics::{Evolver, Hamiltonian};
pub use grid::{Grid1D, MomentumGrid, TimeGrid};
pub use quad::{adaptive_gk, cumulative, gauss_legendre, integrate};
pub use wave::{default_grid, FreeStepper, GaussianSpec, GaussianWidth, Representation, WavePacket};
