//! Single-photon scattering: stationary plane-wave amplitudes and Gaussian
//! wavepackets propagated in time.

mod stationary;
mod wavepacket;

pub use stationary::{band_grid, solve_both, solve_scattering, Direction, ScatteringSolution, CONDITION_LIMIT};
pub use wavepacket::{gaussian_initial_state, wavepacket_transmission, Incidence, WavepacketSpec};
