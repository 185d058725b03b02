//! Single-excitation simulator for a two-level giant atom coupled to a
//! sawtooth lattice threaded by a synthetic magnetic flux.
//!
//! The crate covers the full two-sublattice model and its single-band
//! reduction ([`model`]), the closed-form band structure ([`band`]), time
//! evolution and lattice observables ([`dynamics`]), self-energy and decay
//! rates ([`analytics`]) and stationary / wavepacket scattering
//! ([`scattering`]). Energies are in units of the B-chain hopping `J`,
//! times in units of `1/J`, and `hbar = 1`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod band;
pub mod dynamics;
mod error;
pub mod model;
pub mod quadrature;
pub mod scattering;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Reduce an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    // rem_euclid maps -pi to +pi already; guard the rounding case.
    if y <= -PI {
        y += TAU;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::wrap_angle;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_ties_go_to_plus_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5 * PI) + 0.5 * PI).abs() < 1e-15);
        assert!((wrap_angle(2.5 * PI) - 0.5 * PI).abs() < 1e-12);
    }
}
