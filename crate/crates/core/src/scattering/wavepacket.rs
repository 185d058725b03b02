use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolutionRecord, SingleExcitationState};
use crate::model::HamiltonianMatrix;
use crate::{Error, Result, C64};

/// Gaussian packet `A exp[-(m - m0)^2 / (2 w^2) + i k0 m]` on the B chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketSpec {
    pub m0: i64,
    pub w: f64,
    pub k0: f64,
}

impl WavepacketSpec {
    pub fn new(m0: i64, w: f64, k0: f64) -> Self {
        Self { m0, w, k0 }
    }

    /// Continuum normalization `pi^{-1/4} w^{-1/2}`.
    pub fn normalization(&self) -> f64 {
        PI.powf(-0.25) / self.w.sqrt()
    }

    pub fn amplitude(&self, m: i64) -> C64 {
        let d = (m - self.m0) as f64;
        C64::from_polar(self.normalization() * (-d * d / (2.0 * self.w * self.w)).exp(), self.k0 * m as f64)
    }
}

/// Packet on the lattice of `h`, atoms empty, renormalized to unit norm.
/// The centre must sit more than `4 w` from both chain ends.
pub fn gaussian_initial_state(h: &HamiltonianMatrix, wp: &WavepacketSpec) -> Result<SingleExcitationState> {
    if !(wp.w > 0.0) {
        return Err(Error::InvalidParameter(format!("packet width {} must be positive", wp.w)));
    }
    let sites = h.sites();
    let (first, last) = (sites[0], sites[sites.len() - 1]);
    let margin = 4.0 * wp.w;
    if ((wp.m0 - first) as f64) <= margin || ((last - wp.m0) as f64) <= margin {
        return Err(Error::WavepacketMargin(format!(
            "centre {} with width {} needs more than {} sites to the edges [{}, {}]",
            wp.m0, wp.w, margin, first, last
        )));
    }
    let mut amplitudes = DVector::zeros(h.dim());
    for m in sites {
        let i = h.site_index(m).expect("site of the lattice");
        amplitudes[i] = wp.amplitude(m);
    }
    let norm = amplitudes.iter().map(|c: &C64| c.norm_sqr()).sum::<f64>().sqrt();
    amplitudes /= C64::new(norm, 0.0);
    Ok(SingleExcitationState::new(amplitudes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Incidence {
    /// Packet starts left of the atom.
    FromLeft,
    /// Packet starts right of the atom.
    FromRight,
}

impl Incidence {
    pub fn of(wp: &WavepacketSpec, site_left: i64) -> Self {
        if wp.m0 < site_left {
            Incidence::FromLeft
        } else {
            Incidence::FromRight
        }
    }
}

/// Lattice probability past the coupling region (transmitted) and back on the
/// incidence side (reflected) at time `t`.
pub fn wavepacket_transmission(
    record: &EvolutionRecord,
    t: f64,
    site_left: i64,
    separation: usize,
    incidence: Incidence,
) -> (f64, f64) {
    let site_right = site_left + separation as i64;
    let profile = record.profile(t);
    let (mut left, mut right) = (0.0, 0.0);
    for (i, p) in profile.iter().enumerate() {
        let m = record.m_min + i as i64;
        if m < site_left {
            left += p;
        } else if m > site_right {
            right += p;
        }
    }
    match incidence {
        Incidence::FromLeft => (right, left),
        Incidence::FromRight => (left, right),
    }
}
