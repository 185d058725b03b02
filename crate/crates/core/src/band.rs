//! Closed-form band structure of the reduced single-band chain.
//!
//! The dispersion `w(k) = 2J cos k + 2 beta [1 + cos(k + phi)]` is rewritten
//! as `2 beta + R cos(k + eta)` with `R e^{i eta} = 2J + 2 beta e^{i phi}`,
//! which makes the inversion at fixed energy exact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::LatticeSpec;
use crate::{wrap_angle, Error, Result};

/// Below this amplitude the band is treated as flat.
pub const FLAT_TOLERANCE: f64 = 1e-12;
/// Roots with `|v_g|` below this are band-edge (stationary) roots.
pub const STATIONARY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandParams {
    pub j: f64,
    pub beta: f64,
    pub phi: f64,
}

impl BandParams {
    pub fn new(j: f64, beta: f64, phi: f64) -> Self {
        Self { j, beta, phi }
    }

    /// Band of the lossless reduction of `lattice`.
    pub fn from_lattice(lattice: &LatticeSpec) -> Result<Self> {
        Ok(Self::new(lattice.j, lattice.beta()?, lattice.phi))
    }

    /// Half bandwidth `R`.
    pub fn amplitude(&self) -> f64 {
        2.0 * (self.j * self.j + self.beta * self.beta + 2.0 * self.j * self.beta * self.phi.cos())
            .max(0.0)
            .sqrt()
    }

    /// Phase offset `eta` of the band minimum/maximum.
    pub fn eta(&self) -> f64 {
        (2.0 * self.beta * self.phi.sin()).atan2(2.0 * self.j + 2.0 * self.beta * self.phi.cos())
    }

    pub fn center(&self) -> f64 {
        2.0 * self.beta
    }

    pub fn edges(&self) -> (f64, f64) {
        let r = self.amplitude();
        (self.center() - r, self.center() + r)
    }

    pub fn bandwidth(&self) -> f64 {
        2.0 * self.amplitude()
    }

    pub fn is_flat(&self) -> bool {
        self.amplitude() < FLAT_TOLERANCE
    }

    pub fn group_velocity(&self, k: f64) -> f64 {
        -self.amplitude() * (k + self.eta()).sin()
    }

    /// Whether `omega` lies strictly inside a dispersive band.
    pub fn contains(&self, omega: f64) -> bool {
        let (lo, hi) = self.edges();
        !self.is_flat() && omega > lo && omega < hi
    }
}

/// `w(k) = 2J cos k + 2 beta [1 + cos(k + phi)]`.
pub fn dispersion(params: &BandParams, k: f64) -> f64 {
    2.0 * params.j * k.cos() + 2.0 * params.beta * (1.0 + (k + params.phi).cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Left,
    Right,
    Stationary,
}

impl Branch {
    fn from_velocity(v: f64) -> Self {
        if v.abs() < STATIONARY_TOLERANCE {
            Branch::Stationary
        } else if v > 0.0 {
            Branch::Right
        } else {
            Branch::Left
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRoot {
    /// Wave vector in `(-pi, pi]`.
    pub k: f64,
    pub group_velocity: f64,
    pub branch: Branch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSolution {
    pub omega: f64,
    /// Sorted by increasing `k`.
    pub roots: Vec<BandRoot>,
}

impl BandSolution {
    pub fn branch(&self, branch: Branch) -> Option<&BandRoot> {
        self.roots.iter().find(|r| r.branch == branch)
    }

    pub fn right_mover(&self) -> Option<&BandRoot> {
        self.branch(Branch::Right)
    }

    pub fn left_mover(&self) -> Option<&BandRoot> {
        self.branch(Branch::Left)
    }
}

/// All real wave vectors with `w(k) = omega`.
pub fn solve_k(params: &BandParams, omega: f64) -> Result<BandSolution> {
    let r = params.amplitude();
    if r < FLAT_TOLERANCE {
        return Err(Error::FlatBand);
    }
    let x = (omega - params.center()) / r;
    if !(x.abs() <= 1.0) {
        return Ok(BandSolution { omega, roots: Vec::new() });
    }
    let a = x.acos();
    let eta = params.eta();
    let mut ks = vec![wrap_angle(a - eta)];
    let other = wrap_angle(-a - eta);
    if wrap_angle(other - ks[0]).abs() > 1e-15 {
        ks.push(other);
    }
    ks.sort_by(|p, q| p.total_cmp(q));
    let roots = ks
        .into_iter()
        .map(|k| {
            let v = params.group_velocity(k);
            BandRoot { k, group_velocity: v, branch: Branch::from_velocity(v) }
        })
        .collect();
    Ok(BandSolution { omega, roots })
}

/// `D(omega) = (1/2 pi) sum_i 1/|v_g(k_i)|`.
pub fn density_of_states(params: &BandParams, omega: f64) -> Result<f64> {
    let sol = solve_k(params, omega)?;
    if sol.roots.is_empty() {
        let (low, high) = params.edges();
        return Err(Error::OutOfBand { omega, low, high });
    }
    if sol.roots.iter().any(|r| r.branch == Branch::Stationary) || sol.roots.len() < 2 {
        return Err(Error::BandEdge { omega });
    }
    Ok(sol.roots.iter().map(|r| 1.0 / r.group_velocity.abs()).sum::<f64>() / (2.0 * PI))
}

/// Phase `k_i N + phi_extra` picked up between the two coupling points, per
/// branch, reduced to `(-pi, pi]`.
pub fn phase_accumulation(
    params: &BandParams,
    omega: f64,
    separation: usize,
    phi_extra: f64,
) -> Result<Vec<(Branch, f64)>> {
    let sol = solve_k(params, omega)?;
    if sol.roots.is_empty() {
        let (low, high) = params.edges();
        return Err(Error::OutOfBand { omega, low, high });
    }
    Ok(sol
        .roots
        .iter()
        .map(|r| (r.branch, wrap_angle(r.k * separation as f64 + phi_extra)))
        .collect())
}
