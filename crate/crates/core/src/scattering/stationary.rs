//! Plane-wave scattering of a single photon off the giant atom.
//!
//! The lattice is split into three regions by the coupling points (local
//! coordinates: `0` and `N`). Inside each region the amplitude is a sum of
//! the two plane waves at energy `omega`, so only the four rows adjacent to a
//! coupling point plus the atom row constrain the five unknown amplitudes.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::band::{self, BandParams};
use crate::model::AtomSpec;
use crate::{Error, Result, C64};

/// Largest condition number accepted for the 5x5 system.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Incident from the left, travelling right.
    LeftIncident,
    /// Incident from the right, travelling left.
    RightIncident,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub direction: Direction,
    pub omega: f64,
    /// Right-moving wave vector.
    pub k: f64,
    /// Left-moving wave vector.
    pub k_prime: f64,
    pub t: C64,
    pub r: C64,
    /// Right-moving amplitude between the coupling points.
    pub f: C64,
    /// Left-moving amplitude between the coupling points.
    pub f_prime: C64,
    pub c_e: C64,
    /// `|t|^2`.
    pub transmission: f64,
    /// `|r|^2` without the velocity weight.
    pub reflection_raw: f64,
    /// Reflected probability current relative to the incident one.
    pub reflectance: f64,
    /// `1 - transmitted - reflected` current; the absorbed fraction.
    pub flux_residual: f64,
    /// Largest residual of the stationary equations under the ansatz.
    pub equation_residual: f64,
    pub condition: f64,
}

// unknown layout: [r, f, f', t, c_e]
const R: usize = 0;
const F: usize = 1;
const FP: usize = 2;
const T: usize = 3;
const CE: usize = 4;

/// Amplitude at a site as `constant + coeffs . x`.
#[derive(Clone, Copy)]
struct Affine {
    constant: C64,
    coeffs: [C64; 5],
}

struct Ansatz {
    direction: Direction,
    k: f64,
    kp: f64,
    n: i64,
}

impl Ansatz {
    fn wave(q: f64, m: i64) -> C64 {
        C64::from_polar(1.0, q * m as f64)
    }

    fn site(&self, m: i64) -> Affine {
        let zero = C64::new(0.0, 0.0);
        let mut a = Affine { constant: zero, coeffs: [zero; 5] };
        let (ek, ekp) = (Self::wave(self.k, m), Self::wave(self.kp, m));
        if m < 0 {
            match self.direction {
                Direction::LeftIncident => {
                    a.constant = ek;
                    a.coeffs[R] = ekp;
                }
                Direction::RightIncident => a.coeffs[T] = ekp,
            }
        } else if m <= self.n {
            a.coeffs[F] = ek;
            a.coeffs[FP] = ekp;
        } else {
            match self.direction {
                Direction::LeftIncident => a.coeffs[T] = ek,
                Direction::RightIncident => {
                    a.constant = ekp;
                    a.coeffs[R] = ek;
                }
            }
        }
        a
    }
}

/// One row `coeffs . x = rhs` of the stationary equations.
struct Row {
    coeffs: [C64; 5],
    rhs: C64,
}

struct System<'a> {
    params: &'a BandParams,
    atom: &'a AtomSpec,
    omega: f64,
    ansatz: Ansatz,
}

impl System<'_> {
    fn xi(&self) -> C64 {
        C64::new(self.params.j, 0.0) + C64::from_polar(self.params.beta, self.params.phi)
    }

    /// `(w - 2 beta) c_m - xi c_{m+1} - xi* c_{m-1} - (atom terms) = 0`.
    fn lattice_row(&self, m: i64) -> Row {
        let xi = self.xi();
        let diag = C64::new(self.omega - 2.0 * self.params.beta, 0.0);
        let parts = [(self.ansatz.site(m), diag), (self.ansatz.site(m + 1), -xi), (self.ansatz.site(m - 1), -xi.conj())];
        let mut coeffs = [C64::new(0.0, 0.0); 5];
        let mut constant = C64::new(0.0, 0.0);
        for (a, w) in parts {
            constant += a.constant * w;
            for (c, ac) in coeffs.iter_mut().zip(a.coeffs) {
                *c += ac * w;
            }
        }
        if m == 0 {
            coeffs[CE] -= C64::new(self.atom.g, 0.0);
        }
        if m == self.ansatz.n {
            coeffs[CE] -= C64::from_polar(self.atom.g, -self.atom.phi_extra);
        }
        Row { coeffs, rhs: -constant }
    }

    /// `(w - delta + i gamma) c_e - g c_0 - g e^{i phi_x} c_N = 0`.
    fn atom_row(&self) -> Row {
        let mut coeffs = [C64::new(0.0, 0.0); 5];
        let mut constant = C64::new(0.0, 0.0);
        coeffs[CE] = C64::new(self.omega - self.atom.delta, self.atom.gamma);
        for (m, w) in [(0, C64::new(self.atom.g, 0.0)), (self.ansatz.n, C64::from_polar(self.atom.g, self.atom.phi_extra))] {
            let a = self.ansatz.site(m);
            constant -= a.constant * w;
            for (c, ac) in coeffs.iter_mut().zip(a.coeffs) {
                *c -= ac * w;
            }
        }
        Row { coeffs, rhs: -constant }
    }

    fn residual(row: &Row, x: &Vector5<C64>) -> f64 {
        ((0..5).map(|j| row.coeffs[j] * x[j]).sum::<C64>() - row.rhs).norm()
    }
}

/// Solve for the scattering amplitudes at energy `omega`.
pub fn solve_scattering(
    params: &BandParams,
    atom: &AtomSpec,
    omega: f64,
    direction: Direction,
) -> Result<ScatteringSolution> {
    if atom.is_small_atom || atom.separation < 2 {
        return Err(Error::InvalidParameter("scattering needs a giant atom with separation >= 2".into()));
    }
    if params.is_flat() {
        return Err(Error::FlatBand);
    }
    if !params.contains(omega) {
        let (low, high) = params.edges();
        return Err(Error::OutOfBand { omega, low, high });
    }
    let sol = band::solve_k(params, omega)?;
    let (right, left) = match (sol.right_mover(), sol.left_mover()) {
        (Some(r), Some(l)) => (*r, *l),
        _ => return Err(Error::BandEdge { omega }),
    };
    let n = atom.separation as i64;
    let system = System { params, atom, omega, ansatz: Ansatz { direction, k: right.k, kp: left.k, n } };
    let rows = [system.lattice_row(-1), system.lattice_row(0), system.lattice_row(n), system.lattice_row(n + 1), system.atom_row()];
    let a = Matrix5::from_fn(|i, j| rows[i].coeffs[j]);
    let b = Vector5::from_fn(|i, _| rows[i].rhs);
    let sv = a.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition < CONDITION_LIMIT) {
        return Err(Error::SingularSystem { condition });
    }
    let x = a.lu().solve(&b).ok_or(Error::SingularSystem { condition })?;

    // check every row touching the scattering region, including the bulk rows
    let mut check: Vec<Row> = (-3..=n + 3).map(|m| system.lattice_row(m)).collect();
    check.push(system.atom_row());
    let equation_residual = check.iter().map(|r| System::residual(r, &x)).fold(0.0, f64::max);

    let (v_in, v_out_r) = match direction {
        Direction::LeftIncident => (right.group_velocity.abs(), left.group_velocity.abs()),
        Direction::RightIncident => (left.group_velocity.abs(), right.group_velocity.abs()),
    };
    let transmission = x[T].norm_sqr();
    let reflection_raw = x[R].norm_sqr();
    let reflectance = reflection_raw * v_out_r / v_in;
    Ok(ScatteringSolution {
        direction,
        omega,
        k: right.k,
        k_prime: left.k,
        t: x[T],
        r: x[R],
        f: x[F],
        f_prime: x[FP],
        c_e: x[CE],
        transmission,
        reflection_raw,
        reflectance,
        flux_residual: 1.0 - transmission - reflectance,
        equation_residual,
        condition,
    })
}

/// Left- and right-incident solutions at one energy.
pub fn solve_both(params: &BandParams, atom: &AtomSpec, omega: f64) -> Result<(ScatteringSolution, ScatteringSolution)> {
    Ok((
        solve_scattering(params, atom, omega, Direction::LeftIncident)?,
        solve_scattering(params, atom, omega, Direction::RightIncident)?,
    ))
}

/// `n` energies spread uniformly over the open band, pulled in from the
/// edges by `margin` times the bandwidth.
pub fn band_grid(params: &BandParams, n: usize, margin: f64) -> Vec<f64> {
    let (lo, hi) = params.edges();
    let pad = margin * (hi - lo);
    let (a, b) = (lo + pad, hi - pad);
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
