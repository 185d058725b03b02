//! Self-energy, Lamb shift and Markovian decay rates of the giant atom.
//!
//! Two independent routes are provided for the self-energy: direct adaptive
//! quadrature of the k-integral and a residue evaluation valid for
//! `beta = J`. The Markovian rate is built from the band roots alone and is
//! checked against both.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::band::{self, BandParams, Branch};
use crate::model::AtomSpec;
use crate::quadrature::{integrate, QuadOptions};
use crate::{Error, Result, C64};

/// Default distance of the probe energy above the real axis.
pub const DEFAULT_ETA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelfEnergyMethod {
    ClosedForm,
    NumericalIntegral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyResult {
    pub z: C64,
    pub value: C64,
    /// `Re Sigma`.
    pub lamb_shift: f64,
    /// `-Im Sigma`, half the decay rate.
    pub decay_half: f64,
    pub method: SelfEnergyMethod,
}

impl SelfEnergyResult {
    fn new(z: C64, value: C64, method: SelfEnergyMethod) -> Self {
        Self { z, value, lamb_shift: value.re, decay_half: -value.im, method }
    }
}

/// `|sum_j g_j e^{i k m_j}|^2 / g^2` for the atom's coupling points, relative
/// to `site_left`.
pub fn form_factor(atom: &AtomSpec, k: f64) -> f64 {
    if atom.is_small_atom {
        1.0
    } else {
        2.0 * (1.0 + (k * atom.separation as f64 + atom.phi_extra).cos())
    }
}

/// `(g^2 / 2 pi) int_{-pi}^{pi} dk F(k) / (z - w(k))` by adaptive quadrature.
pub fn self_energy_integral(params: &BandParams, atom: &AtomSpec, z: C64) -> Result<SelfEnergyResult> {
    if z.im < 0.0 {
        return Err(Error::InvalidParameter("probe energy must satisfy Im z >= 0".into()));
    }
    let on_axis = z.im == 0.0;
    if on_axis && (params.is_flat() && (z.re - params.center()).abs() < band::FLAT_TOLERANCE) {
        return Err(Error::FlatBand);
    }
    let mut breaks = Vec::new();
    if !params.is_flat() {
        let sol = band::solve_k(params, z.re)?;
        if on_axis && !sol.roots.is_empty() {
            return Err(Error::InvalidParameter("pole on the real axis; use Im z > 0".into()));
        }
        breaks.extend(sol.roots.iter().map(|r| r.k));
    }
    let g2 = atom.g * atom.g;
    let integrand = |k: f64| C64::new(form_factor(atom, k), 0.0) / (z - band::dispersion(params, k));
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 1e-13 / g2.max(1e-300), max_segments: 50_000 };
    let q = integrate(integrand, -PI, PI, &breaks, opts)?;
    Ok(SelfEnergyResult::new(z, q.value * (g2 / (2.0 * PI)), SelfEnergyMethod::NumericalIntegral))
}

/// Residue evaluation of the self-energy for `beta = J`.
///
/// With `y = e^{ik}` the denominator `z - w(k)` has roots
/// `y_pm = [z - 2J pm s] / (2 xi)`, `s = sqrt((z-2J)^2 - 8J^2 (1 + cos phi))`,
/// `xi = J (1 + e^{i phi})`. Only the root with `|y| <= 1` contributes. The
/// `e^{-ikN}` part of the form factor picks up the inverse of the outer root,
/// which adds the factor `(xi/xi*)^N = e^{i N phi}`:
///
/// `Sigma = -+ (g^2/s) [2 + y^N (e^{i phi_x} + e^{-i phi_x} e^{i N phi})]`.
pub fn self_energy_closed(params: &BandParams, atom: &AtomSpec, z: C64) -> Result<SelfEnergyResult> {
    let j = params.j;
    if (params.beta - j).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "closed form needs beta = J, got beta = {} and J = {}",
            params.beta, j
        )));
    }
    if (1.0 + params.phi.cos()).abs() < 1e-12 {
        return Err(Error::FlatBand);
    }
    let w = z - 2.0 * j;
    let s = (w * w - 8.0 * j * j * (1.0 + params.phi.cos())).sqrt();
    let xi = C64::new(j, 0.0) * (C64::new(1.0, 0.0) + C64::from_polar(1.0, params.phi));
    let y_plus = (w + s) / (xi * 2.0);
    let y_minus = (w - s) / (xi * 2.0);
    let (y, sign) = if y_plus.norm() <= y_minus.norm() { (y_plus, -1.0) } else { (y_minus, 1.0) };
    let g2 = atom.g * atom.g;
    let bracket = if atom.is_small_atom {
        C64::new(1.0, 0.0)
    } else {
        let n = atom.separation as i32;
        let phase = C64::from_polar(1.0, atom.phi_extra) + C64::from_polar(1.0, -atom.phi_extra + n as f64 * params.phi);
        C64::new(2.0, 0.0) + y.powi(n) * phase
    };
    let value = bracket * (sign * g2) / s;
    Ok(SelfEnergyResult::new(z, value, SelfEnergyMethod::ClosedForm))
}

/// Self-energy at `omega + i eta`, re-evaluated at `eta / 2` as a convergence
/// check. Returns the value at `eta` and the relative change, measured
/// against `max(|Sigma|, g^2 / J)`.
pub fn self_energy_near_axis(
    params: &BandParams,
    atom: &AtomSpec,
    omega: f64,
    eta: f64,
    method: SelfEnergyMethod,
) -> Result<(SelfEnergyResult, f64)> {
    let eval = |e: f64| match method {
        SelfEnergyMethod::ClosedForm => self_energy_closed(params, atom, C64::new(omega, e)),
        SelfEnergyMethod::NumericalIntegral => self_energy_integral(params, atom, C64::new(omega, e)),
    };
    let a = eval(eta)?;
    let b = eval(0.5 * eta)?;
    let scale = a.value.norm().max(atom.g * atom.g / params.j.abs().max(1e-300));
    Ok((a, (a.value - b.value).norm() / scale))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRate {
    pub branch: Branch,
    pub k: f64,
    pub group_velocity: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovianRate {
    pub branches: Vec<BranchRate>,
    pub total: f64,
}

impl MarkovianRate {
    pub fn branch(&self, branch: Branch) -> Option<&BranchRate> {
        self.branches.iter().find(|b| b.branch == branch)
    }
}

/// Golden-rule rate into each branch, `2 g^2 [1 + cos(k N + phi_x)] / |v_g|`
/// (`g^2 / |v_g|` for a small atom). For a symmetric band the total equals
/// `4 pi g^2 [1 + cos(kN)] D(w)`.
pub fn markovian_decay_rate(params: &BandParams, atom: &AtomSpec) -> Result<MarkovianRate> {
    let sol = band::solve_k(params, atom.delta)?;
    if sol.roots.is_empty() {
        let (low, high) = params.edges();
        return Err(Error::OutOfBand { omega: atom.delta, low, high });
    }
    if sol.roots.len() < 2 || sol.roots.iter().any(|r| r.branch == Branch::Stationary) {
        return Err(Error::BandEdge { omega: atom.delta });
    }
    let g2 = atom.g * atom.g;
    let branches: Vec<BranchRate> = sol
        .roots
        .iter()
        .map(|r| BranchRate {
            branch: r.branch,
            k: r.k,
            group_velocity: r.group_velocity,
            rate: g2 * form_factor(atom, r.k) / r.group_velocity.abs(),
        })
        .collect();
    let total = branches.iter().map(|b| b.rate).sum();
    Ok(MarkovianRate { branches, total })
}

/// Least-squares slope of `ln P_e` over `window`, returned as a positive rate.
pub fn fit_decay_rate(times: &[f64], p_e: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(p_e)
        .filter(|(t, p)| **t >= window.0 && **t <= window.1 && **p > 0.0)
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidParameter("fewer than three points in the fit window".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}

pub const DEFAULT_FIT_WINDOW: (f64, f64) = (2.0, 20.0);

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn atom(n: usize) -> AtomSpec {
        AtomSpec::giant(2.0, 0.2, 0, n)
    }

    #[test]
    fn zero_cases_at_band_centre() {
        let g2 = 0.04;
        for (phi, n) in [(0.0, 2), (FRAC_PI_2, 4)] {
            let p = BandParams::new(1.0, 1.0, phi);
            let z = C64::new(2.0, DEFAULT_ETA);
            let num = self_energy_integral(&p, &atom(n), z).unwrap();
            let closed = self_energy_closed(&p, &atom(n), z).unwrap();
            assert!(num.value.norm() < 1e-3 * g2, "{phi} {n}: {}", num.value);
            assert!(closed.value.norm() < 1e-3 * g2);
        }
    }

    #[test]
    fn complete_decay_case() {
        let p = BandParams::new(1.0, 1.0, FRAC_PI_2);
        let z = C64::new(2.0, DEFAULT_ETA);
        let num = self_energy_integral(&p, &atom(2), z).unwrap();
        let closed = self_energy_closed(&p, &atom(2), z).unwrap();
        assert!(num.value.im < 0.0);
        assert!((num.value - closed.value).norm() < 1e-6 * closed.value.norm());
        // -Im Sigma = g^2/sqrt2 at the band centre, Lamb shift vanishes
        assert!((closed.decay_half - 0.04 / SQRT_2).abs() < 1e-6);
        assert!(closed.lamb_shift.abs() < 1e-6);
    }

    #[test]
    fn closed_form_rejects_unsupported_inputs() {
        let p = BandParams::new(1.0, 0.5, 0.3);
        assert!(self_energy_closed(&p, &atom(2), C64::new(1.0, 1e-6)).is_err());
        let p = BandParams::new(1.0, 1.0, PI);
        assert_eq!(self_energy_closed(&p, &atom(2), C64::new(2.0, 1e-6)).unwrap_err(), Error::FlatBand);
        assert_eq!(self_energy_integral(&p, &atom(2), C64::new(2.0, 0.0)).unwrap_err(), Error::FlatBand);
    }

    #[test]
    fn closed_form_with_extra_phase_and_small_atom() {
        let p = BandParams::new(1.0, 1.0, 1.0);
        let z = C64::new(1.3, 0.05);
        for a in [atom(3).with_phi_extra(0.8), AtomSpec::small(1.3, 0.2, 0)] {
            let num = self_energy_integral(&p, &a, z).unwrap();
            let closed = self_energy_closed(&p, &a, z).unwrap();
            assert!((num.value - closed.value).norm() < 1e-9 * closed.value.norm());
        }
    }

    #[test]
    fn near_axis_convergence() {
        let p = BandParams::new(1.0, 1.0, FRAC_PI_2);
        let (_, change) = self_energy_near_axis(&p, &atom(2), 2.0, DEFAULT_ETA, SelfEnergyMethod::ClosedForm).unwrap();
        assert!(change < 1e-4);
    }

    #[test]
    fn markovian_rates() {
        let p = BandParams::new(1.0, 1.0, 0.0);
        let r = markovian_decay_rate(&p, &atom(2)).unwrap();
        assert!(r.total.abs() < 1e-14);
        let p = BandParams::new(1.0, 1.0, FRAC_PI_2);
        let r = markovian_decay_rate(&p, &AtomSpec::giant(4.0, 0.2, 0, 2)).unwrap();
        assert!(r.branch(Branch::Left).unwrap().rate > 0.01);
        assert!(r.branch(Branch::Right).unwrap().rate.abs() < 1e-14);
        // symmetric band: total equals 4 pi g^2 [1 + cos kN] D
        let p = BandParams::new(1.0, 1.0, 0.0);
        let a = AtomSpec::giant(3.0, 0.2, 0, 3);
        let r = markovian_decay_rate(&p, &a).unwrap();
        let d = band::density_of_states(&p, 3.0).unwrap();
        let k = r.branches[0].k;
        let eq = 4.0 * PI * 0.04 * (1.0 + (k * 3.0).cos()) * d;
        assert!((r.total - eq).abs() < 1e-12);
        assert!(markovian_decay_rate(&p, &AtomSpec::giant(7.0, 0.2, 0, 2)).is_err());
    }

    #[test]
    fn fit_recovers_exponential() {
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let p: Vec<f64> = t.iter().map(|t| 0.98 * (-0.37 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &p, DEFAULT_FIT_WINDOW).unwrap() - 0.37).abs() < 1e-12);
    }
}
