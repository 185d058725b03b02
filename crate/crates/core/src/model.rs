//! Single-excitation Hamiltonians for the sawtooth lattice and its
//! single-band reduction.
//!
//! Basis ordering is fixed: atoms first, then the B chain from `m_min`
//! upwards, then (exact model only) the A apex sites. A site `A_m` closes the
//! plaquette between `B_m` and `B_{m+1}`, so there are `m_total - 1` of them.
//! Boundaries are open.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Parameters of the sawtooth lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    /// Nearest-neighbour hopping along the B chain.
    pub j: f64,
    /// A-B coupling.
    pub lambda: f64,
    /// Detuning of the A sites below the B sites.
    pub delta_ab: f64,
    /// Flux threading each triangle plaquette.
    pub phi: f64,
    /// Intrinsic loss rate of the A sites.
    #[serde(default)]
    pub kappa: f64,
    /// Number of B sites.
    pub m_total: usize,
    /// Index of the first B site.
    pub m_min: i64,
}

impl LatticeSpec {
    pub const MIN_SITES: usize = 8;

    /// Lattice with the given effective on-site shift `beta`, using
    /// `delta_ab = ±100 J` and `lambda = sqrt(beta * delta_ab)`. Sites are
    /// centred on zero.
    pub fn with_beta(j: f64, beta: f64, phi: f64, m_total: usize) -> Self {
        let delta_ab = if beta < 0.0 { -100.0 * j.abs().max(1.0) } else { 100.0 * j.abs().max(1.0) };
        Self {
            j,
            lambda: (beta * delta_ab).sqrt(),
            delta_ab,
            phi,
            kappa: 0.0,
            m_total,
            m_min: -(m_total as i64) / 2,
        }
    }

    /// Lattice from the microscopic sawtooth parameters, sites centred on zero.
    pub fn sawtooth(j: f64, lambda: f64, delta_ab: f64, phi: f64, m_total: usize) -> Self {
        Self { j, lambda, delta_ab, phi, kappa: 0.0, m_total, m_min: -(m_total as i64) / 2 }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn m_max(&self) -> i64 {
        self.m_min + self.m_total as i64 - 1
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.m_min..=self.m_max()
    }

    /// Range of sites an atom may couple to.
    pub fn coupling_range(&self) -> (i64, i64) {
        (self.m_min + 2, self.m_max() - 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_total < Self::MIN_SITES {
            return Err(Error::InvalidParameter(format!(
                "m_total = {} is below the minimum of {}",
                self.m_total,
                Self::MIN_SITES
            )));
        }
        let finite = [self.j, self.lambda, self.delta_ab, self.phi, self.kappa];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite lattice parameter".into()));
        }
        if self.kappa < 0.0 {
            return Err(Error::InvalidParameter(format!("kappa = {} must be >= 0", self.kappa)));
        }
        Ok(())
    }

    /// `beta = lambda^2 / Delta`, the on-site shift left behind by the A sites.
    pub fn beta(&self) -> Result<f64> {
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        if self.delta_ab == 0.0 {
            return Err(Error::UndefinedBeta);
        }
        Ok(self.lambda * self.lambda / self.delta_ab)
    }

    /// Complex shift `lambda^2 / (Delta + i kappa)`; equals `beta` when `kappa = 0`.
    pub fn lossy_beta(&self) -> Result<C64> {
        if self.lambda == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        if self.delta_ab == 0.0 && self.kappa == 0.0 {
            return Err(Error::UndefinedBeta);
        }
        Ok(C64::new(self.lambda * self.lambda, 0.0) / C64::new(self.delta_ab, self.kappa))
    }

    /// Effective hopping `xi = J + beta' e^{i phi}` with `beta'` the (possibly
    /// lossy) shift.
    pub fn xi(&self) -> Result<C64> {
        Ok(C64::new(self.j, 0.0) + self.lossy_beta()? * C64::from_polar(1.0, self.phi))
    }

    /// On-site energy, forward (`m -> m+1`) and backward (`m -> m-1`) hopping
    /// of the reduced chain. For `kappa = 0` the backward hop is `xi*`; with loss
    /// it is `J + beta' e^{-i phi}`, which is what the elimination produces.
    pub fn effective_couplings(&self) -> Result<(C64, C64, C64)> {
        let b = self.lossy_beta()?;
        let forward = C64::new(self.j, 0.0) + b * C64::from_polar(1.0, self.phi);
        let backward = C64::new(self.j, 0.0) + b * C64::from_polar(1.0, -self.phi);
        Ok((b * 2.0, forward, backward))
    }
}

/// A two-level emitter coupled to the B chain at one or two sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    /// Atom detuning from the bare B-site frequency.
    pub delta: f64,
    pub g: f64,
    pub site_left: i64,
    /// Distance to the second coupling point.
    pub separation: usize,
    /// Extra phase carried by the coupling at the second point.
    #[serde(default)]
    pub phi_extra: f64,
    /// Intrinsic decay of the excited state.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub is_small_atom: bool,
}

impl AtomSpec {
    pub fn giant(delta: f64, g: f64, site_left: i64, separation: usize) -> Self {
        Self { delta, g, site_left, separation, phi_extra: 0.0, gamma: 0.0, is_small_atom: false }
    }

    pub fn small(delta: f64, g: f64, site: i64) -> Self {
        Self { delta, g, site_left: site, separation: 1, phi_extra: 0.0, gamma: 0.0, is_small_atom: true }
    }

    pub fn with_phi_extra(mut self, phi_extra: f64) -> Self {
        self.phi_extra = phi_extra;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Rightmost coupled site (equal to `site_left` for a small atom).
    pub fn site_right(&self) -> i64 {
        if self.is_small_atom {
            self.site_left
        } else {
            self.site_left + self.separation as i64
        }
    }

    /// Coupled sites with their atom-to-site coupling `<e|H|m>`.
    pub fn couplings(&self) -> Vec<(i64, C64)> {
        let mut out = vec![(self.site_left, C64::new(self.g, 0.0))];
        if !self.is_small_atom {
            out.push((self.site_right(), C64::from_polar(self.g, self.phi_extra)));
        }
        out
    }

    pub fn validate(&self, lattice: &LatticeSpec) -> Result<()> {
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::InvalidParameter(format!("g = {} must be positive", self.g)));
        }
        if self.separation < 1 {
            return Err(Error::InvalidParameter("separation must be at least 1".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if !self.delta.is_finite() || !self.phi_extra.is_finite() {
            return Err(Error::InvalidParameter("non-finite atom parameter".into()));
        }
        let (min, max) = lattice.coupling_range();
        for site in [self.site_left, self.site_right()] {
            if site < min || site > max {
                return Err(Error::InvalidSite { site, min, max });
            }
        }
        Ok(())
    }
}

/// Label of one basis vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisLabel {
    Atom(usize),
    SiteB(i64),
    SiteA(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Exact,
    Effective,
}

/// Dense single-excitation Hamiltonian together with its basis labels.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    matrix: DMatrix<C64>,
    index_map: Vec<BasisLabel>,
    kind: ModelKind,
    n_atoms: usize,
    m_min: i64,
    m_total: usize,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.index_map.len()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn index_map(&self) -> &[BasisLabel] {
        &self.index_map
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn m_min(&self) -> i64 {
        self.m_min
    }

    pub fn m_total(&self) -> usize {
        self.m_total
    }

    /// B-site labels in basis order.
    pub fn sites(&self) -> Vec<i64> {
        (self.m_min..self.m_min + self.m_total as i64).collect()
    }

    pub fn atom_index(&self, atom: usize) -> Option<usize> {
        (atom < self.n_atoms).then_some(atom)
    }

    /// Basis index of B site `m`.
    pub fn site_index(&self, m: i64) -> Option<usize> {
        let offset = m - self.m_min;
        (offset >= 0 && (offset as usize) < self.m_total).then(|| self.n_atoms + offset as usize)
    }

    /// Range of basis indices holding the B chain.
    pub fn site_range(&self) -> std::ops::Range<usize> {
        self.n_atoms..self.n_atoms + self.m_total
    }

    /// Largest elementwise deviation `max |H - H^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for k in i..n {
                worst = worst.max((self.matrix[(i, k)] - self.matrix[(k, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() < 1e-14
    }

    /// Nonzero entries as `(row, col, value)`, row-major.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for k in 0..n {
                let v = self.matrix[(i, k)];
                if v != C64::new(0.0, 0.0) {
                    out.push((i, k, v));
                }
            }
        }
        out
    }
}

fn check_inputs(lattice: &LatticeSpec, atoms: &[AtomSpec]) -> Result<()> {
    lattice.validate()?;
    atoms.iter().try_for_each(|a| a.validate(lattice))
}

fn place_atoms(h: &mut DMatrix<C64>, lattice: &LatticeSpec, atoms: &[AtomSpec]) {
    let n_atoms = atoms.len();
    for (j, atom) in atoms.iter().enumerate() {
        h[(j, j)] = C64::new(atom.delta, -atom.gamma);
        for (m, c) in atom.couplings() {
            let s = n_atoms + (m - lattice.m_min) as usize;
            h[(j, s)] += c;
            h[(s, j)] += c.conj();
        }
    }
}

fn atom_labels(n: usize) -> impl Iterator<Item = BasisLabel> {
    (0..n).map(BasisLabel::Atom)
}

/// Single-band model: B chain with on-site `2 beta`, hopping `xi` towards
/// `m+1` and `xi*` towards `m-1`, plus the atoms.
pub fn build_effective(lattice: &LatticeSpec, atoms: &[AtomSpec]) -> Result<HamiltonianMatrix> {
    check_inputs(lattice, atoms)?;
    let (onsite, forward, backward) = lattice.effective_couplings()?;
    let n_atoms = atoms.len();
    let m = lattice.m_total;
    let dim = n_atoms + m;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..m {
        let r = n_atoms + i;
        h[(r, r)] = onsite;
        if i + 1 < m {
            h[(r, r + 1)] = forward;
            h[(r + 1, r)] = backward;
        }
    }
    place_atoms(&mut h, lattice, atoms);
    let index_map = atom_labels(n_atoms).chain(lattice.sites().map(BasisLabel::SiteB)).collect();
    Ok(HamiltonianMatrix {
        matrix: h,
        index_map,
        kind: ModelKind::Effective,
        n_atoms,
        m_min: lattice.m_min,
        m_total: m,
    })
}

/// Full sawtooth model with both sublattices.
pub fn build_exact(lattice: &LatticeSpec, atoms: &[AtomSpec]) -> Result<HamiltonianMatrix> {
    check_inputs(lattice, atoms)?;
    let n_atoms = atoms.len();
    let m = lattice.m_total;
    let n_a = m - 1;
    let dim = n_atoms + m + n_a;
    let a0 = n_atoms + m;
    let j = C64::new(lattice.j, 0.0);
    let lam = C64::new(lattice.lambda, 0.0);
    let lam_phase = C64::from_polar(lattice.lambda, lattice.phi);
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..m {
        let b = n_atoms + i;
        if i + 1 < m {
            h[(b, b + 1)] = j;
            h[(b + 1, b)] = j;
        }
    }
    for i in 0..n_a {
        let a = a0 + i;
        let b = n_atoms + i;
        h[(a, a)] = C64::new(-lattice.delta_ab, -lattice.kappa);
        h[(a, b)] = lam;
        h[(b, a)] = lam.conj();
        h[(a, b + 1)] = lam_phase;
        h[(b + 1, a)] = lam_phase.conj();
    }
    place_atoms(&mut h, lattice, atoms);
    let index_map = atom_labels(n_atoms)
        .chain(lattice.sites().map(BasisLabel::SiteB))
        .chain((0..n_a).map(|i| BasisLabel::SiteA(lattice.m_min + i as i64)))
        .collect();
    Ok(HamiltonianMatrix { matrix: h, index_map, kind: ModelKind::Exact, n_atoms, m_min: lattice.m_min, m_total: m })
}

pub fn build(kind: ModelKind, lattice: &LatticeSpec, atoms: &[AtomSpec]) -> Result<HamiltonianMatrix> {
    match kind {
        ModelKind::Exact => build_exact(lattice, atoms),
        ModelKind::Effective => build_effective(lattice, atoms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn lattice() -> LatticeSpec {
        LatticeSpec::with_beta(1.0, 1.0, 0.3, 40)
    }

    #[test]
    fn effective_is_hermitian_without_loss() {
        let h = build_effective(&lattice(), &[AtomSpec::giant(2.0, 0.2, 0, 3).with_phi_extra(0.7)]).unwrap();
        assert!(h.hermiticity_defect() < 1e-14);
        assert_eq!(h.dim(), 41);
    }

    #[test]
    fn sawtooth_parameters_give_unit_beta() {
        let lat = LatticeSpec::sawtooth(1.0, 10.0, 100.0, FRAC_PI_2, 20);
        assert!((lat.beta().unwrap() - 1.0).abs() < 1e-15);
        let xi = lat.xi().unwrap();
        assert!((xi - c(1.0, 1.0)).norm() < 1e-15);
        let h = build_effective(&lat, &[]).unwrap();
        let s = h.site_index(0).unwrap();
        assert!((h.matrix()[(s, s)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((h.matrix()[(s, s + 1)] - c(1.0, 1.0)).norm() < 1e-15);
        assert!((h.matrix()[(s, s - 1)] - c(1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn small_atom_has_one_coupling() {
        let h = build_effective(&lattice(), &[AtomSpec::small(2.0, 0.2, 0)]).unwrap();
        let row = h.matrix().row(0);
        let nz = row.iter().skip(1).filter(|v| v.norm() > 0.0).count();
        assert_eq!(nz, 1);
    }

    #[test]
    fn stacked_identical_atoms() {
        let lat = lattice();
        let atoms = vec![AtomSpec::giant(4.0, 0.2, 0, 2); 8];
        let h = build_effective(&lat, &atoms).unwrap();
        assert_eq!(h.dim(), lat.m_total + 8);
        for a in 1..8 {
            assert_eq!(h.matrix().row(a).columns(8, lat.m_total), h.matrix().row(0).columns(8, lat.m_total));
            assert_eq!(h.matrix()[(a, a)], h.matrix()[(0, 0)]);
            assert_eq!(h.matrix()[(0, a)], c(0.0, 0.0));
        }
    }

    #[test]
    fn atom_row_layout() {
        let atom = AtomSpec::giant(1.5, 0.3, -2, 4).with_phi_extra(0.9).with_gamma(0.1);
        let h = build_effective(&lattice(), &[atom]).unwrap();
        let m = h.matrix();
        assert_eq!(m[(0, 0)], c(1.5, -0.1));
        let l = h.site_index(-2).unwrap();
        let r = h.site_index(2).unwrap();
        assert_eq!(m[(0, l)], c(0.3, 0.0));
        assert!((m[(0, r)] - C64::from_polar(0.3, 0.9)).norm() < 1e-15);
        assert!((m[(r, 0)] - C64::from_polar(0.3, -0.9)).norm() < 1e-15);
    }

    #[test]
    fn exact_is_hermitian_without_loss() {
        let lat = LatticeSpec::sawtooth(1.0, 3.0, 20.0, 1.1, 30);
        let h = build_exact(&lat, &[AtomSpec::giant(1.0, 0.2, 0, 2)]).unwrap();
        assert!(h.hermiticity_defect() < 1e-14);
        assert_eq!(h.dim(), 1 + 30 + 29);
        let lossy = build_exact(&lat.clone().with_kappa(0.2), &[]).unwrap();
        assert!(lossy.hermiticity_defect() > 0.1);
    }

    #[test]
    fn exact_without_lambda_is_plain_chain() {
        let lat = LatticeSpec::sawtooth(1.0, 0.0, 50.0, 0.4, 16);
        let h = build_exact(&lat, &[]).unwrap();
        let b = h.site_range();
        for i in b.clone() {
            for k in b.clone() {
                let expected = if i.abs_diff(k) == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert_eq!(h.matrix()[(i, k)], expected);
            }
            for k in b.end..h.dim() {
                assert_eq!(h.matrix()[(i, k)], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn b_rows_only_touch_neighbours_partners_and_atoms() {
        let lat = LatticeSpec::sawtooth(1.0, 2.0, 20.0, 0.5, 12);
        let h = build_exact(&lat, &[AtomSpec::giant(0.0, 0.1, 0, 2)]).unwrap();
        for (i, label) in h.index_map().iter().enumerate() {
            let BasisLabel::SiteB(m) = *label else { continue };
            for (k, other) in h.index_map().iter().enumerate() {
                if h.matrix()[(i, k)].norm() == 0.0 {
                    continue;
                }
                let ok = match *other {
                    BasisLabel::SiteB(n) => (n - m).abs() == 1,
                    BasisLabel::SiteA(n) => n == m || n == m - 1,
                    BasisLabel::Atom(_) => m == 0 || m == 2,
                };
                assert!(ok, "B{m} couples to {other:?}");
            }
        }
    }

    #[test]
    fn index_map_is_bijective() {
        let lat = LatticeSpec::sawtooth(1.0, 2.0, 20.0, 0.5, 12);
        let h = build_exact(&lat, &[AtomSpec::giant(0.0, 0.1, 0, 2), AtomSpec::small(0.0, 0.1, 1)]).unwrap();
        let set: HashSet<_> = h.index_map().iter().collect();
        assert_eq!(set.len(), h.dim());
        for m in lat.sites() {
            let i = h.site_index(m).unwrap();
            assert_eq!(h.index_map()[i], BasisLabel::SiteB(m));
        }
        assert_eq!(h.site_index(lat.m_max() + 1), None);
    }

    #[test]
    fn rejects_bad_sites_and_undefined_beta() {
        let lat = LatticeSpec::with_beta(1.0, 1.0, 0.0, 20);
        let (lo, hi) = lat.coupling_range();
        assert!(matches!(
            build_effective(&lat, &[AtomSpec::giant(0.0, 0.2, hi - 1, 2)]),
            Err(Error::InvalidSite { .. })
        ));
        assert!(build_effective(&lat, &[AtomSpec::small(0.0, 0.2, lo - 1)]).is_err());
        assert!(build_effective(&lat, &[AtomSpec::giant(0.0, 0.2, lo, 2)]).is_ok());
        assert!(build_effective(&lat, &[AtomSpec::giant(0.0, -0.2, 0, 2)]).is_err());
        let bad = LatticeSpec::sawtooth(1.0, 1.0, 0.0, PI, 20);
        assert_eq!(build_effective(&bad, &[]).unwrap_err(), Error::UndefinedBeta);
        let tiny = LatticeSpec::with_beta(1.0, 1.0, 0.0, 6);
        assert!(build_effective(&tiny, &[]).is_err());
    }

    #[test]
    fn lossy_elimination_couplings() {
        let lat = LatticeSpec::sawtooth(1.0, 10.0, 100.0, FRAC_PI_2, 20).with_kappa(0.2);
        let b = c(100.0, 0.0) / c(100.0, 0.2);
        let (onsite, fwd, bwd) = lat.effective_couplings().unwrap();
        assert!((onsite - b * 2.0).norm() < 1e-14);
        assert!((fwd - (c(1.0, 0.0) + b * c(0.0, 1.0))).norm() < 1e-14);
        assert!((bwd - (c(1.0, 0.0) + b * c(0.0, -1.0))).norm() < 1e-14);
        assert!((lat.xi().unwrap() - fwd).norm() < 1e-15);
    }
}
