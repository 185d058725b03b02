//! Time evolution of single-excitation states and the lattice observables
//! built on top of it.

mod propagate;

use std::ops::RangeInclusive;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::{BasisLabel, HamiltonianMatrix};
use crate::{Error, Result, C64};

pub use propagate::{AdaptiveIntegrator, SpectralPropagator};

/// Default spacing of stored samples (output resolution only).
pub const DEFAULT_SAMPLE_STEP: f64 = 0.05;
/// Default time at which lattice profiles are read out.
pub const DEFAULT_MEASURE_TIME: f64 = 20.0;
/// Threshold below which `H` is treated as Hermitian and propagated spectrally.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Amplitudes over the basis of a [`HamiltonianMatrix`] at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleExcitationState {
    pub amplitudes: DVector<C64>,
    pub time: f64,
}

impl SingleExcitationState {
    pub fn new(amplitudes: DVector<C64>) -> Self {
        Self { amplitudes, time: 0.0 }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Excitation fully on atom `atom`.
pub fn atom_excited_state(h: &HamiltonianMatrix, atom: usize) -> Result<SingleExcitationState> {
    let index = h.atom_index(atom).ok_or(Error::BadIndex { index: atom, dim: h.n_atoms() })?;
    let mut amplitudes = DVector::zeros(h.dim());
    amplitudes[index] = C64::new(1.0, 0.0);
    Ok(SingleExcitationState::new(amplitudes))
}

/// Sampled observables of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    /// `p_e[atom][sample]`.
    pub p_e: Vec<Vec<f64>>,
    /// `p_m[sample][site]`, B sites from `m_min` upwards.
    pub p_m: Vec<Vec<f64>>,
    /// Probability on the A sites (zero for the effective model).
    pub p_a: Vec<f64>,
    pub total_norm: Vec<f64>,
    pub m_min: i64,
    #[serde(skip)]
    pub final_state: Option<SingleExcitationState>,
}

impl EvolutionRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.p_m.first().map_or(0, Vec::len)
    }

    pub fn sites(&self) -> RangeInclusive<i64> {
        self.m_min..=self.m_min + self.n_sites() as i64 - 1
    }

    /// Index of the sample closest to `t`.
    pub fn sample_index(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }

    /// Lattice profile `P_m` at the sample closest to `t`.
    pub fn profile(&self, t: f64) -> &[f64] {
        &self.p_m[self.sample_index(t)]
    }

    pub fn site_probability(&self, t: f64, m: i64) -> f64 {
        let offset = m - self.m_min;
        if offset < 0 || offset as usize >= self.n_sites() {
            return 0.0;
        }
        self.profile(t)[offset as usize]
    }

    fn sum_where(&self, t: f64, keep: impl Fn(i64) -> bool) -> f64 {
        self.profile(t)
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(self.m_min + *i as i64))
            .map(|(_, p)| p)
            .sum()
    }

    /// Largest `P_m` on the outermost `n` sites at either end.
    pub fn edge_probability(&self, t: f64, n: usize) -> f64 {
        let p = self.profile(t);
        let n = n.min(p.len());
        p[..n].iter().chain(&p[p.len() - n..]).copied().fold(0.0, f64::max)
    }

    pub fn max_p_e(&self, atom: usize) -> f64 {
        self.p_e[atom].iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Propagator {
    /// Spectral for Hermitian `H`, adaptive integration otherwise.
    Auto,
    Spectral,
    Integrator,
}

/// Evolve `psi0` under `h` up to `t_final`, sampling every `dt_sample`.
pub fn evolve(
    h: &HamiltonianMatrix,
    psi0: &SingleExcitationState,
    t_final: f64,
    dt_sample: f64,
) -> Result<EvolutionRecord> {
    evolve_with(h, psi0, t_final, dt_sample, Propagator::Auto)
}

pub fn sample_times(t_final: f64, dt_sample: f64) -> Vec<f64> {
    let n = (t_final / dt_sample - 1e-9).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|i| i as f64 * dt_sample).collect();
    times.push(t_final);
    times
}

pub fn evolve_with(
    h: &HamiltonianMatrix,
    psi0: &SingleExcitationState,
    t_final: f64,
    dt_sample: f64,
    method: Propagator,
) -> Result<EvolutionRecord> {
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi0.dim() });
    }
    if !(t_final >= 0.0) || !(dt_sample > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need t_final >= 0 and dt_sample > 0, got {t_final} and {dt_sample}"
        )));
    }
    let times = sample_times(t_final, dt_sample);
    let hermitian = h.hermiticity_defect() < HERMITIAN_TOLERANCE;
    let method = match method {
        Propagator::Auto if hermitian => Propagator::Spectral,
        Propagator::Auto => Propagator::Integrator,
        Propagator::Spectral if !hermitian => {
            return Err(Error::InvalidParameter("spectral propagation needs a Hermitian matrix".into()))
        }
        m => m,
    };

    let mut record = Recorder::new(h, times.len());
    let last = match method {
        Propagator::Spectral => {
            let prop = SpectralPropagator::new(h.matrix(), &psi0.amplitudes)?;
            let mut psi = psi0.amplitudes.clone();
            for &t in &times {
                psi = prop.state_at(t);
                record.push(&psi);
            }
            psi
        }
        _ => {
            let mut rk = AdaptiveIntegrator::new(h.matrix(), &psi0.amplitudes, AdaptiveIntegrator::DEFAULT_TOLERANCE);
            for &t in &times {
                rk.advance_to(t)?;
                record.push(&rk.state());
            }
            rk.state()
        }
    };
    let final_state = SingleExcitationState { amplitudes: last, time: psi0.time + t_final };
    Ok(record.finish(times.iter().map(|t| psi0.time + t).collect(), final_state))
}

struct Recorder<'a> {
    h: &'a HamiltonianMatrix,
    p_e: Vec<Vec<f64>>,
    p_m: Vec<Vec<f64>>,
    p_a: Vec<f64>,
    total_norm: Vec<f64>,
}

impl<'a> Recorder<'a> {
    fn new(h: &'a HamiltonianMatrix, n: usize) -> Self {
        Self {
            h,
            p_e: vec![Vec::with_capacity(n); h.n_atoms()],
            p_m: Vec::with_capacity(n),
            p_a: Vec::with_capacity(n),
            total_norm: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, psi: &DVector<C64>) {
        let probs: Vec<f64> = psi.iter().map(|c| c.norm_sqr()).collect();
        for (a, series) in self.p_e.iter_mut().enumerate() {
            series.push(probs[a]);
        }
        self.p_m.push(probs[self.h.site_range()].to_vec());
        let p_a = self
            .h
            .index_map()
            .iter()
            .zip(&probs)
            .filter(|(l, _)| matches!(l, BasisLabel::SiteA(_)))
            .map(|(_, p)| p)
            .sum();
        self.p_a.push(p_a);
        self.total_norm.push(probs.iter().sum());
    }

    fn finish(self, times: Vec<f64>, final_state: SingleExcitationState) -> EvolutionRecord {
        EvolutionRecord {
            times,
            p_e: self.p_e,
            p_m: self.p_m,
            p_a: self.p_a,
            total_norm: self.total_norm,
            m_min: self.h.m_min(),
            final_state: Some(final_state),
        }
    }
}

/// Left/right asymmetry `C = (P_L - P_R)/(P_L + P_R)` of the lattice
/// probability outside the coupling region `[site_left, site_left + separation]`.
/// Pass `separation = 0` for a small atom. Returns 0 when nothing was emitted.
pub fn chirality(record: &EvolutionRecord, t: f64, site_left: i64, separation: usize) -> f64 {
    let site_right = site_left + separation as i64;
    let left = record.sum_where(t, |m| m < site_left);
    let right = record.sum_where(t, |m| m > site_right);
    if left + right < 1e-12 {
        0.0
    } else {
        (left - right) / (left + right)
    }
}

/// Fraction of the lattice probability found inside `window` at time `t`.
/// An empty lattice counts as fully confined.
pub fn confinement(record: &EvolutionRecord, t: f64, window: RangeInclusive<i64>) -> f64 {
    let total = record.sum_where(t, |_| true);
    if total < 1e-12 {
        return 1.0;
    }
    record.sum_where(t, |m| window.contains(&m)) / total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Distance from the coupling region to the farthest site on `side` whose
/// probability exceeds `fraction` of the largest probability on that side.
pub fn emission_front(
    record: &EvolutionRecord,
    t: f64,
    site_left: i64,
    separation: usize,
    side: Side,
    fraction: f64,
) -> f64 {
    let site_right = site_left + separation as i64;
    let profile = record.profile(t);
    let on_side: Vec<(i64, f64)> = profile
        .iter()
        .enumerate()
        .map(|(i, p)| (record.m_min + i as i64, *p))
        .filter(|(m, _)| match side {
            Side::Left => *m < site_left,
            Side::Right => *m > site_right,
        })
        .collect();
    let peak = on_side.iter().map(|x| x.1).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    on_side
        .iter()
        .filter(|(_, p)| *p >= fraction * peak)
        .map(|(m, _)| match side {
            Side::Left => (site_left - m) as f64,
            Side::Right => (m - site_right) as f64,
        })
        .fold(0.0, f64::max)
}

/// Mean of `P_e` over samples with `t0 <= t <= t1`.
pub fn plateau_mean(record: &EvolutionRecord, atom: usize, t0: f64, t1: f64) -> f64 {
    let vals: Vec<f64> = record
        .times
        .iter()
        .zip(&record.p_e[atom])
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(_, p)| *p)
        .collect();
    if vals.is_empty() {
        return f64::NAN;
    }
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Long-time behaviour of the excited-state population. The thresholds are
/// conventions: fractional above 0.02, complete below 0.01.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayClass {
    Fractional,
    Complete,
    Undetermined,
}

pub const PLATEAU_WINDOW: (f64, f64) = (80.0, 100.0);

pub fn classify_decay(record: &EvolutionRecord, atom: usize) -> (DecayClass, f64) {
    let mean = plateau_mean(record, atom, PLATEAU_WINDOW.0, PLATEAU_WINDOW.1);
    let class = if mean > 0.02 {
        DecayClass::Fractional
    } else if mean < 0.01 {
        DecayClass::Complete
    } else {
        DecayClass::Undetermined
    };
    (class, mean)
}

/// Local maxima of a sampled series, refined by a parabola through the three
/// neighbouring samples. Returns `(time, value)` pairs.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let dt = times[i + 1] - times[i];
            out.push((times[i] + shift * dt, b - 0.25 * (a - c) * shift));
        }
    }
    out
}

/// Mean spacing between successive maxima of `P_e`, or `None` with fewer than
/// two maxima.
pub fn oscillation_period(record: &EvolutionRecord, atom: usize) -> Option<f64> {
    let peaks = local_maxima(&record.times, &record.p_e[atom]);
    if peaks.len() < 2 {
        return None;
    }
    Some((peaks[peaks.len() - 1].0 - peaks[0].0) / (peaks.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_effective, AtomSpec, LatticeSpec};
    use std::f64::consts::PI;

    fn small_setup(phi: f64) -> HamiltonianMatrix {
        build_effective(&LatticeSpec::with_beta(1.0, 1.0, phi, 40), &[AtomSpec::giant(2.0, 0.2, 0, 2)]).unwrap()
    }

    #[test]
    fn excited_state_basics() {
        let h = small_setup(0.3);
        let psi = atom_excited_state(&h, 0).unwrap();
        assert_eq!(psi.norm_sqr(), 1.0);
        assert!(h.site_range().all(|i| psi.amplitudes[i] == C64::new(0.0, 0.0)));
        assert!(atom_excited_state(&h, 1).is_err());
        let rec = evolve(&h, &psi, 0.0, 0.05).unwrap();
        assert_eq!(rec.len(), 1);
        let last = rec.final_state.unwrap();
        assert!((last.amplitudes - psi.amplitudes).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = small_setup(0.3);
        let psi = SingleExcitationState::new(DVector::zeros(3));
        assert!(matches!(evolve(&h, &psi, 1.0, 0.1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn hermitian_run_is_unitary() {
        let h = small_setup(1.1);
        let psi = atom_excited_state(&h, 0).unwrap();
        let rec = evolve(&h, &psi, 10.0, 0.1).unwrap();
        for (i, n) in rec.total_norm.iter().enumerate() {
            assert!((n - 1.0).abs() < 1e-9);
            let parts = rec.p_e[0][i] + rec.p_m[i].iter().sum::<f64>() + rec.p_a[i];
            assert!((parts - n).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_grid_ends_at_t_final() {
        let t = sample_times(1.0, 0.3);
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        let t = sample_times(1.0, 0.25);
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn lossy_atom_norm_decreases() {
        let lat = LatticeSpec::with_beta(1.0, 1.0, 0.5, 40);
        let h = build_effective(&lat, &[AtomSpec::giant(2.0, 0.2, 0, 2).with_gamma(0.1)]).unwrap();
        let psi = atom_excited_state(&h, 0).unwrap();
        let rec = evolve(&h, &psi, 5.0, 0.05).unwrap();
        for w in rec.total_norm.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        assert!(*rec.total_norm.last().unwrap() < 0.7);
    }

    #[test]
    fn flat_band_rabi_period() {
        // no hopping: the atom exchanges with (b_0 + b_N)/sqrt(2) at rate sqrt(2) g
        let h = build_effective(&LatticeSpec::with_beta(1.0, 1.0, PI, 40), &[AtomSpec::giant(2.0, 0.2, 0, 3)]).unwrap();
        let rec = evolve(&h, &atom_excited_state(&h, 0).unwrap(), 60.0, 0.05).unwrap();
        let expected = PI / (2.0_f64.sqrt() * 0.2);
        let period = oscillation_period(&rec, 0).unwrap();
        assert!((period - expected).abs() < 1e-3 * expected, "{period} vs {expected}");
        assert!(rec.times.iter().all(|&t| confinement(&rec, t, 0..=3) > 0.999_999));
    }

    #[test]
    fn chirality_and_confinement_on_synthetic_record() {
        let rec = EvolutionRecord {
            times: vec![0.0],
            p_e: vec![vec![0.0]],
            p_m: vec![vec![0.3, 0.1, 0.0, 0.2, 0.1, 0.3]],
            p_a: vec![0.0],
            total_norm: vec![1.0],
            m_min: -2,
            final_state: None,
        };
        // sites -2..=3, coupling region [0, 1]
        let c = chirality(&rec, 0.0, 0, 1);
        assert!((c - (0.4 - 0.4) / 0.8).abs() < 1e-15);
        assert!((chirality(&rec, 0.0, 1, 1) - (0.4 - 0.3) / 0.7).abs() < 1e-15);
        assert!((confinement(&rec, 0.0, -2..=3) - 1.0).abs() < 1e-15);
        assert!((confinement(&rec, 0.0, 0..=1) - 0.2).abs() < 1e-15);
        assert_eq!(emission_front(&rec, 0.0, 0, 1, Side::Left, 0.5), 2.0);
        assert_eq!(emission_front(&rec, 0.0, 0, 1, Side::Right, 0.5), 2.0);
        assert_eq!(rec.edge_probability(0.0, 2), 0.3);
    }
}
