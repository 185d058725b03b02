use std::f64::consts::{FRAC_PI_2, PI, TAU};

use approx::assert_relative_eq;
use fluxlattice::analytics::{markovian_decay_rate, self_energy_closed, self_energy_integral};
use fluxlattice::band::{dispersion, solve_k, BandParams, Branch};
use fluxlattice::dynamics::{atom_excited_state, evolve, Propagator};
use fluxlattice::model::{build_effective, build_exact, AtomSpec, BasisLabel, LatticeSpec};
use fluxlattice::scattering::{band_grid, solve_both};
use fluxlattice::{wrap_angle, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Flux away from the flat-band point.
fn flux() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..PI - 0.2, PI + 0.2..TAU]
}

fn band() -> impl Strategy<Value = BandParams> {
    (0.3..2.0f64, 0.0..2.0f64, flux()).prop_map(|(j, beta, phi)| BandParams::new(j, beta, phi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dispersion_inverts_solve_k(p in band(), s in 0.0..1.0f64) {
        let (lo, hi) = p.edges();
        let omega = lo + s * (hi - lo);
        for root in solve_k(&p, omega).unwrap().roots {
            prop_assert!((dispersion(&p, root.k) - omega).abs() < 1e-12);
            prop_assert!(root.k > -PI && root.k <= PI);
        }
    }

    #[test]
    fn wave_vectors_sum_to_minus_flux(phi in flux(), s in 0.01..0.99f64) {
        let p = BandParams::new(1.0, 1.0, phi);
        let (lo, hi) = p.edges();
        let roots = solve_k(&p, lo + s * (hi - lo)).unwrap().roots;
        prop_assert_eq!(roots.len(), 2);
        prop_assert!(wrap_angle(roots[0].k + roots[1].k + phi).abs() < 1e-12);
    }

    #[test]
    fn group_velocity_is_the_derivative(p in band(), k in -PI..PI) {
        let h = 1e-6;
        let fd = (dispersion(&p, k + h) - dispersion(&p, k - h)) / (2.0 * h);
        prop_assert!((fd - p.group_velocity(k)).abs() < 1e-6);
    }

    #[test]
    fn flat_band_only_at_its_point(j in 0.3..2.0f64, beta in 0.3..2.0f64, phi in 0.0..TAU, snap in 0..4u8) {
        // snap some draws onto the flat-band point
        let (beta, phi) = match snap {
            0 => (j, PI),
            1 => (j, phi),
            2 => (beta, PI),
            _ => (beta, phi),
        };
        let p = BandParams::new(j, beta, phi);
        let expected = (j - beta).abs() < 1e-12 && wrap_angle(phi - PI).abs() < 1e-12;
        prop_assert_eq!(p.bandwidth() < 1e-12, expected);
        prop_assert_eq!(p.is_flat(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonians_are_hermitian(
        beta in 0.1..2.0f64,
        phi in 0.0..TAU,
        n in 1usize..6,
        delta in -1.0..5.0f64,
        g in 0.01..0.5f64,
        phi_extra in 0.0..TAU,
        left in -10i64..5,
    ) {
        let lat = LatticeSpec::with_beta(1.0, beta, phi, 40);
        let atoms = [AtomSpec::giant(delta, g, left, n).with_phi_extra(phi_extra), AtomSpec::small(delta + 0.3, g, left + 2)];
        let h = build_effective(&lat, &atoms).unwrap();
        prop_assert!(h.hermiticity_defect() < 1e-14);
        let lat = LatticeSpec::sawtooth(1.0, 10.0 * beta.sqrt(), 100.0, phi, 40);
        let h = build_exact(&lat, &atoms).unwrap();
        prop_assert!(h.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn index_map_is_a_bijection(m_total in 8usize..60, n_atoms in 0usize..4) {
        let lat = LatticeSpec::sawtooth(1.0, 1.0, 20.0, 0.3, m_total);
        let atoms = vec![AtomSpec::giant(1.0, 0.1, 0, 1); n_atoms];
        for h in [build_effective(&lat, &atoms).unwrap(), build_exact(&lat, &atoms).unwrap()] {
            let labels = h.index_map();
            prop_assert_eq!(labels.len(), h.dim());
            let mut seen = std::collections::HashSet::new();
            for label in labels {
                prop_assert!(seen.insert(*label));
            }
            for m in lat.sites() {
                prop_assert_eq!(labels[h.site_index(m).unwrap()], BasisLabel::SiteB(m));
            }
        }
    }

    #[test]
    fn eliminating_a_sites_gives_the_effective_rows(
        lambda in 0.5..2.0f64,
        ratio in 0.02..0.1f64,
        phi in 0.0..TAU,
        kappa in prop_oneof![Just(0.0), 0.0..1.0f64],
        m_total in 8usize..20,
    ) {
        let delta_ab = lambda / ratio;
        let lat = LatticeSpec::sawtooth(1.0, lambda, delta_ab, phi, m_total).with_kappa(kappa);
        let exact = build_exact(&lat, &[]).unwrap();
        let eff = build_effective(&lat, &[]).unwrap();

        let b: Vec<usize> = lat.sites().map(|m| exact.site_index(m).unwrap()).collect();
        let a: Vec<usize> = (0..exact.dim()).filter(|i| matches!(exact.index_map()[*i], BasisLabel::SiteA(_))).collect();
        let h = exact.matrix();
        let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| h[(rows[i], cols[j])]);
        let h_aa = pick(&a, &a);
        let reduced = pick(&b, &b) + pick(&b, &a) * (-h_aa).try_inverse().unwrap() * pick(&a, &b);

        let scale = eff.matrix().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let tol = 2.0 * ratio * ratio * scale;
        // the chain ends have a single A neighbour, so only interior rows are compared
        for r in 1..b.len() - 1 {
            for c in 0..b.len() {
                let want = eff.matrix()[(eff.site_index(lat.m_min + r as i64).unwrap(), eff.site_index(lat.m_min + c as i64).unwrap())];
                prop_assert!((reduced[(r, c)] - want).norm() <= tol, "row {r} col {c}: {} vs {}", reduced[(r, c)], want);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn closed_form_matches_integral(phi in flux(), s in 0.03..0.97f64, n in 1usize..=6, phi_extra in 0.0..TAU) {
        let p = BandParams::new(1.0, 1.0, phi);
        let (lo, hi) = p.edges();
        let w = lo + s * (hi - lo);
        let atom = AtomSpec::giant(w, 0.2, 0, n).with_phi_extra(phi_extra);
        let z = C64::new(w, 1e-6);
        let closed = self_energy_closed(&p, &atom, z).unwrap().value;
        let integral = self_energy_integral(&p, &atom, z).unwrap().value;
        // |Sigma| can vanish by interference; measure against the g^2 scale then
        let scale = closed.norm().max(0.04);
        prop_assert!((closed - integral).norm() / scale < 1e-4, "{closed} vs {integral}");
    }

    #[test]
    fn golden_rule_is_minus_twice_im_sigma(phi in flux(), s in 0.05..0.95f64, n in 1usize..=6, phi_extra in 0.0..TAU) {
        let p = BandParams::new(1.0, 1.0, phi);
        let (lo, hi) = p.edges();
        let atom = AtomSpec::giant(lo + s * (hi - lo), 0.2, 0, n).with_phi_extra(phi_extra);
        let gamma = markovian_decay_rate(&p, &atom).unwrap().total;
        let sigma = self_energy_closed(&p, &atom, C64::new(atom.delta, 1e-13)).unwrap().value;
        prop_assert!((gamma + 2.0 * sigma.im).abs() <= 1e-6 * gamma.max(1e-3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn scattering_is_reciprocal_without_loss(
        phi in flux(),
        delta_s in 0.1..0.9f64,
        n in 2usize..6,
        g in 0.05..0.5f64,
        phi_extra in 0.0..TAU,
    ) {
        let p = BandParams::new(1.0, 1.0, phi);
        let (lo, hi) = p.edges();
        let atom = AtomSpec::giant(lo + delta_s * (hi - lo), g, 0, n).with_phi_extra(phi_extra);
        for omega in band_grid(&p, 200, 1e-3) {
            let (l, r) = solve_both(&p, &atom, omega).unwrap();
            prop_assert!((l.transmission - r.transmission).abs() < 1e-10);
            prop_assert!(l.equation_residual < 1e-12 && r.equation_residual < 1e-12);
        }
    }

    #[test]
    fn loss_never_creates_flux(phi in flux(), n in 2usize..6, gamma in 0.01..1.0f64) {
        let p = BandParams::new(1.0, 1.0, phi);
        let atom = AtomSpec::giant(p.center(), 0.3, 0, n).with_gamma(gamma);
        for omega in band_grid(&p, 200, 1e-3) {
            let (l, r) = solve_both(&p, &atom, omega).unwrap();
            prop_assert!(l.transmission + l.reflectance <= 1.0 + 1e-10);
            prop_assert!(r.transmission + r.reflectance <= 1.0 + 1e-10);
        }
    }
}

#[test]
fn one_branch_goes_dark_exactly_on_the_chiral_locus() {
    let mut hits = 0;
    for phi in (0..16).map(|i| i as f64 * TAU / 16.0).filter(|phi| (phi - PI).abs() > 1e-9) {
        let p = BandParams::new(1.0, 1.0, phi);
        let (lo, hi) = p.edges();
        let mut deltas: Vec<f64> = (1..40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect();
        deltas.extend([4.0, 2.0 + std::f64::consts::SQRT_2, 2.0 - std::f64::consts::SQRT_2].iter().filter(|d| p.contains(**d)));
        for delta in deltas {
            for n in [1, 2, 3, 4] {
                let atom = AtomSpec::giant(delta, 0.2, 0, n);
                let Ok(rates) = markovian_decay_rate(&p, &atom) else { continue };
                let dark: Vec<bool> = rates.branches.iter().map(|b| b.rate < 1e-12).collect();
                let on_locus: Vec<bool> =
                    rates.branches.iter().map(|b| wrap_angle(b.k * n as f64 - PI).abs() < 1e-6).collect();
                assert_eq!(dark, on_locus, "phi {phi}, delta {delta}, N {n}");
                if dark.iter().filter(|d| **d).count() == 1 {
                    hits += 1;
                }
            }
        }
    }
    assert!(hits > 0);
}

#[test]
fn chiral_case_darkens_the_right_mover() {
    let p = BandParams::new(1.0, 1.0, FRAC_PI_2);
    let rates = markovian_decay_rate(&p, &AtomSpec::giant(4.0, 0.2, 0, 2)).unwrap();
    assert!(rates.branch(Branch::Right).unwrap().rate < 1e-12);
    assert_relative_eq!(rates.branch(Branch::Left).unwrap().rate, 4.0 * 0.04 / 2.0, max_relative = 1e-12);
}

#[test]
fn lossy_runs_lose_norm_monotonically() {
    let runs = [
        build_effective(&LatticeSpec::with_beta(1.0, 1.0, FRAC_PI_2, 60), &[AtomSpec::giant(4.0, 0.2, 0, 2).with_gamma(0.3)]),
        build_exact(&LatticeSpec::sawtooth(1.0, 10.0, 100.0, FRAC_PI_2, 60).with_kappa(0.2), &[AtomSpec::giant(4.0, 0.2, 0, 2)]),
        build_effective(&LatticeSpec::sawtooth(1.0, 3.0, 9.0, 0.7, 60).with_kappa(0.5), &[AtomSpec::small(2.0, 0.3, 0)]),
    ];
    for h in runs {
        let h = h.unwrap();
        assert!(!h.is_hermitian());
        let rec = evolve(&h, &atom_excited_state(&h, 0).unwrap(), 10.0, 0.1).unwrap();
        for w in rec.total_norm.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert!(*rec.total_norm.last().unwrap() < 1.0);
    }
}

#[test]
fn propagators_agree_on_a_hermitian_run() {
    let lat = LatticeSpec::with_beta(1.0, 1.0, 0.75 * PI, 80);
    let h = build_effective(&lat, &[AtomSpec::giant(2.6, 0.2, 0, 4)]).unwrap();
    let psi = atom_excited_state(&h, 0).unwrap();
    let spectral = fluxlattice::dynamics::evolve_with(&h, &psi, 20.0, 1.0, Propagator::Spectral).unwrap();
    let stepped = fluxlattice::dynamics::evolve_with(&h, &psi, 20.0, 1.0, Propagator::Integrator).unwrap();
    let a = spectral.final_state.unwrap().amplitudes;
    let b = stepped.final_state.unwrap().amplitudes;
    let diff = (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");
}
