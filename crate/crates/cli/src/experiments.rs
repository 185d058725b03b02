//! One function per experiment. Each writes its artifacts into `out_dir` and
//! returns the run summary.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use fluxlattice::analytics::{
    fit_decay_rate, markovian_decay_rate, self_energy_closed, self_energy_integral, self_energy_near_axis,
    SelfEnergyMethod, DEFAULT_ETA, DEFAULT_FIT_WINDOW,
};
use fluxlattice::band::{dispersion, BandParams, Branch};
use fluxlattice::dynamics::{
    atom_excited_state, chirality, classify_decay, emission_front, evolve, oscillation_period, plateau_mean,
    DecayClass, EvolutionRecord, Side, DEFAULT_MEASURE_TIME, DEFAULT_SAMPLE_STEP, PLATEAU_WINDOW,
};
use fluxlattice::model::{build, AtomSpec, HamiltonianMatrix};
use fluxlattice::scattering::{
    band_grid, gaussian_initial_state, solve_both, solve_scattering, wavepacket_transmission, Direction, Incidence,
    WavepacketSpec,
};
use fluxlattice::C64;

use crate::config::{Experiment, Format, RunConfig};
use crate::error::CliError;
use crate::heatmap::render_heatmap;
use crate::output::{Cell, RunSummary, Table};

const EDGE_SITES: usize = 2;
const FRONT_FRACTION: f64 = 0.01;
const DEFAULT_K_POINTS: usize = 401;
const DEFAULT_OMEGA_POINTS: usize = 201;
const DEFAULT_OMEGA_MARGIN: f64 = 1e-3;
const DEFAULT_WAVEPACKET_TIME: f64 = 25.0;

/// Runs the configured experiment and writes its artifacts.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut run = Run { config, out_dir, summary: RunSummary::new(config) };
    match config.experiment {
        Experiment::Band => run.band()?,
        Experiment::Decay => run.decay()?,
        Experiment::Emission => run.emission()?,
        Experiment::SelfEnergy => run.self_energy()?,
        Experiment::Scatter => run.scatter()?,
        Experiment::Wavepacket => run.wavepacket()?,
    }
    if config.output.wants(Format::Json) {
        run.summary.files.push("summary.json".into());
        let path = out_dir.join("summary.json");
        fs::write(&path, run.summary.to_json()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(run.summary)
}

struct Run<'a> {
    config: &'a RunConfig,
    out_dir: &'a Path,
    summary: RunSummary,
}

impl Run<'_> {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        if self.config.output.wants(Format::Csv) {
            table.write(&self.out_dir.join(name))?;
            self.summary.files.push(name.into());
        }
        Ok(())
    }

    fn heatmap(&mut self, record: &EvolutionRecord, atoms: &[AtomSpec]) -> Result<(), CliError> {
        if self.config.output.wants(Format::Svg) {
            let mut markers: Vec<i64> = atoms.iter().flat_map(|a| [a.site_left, a.site_right()]).collect();
            markers.sort_unstable();
            markers.dedup();
            render_heatmap(record, &markers, &self.out_dir.join("heatmap.svg"))?;
            self.summary.files.push("heatmap.svg".into());
        }
        Ok(())
    }

    fn band_params(&self) -> Result<BandParams, CliError> {
        Ok(BandParams::from_lattice(&self.config.lattice_spec()?)?)
    }

    fn hamiltonian(&self) -> Result<(HamiltonianMatrix, Vec<AtomSpec>), CliError> {
        let lattice = self.config.lattice_spec()?;
        let atoms = self.config.atom_specs()?;
        let h = build(self.config.model.into(), &lattice, &atoms)?;
        Ok((h, atoms))
    }

    fn dt(&self) -> f64 {
        self.config.settings.dt.unwrap_or(DEFAULT_SAMPLE_STEP)
    }

    fn check_measure(&self, measure: f64, t_final: f64) -> Result<(), CliError> {
        if measure > t_final {
            return Err(CliError::Config(format!("measure_time {measure} lies beyond t_final {t_final}")));
        }
        Ok(())
    }

    /// Scalars every time-domain run reports.
    fn record_health(&mut self, h: &HamiltonianMatrix, record: &EvolutionRecord, t: f64) {
        let s = &mut self.summary;
        s.scalar("final_norm", *record.total_norm.last().unwrap());
        if h.is_hermitian() {
            let defect = record.total_norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
            s.scalar("unitarity_defect", defect);
        }
        s.scalar("edge_probability", record.edge_probability(t, EDGE_SITES));
    }

    fn p_e_table(record: &EvolutionRecord) -> Table {
        let n = record.p_e.len();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..n).map(|i| if n == 1 { "P_e".to_string() } else { format!("P_e_{}", i + 1) }))
            .collect();
        let mut table = Table::new(header);
        for (s, t) in record.times.iter().enumerate() {
            let mut row = vec![Cell::Float(*t)];
            row.extend(record.p_e.iter().map(|p| Cell::Float(p[s])));
            table.push(row);
        }
        table
    }

    fn profile_table(record: &EvolutionRecord, t: f64) -> Table {
        let mut table = Table::new(["m", "P_m"]);
        for (i, p) in record.profile(t).iter().enumerate() {
            table.push(vec![Cell::Int(record.m_min + i as i64), Cell::Float(*p)]);
        }
        table
    }

    fn band(&mut self) -> Result<(), CliError> {
        let p = self.band_params()?;
        let n = self.config.settings.k_points.unwrap_or(DEFAULT_K_POINTS);
        let mut table = Table::new(["k", "omega", "v_g"]);
        for i in 0..n {
            let k = if n == 1 { 0.0 } else { -PI + 2.0 * PI * i as f64 / (n - 1) as f64 };
            table.push(vec![k.into(), dispersion(&p, k).into(), p.group_velocity(k).into()]);
        }
        self.table("band.csv", &table)?;

        let (lo, hi) = p.edges();
        let s = &mut self.summary;
        s.scalar("band_low", lo);
        s.scalar("band_high", hi);
        s.scalar("bandwidth", p.bandwidth());
        s.scalar("band_center", p.center());
        s.scalar("phase_offset", p.eta());
        s.label("flat_band", if p.is_flat() { "yes" } else { "no" });
        if let Some(atom) = self.config.atom_specs()?.first() {
            match markovian_decay_rate(&p, atom) {
                Ok(rate) => self.markovian_scalars(&rate),
                Err(e) => self.summary.label("markovian_rate", e.to_string()),
            }
        }
        Ok(())
    }

    fn markovian_scalars(&mut self, rate: &fluxlattice::analytics::MarkovianRate) {
        self.summary.scalar("markovian_gamma", rate.total);
        for (branch, name) in [(Branch::Left, "left"), (Branch::Right, "right")] {
            if let Some(b) = rate.branch(branch) {
                self.summary.scalar(format!("markovian_gamma_{name}"), b.rate);
                self.summary.scalar(format!("k_{name}"), b.k);
            }
        }
    }

    fn decay(&mut self) -> Result<(), CliError> {
        let (h, atoms) = self.hamiltonian()?;
        let t_final = self.config.settings.t_final.unwrap_or(PLATEAU_WINDOW.1);
        let record = evolve(&h, &atom_excited_state(&h, 0)?, t_final, self.dt())?;
        self.table("P_e.csv", &Self::p_e_table(&record))?;
        self.heatmap(&record, &atoms)?;
        self.record_health(&h, &record, t_final);

        let s = &mut self.summary;
        s.scalar("P_e_final", *record.p_e[0].last().unwrap());
        if t_final >= PLATEAU_WINDOW.1 {
            let (class, mean) = classify_decay(&record, 0);
            s.scalar("plateau_mean", mean);
            let name = match class {
                DecayClass::Fractional => "fractional",
                DecayClass::Complete => "complete",
                DecayClass::Undetermined => "undetermined",
            };
            s.label("decay_class", name);
        } else {
            s.scalar("plateau_mean", plateau_mean(&record, 0, 0.8 * t_final, t_final));
        }
        let window = (DEFAULT_FIT_WINDOW.0, DEFAULT_FIT_WINDOW.1.min(t_final));
        if let Ok(rate) = fit_decay_rate(&record.times, &record.p_e[0], window) {
            s.scalar("fitted_gamma", rate);
        }
        if self.config.model == crate::config::ModelChoice::Effective {
            let p = self.band_params()?;
            if p.is_flat() {
                if let Some(period) = oscillation_period(&record, 0) {
                    self.summary.scalar("oscillation_period", period);
                }
            }
            match markovian_decay_rate(&p, &atoms[0]) {
                Ok(rate) => self.markovian_scalars(&rate),
                Err(e) => self.summary.label("markovian_rate", e.to_string()),
            }
        }
        Ok(())
    }

    fn emission(&mut self) -> Result<(), CliError> {
        let (h, atoms) = self.hamiltonian()?;
        let measure = self.config.settings.measure_time.unwrap_or(DEFAULT_MEASURE_TIME);
        let t_final = self.config.settings.t_final.unwrap_or(measure);
        self.check_measure(measure, t_final)?;
        let record = evolve(&h, &atom_excited_state(&h, 0)?, t_final, self.dt())?;
        self.table("profile.csv", &Self::profile_table(&record, measure))?;
        self.table("P_e.csv", &Self::p_e_table(&record))?;
        self.heatmap(&record, &atoms)?;
        self.record_health(&h, &record, measure);

        let atom = &atoms[0];
        let span = if atom.is_small_atom { 0 } else { atom.separation };
        let s = &mut self.summary;
        s.scalar("measure_time", measure);
        s.scalar("chirality", chirality(&record, measure, atom.site_left, span));
        s.scalar("front_left", emission_front(&record, measure, atom.site_left, span, Side::Left, FRONT_FRACTION));
        s.scalar("front_right", emission_front(&record, measure, atom.site_left, span, Side::Right, FRONT_FRACTION));
        s.scalar("P_e_measure", record.p_e[0][record.sample_index(measure)]);
        Ok(())
    }

    fn self_energy(&mut self) -> Result<(), CliError> {
        let p = self.band_params()?;
        let atom = self.config.atom_specs()?.remove(0);
        let eta = self.config.settings.eta.unwrap_or(DEFAULT_ETA);
        let n = self.config.settings.omega_points.unwrap_or(DEFAULT_OMEGA_POINTS);
        let margin = self.config.settings.omega_margin.unwrap_or(DEFAULT_OMEGA_MARGIN);
        // a flat band has no width; scan a window of one J around it instead
        let (lo, hi) = if p.is_flat() { (p.center() - p.j.abs(), p.center() + p.j.abs()) } else { p.edges() };
        let pad = margin * (hi - lo);
        let grid: Vec<f64> = if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n).map(|i| lo + pad + (hi - lo - 2.0 * pad) * i as f64 / (n - 1) as f64).collect()
        };

        let mut table = Table::new(["omega", "re_closed", "im_closed", "re_integral", "im_integral"]);
        let nan = C64::new(f64::NAN, f64::NAN);
        for &w in &grid {
            let z = C64::new(w, eta);
            let closed = self_energy_closed(&p, &atom, z).map(|r| r.value).unwrap_or(nan);
            let integral = self_energy_integral(&p, &atom, z).map(|r| r.value).unwrap_or(nan);
            table.push(vec![w.into(), closed.re.into(), closed.im.into(), integral.re.into(), integral.im.into()]);
        }
        self.table("selfenergy.csv", &table)?;

        let (integral, change) = self_energy_near_axis(&p, &atom, atom.delta, eta, SelfEnergyMethod::NumericalIntegral)?;
        let s = &mut self.summary;
        s.scalar("omega", atom.delta);
        s.scalar("sigma_integral_re", integral.value.re);
        s.scalar("sigma_integral_im", integral.value.im);
        s.scalar("eta_halving_change", change);
        match self_energy_closed(&p, &atom, C64::new(atom.delta, eta)) {
            Ok(closed) => {
                s.scalar("sigma_closed_re", closed.value.re);
                s.scalar("sigma_closed_im", closed.value.im);
                let scale = closed.value.norm().max(atom.g * atom.g);
                s.scalar("closed_vs_integral", (closed.value - integral.value).norm() / scale);
            }
            Err(e) => s.label("closed_form", e.to_string()),
        }
        match markovian_decay_rate(&p, &atom) {
            Ok(rate) => self.markovian_scalars(&rate),
            Err(e) => self.summary.label("markovian_rate", e.to_string()),
        }
        Ok(())
    }

    fn scatter(&mut self) -> Result<(), CliError> {
        let p = self.band_params()?;
        let atom = self.config.atom_specs()?.remove(0);
        let n = self.config.settings.omega_points.unwrap_or(DEFAULT_OMEGA_POINTS);
        let margin = self.config.settings.omega_margin.unwrap_or(DEFAULT_OMEGA_MARGIN);
        let mut table = Table::new(["omega", "T_L", "T_R", "R_L", "R_R", "flux_residual_L", "flux_residual_R"]);
        let (mut gap, mut residual, mut condition) = (0.0f64, 0.0f64, 0.0f64);
        for w in band_grid(&p, n, margin) {
            let (l, r) = solve_both(&p, &atom, w)?;
            gap = gap.max((l.transmission - r.transmission).abs());
            residual = residual.max(l.equation_residual).max(r.equation_residual);
            condition = condition.max(l.condition).max(r.condition);
            table.push(vec![
                w.into(),
                l.transmission.into(),
                r.transmission.into(),
                l.reflectance.into(),
                r.reflectance.into(),
                l.flux_residual.into(),
                r.flux_residual.into(),
            ]);
        }
        self.table("spectra.csv", &table)?;
        let s = &mut self.summary;
        s.scalar("max_transmission_gap", gap);
        s.scalar("max_equation_residual", residual);
        s.scalar("max_condition", condition);
        Ok(())
    }

    fn wavepacket(&mut self) -> Result<(), CliError> {
        let (h, atoms) = self.hamiltonian()?;
        let wp: WavepacketSpec = self.config.settings.wavepacket.unwrap_or_default().into();
        let t_final = self.config.settings.t_final.unwrap_or(DEFAULT_WAVEPACKET_TIME);
        let measure = self.config.settings.measure_time.unwrap_or(t_final);
        self.check_measure(measure, t_final)?;
        let record = evolve(&h, &gaussian_initial_state(&h, &wp)?, t_final, self.dt())?;
        self.table("P_e.csv", &Self::p_e_table(&record))?;
        self.table("profile.csv", &Self::profile_table(&record, measure))?;
        self.heatmap(&record, &atoms)?;
        self.record_health(&h, &record, measure);

        let atom = &atoms[0];
        let span = if atom.is_small_atom { 0 } else { atom.separation };
        let incidence = Incidence::of(&wp, atom.site_left);
        let (t_dyn, r_dyn) = wavepacket_transmission(&record, measure, atom.site_left, span, incidence);
        let total: Vec<f64> = (0..record.len()).map(|s| record.p_e.iter().map(|p| p[s]).sum()).collect();
        let s = &mut self.summary;
        s.scalar("measure_time", measure);
        s.scalar("T_dyn", t_dyn);
        s.scalar("R_dyn", r_dyn);
        s.scalar("max_P_e", record.max_p_e(0));
        s.scalar("max_P_e_total", total.iter().copied().fold(0.0, f64::max));
        s.label("incidence", if incidence == Incidence::FromLeft { "from_left" } else { "from_right" });

        // stationary prediction at the carrier energy for a single atom
        if atoms.len() == 1 && self.config.model == crate::config::ModelChoice::Effective {
            let p = self.band_params()?;
            let direction = match incidence {
                Incidence::FromLeft => Direction::LeftIncident,
                Incidence::FromRight => Direction::RightIncident,
            };
            match solve_scattering(&p, atom, dispersion(&p, wp.k0), direction) {
                Ok(sol) => self.summary.scalar("T_stationary", sol.transmission),
                Err(e) => self.summary.label("stationary", e.to_string()),
            }
        }
        Ok(())
    }
}
