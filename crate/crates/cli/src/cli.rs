//! Command-line surface: subcommands, flag overrides and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Experiment, Format, ModelChoice, Phase, RunConfig, WavepacketConfig};
use crate::error::CliError;
use crate::experiments;
use crate::output::resolve_out_dir;
use crate::sweep::{self, SweepArgs};

#[derive(Debug, Parser)]
#[command(name = "fluxlattice", version, about = "Giant-atom dynamics and scattering in a flux-threaded sawtooth lattice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dispersion `omega(k)` and group velocity on a grid of wave vectors.
    Band(RunArgs),
    /// Excited-state population of an initially excited atom.
    Decay(RunArgs),
    /// Lattice profile of the emitted photon and its chirality.
    Emission(RunArgs),
    /// Self-energy of the atom, closed form and numerical integral.
    #[command(name = "selfenergy")]
    SelfEnergy(RunArgs),
    /// Single-photon transmission and reflection spectra.
    Scatter(RunArgs),
    /// Gaussian packet sent through the coupling region.
    Wavepacket(RunArgs),
    /// Many runs at once, from config files and/or a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: config `output.dir`, then $FLUXLATTICE_OUT, then ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Field overrides. Atom flags apply to every atom entry of the config.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// Nearest-neighbour hopping J.
    #[arg(long = "J", allow_negative_numbers = true)]
    pub j: Option<f64>,
    /// Effective second-order coupling; replaces lambda and delta-ab.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta_ab: Option<f64>,
    /// Flux per plaquette, in radians or as e.g. `0.75pi`.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<Phase>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub m_total: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub m_min: Option<i64>,
    /// Atomic transition frequency.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub site_left: Option<i64>,
    /// Distance N between the two coupling points.
    #[arg(long, conflicts_with = "small")]
    pub separation: Option<usize>,
    /// Couple each atom at a single point.
    #[arg(long)]
    pub small: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_extra: Option<Phase>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of identical copies of each atom.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Sampling interval of the stored observables.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub measure_time: Option<f64>,
    #[arg(long)]
    pub k_points: Option<usize>,
    #[arg(long)]
    pub omega_points: Option<usize>,
    #[arg(long)]
    pub omega_margin: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Packet centre.
    #[arg(long, allow_negative_numbers = true)]
    pub m0: Option<i64>,
    /// Packet width.
    #[arg(long)]
    pub width: Option<f64>,
    /// Packet carrier wave vector.
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<Phase>,
    /// Artifact formats to write.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.model {
            cfg.model = m;
        }
        let lat = &mut cfg.lattice;
        if let Some(j) = self.j {
            lat.j = j;
        }
        if let Some(beta) = self.beta {
            lat.beta = Some(beta);
            lat.lambda = None;
            lat.delta_ab = None;
        }
        if self.lambda.is_some() || self.delta_ab.is_some() {
            lat.beta = None;
            lat.lambda = self.lambda.or(lat.lambda);
            lat.delta_ab = self.delta_ab.or(lat.delta_ab);
        }
        if let Some(phi) = self.phi {
            lat.phi = phi;
        }
        if let Some(kappa) = self.kappa {
            lat.kappa = kappa;
        }
        if let Some(m_total) = self.m_total {
            lat.m_total = m_total;
        }
        if self.m_min.is_some() {
            lat.m_min = self.m_min;
        }

        let touches_atoms = self.delta.is_some()
            || self.g.is_some()
            || self.site_left.is_some()
            || self.separation.is_some()
            || self.small
            || self.phi_extra.is_some()
            || self.gamma.is_some()
            || self.count.is_some();
        if touches_atoms && cfg.atoms.is_empty() {
            cfg.atoms.push(Default::default());
        }
        for atom in &mut cfg.atoms {
            if let Some(delta) = self.delta {
                atom.delta = delta;
            }
            if let Some(g) = self.g {
                atom.g = g;
            }
            if let Some(site) = self.site_left {
                atom.site_left = site;
            }
            if self.separation.is_some() {
                atom.separation = self.separation;
            }
            if self.small {
                atom.separation = None;
            }
            if let Some(p) = self.phi_extra {
                atom.phi_extra = p;
            }
            if let Some(gamma) = self.gamma {
                atom.gamma = gamma;
            }
            if let Some(count) = self.count {
                atom.count = count;
            }
        }

        let s = &mut cfg.settings;
        s.t_final = self.t_final.or(s.t_final);
        s.dt = self.dt.or(s.dt);
        s.measure_time = self.measure_time.or(s.measure_time);
        s.k_points = self.k_points.or(s.k_points);
        s.omega_points = self.omega_points.or(s.omega_points);
        s.omega_margin = self.omega_margin.or(s.omega_margin);
        s.eta = self.eta.or(s.eta);
        if self.m0.is_some() || self.width.is_some() || self.k0.is_some() {
            let mut wp: WavepacketConfig = s.wavepacket.unwrap_or_default();
            wp.m0 = self.m0.unwrap_or(wp.m0);
            wp.w = self.width.unwrap_or(wp.w);
            wp.k0 = self.k0.unwrap_or(wp.k0);
            s.wavepacket = Some(wp);
        }
        if let Some(formats) = &self.format {
            cfg.output.formats = formats.clone();
        }
    }
}

/// Loads the config (or the defaults for `experiment`) and applies the flags.
pub fn resolve_config(
    experiment: Experiment,
    path: Option<&std::path::Path>,
    overrides: &Overrides,
) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_for(experiment),
    };
    if cfg.experiment != experiment {
        return Err(CliError::Config(format!(
            "config describes a `{}` run but the `{}` subcommand was used",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run_single(experiment: Experiment, args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve_config(experiment, args.config.as_deref(), &args.overrides)?;
    let out = resolve_out_dir(args.out.as_deref(), &cfg);
    let summary = experiments::run(&cfg, &out)?;
    for file in &summary.files {
        println!("{}", out.join(file).display());
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Band(a) => run_single(Experiment::Band, a),
        Command::Decay(a) => run_single(Experiment::Decay, a),
        Command::Emission(a) => run_single(Experiment::Emission, a),
        Command::SelfEnergy(a) => run_single(Experiment::SelfEnergy, a),
        Command::Scatter(a) => run_single(Experiment::Scatter, a),
        Command::Wavepacket(a) => run_single(Experiment::Wavepacket, a),
        Command::Sweep(a) => sweep::run(a),
    }
}

/// Parses `args`, runs, and returns the process exit code: 0 on success,
/// 1 for usage or configuration errors, 2 for numerical or output failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
