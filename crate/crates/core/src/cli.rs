//! Command implementations behind the `grinpol` binary.
//!
//! Every command resolves a [`RunConfig`] (from `--config` or `--preset`,
//! with `--seed` overriding), writes its artifacts into the output directory
//! and finishes with `manifest-<command>.json` listing the config hash, the
//! seed and a digest of every input and output file.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error (bad flags) |
//! | 3 | schema error in the configuration |
//! | 4 | parse error in an input file |
//! | 5 | reconstruction did not converge |
//! | 6 | numerical failure (fit, propagation, invalid state) |
//! | 7 | I/O error |
//! | 8 | invalid input data (parameter out of range, incomplete setting set) |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::beam_optics::{
    cascade_sweep, confocal_parameter, coupled_waist, coupling_efficiency_lateral, emitted_beam,
    focal_length, lateral_fwhm, linspace, GrinLens,
};
use crate::config::{FileDigest, GrinConfig, Manifest, RunConfig};
use crate::error::{Error, Result};
use crate::expsim::{fringe_scan, prepared_state};
use crate::fitkit::{fit_gaussian, fit_sinusoid};
use crate::io::{self, CASCADE_HEADER, LATERAL_HEADER};
use crate::polkit::{bell_state, DensityMatrix};
use crate::seeds::derive_named;
use crate::tomo::{
    linear_inversion, mle_reconstruct, monte_carlo_errors, report, simulate_tomography_counts,
    MonteCarloErrors, StartPoint, TomographyReport, TomographySet,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_CONVERGENCE: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;
pub const EXIT_IO: i32 = 7;
pub const EXIT_INVALID_INPUT: i32 = 8;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema(_) => EXIT_SCHEMA,
        Error::Parse { .. } | Error::Json(_) => EXIT_PARSE,
        Error::Convergence { .. } => EXIT_CONVERGENCE,
        Error::SingularPropagation | Error::InvalidState(_) | Error::Fit(_) => EXIT_NUMERICAL,
        Error::Io(_) => EXIT_IO,
        Error::InvalidParameter(_) | Error::IncompleteSet { .. } => EXIT_INVALID_INPUT,
    }
}

/// GRIN-lens fiber collection and polarization-entanglement toolkit.
#[derive(Debug, Parser)]
#[command(name = "grinpol", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration (grin-default, fringe-6nm, fringe-70nm,
    /// tomo-phi-plus, tomo-phi-minus, tomo-psi-plus, tomo-psi-minus).
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Seed; overrides the configuration's.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (default: the config's `output.dir`, else `.`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModel {
    /// Sinusoidal fringe; visibility and period.
    Fringe,
    /// Gaussian profile; FWHM.
    Profile,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Focal length, coupled waist, confocal parameter and lateral FWHM of a
    /// GRIN-lens fiber collector, plus lateral and cascade sweeps.
    Grin(Common),
    /// Simulate fringe scans and/or tomography counts.
    Simulate(Common),
    /// Maximum-likelihood reconstruction of a 16-setting count file.
    Reconstruct {
        /// Count CSV (setting_label,coincidences,singles_1,singles_2,duration_s).
        counts: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a fringe or a profile CSV.
    Fit {
        data: PathBuf,
        #[arg(long, value_enum)]
        model: FitModel,
        #[command(flatten)]
        common: Common,
    },
    /// Fidelities, tangle, purity and eigenvalues of a density matrix, read
    /// from JSON or taken from the configured source model.
    Report {
        state: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

struct Run {
    name: &'static str,
    config: RunConfig,
    preset: Option<String>,
    out_dir: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<(String, Vec<u8>)>,
}

impl Run {
    fn new(name: &'static str, common: &Common) -> Result<Self> {
        let mut config = match (&common.config, &common.preset) {
            (Some(path), _) => RunConfig::from_json(&fs::read_to_string(path)?)?,
            (None, Some(p)) => RunConfig::preset(p)?,
            (None, None) => RunConfig::empty(),
        };
        if let Some(seed) = common.seed {
            config.seed = Some(seed);
        }
        let out_dir = common
            .out
            .clone()
            .or_else(|| config.output.as_ref().map(|o| PathBuf::from(&o.dir)))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self {
            name,
            config,
            preset: common.preset.clone(),
            out_dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path)?;
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        self.inputs.push(FileDigest::of(name, &bytes));
        Ok(bytes)
    }

    fn json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.outputs.push((file.to_string(), bytes));
        Ok(())
    }

    fn finish(self, stdout: &mut dyn Write) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        let mut digests = Vec::new();
        for (file, bytes) in &self.outputs {
            fs::write(self.out_dir.join(file), bytes)?;
            digests.push(FileDigest::of(file.clone(), bytes));
            writeln!(stdout, "{}", self.out_dir.join(file).display())?;
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.name.to_string(),
            preset: self.preset.clone(),
            config_sha256: self.config.sha256()?,
            seed: self.config.seed,
            inputs: self.inputs,
            outputs: digests,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.out_dir.join(format!("manifest-{}.json", self.name));
        fs::write(&path, bytes)?;
        writeln!(stdout, "{}", path.display())?;
        Ok(())
    }
}

/// Run a parsed command line, printing the written paths to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Grin(common) => cmd_grin(Run::new("grin", &common)?, stdout),
        Command::Simulate(common) => cmd_simulate(Run::new("simulate", &common)?, stdout),
        Command::Reconstruct { counts, common } => {
            cmd_reconstruct(Run::new("reconstruct", &common)?, &counts, stdout)
        }
        Command::Fit {
            data,
            model,
            common,
        } => cmd_fit(Run::new("fit", &common)?, &data, model, stdout),
        Command::Report { state, common } => {
            cmd_report(Run::new("report", &common)?, state.as_deref(), stdout)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrinInputs {
    pub wavelength_m: f64,
    pub fiber_mode_radius_m: f64,
    pub gradient_constant_per_m: f64,
    pub n0: f64,
    pub lens_length_m: f64,
    pub pitch: f64,
    pub peak_efficiency: f64,
}

/// Output of `grin`.
#[derive(Debug, Clone, Serialize)]
pub struct GrinReport {
    pub inputs: GrinInputs,
    /// `1 / (n0 g)`.
    pub focal_length_m: f64,
    /// `lambda f / (pi W0)`.
    pub coupled_waist_m: f64,
    /// `pi W0'^2 / lambda`.
    pub confocal_parameter_m: f64,
    /// `2 sqrt(ln 2) W0'`, width of the lateral-offset coupling curve.
    pub lateral_fwhm_m: f64,
    /// Waist of the emitted beam from full ABCD propagation through the rod.
    pub abcd_waist_m: f64,
    /// Its position relative to the rod face (positive: beyond the face).
    pub abcd_waist_position_m: f64,
    /// FWHM recovered by a Gaussian fit of the written lateral profile.
    pub profile_fit_fwhm_m: f64,
}

pub fn grin_lens(cfg: &GrinConfig) -> Result<GrinLens> {
    let quarter = GrinLens::with_focal_length(
        cfg.focal_length_m,
        cfg.gradient_constant_per_m,
        cfg.diameter_m,
    )?;
    match cfg.lens_length_m {
        Some(l) => GrinLens::new(quarter.n0, quarter.g, l, cfg.diameter_m),
        None => Ok(quarter),
    }
}

/// `(x, efficiency)` samples.
pub type Sweep = Vec<(f64, f64)>;

/// All derived quantities of `grin`, plus the two sweeps it writes.
pub fn grin_report(cfg: &GrinConfig) -> Result<(GrinReport, Sweep, Sweep)> {
    if cfg.profile.points < 5 || cfg.cascade.points < 2 {
        return Err(Error::invalid("profile needs >= 5 points and cascade >= 2"));
    }
    let lens = grin_lens(cfg)?;
    let f = focal_length(&lens)?;
    let w = coupled_waist(cfg.wavelength_m, cfg.fiber_mode_radius_m, f)?;
    let beam = emitted_beam(&lens, cfg.wavelength_m, cfg.fiber_mode_radius_m)?;
    let offsets = linspace(
        -cfg.profile.half_range_m,
        cfg.profile.half_range_m,
        cfg.profile.points,
    );
    let profile: Vec<(f64, f64)> = offsets
        .iter()
        .map(|&d| {
            (
                d,
                cfg.peak_efficiency * coupling_efficiency_lateral(w, w, d),
            )
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = profile.iter().cloned().unzip();
    let fit = fit_gaussian(&xs, &ys, None)?;
    let gaps = linspace(0.0, cfg.cascade.max_gap_m, cfg.cascade.points);
    let cascade = cascade_sweep(&beam, &gaps, cfg.peak_efficiency, cfg.cascade.normalization)?;
    let report = GrinReport {
        inputs: GrinInputs {
            wavelength_m: cfg.wavelength_m,
            fiber_mode_radius_m: cfg.fiber_mode_radius_m,
            gradient_constant_per_m: lens.g,
            n0: lens.n0,
            lens_length_m: lens.length,
            pitch: lens.pitch(),
            peak_efficiency: cfg.peak_efficiency,
        },
        focal_length_m: f,
        coupled_waist_m: w,
        confocal_parameter_m: confocal_parameter(w, cfg.wavelength_m)?,
        lateral_fwhm_m: lateral_fwhm(w, w),
        abcd_waist_m: beam.waist_radius,
        abcd_waist_position_m: beam.waist_position,
        profile_fit_fwhm_m: fit.fwhm,
    };
    Ok((report, profile, cascade))
}

fn cmd_grin(mut run: Run, stdout: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::require(&run.config.grin, "grin")?.clone();
    let (report, profile, cascade) = grin_report(&cfg)?;
    run.json("grin_report.json", &report)?;
    let mut buf = Vec::new();
    io::write_sweep(&mut buf, LATERAL_HEADER, &profile)?;
    run.outputs.push(("lateral_profile.csv".into(), buf));
    let mut buf = Vec::new();
    io::write_sweep(&mut buf, CASCADE_HEADER, &cascade)?;
    run.outputs.push(("cascade.csv".into(), buf));
    run.finish(stdout)
}

fn cmd_simulate(mut run: Run, stdout: &mut dyn Write) -> Result<()> {
    let cfg = &run.config;
    if cfg.fringe.is_none() && cfg.tomography.is_none() {
        return Err(Error::Schema(
            "missing field `fringe` or `tomography`".into(),
        ));
    }
    let seed = cfg.require_seed()?;
    let mut outputs = Vec::new();
    if let Some(fr) = &cfg.fringe {
        let rows = fringe_scan(
            &fr.scan,
            &fr.source,
            &fr.analyzer,
            fr.duration_per_point_s,
            derive_named(seed, "fringe"),
        )?;
        let mut buf = Vec::new();
        io::write_fringe(&mut buf, &rows)?;
        outputs.push(("fringe.csv".to_string(), buf));
    }
    if let Some(t) = &cfg.tomography {
        let rho = prepared_state(&t.source, &t.preparation())?;
        let recs = simulate_tomography_counts(
            &rho,
            &TomographySet::standard(),
            t.counts_per_setting,
            derive_named(seed, "tomography"),
        )?;
        let mut buf = Vec::new();
        io::write_counts(&mut buf, &recs)?;
        outputs.push(("counts.csv".to_string(), buf));
    }
    run.outputs.extend(outputs);
    run.finish(stdout)
}

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
    pub start: StartPoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearSummary {
    pub eigenvalues: [f64; 4],
    pub nonphysical: bool,
}

/// Output of `reconstruct`.
#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    #[serde(flatten)]
    pub report: TomographyReport,
    pub convergence: Convergence,
    pub linear_inversion: LinearSummary,
    /// Bootstrap target; the best-matching Bell state unless configured.
    pub error_bar_target: crate::polkit::BellState,
    pub error_bars: Option<MonteCarloErrors>,
}

fn cmd_reconstruct(mut run: Run, counts: &Path, stdout: &mut dyn Write) -> Result<()> {
    let bytes = run.read_input(counts)?;
    let set = TomographySet::standard();
    let records = io::read_counts(bytes.as_slice(), &set)?;
    let rc = run.config.reconstruct.clone().unwrap_or_default();
    let mle = mle_reconstruct(&records, &rc.mle)?;
    let lin = linear_inversion(&records)?;
    let rep = report(&mle.state)?;
    let target = rc.target.unwrap_or(rep.best_target);
    let error_bars = if rc.bootstrap_resamples == 0 {
        None
    } else {
        let seed = run.config.require_seed()?;
        Some(monte_carlo_errors(
            &records,
            &bell_state(target),
            rc.bootstrap_resamples,
            derive_named(seed, "bootstrap"),
            &rc.mle,
            rc.resampling,
        )?)
    };
    let out = Reconstruction {
        report: rep,
        convergence: Convergence {
            iterations: mle.iterations,
            gradient_norm: mle.gradient_norm,
            log_likelihood: mle.log_likelihood,
            start: mle.start,
        },
        linear_inversion: LinearSummary {
            eigenvalues: lin.eigenvalues,
            nonphysical: lin.nonphysical,
        },
        error_bar_target: target,
        error_bars,
    };
    run.json("reconstruction.json", &out)?;
    run.finish(stdout)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub model: &'static str,
    pub x_column: String,
    pub y_column: String,
    pub weighted: bool,
    pub result: serde_json::Value,
}

/// Fit a CSV table. Fringe files use the coincidence rate with Poisson
/// weights; any other table fits its second column against its first.
pub fn fit_table(bytes: &[u8], model: FitModel) -> Result<FitSummary> {
    let table = io::read_table(bytes)?;
    if table.header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least two columns".into(),
        });
    }
    if table.rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let y_idx = table.column("coincidences").unwrap_or(1);
    let dur_idx = table.column("duration_s");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (line, rec) in &table.rows {
        let x: f64 = io::field(*line, rec, 0, &table.header[0])?;
        let y: f64 = io::field(*line, rec, y_idx, &table.header[y_idx])?;
        let t: f64 = match dur_idx {
            Some(i) => io::field(*line, rec, i, "duration_s")?,
            None => 1.0,
        };
        if !x.is_finite() || !y.is_finite() || !(t > 0.0) {
            return Err(Error::Parse {
                line: *line,
                message: "values must be finite with positive duration".into(),
            });
        }
        xs.push(x);
        ys.push(y / t);
        // variance of a rate estimate from Poisson counts
        ws.push(t * t / y.max(1.0));
    }
    let counts = table.column("coincidences").is_some();
    let weights = counts.then_some(ws.as_slice());
    let result = match model {
        FitModel::Fringe => serde_json::to_value(fit_sinusoid(&xs, &ys, weights)?)?,
        FitModel::Profile => serde_json::to_value(fit_gaussian(&xs, &ys, weights)?)?,
    };
    Ok(FitSummary {
        model: match model {
            FitModel::Fringe => "fringe",
            FitModel::Profile => "profile",
        },
        x_column: table.header[0].clone(),
        y_column: if dur_idx.is_some() && counts {
            "coincidences/duration_s".into()
        } else {
            table.header[y_idx].clone()
        },
        weighted: counts,
        result,
    })
}

fn cmd_fit(mut run: Run, data: &Path, model: FitModel, stdout: &mut dyn Write) -> Result<()> {
    let bytes = run.read_input(data)?;
    let summary = fit_table(&bytes, model)?;
    run.json("fit.json", &summary)?;
    run.finish(stdout)
}

/// Density matrix from a JSON file: either a bare matrix or any object with
/// a `density_matrix` member (such as `reconstruction.json`).
pub fn read_state(bytes: &[u8]) -> Result<DensityMatrix> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let inner = match value.get("density_matrix") {
        Some(v) => v.clone(),
        None => value,
    };
    serde_json::from_value(inner).map_err(|e| Error::Schema(e.to_string()))
}

fn cmd_report(mut run: Run, state: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let rho = match state {
        Some(path) => {
            let bytes = run.read_input(path)?;
            read_state(&bytes)?
        }
        None => {
            let t = RunConfig::require(&run.config.tomography, "tomography")?;
            prepared_state(&t.source, &t.preparation())?
        }
    };
    let rep = report(&rho)?;
    run.json("report.json", &rep)?;
    run.finish(stdout)
}
