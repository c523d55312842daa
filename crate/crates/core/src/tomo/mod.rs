//! Two-qubit polarization tomography.
//!
//! Counts from the 16 analyzer settings are turned into a density matrix
//! either by linear inversion (fast, may be unphysical) or by maximizing the
//! Poisson likelihood over `rho = T^dagger T / tr(T^dagger T)` with `T` lower
//! triangular, which is physical by construction.

mod bootstrap;
mod linear;
mod mle;
mod report;
mod settings;

pub use bootstrap::{monte_carlo_errors, MonteCarloErrors, Resampling};
pub use linear::{linear_inversion, LinearEstimate};
pub use mle::{log_likelihood, mle_reconstruct, MleConfig, MleResult, StartPoint};
pub use report::{report, BellFidelities, TomographyReport};
pub use settings::{
    hermitian_basis, sensing_matrix, standard_settings, BasisState, LabeledSetting, TomographySet,
};

use crate::error::{Error, Result};
use crate::expsim::{coincidence_probability, poisson, CountRecord};
use nalgebra::Matrix2;

use crate::polkit::{kron, measured_polarization, projector, AnalyzerArm, DensityMatrix, Mat4};
use crate::seeds::{derive_seed, rng};

/// A record reduced to what the estimators need.
#[derive(Debug, Clone)]
pub(crate) struct Observation {
    pub projector: Mat4,
    pub counts: f64,
    pub duration: f64,
}

/// Convert records to observations, optionally subtracting the accidental
/// estimate `S1 S2 tau / T` (clamped at zero).
pub(crate) fn observations(
    records: &[CountRecord],
    accidental_window: Option<f64>,
) -> Result<Vec<Observation>> {
    records
        .iter()
        .map(|r| {
            if !(r.duration > 0.0) || !r.duration.is_finite() {
                return Err(Error::invalid(format!(
                    "record {}: duration must be > 0",
                    r.setting_label
                )));
            }
            let mut counts = r.coincidences as f64;
            if let Some(window) = accidental_window {
                let acc = r.singles_1 as f64 * r.singles_2 as f64 * window / r.duration;
                counts = (counts - acc).max(0.0);
            }
            Ok(Observation {
                projector: projector(&r.analyzer),
                counts,
                duration: r.duration,
            })
        })
        .collect()
}

pub(crate) fn ensure_complete(obs: &[Observation]) -> Result<()> {
    let projectors: Vec<Mat4> = obs.iter().map(|o| o.projector).collect();
    let rank = settings::numerical_rank(&sensing_matrix(&projectors));
    if rank < 16 {
        return Err(Error::IncompleteSet { rank });
    }
    Ok(())
}

/// Poisson counts around `mean_total * tr(P rho)` for every setting
/// (1 s acquisitions). Singles are drawn around `mean_total` times each
/// arm's marginal detection probability. Setting `k` uses
/// `derive_seed(seed, k)`.
pub fn simulate_tomography_counts(
    rho: &DensityMatrix,
    set: &TomographySet,
    mean_total: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if !(mean_total >= 0.0) || !mean_total.is_finite() {
        return Err(Error::invalid(format!(
            "mean_total must be >= 0, got {mean_total}"
        )));
    }
    set.settings
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let p = coincidence_probability(rho, &s.analyzer);
            let m1 = marginal(rho, &s.analyzer.arm1, true);
            let m2 = marginal(rho, &s.analyzer.arm2, false);
            let mut r = rng(derive_seed(seed, k as u64));
            Ok(CountRecord {
                setting_label: s.label.clone(),
                analyzer: s.analyzer,
                duration: 1.0,
                coincidences: poisson(mean_total * p, &mut r)?,
                singles_1: poisson(mean_total * m1, &mut r)?,
                singles_2: poisson(mean_total * m2, &mut r)?,
            })
        })
        .collect()
}

/// Probability that one arm transmits, ignoring the other.
fn marginal(rho: &DensityMatrix, arm: &AnalyzerArm, first: bool) -> f64 {
    let v = measured_polarization(arm);
    let pass = v * v.adjoint();
    let id = Matrix2::identity();
    let op = if first {
        kron(&pass, &id)
    } else {
        kron(&id, &pass)
    };
    (op * rho.matrix()).trace().re.clamp(0.0, 1.0)
}

/// Counts `round(scale * tr(P_k rho))` over 1 s, for infinite-statistics
/// checks of the estimators (use a large `scale`, e.g. 1e12).
pub fn exact_records(rho: &DensityMatrix, set: &TomographySet, scale: f64) -> Vec<CountRecord> {
    set.settings
        .iter()
        .map(|s| {
            let p = coincidence_probability(rho, &s.analyzer);
            CountRecord {
                setting_label: s.label.clone(),
                analyzer: s.analyzer,
                duration: 1.0,
                coincidences: (p * scale).round() as u64,
                singles_1: 0,
                singles_2: 0,
            }
        })
        .collect()
}
