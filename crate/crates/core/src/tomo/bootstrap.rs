use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mle::mle_from_observations;
use super::{observations, MleConfig};
use crate::error::{Error, Result};
use crate::expsim::{poisson, CountRecord};
use crate::polkit::{fidelity, tangle, TwoQubitState};
use crate::seeds::{derive_seed, rng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Each count redrawn from a Poisson law with the observed mean.
    #[default]
    Poisson,
    /// Counts kept as observed; every resample repeats the same fit.
    Fixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloErrors {
    pub fidelity_std: f64,
    pub tangle_std: f64,
    pub fidelity_mean: f64,
    pub tangle_mean: f64,
    pub resamples: usize,
    /// Resamples whose fit stopped at `max_iterations`; their best iterate
    /// is still used.
    pub unconverged: usize,
    /// `(fidelity, tangle)` per resample, in resample order.
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

pub const MIN_RESAMPLES: usize = 50;

/// Mean and sample standard deviation, computed on values shifted by the
/// first one so identical inputs give exactly zero spread.
fn sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let shift = values[0];
    let d_mean = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|v| (v - shift - d_mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (shift + d_mean, var.sqrt())
}

/// Parametric bootstrap of fidelity (against `target`) and tangle.
///
/// Resample `i` uses `derive_seed(seed, i)` and resamples run in parallel;
/// the aggregate does not depend on scheduling.
pub fn monte_carlo_errors(
    records: &[CountRecord],
    target: &TwoQubitState,
    n_resamples: usize,
    seed: u64,
    config: &MleConfig,
    resampling: Resampling,
) -> Result<MonteCarloErrors> {
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_RESAMPLES} resamples, got {n_resamples}"
        )));
    }
    config.validate()?;
    let base = observations(records, config.accidental_window_s)?;

    let outcomes: Vec<Result<(f64, f64, bool)>> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut obs = base.clone();
            if resampling == Resampling::Poisson {
                let mut r = rng(derive_seed(seed, i as u64));
                for o in &mut obs {
                    o.counts = poisson(o.counts, &mut r)? as f64;
                }
            }
            let (state, converged) = match mle_from_observations(&obs, config) {
                Ok(res) => (res.state, true),
                Err(Error::Convergence { best, .. }) => (*best, false),
                Err(e) => return Err(e),
            };
            Ok((fidelity(&state, target), tangle(&state)?, converged))
        })
        .collect();

    let mut samples = Vec::with_capacity(n_resamples);
    let mut unconverged = 0;
    for o in outcomes {
        let (f, t, ok) = o?;
        samples.push((f, t));
        unconverged += usize::from(!ok);
    }
    let fids: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let tangles: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (fidelity_mean, fidelity_std) = sample_std(&fids);
    let (tangle_mean, tangle_std) = sample_std(&tangles);
    Ok(MonteCarloErrors {
        fidelity_std,
        tangle_std,
        fidelity_mean,
        tangle_mean,
        resamples: n_resamples,
        unconverged,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::{bell_state, BellState, DensityMatrix};
    use crate::tomo::{simulate_tomography_counts, standard_settings};

    #[test]
    fn fixed_resampling_has_zero_spread() {
        let set = standard_settings();
        let phi = bell_state(BellState::PhiPlus);
        let recs = simulate_tomography_counts(&phi.density(), &set, 1e3, 2).unwrap();
        let mc = monte_carlo_errors(&recs, &phi, 50, 1, &MleConfig::default(), Resampling::Fixed)
            .unwrap();
        assert_eq!(mc.fidelity_std, 0.0);
        assert_eq!(mc.tangle_std, 0.0);
    }

    #[test]
    fn too_few_resamples() {
        let set = standard_settings();
        let phi = bell_state(BellState::PhiPlus);
        let recs = simulate_tomography_counts(&phi.density(), &set, 1e3, 2).unwrap();
        assert!(monte_carlo_errors(
            &recs,
            &phi,
            10,
            1,
            &MleConfig::default(),
            Resampling::Poisson
        )
        .is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let set = standard_settings();
        let psi = bell_state(BellState::PsiMinus);
        // a noisy singlet, F = 0.925: spreads of order 0.01 at 10^3 pairs per setting
        let rho = psi
            .density()
            .mix(&DensityMatrix::maximally_mixed(), 0.1)
            .unwrap();
        let recs = simulate_tomography_counts(&rho, &set, 1e3, 5).unwrap();
        let a = monte_carlo_errors(
            &recs,
            &psi,
            50,
            9,
            &MleConfig::default(),
            Resampling::Poisson,
        )
        .unwrap();
        let b = monte_carlo_errors(
            &recs,
            &psi,
            50,
            9,
            &MleConfig::default(),
            Resampling::Poisson,
        )
        .unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(
            a.fidelity_std > 0.001 && a.fidelity_std < 0.05,
            "{}",
            a.fidelity_std
        );
    }
}
