use nalgebra::DVector;
use serde::Serialize;

use super::{ensure_complete, hermitian_basis, observations, sensing_matrix, Observation};
use crate::error::{Error, Result};
use crate::expsim::CountRecord;
use crate::polkit::{c, hermitian_eigen, Mat4};

/// Hermitian, unit-trace estimate from linear inversion. It need not be
/// positive; `nonphysical` flags a negative eigenvalue.
#[derive(Debug, Clone, Serialize)]
pub struct LinearEstimate {
    #[serde(skip)]
    pub matrix: Mat4,
    /// Descending.
    pub eigenvalues: [f64; 4],
    pub nonphysical: bool,
}

pub fn linear_inversion(records: &[CountRecord]) -> Result<LinearEstimate> {
    let obs = observations(records, None)?;
    linear_from_observations(&obs)
}

pub(crate) fn linear_from_observations(obs: &[Observation]) -> Result<LinearEstimate> {
    ensure_complete(obs)?;
    let projectors: Vec<Mat4> = obs.iter().map(|o| o.projector).collect();
    let a = sensing_matrix(&projectors);
    let rates = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.counts / o.duration));
    let x = a
        .svd(true, true)
        .solve(&rates, 1e-12)
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    let basis = hermitian_basis();
    let mut m = Mat4::zeros();
    for (j, b) in basis.iter().enumerate() {
        m += b * c(x[j], 0.0);
    }
    let tr = m.trace().re;
    if !(tr > 0.0) {
        return Err(Error::InvalidState(format!(
            "linear inversion gives non-positive trace {tr:.3e}; are all counts zero?"
        )));
    }
    m /= c(tr, 0.0);
    let m = (m + m.adjoint()) * c(0.5, 0.0);
    let (evals, _) = hermitian_eigen(&m);
    let mut eigenvalues = [evals[0], evals[1], evals[2], evals[3]];
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(LinearEstimate {
        matrix: m,
        eigenvalues,
        nonphysical: eigenvalues[3] < crate::polkit::PSD_FLOOR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::{bell_state, BellState, DensityMatrix};
    use crate::tomo::{exact_records, simulate_tomography_counts, standard_settings};

    #[test]
    fn recovers_exact_states() {
        let set = standard_settings();
        for rho in [
            DensityMatrix::maximally_mixed(),
            bell_state(BellState::PsiMinus).density(),
        ] {
            let est = linear_inversion(&exact_records(&rho, &set, 1e12)).unwrap();
            assert!((est.matrix - rho.matrix()).norm() < 1e-8);
        }
    }

    #[test]
    fn incomplete_and_empty() {
        let set = standard_settings();
        let recs = exact_records(&DensityMatrix::maximally_mixed(), &set, 100.0);
        assert!(matches!(
            linear_inversion(&recs[..15]),
            Err(Error::IncompleteSet { rank: 15 })
        ));
        let zeros = exact_records(&DensityMatrix::maximally_mixed(), &set, 0.0);
        assert!(linear_inversion(&zeros).is_err());
    }

    #[test]
    fn low_counts_often_unphysical() {
        let set = standard_settings();
        let phi = bell_state(BellState::PhiPlus).density();
        let seeds = 100;
        let bad = (0..seeds)
            .filter(|&s| {
                let recs = simulate_tomography_counts(&phi, &set, 1e3, s).unwrap();
                linear_inversion(&recs).unwrap().nonphysical
            })
            .count();
        assert!(bad as f64 / seeds as f64 > 0.10, "{bad} of {seeds}");
    }
}
