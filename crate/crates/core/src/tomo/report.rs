use serde::Serialize;

use crate::error::Result;
use crate::polkit::{bell_state, concurrence, fidelity, BellState, DensityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellFidelities {
    #[serde(rename = "phi+")]
    pub phi_plus: f64,
    #[serde(rename = "phi-")]
    pub phi_minus: f64,
    #[serde(rename = "psi+")]
    pub psi_plus: f64,
    #[serde(rename = "psi-")]
    pub psi_minus: f64,
}

impl BellFidelities {
    pub fn get(&self, kind: BellState) -> f64 {
        match kind {
            BellState::PhiPlus => self.phi_plus,
            BellState::PhiMinus => self.phi_minus,
            BellState::PsiPlus => self.psi_plus,
            BellState::PsiMinus => self.psi_minus,
        }
    }

    pub fn best(&self) -> BellState {
        BellState::ALL
            .into_iter()
            .max_by(|a, b| self.get(*a).total_cmp(&self.get(*b)))
            .expect("four Bell states")
    }
}

/// Summary of a reconstructed state.
#[derive(Debug, Clone, Serialize)]
pub struct TomographyReport {
    pub density_matrix: DensityMatrix,
    pub real_part: [[f64; 4]; 4],
    pub imag_part: [[f64; 4]; 4],
    /// Informational only.
    pub max_abs_imag: f64,
    pub eigenvalues: [f64; 4],
    pub purity: f64,
    pub fidelities: BellFidelities,
    pub best_target: BellState,
    pub concurrence: f64,
    pub tangle: f64,
}

pub fn report(rho: &DensityMatrix) -> Result<TomographyReport> {
    let f = |k| fidelity(rho, &bell_state(k));
    let fidelities = BellFidelities {
        phi_plus: f(BellState::PhiPlus),
        phi_minus: f(BellState::PhiMinus),
        psi_plus: f(BellState::PsiPlus),
        psi_minus: f(BellState::PsiMinus),
    };
    let conc = concurrence(rho)?;
    Ok(TomographyReport {
        density_matrix: *rho,
        real_part: rho.real_part(),
        imag_part: rho.imag_part(),
        max_abs_imag: rho.max_abs_imag(),
        eigenvalues: rho.eigenvalues(),
        purity: rho.purity(),
        best_target: fidelities.best(),
        fidelities,
        concurrence: conc,
        tangle: conc * conc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::{c, tangle};

    #[test]
    fn pure_phi_minus() {
        let r = report(&bell_state(BellState::PhiMinus).density()).unwrap();
        assert!((r.fidelities.phi_minus - 1.0).abs() < 1e-15);
        assert!(r.fidelities.phi_plus.abs() < 1e-15);
        assert!((r.tangle - 1.0).abs() < 1e-10);
        assert!((r.purity - 1.0).abs() < 1e-15);
        assert_eq!(r.best_target, BellState::PhiMinus);
    }

    #[test]
    fn maximally_mixed() {
        let r = report(&DensityMatrix::maximally_mixed()).unwrap();
        for k in BellState::ALL {
            assert!((r.fidelities.get(k) - 0.25).abs() < 1e-15);
        }
        assert!(r.tangle < 1e-12);
        assert!((r.purity - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dephased_phi_plus() {
        let v = 0.94;
        let mut m = *bell_state(BellState::PhiPlus).density().matrix();
        m[(0, 3)] *= c(v, 0.0);
        m[(3, 0)] *= c(v, 0.0);
        let rho = DensityMatrix::new(m).unwrap();
        let r = report(&rho).unwrap();
        assert!((r.fidelities.phi_plus - 0.97).abs() < 1e-12);
        assert!((r.tangle - 0.8836).abs() < 1e-10);
        // same numbers as the polkit functions, bit for bit
        assert_eq!(r.tangle.to_bits(), tangle(&rho).unwrap().to_bits());
        assert_eq!(
            r.fidelities.phi_plus.to_bits(),
            fidelity(&rho, &bell_state(BellState::PhiPlus)).to_bits()
        );
    }
}
