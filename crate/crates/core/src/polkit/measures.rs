use nalgebra::{SymmetricEigen, Vector4};

use super::state::{DensityMatrix, TwoQubitState, PSD_FLOOR};
use super::{c, kron, sigma_y, Mat4};
use crate::error::{Error, Result};

/// Eigen-decomposition of a Hermitian 4x4 matrix (eigenvalues unsorted,
/// columns of the second matrix are the eigenvectors).
pub fn hermitian_eigen(m: &Mat4) -> (Vector4<f64>, Mat4) {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    (eig.eigenvalues, eig.eigenvectors)
}

/// `<psi| rho |psi>`.
pub fn fidelity(rho: &DensityMatrix, target: &TwoQubitState) -> f64 {
    let v = target.vector();
    v.dotc(&(rho.matrix() * v)).re
}

/// Trace distance `0.5 * || a - b ||_1`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (evals, _) = hermitian_eigen(&(a.matrix() - b.matrix()));
    0.5 * evals.iter().map(|e| e.abs()).sum::<f64>()
}

fn spin_flip() -> Mat4 {
    let y = sigma_y();
    kron(&y, &y)
}

fn hermitian_sqrt(m: &Mat4) -> Mat4 {
    let (evals, vecs) = hermitian_eigen(m);
    let mut out = Mat4::zeros();
    for k in 0..4 {
        let col = vecs.column(k);
        out += col * col.adjoint() * c(evals[k].max(0.0).sqrt(), 0.0);
    }
    out
}

/// Wootters concurrence of a (possibly unvalidated) Hermitian matrix.
///
/// The spin-flip eigenvalues are obtained from the Hermitian form
/// `sqrt(rho) rho~ sqrt(rho)`, which shares its spectrum with `rho rho~`.
pub fn concurrence_matrix(m: &Mat4) -> Result<f64> {
    let (evals, _) = hermitian_eigen(m);
    let min = evals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < PSD_FLOOR {
        return Err(Error::InvalidState(format!(
            "concurrence needs a positive semidefinite matrix (min eigenvalue {min:.3e})"
        )));
    }
    let yy = spin_flip();
    let flipped = yy * m.conjugate() * yy;
    let s = hermitian_sqrt(m);
    let (r, _) = hermitian_eigen(&(s * flipped * s));
    let mut lambdas: Vec<f64> = r.iter().map(|e| e.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    concurrence_matrix(rho.matrix())
}

/// Squared concurrence.
pub fn tangle(rho: &DensityMatrix) -> Result<f64> {
    concurrence(rho).map(|c| c * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::{bell_state, BellState};

    fn werner(p: f64) -> DensityMatrix {
        bell_state(BellState::PhiPlus)
            .density()
            .mix(&DensityMatrix::maximally_mixed(), 1.0 - p)
            .unwrap()
    }

    #[test]
    fn bell_and_product() {
        for b in BellState::ALL {
            let rho = bell_state(b).density();
            assert!((tangle(&rho).unwrap() - 1.0).abs() < 1e-10);
            assert!((fidelity(&rho, &bell_state(b)) - 1.0).abs() < 1e-15);
        }
        let mut hh = Mat4::zeros();
        hh[(0, 0)] = c(1.0, 0.0);
        assert!(tangle(&DensityMatrix::new(hh).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn mixed_and_werner() {
        let mixed = DensityMatrix::maximally_mixed();
        for b in BellState::ALL {
            assert!((fidelity(&mixed, &bell_state(b)) - 0.25).abs() < 1e-15);
        }
        let w = werner(0.8);
        assert!((concurrence(&w).unwrap() - 0.7).abs() < 1e-10);
        assert!((tangle(&w).unwrap() - 0.49).abs() < 1e-10);
    }

    #[test]
    fn dephased_fidelity() {
        let v = 0.9785;
        let mut m = *bell_state(BellState::PhiPlus).density().matrix();
        m[(0, 3)] *= c(v, 0.0);
        m[(3, 0)] *= c(v, 0.0);
        let rho = DensityMatrix::new(m).unwrap();
        let f = fidelity(&rho, &bell_state(BellState::PhiPlus));
        assert!((f - (1.0 + v) / 2.0).abs() < 1e-15);
        assert!((f - 0.989).abs() < 5e-4);
        assert!((tangle(&rho).unwrap() - v * v).abs() < 1e-10);
    }

    #[test]
    fn rejects_nonphysical() {
        let m = Mat4::from_diagonal(&Vector4::new(
            c(0.6, 0.0),
            c(0.6, 0.0),
            c(-0.2, 0.0),
            c(0.0, 0.0),
        ));
        assert!(matches!(
            concurrence_matrix(&m),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn trace_distance_basics() {
        let a = bell_state(BellState::PhiPlus).density();
        let b = bell_state(BellState::PhiMinus).density();
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-12);
        assert!(trace_distance(&a, &a) < 1e-15);
    }
}
