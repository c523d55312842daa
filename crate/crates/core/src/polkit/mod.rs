//! Two-photon polarization algebra in the basis `{HH, HV, VH, VV}`.
//!
//! Global phases are never compared directly: state equality is always
//! checked through `|<psi|phi>| = 1`.

mod measures;
mod optics;
mod state;

pub use measures::{
    concurrence, concurrence_matrix, fidelity, hermitian_eigen, tangle, trace_distance,
};
pub use optics::{
    apply_local, arm_operator, measured_polarization, projector, waveplate_operator, AnalyzerArm,
    AnalyzerSetting, ApplyLocal, Jones, Waveplate,
};
pub use state::{
    bell_state, phi_theta, BellState, DensityMatrix, TwoQubitState, BASIS_LABELS, PSD_FLOOR,
    STATE_TOL,
};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat4 = Matrix4<Complex64>;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Pauli Y.
pub fn sigma_y() -> Matrix2<Complex64> {
    Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}
