use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::Vector4;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::measures::hermitian_eigen;
use super::{c, Mat4};
use crate::error::{Error, Result};

/// Normalization, hermiticity and trace tolerance.
pub const STATE_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_FLOOR: f64 = -1e-9;

pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

/// Pure two-photon polarization state, amplitudes ordered (HH, HV, VH, VV).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState(Vector4<Complex64>);

impl TwoQubitState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let v = Vector4::from(amplitudes);
        let norm = v.norm_squared();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "amplitudes must be normalized, sum |a|^2 = {norm}"
            )));
        }
        Ok(Self(v))
    }

    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn normalized(amplitudes: [Complex64; 4]) -> Result<Self> {
        let v = Vector4::from(amplitudes);
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self(v / c(n, 0.0)))
    }

    pub(crate) fn from_vector_unchecked(v: Vector4<Complex64>) -> Self {
        Self(v)
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn vector(&self) -> &Vector4<Complex64> {
        &self.0
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &TwoQubitState) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// `|<self|other>|`, equal to 1 for states that differ by a global phase.
    pub fn overlap(&self, other: &TwoQubitState) -> f64 {
        self.inner(other).norm()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix(self.0 * self.0.adjoint())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.label() == label)
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `(|HH> + e^{i theta} |VV>) / sqrt 2`.
pub fn phi_theta(theta: f64) -> TwoQubitState {
    let s = FRAC_1_SQRT_2;
    let (sin, cos) = theta.sin_cos();
    TwoQubitState(Vector4::new(
        c(s, 0.0),
        c(0.0, 0.0),
        c(0.0, 0.0),
        c(s * cos, s * sin),
    ))
}

pub fn bell_state(kind: BellState) -> TwoQubitState {
    let s = FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let v = match kind {
        BellState::PhiPlus => Vector4::new(c(s, 0.0), z, z, c(s, 0.0)),
        BellState::PhiMinus => Vector4::new(c(s, 0.0), z, z, c(-s, 0.0)),
        BellState::PsiPlus => Vector4::new(z, c(s, 0.0), c(s, 0.0), z),
        BellState::PsiMinus => Vector4::new(z, c(s, 0.0), c(-s, 0.0), z),
    };
    TwoQubitState(v)
}

/// A physical two-qubit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub(crate) Mat4);

impl DensityMatrix {
    pub fn new(m: Mat4) -> Result<Self> {
        let herm = (m - m.adjoint())
            .iter()
            .fold(0.0_f64, |a, z| a.max(z.norm()));
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace must be 1, got {tr}")));
        }
        let (evals, _) = hermitian_eigen(&m);
        let min = evals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < PSD_FLOOR {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e} below floor {PSD_FLOOR:e}"
            )));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Mat4) -> Self {
        Self(m)
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat4::identity() * c(0.25, 0.0))
    }

    pub fn from_pure(state: &TwoQubitState) -> Self {
        state.density()
    }

    /// Clamp the spectrum of a Hermitian matrix at `floor`, renormalize.
    ///
    /// The input is symmetrized first, so small anti-Hermitian noise is
    /// discarded. Fails if nothing positive remains.
    pub fn project_to_physical(m: &Mat4, floor: f64) -> Result<Self> {
        let h = (m + m.adjoint()) * c(0.5, 0.0);
        let (evals, vecs) = hermitian_eigen(&h);
        let clamped: Vec<f64> = evals.iter().map(|&e| e.max(floor.max(0.0))).collect();
        let total: f64 = clamped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidState(
                "no positive spectrum to project".into(),
            ));
        }
        let mut out = Mat4::zeros();
        for (k, &e) in clamped.iter().enumerate() {
            let col = vecs.column(k);
            out += col * col.adjoint() * c(e / total, 0.0);
        }
        Ok(Self(hermitize(&out)))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let (evals, _) = hermitian_eigen(&self.0);
        let mut e = [evals[0], evals[1], evals[2], evals[3]];
        e.sort_by(|a, b| b.total_cmp(a));
        e
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Convex mixture `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &DensityMatrix, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::invalid(format!(
                "mixing weight must lie in [0, 1], got {weight}"
            )));
        }
        Ok(Self(
            self.0 * c(1.0 - weight, 0.0) + other.0 * c(weight, 0.0),
        ))
    }

    pub fn real_part(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.0[(i, j)].re))
    }

    pub fn imag_part(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.0[(i, j)].im))
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()))
    }
}

/// Exactly Hermitian copy of `m`.
pub(crate) fn hermitize(m: &Mat4) -> Mat4 {
    (m + m.adjoint()) * c(0.5, 0.0)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityMatrixJson {
    basis: Vec<String>,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| [self.0[(i, j)].re, self.0[(i, j)].im])
                    .collect()
            })
            .collect();
        DensityMatrixJson {
            basis: BASIS_LABELS.iter().map(|s| s.to_string()).collect(),
            entries,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = DensityMatrixJson::deserialize(deserializer)?;
        if raw.basis != BASIS_LABELS {
            return Err(D::Error::custom(format!(
                "basis must be {BASIS_LABELS:?}, got {:?}",
                raw.basis
            )));
        }
        if raw.entries.len() != 4 || raw.entries.iter().any(|r| r.len() != 4) {
            return Err(D::Error::custom(
                "entries must be a 4x4 array of [re, im] pairs",
            ));
        }
        let m = Mat4::from_fn(|i, j| c(raw.entries[i][j][0], raw.entries[i][j][1]));
        DensityMatrix::new(m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phi_theta_special_values() {
        assert!((phi_theta(0.0).overlap(&bell_state(BellState::PhiPlus)) - 1.0).abs() < 1e-15);
        assert!((phi_theta(PI).overlap(&bell_state(BellState::PhiMinus)) - 1.0).abs() < 1e-15);
        let a = phi_theta(PI / 2.0).amplitudes();
        let s = FRAC_1_SQRT_2;
        assert!((a[0] - c(s, 0.0)).norm() < 1e-15);
        assert!(a[1].norm() == 0.0 && a[2].norm() == 0.0);
        assert!((a[3] - c(0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn bell_states_are_orthonormal() {
        for (i, a) in BellState::ALL.iter().enumerate() {
            for (j, b) in BellState::ALL.iter().enumerate() {
                let ov = bell_state(*a).inner(&bell_state(*b)).norm();
                if i == j {
                    assert!((ov - 1.0).abs() < 1e-12);
                } else {
                    assert!(ov < 1e-12);
                }
            }
        }
        let psi_m = bell_state(BellState::PsiMinus).amplitudes();
        assert_eq!(psi_m[1], c(FRAC_1_SQRT_2, 0.0));
        assert_eq!(psi_m[2], c(-FRAC_1_SQRT_2, 0.0));
        assert_eq!(bell_state(BellState::PhiPlus), phi_theta(0.0));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(Mat4::identity()).is_err());
        let mut m = Mat4::identity() * c(0.25, 0.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let neg = Mat4::from_diagonal(&Vector4::new(
            c(0.6, 0.0),
            c(0.6, 0.0),
            c(-0.2, 0.0),
            c(0.0, 0.0),
        ));
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::new(*DensityMatrix::maximally_mixed().matrix()).is_ok());
        assert!(TwoQubitState::new([c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).is_err());
        assert!(TwoQubitState::normalized([c(0.0, 0.0); 4]).is_err());
    }

    #[test]
    fn projection_clamps_negative_spectrum() {
        let neg = Mat4::from_diagonal(&Vector4::new(
            c(0.6, 0.0),
            c(0.6, 0.0),
            c(-0.2, 0.0),
            c(0.0, 0.0),
        ));
        let p = DensityMatrix::project_to_physical(&neg, 0.0).unwrap();
        let e = p.eigenvalues();
        assert!((e[0] - 0.5).abs() < 1e-12 && (e[1] - 0.5).abs() < 1e-12);
        assert!(e[3].abs() < 1e-12);
    }

    #[test]
    fn json_shape_and_round_trip() {
        let rho = phi_theta(0.7)
            .density()
            .mix(&DensityMatrix::maximally_mixed(), 0.13)
            .unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["basis"], serde_json::json!(["HH", "HV", "VH", "VV"]));
        assert_eq!(v["entries"][0][3].as_array().unwrap().len(), 2);
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);

        let bad = text.replace("\"HH\"", "\"XX\"");
        assert!(serde_json::from_str::<DensityMatrix>(&bad).is_err());
    }
}
