use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polkit::{c, kron, projector, AnalyzerArm, AnalyzerSetting, Mat4, C64};

/// Single-photon analysis state of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisState {
    H,
    V,
    D,
    R,
}

impl BasisState {
    pub const ALL: [BasisState; 4] = [BasisState::H, BasisState::V, BasisState::D, BasisState::R];

    pub fn symbol(&self) -> char {
        match self {
            BasisState::H => 'H',
            BasisState::V => 'V',
            BasisState::D => 'D',
            BasisState::R => 'R',
        }
    }

    pub fn from_symbol(ch: char) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.symbol() == ch)
    }

    /// Waveplate angles that make the arm transmit this state.
    pub fn arm(&self) -> AnalyzerArm {
        let deg = PI / 180.0;
        match self {
            BasisState::H => AnalyzerArm {
                qwp_rad: 0.0,
                hwp_rad: 0.0,
            },
            BasisState::V => AnalyzerArm {
                qwp_rad: 0.0,
                hwp_rad: 45.0 * deg,
            },
            BasisState::D => AnalyzerArm {
                qwp_rad: 0.0,
                hwp_rad: 22.5 * deg,
            },
            BasisState::R => AnalyzerArm {
                qwp_rad: -45.0 * deg,
                hwp_rad: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSetting {
    pub label: String,
    pub analyzer: AnalyzerSetting,
}

/// A labeled list of two-arm analyzer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographySet {
    pub settings: Vec<LabeledSetting>,
}

/// The 16 settings `{H, V, D, R} x {H, V, D, R}`, labels like `"DR"`.
pub fn standard_settings() -> TomographySet {
    let settings = BasisState::ALL
        .iter()
        .flat_map(|a| {
            BasisState::ALL.iter().map(move |b| LabeledSetting {
                label: format!("{}{}", a.symbol(), b.symbol()),
                analyzer: AnalyzerSetting::new(a.arm(), b.arm()),
            })
        })
        .collect();
    TomographySet { settings }
}

/// Orthonormal Hermitian basis `sigma_a (x) sigma_b / 2` of 4x4 matrices.
pub fn hermitian_basis() -> [Mat4; 16] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let paulis = [
        Matrix2::new(o, z, z, o),
        Matrix2::new(z, o, o, z),
        Matrix2::new(z, c(0.0, -1.0), c(0.0, 1.0), z),
        Matrix2::new(o, z, z, -o),
    ];
    std::array::from_fn(|k| kron(&paulis[k / 4], &paulis[k % 4]) * C64::new(0.5, 0.0))
}

/// Matrix of `tr(P_k B_j)` for projectors `P_k` and the Hermitian basis.
pub fn sensing_matrix(projectors: &[Mat4]) -> DMatrix<f64> {
    let basis = hermitian_basis();
    DMatrix::from_fn(projectors.len(), 16, |k, j| {
        (projectors[k] * basis[j]).trace().re
    })
}

pub(crate) fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    sv.iter().filter(|&&s| s > 1e-10 * max.max(1e-300)).count()
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

impl TomographySet {
    pub fn standard() -> Self {
        standard_settings()
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    pub fn find(&self, label: &str) -> Option<&LabeledSetting> {
        self.settings.iter().find(|s| s.label == label)
    }

    pub fn projectors(&self) -> Vec<Mat4> {
        self.settings
            .iter()
            .map(|s| projector(&s.analyzer))
            .collect()
    }

    /// Hilbert-Schmidt Gram matrix `tr(P_i P_j)`.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let p = self.projectors();
        DMatrix::from_fn(p.len(), p.len(), |i, j| (p[i] * p[j]).trace().re)
    }

    pub fn gram_rank(&self) -> usize {
        numerical_rank(&self.gram_matrix())
    }

    pub fn gram_condition(&self) -> f64 {
        condition(&self.gram_matrix())
    }

    /// Condition number of the linear map from the Hermitian-basis
    /// coordinates of a state to its 16 outcome probabilities; the square
    /// root of [`Self::gram_condition`] for a square set.
    pub fn sensing_condition(&self) -> f64 {
        condition(&sensing_matrix(&self.projectors()))
    }

    pub fn ensure_complete(&self) -> Result<()> {
        let rank = numerical_rank(&sensing_matrix(&self.projectors()));
        if rank < 16 {
            return Err(Error::IncompleteSet { rank });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::measured_polarization;
    use nalgebra::Vector2;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn target(b: BasisState) -> Vector2<C64> {
        let s = FRAC_1_SQRT_2;
        match b {
            BasisState::H => Vector2::new(c(1.0, 0.0), c(0.0, 0.0)),
            BasisState::V => Vector2::new(c(0.0, 0.0), c(1.0, 0.0)),
            BasisState::D => Vector2::new(c(s, 0.0), c(s, 0.0)),
            BasisState::R => Vector2::new(c(s, 0.0), c(0.0, s)),
        }
    }

    #[test]
    fn arms_realize_their_labels() {
        for b in BasisState::ALL {
            let got = measured_polarization(&b.arm());
            assert!((got.dotc(&target(b)).norm() - 1.0).abs() < 1e-14, "{b:?}");
        }
    }

    #[test]
    fn labeled_projectors() {
        let set = standard_settings();
        assert_eq!(set.len(), 16);
        let hh = projector(&set.find("HH").unwrap().analyzer);
        let mut want = Mat4::zeros();
        want[(0, 0)] = c(1.0, 0.0);
        assert!((hh - want).norm() < 1e-14);

        let dr = projector(&set.find("DR").unwrap().analyzer);
        let d = target(BasisState::D);
        let r = target(BasisState::R);
        let want = kron(&(d * d.adjoint()), &(r * r.adjoint()));
        assert!((dr - want).norm() < 1e-14);
    }

    #[test]
    fn informational_completeness() {
        let set = standard_settings();
        assert_eq!(set.gram_rank(), 16);
        set.ensure_complete().unwrap();
        // Gram condition of {H,V,D,R}^2 is cond(G1)^2 with G1 the 4x4 single-arm Gram.
        assert!((set.gram_condition() - 108.2407613).abs() < 1e-5);
        assert!(set.sensing_condition() < 20.0);
        assert!((set.sensing_condition().powi(2) - set.gram_condition()).abs() < 1e-6);

        let partial = TomographySet {
            settings: set.settings[..15].to_vec(),
        };
        assert!(matches!(
            partial.ensure_complete(),
            Err(Error::IncompleteSet { rank: 15 })
        ));
    }
}
