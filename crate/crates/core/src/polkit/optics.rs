use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{hermitize, DensityMatrix, TwoQubitState, STATE_TOL};
use super::{c, kron, Mat4};
use crate::error::{Error, Result};

/// Single-photon Jones operator, basis (H, V).
pub type Jones = Matrix2<Complex64>;

/// Linear retarder. The Jones matrix is `R(a) diag(1, e^{i d}) R(-a)` with
/// `R` the active rotation by the fast-axis angle `a` and `d` the retardance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveplate {
    pub retardance: f64,
    pub fast_axis: f64,
}

impl Waveplate {
    pub fn new(retardance: f64, fast_axis: f64) -> Result<Self> {
        if !(0.0..2.0 * PI).contains(&retardance) {
            return Err(Error::invalid(format!(
                "retardance must lie in [0, 2pi), got {retardance}"
            )));
        }
        if !fast_axis.is_finite() {
            return Err(Error::invalid("fast axis angle must be finite"));
        }
        Ok(Self {
            retardance,
            fast_axis,
        })
    }

    pub fn half_wave(fast_axis: f64) -> Self {
        Self {
            retardance: PI,
            fast_axis,
        }
    }

    pub fn quarter_wave(fast_axis: f64) -> Self {
        Self {
            retardance: FRAC_PI_2,
            fast_axis,
        }
    }

    pub fn operator(&self) -> Jones {
        waveplate_operator(self)
    }
}

fn rotation(angle: f64) -> Jones {
    let (s, co) = angle.sin_cos();
    Jones::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

pub fn waveplate_operator(wp: &Waveplate) -> Jones {
    let (s, co) = wp.retardance.sin_cos();
    let retard = Jones::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(co, s));
    rotation(wp.fast_axis) * retard * rotation(-wp.fast_axis)
}

/// One analyzer arm: a half-wave plate, then a quarter-wave plate, then a
/// PBS whose transmitted (horizontal) port feeds the detector.
/// Angles are fast-axis orientations in radians.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerArm {
    pub qwp_rad: f64,
    pub hwp_rad: f64,
}

impl AnalyzerArm {
    pub fn new(qwp_rad: f64, hwp_rad: f64) -> Result<Self> {
        if !qwp_rad.is_finite() || !hwp_rad.is_finite() {
            return Err(Error::invalid("analyzer angles must be finite"));
        }
        Ok(Self { qwp_rad, hwp_rad })
    }

    /// Both arms set to transmit `(H + V)/sqrt 2`.
    pub fn diagonal() -> Self {
        Self {
            qwp_rad: 0.0,
            hwp_rad: PI / 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSetting {
    pub arm1: AnalyzerArm,
    pub arm2: AnalyzerArm,
}

impl AnalyzerSetting {
    pub fn new(arm1: AnalyzerArm, arm2: AnalyzerArm) -> Self {
        Self { arm1, arm2 }
    }

    pub fn diagonal() -> Self {
        Self::new(AnalyzerArm::diagonal(), AnalyzerArm::diagonal())
    }
}

/// Composite waveplate operator of one arm (HWP acts first).
pub fn arm_operator(arm: &AnalyzerArm) -> Jones {
    waveplate_operator(&Waveplate::quarter_wave(arm.qwp_rad))
        * waveplate_operator(&Waveplate::half_wave(arm.hwp_rad))
}

/// Polarization state transmitted to the detector: `U^dagger |H>`.
pub fn measured_polarization(arm: &AnalyzerArm) -> Vector2<Complex64> {
    arm_operator(arm).adjoint() * Vector2::new(c(1.0, 0.0), c(0.0, 0.0))
}

/// Rank-1 projector of a coincidence detection behind both analyzers.
pub fn projector(setting: &AnalyzerSetting) -> Mat4 {
    let p1 = measured_polarization(&setting.arm1);
    let p2 = measured_polarization(&setting.arm2);
    kron(&(p1 * p1.adjoint()), &(p2 * p2.adjoint()))
}

fn check_unitary(u: &Jones) -> Result<()> {
    let dev = (u.adjoint() * u - Jones::identity())
        .iter()
        .fold(0.0_f64, |m, z| m.max(z.norm()));
    if dev > STATE_TOL {
        return Err(Error::invalid(format!(
            "operator is not unitary (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

/// Local operations `u1 (x) u2` acting on two-photon states.
pub trait ApplyLocal: Sized {
    fn apply_local(&self, u1: &Jones, u2: &Jones) -> Result<Self>;
}

impl ApplyLocal for TwoQubitState {
    fn apply_local(&self, u1: &Jones, u2: &Jones) -> Result<Self> {
        check_unitary(u1)?;
        check_unitary(u2)?;
        Ok(TwoQubitState::from_vector_unchecked(
            kron(u1, u2) * self.vector(),
        ))
    }
}

impl ApplyLocal for DensityMatrix {
    fn apply_local(&self, u1: &Jones, u2: &Jones) -> Result<Self> {
        check_unitary(u1)?;
        check_unitary(u2)?;
        let u = kron(u1, u2);
        Ok(DensityMatrix::from_matrix_unchecked(hermitize(
            &(u * self.matrix() * u.adjoint()),
        )))
    }
}

pub fn apply_local<T: ApplyLocal>(u1: &Jones, u2: &Jones, state: &T) -> Result<T> {
    state.apply_local(u1, u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::{bell_state, BellState};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn h() -> Vector2<Complex64> {
        Vector2::new(c(1.0, 0.0), c(0.0, 0.0))
    }

    /// |<a|b>| for single-photon vectors.
    fn overlap(a: &Vector2<Complex64>, b: &Vector2<Complex64>) -> f64 {
        a.dotc(b).norm()
    }

    #[test]
    fn half_wave_plates() {
        let u = waveplate_operator(&Waveplate::half_wave(0.0));
        let want = Jones::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0));
        assert!((u - want).norm() < 1e-15);

        let d = waveplate_operator(&Waveplate::half_wave(PI / 8.0)) * h();
        let diag = Vector2::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        assert!((overlap(&d, &diag) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_wave_at_45_gives_circular() {
        let out = waveplate_operator(&Waveplate::quarter_wave(PI / 4.0)) * h();
        assert!((out[0].norm_sqr() - 0.5).abs() < 1e-15);
        assert!((out[1].norm_sqr() - 0.5).abs() < 1e-15);
        let rel = (out[1] / out[0]).arg();
        assert!((rel.abs() - FRAC_PI_2).abs() < 1e-15);
        // With this sign convention +45 deg yields (H - iV)/sqrt 2 and -45 deg (H + iV)/sqrt 2.
        let left = Vector2::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2));
        let right = Vector2::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2));
        assert!((overlap(&out, &left) - 1.0).abs() < 1e-15);
        let out = waveplate_operator(&Waveplate::quarter_wave(-PI / 4.0)) * h();
        assert!((overlap(&out, &right) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn retardance_domain() {
        assert!(Waveplate::new(2.0 * PI, 0.0).is_err());
        assert!(Waveplate::new(-0.1, 0.0).is_err());
        assert!(Waveplate::new(PI, 0.3).is_ok());
    }

    #[test]
    fn projector_examples() {
        let p = projector(&AnalyzerSetting::default());
        let mut want = Mat4::zeros();
        want[(0, 0)] = c(1.0, 0.0);
        assert!((p - want).norm() < 1e-15);

        let p = projector(&AnalyzerSetting::diagonal());
        let want = Mat4::from_element(c(0.25, 0.0));
        assert!((p - want).norm() < 1e-15);
        assert!((p * p - p).norm() < 1e-15);
    }

    #[test]
    fn extra_half_wave_maps_phi_to_psi() {
        let hwp = waveplate_operator(&Waveplate::half_wave(PI / 4.0));
        let id = Jones::identity();
        let psi_p = apply_local(&hwp, &id, &bell_state(BellState::PhiPlus)).unwrap();
        assert!((psi_p.overlap(&bell_state(BellState::PsiPlus)) - 1.0).abs() < 1e-15);
        let psi_m = apply_local(&hwp, &id, &bell_state(BellState::PhiMinus)).unwrap();
        assert!((psi_m.overlap(&bell_state(BellState::PsiMinus)) - 1.0).abs() < 1e-15);
        let same = apply_local(&id, &id, &bell_state(BellState::PsiMinus)).unwrap();
        assert_eq!(same, bell_state(BellState::PsiMinus));
    }

    #[test]
    fn non_unitary_rejected() {
        let m = Jones::identity() * c(2.0, 0.0);
        assert!(apply_local(&m, &Jones::identity(), &bell_state(BellState::PhiPlus)).is_err());
    }
}
