//! End-to-end model of the entangled-pair source, the mirror scan that sets
//! the relative phase, and Poissonian coincidence counting.

use std::f64::consts::{LN_2, PI};

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polkit::{
    apply_local, phi_theta, projector, waveplate_operator, AnalyzerSetting, BellState,
    DensityMatrix, Jones, Waveplate,
};
use crate::seeds::{derive_seed, rng};

/// Coincidence-to-singles ratio of the collection system.
pub const COINCIDENCE_SINGLES_RATIO: f64 = 0.08;

/// Effective bandwidth assumed behind the 70 nm filters.
pub const WIDE_FILTER_EFFECTIVE_BANDWIDTH: f64 = 35e-9;

/// Noise and rate description of the pair source.
///
/// The residual fiber unitaries are stacks of retarders applied in order;
/// an empty stack is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    pub dephasing_visibility: f64,
    pub white_noise_fraction: f64,
    pub center_wavelength_m: f64,
    pub bandwidth_m: f64,
    pub pair_rate_hz: f64,
    pub singles_rate_1_hz: f64,
    pub singles_rate_2_hz: f64,
    pub coincidence_window_s: f64,
    #[serde(default)]
    pub residual_arm1: Vec<Waveplate>,
    #[serde(default)]
    pub residual_arm2: Vec<Waveplate>,
}

impl SourceModel {
    /// Ideal source at the given rates; singles follow the 8% ratio.
    pub fn ideal(center_wavelength_m: f64, bandwidth_m: f64, pair_rate_hz: f64) -> Self {
        let singles = pair_rate_hz / COINCIDENCE_SINGLES_RATIO;
        Self {
            dephasing_visibility: 1.0,
            white_noise_fraction: 0.0,
            center_wavelength_m,
            bandwidth_m,
            pair_rate_hz,
            singles_rate_1_hz: singles,
            singles_rate_2_hz: singles,
            coincidence_window_s: 3e-9,
            residual_arm1: Vec::new(),
            residual_arm2: Vec::new(),
        }
    }

    /// 6 nm filters: 180 coinc/s, fringe visibility 0.9785.
    pub fn narrow_filter() -> Self {
        Self {
            dephasing_visibility: 0.9785,
            ..Self::ideal(728e-9, 6e-9, 180.0)
        }
    }

    /// 70 nm filters: 1000 coinc/s, fringe visibility 0.9094.
    ///
    /// Fiber mode selection makes the effective bandwidth narrower than the
    /// filter; 35 nm (half the filter width) is a placeholder, not a
    /// measurement.
    pub fn wide_filter() -> Self {
        Self {
            dephasing_visibility: 0.9094,
            ..Self::ideal(728e-9, WIDE_FILTER_EFFECTIVE_BANDWIDTH, 1000.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            }
        };
        unit("dephasing_visibility", self.dephasing_visibility)?;
        unit("white_noise_fraction", self.white_noise_fraction)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("center_wavelength_m", self.center_wavelength_m)?;
        positive("bandwidth_m", self.bandwidth_m)?;
        positive("coincidence_window_s", self.coincidence_window_s)?;
        for (name, v) in [
            ("pair_rate_hz", self.pair_rate_hz),
            ("singles_rate_1_hz", self.singles_rate_1_hz),
            ("singles_rate_2_hz", self.singles_rate_2_hz),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        for wp in self.residual_arm1.iter().chain(&self.residual_arm2) {
            Waveplate::new(wp.retardance, wp.fast_axis)?;
        }
        Ok(())
    }

    pub fn residual_unitary_1(&self) -> Jones {
        stack_operator(&self.residual_arm1)
    }

    pub fn residual_unitary_2(&self) -> Jones {
        stack_operator(&self.residual_arm2)
    }

    /// Coherence length `lambda^2 / delta_lambda`.
    pub fn coherence_length(&self) -> f64 {
        self.center_wavelength_m * self.center_wavelength_m / self.bandwidth_m
    }
}

fn stack_operator(plates: &[Waveplate]) -> Jones {
    plates
        .iter()
        .fold(Jones::identity(), |acc, wp| waveplate_operator(wp) * acc)
}

/// Source state with an explicit coherence multiplier on the HH-VV term.
fn noisy_state(model: &SourceModel, theta: f64, visibility: f64) -> Result<DensityMatrix> {
    let pure = phi_theta(theta).density();
    let mut m = *pure.matrix();
    m[(0, 3)] *= visibility;
    m[(3, 0)] *= visibility;
    let dephased = DensityMatrix::new(m)?;
    let mixed = dephased.mix(
        &DensityMatrix::maximally_mixed(),
        model.white_noise_fraction,
    )?;
    apply_local(
        &model.residual_unitary_1(),
        &model.residual_unitary_2(),
        &mixed,
    )
}

/// `(1 - eps) rho_deph(theta, V) + eps I/4`, then the residual local unitaries.
pub fn effective_state(model: &SourceModel, theta: f64) -> Result<DensityMatrix> {
    model.validate()?;
    noisy_state(model, theta, model.dephasing_visibility)
}

/// Setup that turns the source into one of the four Bell states: the
/// mirror phase, plus the extra half-wave plate (fast axis 45 deg) on arm 1
/// for the Psi states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preparation {
    pub theta: f64,
    #[serde(default)]
    pub extra_half_wave_arm1: bool,
}

impl Preparation {
    pub fn for_bell(kind: BellState) -> Self {
        let (theta, extra) = match kind {
            BellState::PhiPlus => (0.0, false),
            BellState::PhiMinus => (PI, false),
            BellState::PsiPlus => (0.0, true),
            BellState::PsiMinus => (PI, true),
        };
        Self {
            theta,
            extra_half_wave_arm1: extra,
        }
    }
}

pub fn prepared_state(model: &SourceModel, prep: &Preparation) -> Result<DensityMatrix> {
    let rho = effective_state(model, prep.theta)?;
    if prep.extra_half_wave_arm1 {
        let hwp = waveplate_operator(&Waveplate::half_wave(PI / 4.0));
        apply_local(&hwp, &Jones::identity(), &rho)
    } else {
        Ok(rho)
    }
}

/// Relative phase set by mirror displacement `z`: `4 pi z / lambda + offset`.
pub fn phase_of_position(z: f64, model: &SourceModel, offset: f64) -> f64 {
    4.0 * PI * z / model.center_wavelength_m + offset
}

/// Gaussian coherence envelope of the fringe versus mirror displacement.
///
/// For a Gaussian spectrum of FWHM `delta_lambda` and a path difference of
/// `2 z`, the envelope is `exp(-(pi z / L_c)^2 / ln 2)` with
/// `L_c = lambda^2 / delta_lambda`.
pub fn visibility_envelope(z: f64, model: &SourceModel) -> Result<f64> {
    if !(model.bandwidth_m > 0.0) {
        return Err(Error::invalid("bandwidth must be > 0"));
    }
    let u = z / model.coherence_length();
    Ok((-(u * u) * PI * PI / LN_2).exp())
}

/// Born-rule detection probability behind both analyzers.
pub fn coincidence_probability(rho: &DensityMatrix, analyzer: &AnalyzerSetting) -> f64 {
    (projector(analyzer) * rho.matrix())
        .trace()
        .re
        .clamp(0.0, 1.0)
}

/// Mean counts over an acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub duration: f64,
    pub coincidences: f64,
    pub accidentals: f64,
    pub singles_1: f64,
    pub singles_2: f64,
}

/// Mean coincidence and singles counts for detection probability `p`.
///
/// `p = 0.5` (the fringe maximum) maps onto `pair_rate`; accidentals
/// `S1 S2 tau T` are added on top.
pub fn expected_counts(p: f64, model: &SourceModel, duration: f64) -> Result<ExpectedCounts> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::invalid(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    let accidentals =
        model.singles_rate_1_hz * model.singles_rate_2_hz * model.coincidence_window_s * duration;
    Ok(ExpectedCounts {
        duration,
        coincidences: 2.0 * model.pair_rate_hz * p * duration + accidentals,
        accidentals,
        singles_1: model.singles_rate_1_hz * duration,
        singles_2: model.singles_rate_2_hz * duration,
    })
}

/// One acquisition at a fixed analyzer setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_label: String,
    pub analyzer: AnalyzerSetting,
    pub duration: f64,
    pub coincidences: u64,
    pub singles_1: u64,
    pub singles_2: u64,
}

impl CountRecord {
    pub fn coincidence_rate(&self) -> f64 {
        self.coincidences as f64 / self.duration
    }
}

pub(crate) fn poisson<R: rand::Rng>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::invalid(format!(
            "Poisson mean must be >= 0, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// Independent Poisson draws around `means`, reproducible for a fixed seed.
pub fn sample_counts(
    label: impl Into<String>,
    analyzer: AnalyzerSetting,
    means: &ExpectedCounts,
    seed: u64,
) -> Result<CountRecord> {
    let mut r = rng(seed);
    Ok(CountRecord {
        setting_label: label.into(),
        analyzer,
        duration: means.duration,
        coincidences: poisson(means.coincidences, &mut r)?,
        singles_1: poisson(means.singles_1, &mut r)?,
        singles_2: poisson(means.singles_2, &mut r)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorScan {
    pub positions_m: Vec<f64>,
    #[serde(default)]
    pub phase_offset_rad: f64,
}

impl MirrorScan {
    pub fn uniform(start: f64, stop: f64, points: usize, phase_offset_rad: f64) -> Self {
        Self {
            positions_m: crate::beam_optics::linspace(start, stop, points),
            phase_offset_rad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions_m.len() < 2 {
            return Err(Error::invalid("mirror scan needs at least 2 positions"));
        }
        if self.positions_m.iter().any(|z| !z.is_finite()) || !self.phase_offset_rad.is_finite() {
            return Err(Error::invalid("mirror scan positions must be finite"));
        }
        Ok(())
    }
}

/// Mean counts at every scan position.
pub fn fringe_means(
    scan: &MirrorScan,
    model: &SourceModel,
    analyzer: &AnalyzerSetting,
    duration_per_point: f64,
) -> Result<Vec<(f64, ExpectedCounts)>> {
    scan.validate()?;
    model.validate()?;
    scan.positions_m
        .iter()
        .map(|&z| {
            let theta = phase_of_position(z, model, scan.phase_offset_rad);
            let v = model.dephasing_visibility * visibility_envelope(z, model)?;
            let rho = noisy_state(model, theta, v)?;
            let p = coincidence_probability(&rho, analyzer);
            Ok((z, expected_counts(p, model, duration_per_point)?))
        })
        .collect()
}

/// Poisson-sampled mirror scan. Point `i` draws from `derive_seed(seed, i)`,
/// so the result does not depend on evaluation order.
pub fn fringe_scan(
    scan: &MirrorScan,
    model: &SourceModel,
    analyzer: &AnalyzerSetting,
    duration_per_point: f64,
    seed: u64,
) -> Result<Vec<(f64, CountRecord)>> {
    let means = fringe_means(scan, model, analyzer, duration_per_point)?;
    means
        .par_iter()
        .enumerate()
        .map(|(i, (z, m))| {
            let rec = sample_counts(format!("z{i}"), *analyzer, m, derive_seed(seed, i as u64))?;
            Ok((*z, rec))
        })
        .collect()
}

/// Effective fringe visibility `V * envelope(z) * (1 - eps)` for diagonal
/// analyzers and no residual unitaries.
pub fn effective_visibility(z: f64, model: &SourceModel) -> Result<f64> {
    Ok(model.dephasing_visibility
        * visibility_envelope(z, model)?
        * (1.0 - model.white_noise_fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::{bell_state, fidelity, tangle};

    #[test]
    fn effective_state_examples() {
        let ideal = SourceModel::ideal(728e-9, 6e-9, 180.0);
        let rho = effective_state(&ideal, 0.0).unwrap();
        assert!((rho.matrix() - bell_state(BellState::PhiPlus).density().matrix()).norm() < 1e-15);

        let incoherent = SourceModel {
            dephasing_visibility: 0.0,
            ..ideal.clone()
        };
        let rho = effective_state(&incoherent, 0.3).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!(rho.matrix()[(0, 3)].norm() < 1e-15);
        assert!(tangle(&rho).unwrap() < 1e-12);

        let rho = effective_state(&SourceModel::narrow_filter(), 0.0).unwrap();
        let f = fidelity(&rho, &bell_state(BellState::PhiPlus));
        assert!((f - 0.98925).abs() < 1e-12);
    }

    #[test]
    fn invalid_models_rejected() {
        let bad = SourceModel {
            dephasing_visibility: 1.2,
            ..SourceModel::narrow_filter()
        };
        assert!(effective_state(&bad, 0.0).is_err());
        let bad = SourceModel {
            coincidence_window_s: 0.0,
            ..SourceModel::narrow_filter()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn phase_law() {
        let m = SourceModel::narrow_filter();
        assert_eq!(phase_of_position(0.0, &m, 0.4), 0.4);
        assert!((phase_of_position(728e-9 / 4.0, &m, 0.4) - (0.4 + PI)).abs() < 1e-12);
        assert!((phase_of_position(364e-9, &m, 0.0) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn envelope_scale() {
        let narrow = SourceModel::narrow_filter();
        let wide = SourceModel::wide_filter();
        assert_eq!(visibility_envelope(0.0, &narrow).unwrap(), 1.0);
        assert!((narrow.coherence_length() - 88.3e-6).abs() < 0.05e-6);
        assert!((wide.coherence_length() - 15.14e-6).abs() < 0.01e-6);
        let a = visibility_envelope(1e-6, &wide).unwrap();
        let b = visibility_envelope(-2e-6, &wide).unwrap();
        assert!(a < 1.0 && b < a);
        assert_eq!(a, visibility_envelope(-1e-6, &wide).unwrap());
        let zero_bw = SourceModel {
            bandwidth_m: 0.0,
            ..wide
        };
        assert!(visibility_envelope(0.0, &zero_bw).is_err());
    }

    #[test]
    fn coincidence_probability_examples() {
        let phi_p = bell_state(BellState::PhiPlus).density();
        let phi_m = bell_state(BellState::PhiMinus).density();
        assert!((coincidence_probability(&phi_p, &AnalyzerSetting::default()) - 0.5).abs() < 1e-15);
        assert!(
            (coincidence_probability(&phi_p, &AnalyzerSetting::diagonal()) - 0.5).abs() < 1e-15
        );
        assert!(coincidence_probability(&phi_m, &AnalyzerSetting::diagonal()) < 1e-15);
    }

    #[test]
    fn counting_examples() {
        let m = SourceModel::narrow_filter();
        assert_eq!(m.singles_rate_1_hz, 2250.0);
        let e = expected_counts(0.5, &m, 1.0).unwrap();
        assert!((e.accidentals - 2250.0 * 2250.0 * 3e-9).abs() < 1e-12);
        assert!((e.coincidences - (180.0 + e.accidentals)).abs() < 1e-9);
        assert!(((e.coincidences - e.accidentals) / e.singles_1 - 0.08).abs() < 1e-12);

        let dark = SourceModel {
            singles_rate_1_hz: 0.0,
            singles_rate_2_hz: 0.0,
            ..m.clone()
        };
        assert_eq!(expected_counts(0.0, &dark, 1.0).unwrap().coincidences, 0.0);

        let bright = SourceModel {
            singles_rate_1_hz: 0.0,
            ..SourceModel::wide_filter()
        };
        assert!((expected_counts(0.5, &bright, 1.0).unwrap().coincidences - 1000.0).abs() < 1e-9);
        assert!(expected_counts(0.5, &m, 0.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let means = ExpectedCounts {
            duration: 1.0,
            coincidences: 0.0,
            accidentals: 0.0,
            singles_1: 55.5,
            singles_2: 1e4,
        };
        let a = sample_counts("x", AnalyzerSetting::default(), &means, 99).unwrap();
        let b = sample_counts("x", AnalyzerSetting::default(), &means, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.coincidences, 0);
    }

    #[test]
    fn poisson_sample_mean() {
        let means = ExpectedCounts {
            duration: 1.0,
            coincidences: 1e4,
            accidentals: 0.0,
            singles_1: 0.0,
            singles_2: 0.0,
        };
        let n = 1000;
        let total: u64 = (0..n)
            .map(|i| {
                sample_counts("x", AnalyzerSetting::default(), &means, derive_seed(5, i))
                    .unwrap()
                    .coincidences
            })
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1e4).abs() < 3.0 * (1e4 / n as f64).sqrt());
    }

    #[test]
    fn parallel_scan_matches_sequential_seeds() {
        let m = SourceModel::narrow_filter();
        let scan = MirrorScan::uniform(-182e-9, 182e-9, 12, 0.0);
        let a = fringe_scan(&scan, &m, &AnalyzerSetting::diagonal(), 1.0, 3).unwrap();
        let means = fringe_means(&scan, &m, &AnalyzerSetting::diagonal(), 1.0).unwrap();
        for (i, ((z, rec), (_, mean))) in a.iter().zip(&means).enumerate().rev() {
            let again = sample_counts(
                format!("z{i}"),
                AnalyzerSetting::diagonal(),
                mean,
                derive_seed(3, i as u64),
            )
            .unwrap();
            assert_eq!(rec, &again);
            assert_eq!(*z, scan.positions_m[i]);
        }
    }

    #[test]
    fn singles_do_not_see_the_fringe() {
        let m = SourceModel::narrow_filter();
        let scan = MirrorScan::uniform(0.0, 364e-9, 9, 0.0);
        let means = fringe_means(&scan, &m, &AnalyzerSetting::diagonal(), 2.0).unwrap();
        assert!(means
            .iter()
            .all(|(_, e)| e.singles_1 == means[0].1.singles_1));
        let c: Vec<f64> = means.iter().map(|(_, e)| e.coincidences).collect();
        assert!(
            c.iter().cloned().fold(0.0, f64::max)
                > 2.0 * c.iter().cloned().fold(f64::MAX, f64::min)
        );
    }
}
