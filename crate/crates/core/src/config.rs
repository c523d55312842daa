//! JSON run configuration, named presets and the run manifest.
//!
//! A [`RunConfig`] carries one optional block per command. Unknown keys are
//! rejected everywhere, and a command whose block is absent fails with a
//! schema error naming that block.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beam_optics::{
    CascadeNormalization, CATALOG_DIAMETER, CATALOG_FOCAL_LENGTH, CATALOG_GRADIENT_CONSTANT,
    DEFAULT_PEAK_EFFICIENCY, DESIGN_WAVELENGTH, FIBER_MODE_RADIUS,
};
use crate::error::{Error, Result};
use crate::expsim::{MirrorScan, Preparation, SourceModel};
use crate::polkit::{AnalyzerSetting, BellState, Waveplate};
use crate::tomo::{MleConfig, Resampling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grin: Option<GrinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringe: Option<FringeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

/// Lens and fiber for `grin`. The rod is quarter pitch unless
/// `lens_length_m` is given; `n0` follows from `focal_length_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrinConfig {
    pub wavelength_m: f64,
    pub fiber_mode_radius_m: f64,
    pub gradient_constant_per_m: f64,
    pub focal_length_m: f64,
    #[serde(default = "default_diameter")]
    pub diameter_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lens_length_m: Option<f64>,
    #[serde(default = "default_peak")]
    pub peak_efficiency: f64,
    #[serde(default = "default_profile")]
    pub profile: SweepConfig,
    #[serde(default = "default_cascade")]
    pub cascade: CascadeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub half_range_m: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub max_gap_m: f64,
    pub points: usize,
    #[serde(default)]
    pub normalization: CascadeNormalization,
}

fn default_diameter() -> f64 {
    CATALOG_DIAMETER
}
fn default_peak() -> f64 {
    DEFAULT_PEAK_EFFICIENCY
}
fn default_profile() -> SweepConfig {
    SweepConfig {
        half_range_m: 600e-6,
        points: 41,
    }
}
fn default_cascade() -> CascadeConfig {
    CascadeConfig {
        max_gap_m: 0.6,
        points: 61,
        normalization: CascadeNormalization::Launched,
    }
}

/// Mirror-scan simulation for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeConfig {
    pub source: SourceModel,
    pub scan: MirrorScan,
    #[serde(default = "AnalyzerSetting::diagonal")]
    pub analyzer: AnalyzerSetting,
    pub duration_per_point_s: f64,
}

/// Tomography count simulation for `simulate`.
///
/// `counts_per_setting` is the mean number of pairs offered to each setting;
/// the coincidence mean is that number times the setting's Born probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    pub source: SourceModel,
    pub target: BellState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preparation: Option<Preparation>,
    pub counts_per_setting: f64,
}

impl TomographyConfig {
    pub fn preparation(&self) -> Preparation {
        self.preparation
            .unwrap_or_else(|| Preparation::for_bell(self.target))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    #[serde(default)]
    pub mle: MleConfig,
    /// 0 disables error bars; otherwise at least 50.
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub resampling: Resampling,
    /// State the bootstrap fidelity refers to; the best-matching Bell state
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BellState>,
}

fn default_resamples() -> usize {
    100
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            mle: MleConfig::default(),
            bootstrap_resamples: default_resamples(),
            resampling: Resampling::Poisson,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl RunConfig {
    /// Parse a JSON document. Syntax problems are parse errors; missing,
    /// unknown or mistyped fields are schema errors.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => Error::Schema(e.to_string()),
            serde_json::error::Category::Io => Error::Json(e),
            _ => Error::Parse {
                line: e.line() as u64,
                message: e.to_string(),
            },
        })
    }

    /// Canonical serialization used for hashing.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(
            self.canonical_json()?.as_bytes(),
        )))
    }

    pub fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T> {
        block
            .as_ref()
            .ok_or_else(|| Error::Schema(format!("missing field `{name}`")))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Schema("missing field `seed`".into()))
    }
}

/// Names accepted by `--preset`.
pub const PRESET_NAMES: [&str; 7] = [
    "grin-default",
    "fringe-6nm",
    "fringe-70nm",
    "tomo-phi-plus",
    "tomo-phi-minus",
    "tomo-psi-plus",
    "tomo-psi-minus",
];

/// Measured Bell-state fidelity and tangle that the tomography presets
/// reproduce analytically.
pub fn reported_bell_values(kind: BellState) -> (f64, f64) {
    match kind {
        BellState::PhiPlus => (0.938, 0.873),
        BellState::PhiMinus => (0.949, 0.940),
        BellState::PsiPlus => (0.923, 0.846),
        BellState::PsiMinus => (0.965, 0.911),
    }
}

/// Noise parameters `(white_noise_fraction, residual_phase)` that give a
/// Bell-state preparation fidelity `f` and tangle `tau` at coherence `v`.
///
/// White noise fixes the concurrence, `C = (1 - eps) v - eps / 2`. A residual
/// phase retarder on arm 1 then lowers the fidelity,
/// `F = (1 - eps)(1 + v cos phi)/2 + eps/4`, without changing `C`.
pub fn calibrate_noise(v: f64, f: f64, tau: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&v) || !(0.0..=1.0).contains(&f) || !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(
            "visibility, fidelity and tangle must lie in [0, 1]",
        ));
    }
    let conc = tau.sqrt();
    let eps = (v - conc) / (v + 0.5);
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!(
            "tangle {tau} is not reachable with coherence {v}"
        )));
    }
    let cos_phi = (2.0 * (f - eps / 4.0) / (1.0 - eps) - 1.0) / v;
    if !(-1.0..=1.0).contains(&cos_phi) {
        return Err(Error::invalid(format!(
            "fidelity {f} is not reachable with coherence {v} and tangle {tau}"
        )));
    }
    Ok((eps, cos_phi.acos()))
}

/// Source model whose Bell-state preparation sits at the reported `(F, tau)`.
pub fn calibrated_source(kind: BellState) -> Result<SourceModel> {
    let base = SourceModel::narrow_filter();
    let (f, tau) = reported_bell_values(kind);
    let (eps, phi) = calibrate_noise(base.dephasing_visibility, f, tau)?;
    let mut residual = Vec::new();
    if phi > 0.0 {
        residual.push(Waveplate::new(phi, 0.0)?);
    }
    Ok(SourceModel {
        white_noise_fraction: eps,
        residual_arm1: residual,
        ..base
    })
}

fn grin_default() -> GrinConfig {
    GrinConfig {
        wavelength_m: DESIGN_WAVELENGTH,
        fiber_mode_radius_m: FIBER_MODE_RADIUS,
        gradient_constant_per_m: CATALOG_GRADIENT_CONSTANT,
        focal_length_m: CATALOG_FOCAL_LENGTH,
        diameter_m: CATALOG_DIAMETER,
        lens_length_m: None,
        peak_efficiency: DEFAULT_PEAK_EFFICIENCY,
        profile: default_profile(),
        cascade: default_cascade(),
    }
}

/// Two full fringe periods centered on zero delay, 40 points, with roughly
/// 10^4 counts at the fringe maximum.
fn fringe_preset(source: SourceModel) -> FringeConfig {
    let half = source.center_wavelength_m / 2.0;
    let duration = (1e4 / source.pair_rate_hz).ceil();
    FringeConfig {
        scan: MirrorScan::uniform(-half, half, 40, 0.0),
        source,
        analyzer: AnalyzerSetting::diagonal(),
        duration_per_point_s: duration,
    }
}

fn tomo_preset(kind: BellState) -> Result<RunConfig> {
    Ok(RunConfig {
        seed: Some(1),
        tomography: Some(TomographyConfig {
            source: calibrated_source(kind)?,
            target: kind,
            preparation: None,
            counts_per_setting: 1e4,
        }),
        reconstruct: Some(ReconstructConfig {
            target: Some(kind),
            ..ReconstructConfig::default()
        }),
        ..RunConfig::empty()
    })
}

impl RunConfig {
    pub fn empty() -> Self {
        Self {
            seed: None,
            grin: None,
            fringe: None,
            tomography: None,
            reconstruct: None,
            output: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "grin-default" => Ok(Self {
                grin: Some(grin_default()),
                ..Self::empty()
            }),
            "fringe-6nm" => Ok(Self {
                seed: Some(1),
                fringe: Some(fringe_preset(SourceModel::narrow_filter())),
                ..Self::empty()
            }),
            "fringe-70nm" => Ok(Self {
                seed: Some(1),
                fringe: Some(fringe_preset(SourceModel::wide_filter())),
                ..Self::empty()
            }),
            "tomo-phi-plus" => tomo_preset(BellState::PhiPlus),
            "tomo-phi-minus" => tomo_preset(BellState::PhiMinus),
            "tomo-psi-plus" => tomo_preset(BellState::PsiPlus),
            "tomo-psi-minus" => tomo_preset(BellState::PsiMinus),
            other => Err(Error::Schema(format!(
                "unknown preset `{other}` (known: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }
}

/// Record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(file: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            file: file.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}
