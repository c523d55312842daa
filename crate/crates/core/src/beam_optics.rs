//! Paraxial Gaussian-beam optics for the GRIN lens / single-mode fiber device.
//!
//! Beams are TEM00 modes tracked through their complex beam parameter
//! `q = z + i z_R`, where `z` is the distance from the waist to the plane of
//! interest. Ray matrices act on `q` through `q' = (A q + B) / (C q + D)`.
//! All lengths are in meters.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A TEM00 Gaussian mode.
///
/// `waist_position` is the axial coordinate of the waist relative to a
/// reference plane (positive means the waist lies downstream of the plane).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    pub wavelength: f64,
    pub waist_radius: f64,
    pub waist_position: f64,
}

impl GaussianBeam {
    pub fn new(wavelength: f64, waist_radius: f64, waist_position: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::invalid(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        if !(waist_radius > 0.0) || !waist_radius.is_finite() {
            return Err(Error::invalid(format!(
                "waist radius must be > 0, got {waist_radius}"
            )));
        }
        if !waist_position.is_finite() {
            return Err(Error::invalid("waist position must be finite"));
        }
        Ok(Self {
            wavelength,
            waist_radius,
            waist_position,
        })
    }

    /// Beam whose waist sits on the reference plane.
    pub fn waist_at_reference(wavelength: f64, waist_radius: f64) -> Result<Self> {
        Self::new(wavelength, waist_radius, 0.0)
    }

    /// Rayleigh range (confocal parameter) `pi W0^2 / lambda`.
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist_radius * self.waist_radius / self.wavelength
    }

    /// Complex beam parameter at the reference plane.
    pub fn q(&self) -> Complex64 {
        Complex64::new(-self.waist_position, self.rayleigh_range())
    }

    /// Rebuild a beam from its complex parameter at the reference plane.
    pub fn from_q(wavelength: f64, q: Complex64) -> Result<Self> {
        if !(q.im > 0.0) || !q.re.is_finite() {
            return Err(Error::invalid(format!(
                "beam parameter must have Im(q) > 0, got {q}"
            )));
        }
        let waist_radius = (q.im * wavelength / PI).sqrt();
        Self::new(wavelength, waist_radius, -q.re)
    }

    /// 1/e^2 intensity radius at axial coordinate `z` (same frame as `waist_position`).
    pub fn radius_at(&self, z: f64) -> f64 {
        let u = (z - self.waist_position) / self.rayleigh_range();
        self.waist_radius * (1.0 + u * u).sqrt()
    }
}

/// 2x2 paraxial ray-transfer matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub const IDENTITY: RayMatrix = RayMatrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Composite of `self` followed by `next` (i.e. `next * self`).
    pub fn then(&self, next: &RayMatrix) -> RayMatrix {
        *next * *self
    }

    /// Compose elements listed in the order the beam meets them.
    pub fn chain<'a, I>(elements: I) -> RayMatrix
    where
        I: IntoIterator<Item = &'a RayMatrix>,
    {
        elements
            .into_iter()
            .fold(RayMatrix::IDENTITY, |acc, m| acc.then(m))
    }

    pub fn max_abs_diff(&self, other: &RayMatrix) -> f64 {
        [
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
        ]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Mul for RayMatrix {
    type Output = RayMatrix;

    fn mul(self, r: RayMatrix) -> RayMatrix {
        RayMatrix {
            a: self.a * r.a + self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.c * r.b + self.d * r.d,
        }
    }
}

/// Gradient-index rod with parabolic profile `n(r) = n0 (1 - g^2 r^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrinLens {
    pub n0: f64,
    /// Gradient constant, 1/m.
    pub g: f64,
    pub length: f64,
    /// Mechanical diameter; not used by the optics.
    pub diameter: f64,
}

/// Gradient constant of the catalog GRIN rod, 0.312 mm^-1.
pub const CATALOG_GRADIENT_CONSTANT: f64 = 312.0;
/// Nominal equivalent focal length of the catalog rod.
pub const CATALOG_FOCAL_LENGTH: f64 = 2.0e-3;
pub const CATALOG_DIAMETER: f64 = 2.0e-3;
/// Ti:sapphire alignment / down-converted wavelength.
pub const DESIGN_WAVELENGTH: f64 = 728e-9;
/// Single-mode fiber field radius (core diameter about 5 um).
pub const FIBER_MODE_RADIUS: f64 = 2.5e-6;
/// Single-device peak coupling used when none is given.
pub const DEFAULT_PEAK_EFFICIENCY: f64 = 0.70;

impl GrinLens {
    pub fn new(n0: f64, g: f64, length: f64, diameter: f64) -> Result<Self> {
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::invalid(format!("n0 must be > 0, got {n0}")));
        }
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!(
                "gradient constant must be > 0, got {g}"
            )));
        }
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("length must be >= 0, got {length}")));
        }
        Ok(Self {
            n0,
            g,
            length,
            diameter,
        })
    }

    /// Quarter-pitch rod (`g L = pi/2`).
    pub fn quarter_pitch(n0: f64, g: f64, diameter: f64) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::invalid(format!(
                "gradient constant must be > 0, got {g}"
            )));
        }
        Self::new(n0, g, PI / (2.0 * g), diameter)
    }

    /// Quarter-pitch rod whose on-axis index is chosen so `1/(n0 g)` equals `focal_length`.
    pub fn with_focal_length(focal_length: f64, g: f64, diameter: f64) -> Result<Self> {
        if !(focal_length > 0.0) || !(g > 0.0) {
            return Err(Error::invalid(
                "focal length and gradient constant must be > 0",
            ));
        }
        Self::quarter_pitch(1.0 / (g * focal_length), g, diameter)
    }

    /// The catalog rod: g = 0.312 mm^-1, f = 2 mm (n0 about 1.603), quarter pitch.
    pub fn catalog() -> Self {
        Self::with_focal_length(
            CATALOG_FOCAL_LENGTH,
            CATALOG_GRADIENT_CONSTANT,
            CATALOG_DIAMETER,
        )
        .expect("catalog parameters are valid")
    }

    pub fn pitch(&self) -> f64 {
        self.g * self.length / (2.0 * PI)
    }

    pub fn is_quarter_pitch(&self, tol: f64) -> bool {
        (self.g * self.length - PI / 2.0).abs() <= tol
    }
}

/// Equivalent focal length `1 / (n0 g)`.
pub fn focal_length(lens: &GrinLens) -> Result<f64> {
    if !(lens.n0 > 0.0) || !(lens.g > 0.0) {
        return Err(Error::invalid(format!(
            "n0 and g must be > 0 (n0 = {}, g = {})",
            lens.n0, lens.g
        )));
    }
    Ok(1.0 / (lens.n0 * lens.g))
}

/// Duct matrix of a GRIN rod, face to face.
pub fn grin_abcd(lens: &GrinLens) -> Result<RayMatrix> {
    let f = focal_length(lens)?;
    let phase = lens.g * lens.length;
    let (s, c) = phase.sin_cos();
    Ok(RayMatrix::new(c, s * f, -s / f, c))
}

pub fn free_space(distance: f64) -> RayMatrix {
    RayMatrix::new(1.0, distance, 0.0, 1.0)
}

pub fn thin_lens(focal_length: f64) -> Result<RayMatrix> {
    if focal_length == 0.0 || !focal_length.is_finite() {
        return Err(Error::invalid(
            "thin lens focal length must be finite and non-zero",
        ));
    }
    Ok(RayMatrix::new(1.0, 0.0, -1.0 / focal_length, 1.0))
}

/// Apply a ray matrix to a beam. The input beam is described relative to the
/// matrix's input plane, the output relative to its output plane.
pub fn propagate(beam: &GaussianBeam, m: &RayMatrix) -> Result<GaussianBeam> {
    let q = beam.q();
    let den = q * m.c + m.d;
    if den.norm() <= f64::EPSILON * (m.c.abs() * q.norm() + m.d.abs()) {
        return Err(Error::SingularPropagation);
    }
    let q_out = (q * m.a + m.b) / den;
    GaussianBeam::from_q(beam.wavelength, q_out)
}

/// Far-field waist `lambda f / (pi W0)` produced by a lens of focal length `f`
/// from a waist `W0` placed in its front focal plane.
pub fn coupled_waist(wavelength: f64, fiber_waist: f64, f: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !(fiber_waist > 0.0) || !(f > 0.0) {
        return Err(Error::invalid(
            "wavelength, fiber waist and focal length must be > 0",
        ));
    }
    Ok(wavelength * f / (PI * fiber_waist))
}

pub fn confocal_parameter(waist: f64, wavelength: f64) -> Result<f64> {
    if !(waist > 0.0) || !(wavelength > 0.0) {
        return Err(Error::invalid("waist and wavelength must be > 0"));
    }
    Ok(PI * waist * waist / wavelength)
}

/// Power coupling between two coaxial-plane waists with a lateral offset.
///
/// Returns 0 for non-positive waists.
pub fn coupling_efficiency_lateral(
    mode_a_waist: f64,
    mode_b_waist: f64,
    lateral_offset: f64,
) -> f64 {
    if !(mode_a_waist > 0.0) || !(mode_b_waist > 0.0) {
        return 0.0;
    }
    let sum_sq = mode_a_waist * mode_a_waist + mode_b_waist * mode_b_waist;
    let prefactor = 2.0 * mode_a_waist * mode_b_waist / sum_sq;
    prefactor * prefactor * (-2.0 * lateral_offset * lateral_offset / sum_sq).exp()
}

/// Full width at half maximum of the lateral-offset efficiency curve.
pub fn lateral_fwhm(mode_a_waist: f64, mode_b_waist: f64) -> f64 {
    let sum_sq = mode_a_waist * mode_a_waist + mode_b_waist * mode_b_waist;
    2.0 * (std::f64::consts::LN_2 * sum_sq / 2.0).sqrt()
}

/// Power overlap `|<a|b>|^2` of two coaxial Gaussian modes described relative
/// to the same reference plane. Wavelengths must match.
pub fn mode_overlap(a: &GaussianBeam, b: &GaussianBeam) -> Result<f64> {
    if (a.wavelength - b.wavelength).abs() > 1e-12 * a.wavelength {
        return Err(Error::invalid("mode overlap needs equal wavelengths"));
    }
    // With u ~ exp(-i k r^2 / 2q), the normalized overlap reduces to
    // 4 Im(qa) Im(qb) / |qa - conj(qb)|^2.
    let qa = a.q();
    let qb = b.q();
    let den = (qa - qb.conj()).norm_sqr();
    Ok(4.0 * qa.im * qb.im / den)
}

/// Misalignment between an incoming mode and the acceptance mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Misalignment {
    pub lateral: f64,
    /// Tilt between the two axes, rad.
    #[serde(default)]
    pub tilt: f64,
    /// Axial shift of the incoming waist relative to the acceptance waist.
    #[serde(default)]
    pub axial: f64,
}

/// Mode-overlap coupling with lateral, tilt and axial terms.
///
/// Axial mismatch enters exactly through the q-parameter overlap; the lateral
/// and tilt factors are the waist-plane expressions and are exact only for
/// `axial == 0`.
pub fn coupling_efficiency(
    wavelength: f64,
    incoming_waist: f64,
    acceptance_waist: f64,
    mis: &Misalignment,
) -> Result<f64> {
    let a = GaussianBeam::new(wavelength, incoming_waist, mis.axial)?;
    let b = GaussianBeam::waist_at_reference(wavelength, acceptance_waist)?;
    let axial = mode_overlap(&a, &b)?;
    let sum_sq = incoming_waist * incoming_waist + acceptance_waist * acceptance_waist;
    let lateral = (-2.0 * mis.lateral * mis.lateral / sum_sq).exp();
    let prod = incoming_waist * acceptance_waist;
    let tilt = (-2.0 * (PI * prod * mis.tilt / wavelength).powi(2) / sum_sq).exp();
    Ok(axial * lateral * tilt)
}

/// How cascade efficiencies are normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeNormalization {
    /// Relative to the power launched from the transmitting device:
    /// `peak * overlap`.
    #[default]
    Launched,
    /// Relative to the power entering the transmitting device, so the
    /// transmitter's own coupling counts too: `peak^2 * overlap`.
    Input,
}

/// GL-SMF -> free space -> GL-SMF link.
///
/// `tx` is the beam leaving the transmitting GRIN face (reference plane at
/// that face). The receiver is an identical device facing it, so its
/// acceptance mode mirrors `tx`.
pub fn cascade_efficiency(tx: &GaussianBeam, gap: f64, peak_efficiency: f64) -> Result<f64> {
    cascade_efficiency_normalized(tx, gap, peak_efficiency, CascadeNormalization::Launched)
}

pub fn cascade_efficiency_normalized(
    tx: &GaussianBeam,
    gap: f64,
    peak_efficiency: f64,
    normalization: CascadeNormalization,
) -> Result<f64> {
    if !(gap >= 0.0) || !gap.is_finite() {
        return Err(Error::invalid(format!("gap must be >= 0, got {gap}")));
    }
    if !(0.0..=1.0).contains(&peak_efficiency) {
        return Err(Error::invalid(format!(
            "peak efficiency must lie in [0, 1], got {peak_efficiency}"
        )));
    }
    let arrived = propagate(tx, &free_space(gap))?;
    let acceptance = GaussianBeam::new(tx.wavelength, tx.waist_radius, -tx.waist_position)?;
    let overlap = mode_overlap(&arrived, &acceptance)?;
    Ok(match normalization {
        CascadeNormalization::Launched => peak_efficiency * overlap,
        CascadeNormalization::Input => peak_efficiency * peak_efficiency * overlap,
    })
}

/// The beam a GL-SMF emits: the fiber mode imaged through the rod.
///
/// The fiber end sits on the rod's back face; the returned beam is
/// referenced to the rod's front face.
pub fn emitted_beam(
    lens: &GrinLens,
    wavelength: f64,
    fiber_mode_radius: f64,
) -> Result<GaussianBeam> {
    let fiber = GaussianBeam::waist_at_reference(wavelength, fiber_mode_radius)?;
    propagate(&fiber, &grin_abcd(lens)?)
}

/// `n` evenly spaced samples from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

pub fn lateral_sweep(mode_a_waist: f64, mode_b_waist: f64, offsets: &[f64]) -> Vec<(f64, f64)> {
    offsets
        .iter()
        .map(|&d| {
            (
                d,
                coupling_efficiency_lateral(mode_a_waist, mode_b_waist, d),
            )
        })
        .collect()
}

pub fn cascade_sweep(
    tx: &GaussianBeam,
    gaps: &[f64],
    peak_efficiency: f64,
    normalization: CascadeNormalization,
) -> Result<Vec<(f64, f64)>> {
    gaps.iter()
        .map(|&g| {
            Ok((
                g,
                cascade_efficiency_normalized(tx, g, peak_efficiency, normalization)?,
            ))
        })
        .collect()
}
