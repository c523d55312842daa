//! Least-squares fits used by the analysis pipeline: sinusoidal fringes
//! (visibility, period) and Gaussian profiles (FWHM).
//!
//! Both fitters work on internally rescaled axes (x centered and divided by
//! the span, y divided by its largest magnitude), so results do not depend
//! on x translation or y scale.

mod gaussian;
mod lm;
mod sinusoid;

pub use gaussian::{fit_gaussian, GaussianFit, GaussianUncertainties, FWHM_PER_SIGMA};
pub use sinusoid::{fit_sinusoid, SinusoidFit, SinusoidUncertainties};

use crate::error::{Error, Result};

pub(crate) fn check_inputs(xs: &[f64], ys: &[f64], min_points: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!(
            "x and y lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < min_points {
        return Err(Error::Fit(format!(
            "need at least {min_points} points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("data contain non-finite values".into()));
    }
    Ok(())
}

/// Center and span of the x data.
pub(crate) fn x_frame(xs: &[f64]) -> Result<(f64, f64)> {
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if !(span > 0.0) {
        return Err(Error::Fit("x values span zero width".into()));
    }
    Ok((xs.iter().sum::<f64>() / xs.len() as f64, span))
}

pub(crate) fn y_scale(ys: &[f64]) -> Result<f64> {
    let s = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    if !(s > 0.0) {
        return Err(Error::Fit("all y values are zero".into()));
    }
    Ok(s)
}
