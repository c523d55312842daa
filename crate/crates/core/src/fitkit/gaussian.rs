use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::lm::{covariance, minimize, propagate};
use super::{check_inputs, x_frame, y_scale};
use crate::error::{Error, Result};

/// `2 sqrt(2 ln 2)`: FWHM of a Gaussian in units of its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Fit of `y = baseline + amplitude * exp(-(x - center)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianFit {
    pub baseline: f64,
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub fwhm: f64,
    pub uncertainties: GaussianUncertainties,
    pub residual_norm: f64,
    pub points_used: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianUncertainties {
    pub baseline: f64,
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub fwhm: f64,
}

/// Fit a single-peaked profile. The peak must lie strictly inside the data.
pub fn fit_gaussian(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<GaussianFit> {
    check_inputs(xs, ys, 5)?;
    let (x0, span) = x_frame(xs)?;
    let scale = y_scale(ys)?;
    let n = xs.len();
    let sw: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Fit(
                    "weights must be finite, non-negative and match the data".into(),
                ));
            }
            let mean = w.iter().sum::<f64>() / n as f64;
            if !(mean > 0.0) {
                return Err(Error::Fit("weights are all zero".into()));
            }
            w.iter().map(|v| (v / mean).sqrt()).collect()
        }
        None => vec![1.0; n],
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let u: Vec<f64> = order.iter().map(|&i| (xs[i] - x0) / span).collect();
    let y: Vec<f64> = order.iter().map(|&i| ys[i] / scale).collect();
    let sw: Vec<f64> = order.iter().map(|&i| sw[i]).collect();

    let peak = (0..n)
        .max_by(|&a, &b| y[a].total_cmp(&y[b]))
        .expect("non-empty");
    if peak == 0 || peak == n - 1 {
        return Err(Error::Fit(
            "profile maximum lies at the edge of the data".into(),
        ));
    }
    let base0 = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let amp0 = y[peak] - base0;
    if !(amp0 > 0.0) {
        return Err(Error::Fit("profile is flat".into()));
    }
    // half-maximum crossings on each side, linearly interpolated
    let half = base0 + 0.5 * amp0;
    let cross = |range: &mut dyn Iterator<Item = usize>, step: isize| -> f64 {
        for i in range {
            let j = (i as isize + step) as usize;
            if y[j] < half {
                let t = (half - y[j]) / (y[i] - y[j]);
                return u[j] + t * (u[i] - u[j]);
            }
        }
        if step < 0 {
            u[0]
        } else {
            u[n - 1]
        }
    };
    let left = cross(&mut (1..=peak).rev(), -1);
    let right = cross(&mut (peak..n - 1), 1);
    let sigma0 = ((right - left) / FWHM_PER_SIGMA).max(1e-3);

    let eval = |p: &DVector<f64>| {
        let (b, a, m, s) = (p[0], p[1], p[2], p[3]);
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 4);
        for i in 0..n {
            let d = u[i] - m;
            let e = (-d * d / (2.0 * s * s)).exp();
            r[i] = sw[i] * (b + a * e - y[i]);
            j[(i, 0)] = sw[i];
            j[(i, 1)] = sw[i] * e;
            j[(i, 2)] = sw[i] * a * e * d / (s * s);
            j[(i, 3)] = sw[i] * a * e * d * d / (s * s * s);
        }
        (r, j)
    };
    let out = minimize(eval, DVector::from_vec(vec![base0, amp0, u[peak], sigma0]))?;
    let cov = covariance(&out)?;
    let (b, a, m, s) = (out.params[0], out.params[1], out.params[2], out.params[3]);
    let sigma = s.abs() * span;
    let sig_sigma = propagate(&cov, &[0.0, 0.0, 0.0, 1.0]) * span;
    Ok(GaussianFit {
        baseline: b * scale,
        amplitude: a * scale,
        center: x0 + m * span,
        sigma,
        fwhm: FWHM_PER_SIGMA * sigma,
        uncertainties: GaussianUncertainties {
            baseline: propagate(&cov, &[1.0, 0.0, 0.0, 0.0]) * scale,
            amplitude: propagate(&cov, &[0.0, 1.0, 0.0, 0.0]) * scale,
            center: propagate(&cov, &[0.0, 0.0, 1.0, 0.0]) * span,
            sigma: sig_sigma,
            fwhm: FWHM_PER_SIGMA * sig_sigma,
        },
        residual_norm: out.chi2.sqrt() * scale,
        points_used: n,
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam_optics::linspace;

    #[test]
    fn constant_matches_closed_form() {
        assert!((FWHM_PER_SIGMA - 2.0 * (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn recovers_exact_profile() {
        let xs = linspace(-600e-6, 600e-6, 61);
        let sigma = 131.08e-6;
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 0.01 + 0.6 * (-(x - 20e-6).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let fit = fit_gaussian(&xs, &ys, None).unwrap();
        assert!((fit.sigma - sigma).abs() < 1e-9 * sigma);
        assert!((fit.center - 20e-6).abs() < 1e-12);
        assert!((fit.baseline - 0.01).abs() < 1e-10);
    }

    #[test]
    fn rejects_edge_peak() {
        let xs = linspace(0.0, 1.0, 10);
        let ys: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        assert!(matches!(fit_gaussian(&xs, &ys, None), Err(Error::Fit(_))));
    }
}
