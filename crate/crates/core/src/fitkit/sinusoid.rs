use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use super::lm::{covariance, minimize, propagate};
use super::{check_inputs, x_frame, y_scale};
use crate::error::{Error, Result};

/// Fit of `y = offset * (1 + visibility * cos(2 pi x / period + phase))`.
#[derive(Debug, Clone, Serialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
    /// `amplitude / offset`.
    pub visibility: f64,
    /// `(max - min) / (max + min)` of the raw data.
    pub raw_visibility: f64,
    pub uncertainties: SinusoidUncertainties,
    /// `sqrt(sum w r^2)` in data units.
    pub residual_norm: f64,
    pub points_used: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinusoidUncertainties {
    pub offset: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
    pub visibility: f64,
}

/// Minimum number of periods the data must cover.
pub const MIN_PERIODS: f64 = 0.75;

struct Frame {
    u: Vec<f64>,
    y: Vec<f64>,
    sw: Vec<f64>,
}

/// Weighted linear fit of `c + a cos(k u) + b sin(k u)` at fixed `k`.
fn linear_at(frame: &Frame, k: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for ((&u, &y), &sw) in frame.u.iter().zip(&frame.y).zip(&frame.sw) {
        let w = sw * sw;
        let (s, co) = (k * u).sin_cos();
        let row = Vector3::new(1.0, co, s);
        ata += row * row.transpose() * w;
        aty += row * (w * y);
    }
    let sol = ata.cholesky()?.solve(&aty);
    let rss: f64 = frame
        .u
        .iter()
        .zip(&frame.y)
        .zip(&frame.sw)
        .map(|((&u, &y), &sw)| {
            let (s, co) = (k * u).sin_cos();
            (sw * (sol[0] + sol[1] * co + sol[2] * s - y)).powi(2)
        })
        .sum();
    Some((sol, rss))
}

/// Fit a fringe. `weights` are per-point inverse variances (optional).
///
/// The starting period comes from a scan of the least-squares periodogram
/// between 0.5 and m/2 cycles across the data span, `m` being the number of
/// distinct x positions; repeated positions add no resolution, and searching
/// past that limit only finds aliases.
pub fn fit_sinusoid(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<SinusoidFit> {
    check_inputs(xs, ys, 5)?;
    let (x0, span) = x_frame(xs)?;
    let ys_scale = y_scale(ys)?;
    let sw: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != xs.len() || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Fit(
                    "weights must be finite, non-negative and match the data".into(),
                ));
            }
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            if !(mean > 0.0) {
                return Err(Error::Fit("weights are all zero".into()));
            }
            w.iter().map(|v| (v / mean).sqrt()).collect()
        }
        None => vec![1.0; xs.len()],
    };
    let frame = Frame {
        u: xs.iter().map(|x| (x - x0) / span).collect(),
        y: ys.iter().map(|y| y / ys_scale).collect(),
        sw,
    };

    let n = xs.len();
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let max_cycles = (distinct.len() as f64 / 2.0).max(1.0);
    let step = 0.02;
    let mut best: Option<(f64, Vector3<f64>, f64)> = None;
    let mut cycles = 0.5;
    while cycles <= max_cycles + 1e-12 {
        let k = 2.0 * PI * cycles;
        if let Some((sol, rss)) = linear_at(&frame, k) {
            if best.as_ref().is_none_or(|b| rss < b.2) {
                best = Some((k, sol, rss));
            }
        }
        cycles += step;
    }
    let (k0, lin, _) =
        best.ok_or_else(|| Error::Fit("singular normal equations in periodogram".into()))?;

    let eval = |p: &DVector<f64>| {
        let (c, a, b, k) = (p[0], p[1], p[2], p[3]);
        let r = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let (s, co) = (k * frame.u[i]).sin_cos();
                frame.sw[i] * (c + a * co + b * s - frame.y[i])
            }),
        );
        let j = DMatrix::from_fn(n, 4, |i, col| {
            let u = frame.u[i];
            let (s, co) = (k * u).sin_cos();
            frame.sw[i]
                * match col {
                    0 => 1.0,
                    1 => co,
                    2 => s,
                    _ => u * (-a * s + b * co),
                }
        });
        (r, j)
    };
    let out = minimize(eval, DVector::from_vec(vec![lin[0], lin[1], lin[2], k0]))?;
    let cov = covariance(&out)?;
    let (c, mut a, mut b, mut k) = (out.params[0], out.params[1], out.params[2], out.params[3]);
    let mut sign_b = 1.0;
    if k < 0.0 {
        k = -k;
        b = -b;
        sign_b = -1.0;
    }
    if !(k > 0.0) {
        return Err(Error::Fit("fitted frequency collapsed to zero".into()));
    }
    let period_u = 2.0 * PI / k;
    if period_u * MIN_PERIODS > 1.0 + 1e-9 {
        return Err(Error::Fit(format!(
            "data span {:.4e} covers less than {MIN_PERIODS} of the fitted period {:.4e}",
            span,
            period_u * span
        )));
    }
    if c == 0.0 {
        return Err(Error::Fit("fitted offset is zero".into()));
    }
    let amp_u = a.hypot(b);
    let psi = b.atan2(a);
    // c + A cos(k u - psi) with u = (x - x0)/span
    let phase = wrap(-(k * x0 / span) - psi);

    // gradients with respect to (c, a, b, k) in the solver's sign convention
    let kk = out.params[3];
    a = out.params[1];
    let bb = out.params[2];
    let r2 = amp_u * amp_u;
    let d_amp = if amp_u > 0.0 {
        [0.0, a / amp_u, bb / amp_u, 0.0]
    } else {
        [0.0; 4]
    };
    let d_vis = [-amp_u / (c * c), d_amp[1] / c, d_amp[2] / c, 0.0];
    let d_period = [0.0, 0.0, 0.0, -2.0 * PI * span / (kk * kk) * kk.signum()];
    let d_phase = if r2 > 0.0 {
        [
            0.0,
            sign_b * bb / r2,
            -sign_b * a / r2,
            -(x0 / span) * kk.signum(),
        ]
    } else {
        [0.0, 0.0, 0.0, -(x0 / span)]
    };

    let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SinusoidFit {
        offset: c * ys_scale,
        amplitude: amp_u * ys_scale,
        period: period_u * span,
        phase,
        visibility: amp_u / c,
        raw_visibility: if max + min != 0.0 {
            (max - min) / (max + min)
        } else {
            0.0
        },
        uncertainties: SinusoidUncertainties {
            offset: cov[(0, 0)].max(0.0).sqrt() * ys_scale,
            amplitude: propagate(&cov, &d_amp) * ys_scale,
            period: propagate(&cov, &d_period),
            phase: propagate(&cov, &d_phase),
            visibility: propagate(&cov, &d_vis),
        },
        residual_norm: out.chi2.sqrt() * ys_scale,
        points_used: n,
        iterations: out.iterations,
    })
}

fn wrap(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
