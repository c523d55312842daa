//! Small Levenberg-Marquardt solver for the two model families.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct LmOutcome {
    pub params: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// Sum of squared (weighted) residuals.
    pub chi2: f64,
    pub iterations: usize,
}

pub(crate) const REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 2000;

/// Minimize `|r(p)|^2`; `eval` returns residuals and their Jacobian.
pub(crate) fn minimize<F>(eval: F, p0: DVector<f64>) -> Result<LmOutcome>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut p = p0;
    let (mut r, mut j) = eval(&p);
    let mut chi2 = r.norm_squared();
    if !chi2.is_finite() {
        return Err(Error::Fit(
            "objective is not finite at the initial guess".into(),
        ));
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < MAX_ITER && chi2 > 0.0 {
        iterations += 1;
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * &r;
        let max_diag = a.diagonal().iter().cloned().fold(0.0_f64, f64::max);
        if !(max_diag > 0.0) {
            return Err(Error::Fit(
                "singular normal equations (zero Jacobian)".into(),
            ));
        }
        let mut damped = a.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += lambda * a[(i, i)].max(1e-12 * max_diag);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                lambda *= 10.0;
                if lambda > 1e20 {
                    break;
                }
                continue;
            }
        };
        let trial = &p + &step;
        let (tr, tj) = eval(&trial);
        let trial_chi2 = tr.norm_squared();
        if trial_chi2.is_finite() && trial_chi2 < chi2 {
            let rel = (chi2 - trial_chi2) / chi2;
            p = trial;
            r = tr;
            j = tj;
            chi2 = trial_chi2;
            lambda = (lambda / 3.0).max(1e-15);
            if rel < REL_TOL {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e20 {
                break;
            }
        }
    }
    Ok(LmOutcome {
        params: p,
        jacobian: j,
        chi2,
        iterations,
    })
}

/// Parameter covariance `s^2 (J^T J)^-1` with `s^2 = chi2 / (n - p)`.
pub(crate) fn covariance(out: &LmOutcome) -> Result<DMatrix<f64>> {
    let n = out.jacobian.nrows();
    let k = out.jacobian.ncols();
    let a = out.jacobian.transpose() * &out.jacobian;
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular normal equations at the solution".into()))?;
    let dof = n.saturating_sub(k).max(1) as f64;
    Ok(inv * (out.chi2 / dof))
}

/// Standard deviation of `f(p)` given its gradient.
pub(crate) fn propagate(cov: &DMatrix<f64>, grad: &[f64]) -> f64 {
    let g = DVector::from_column_slice(grad);
    (g.transpose() * cov * &g)[0].max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_line_exactly() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let out = minimize(
            |p| {
                let r = DVector::from_iterator(
                    10,
                    xs.iter().zip(&ys).map(|(x, y)| p[0] + p[1] * x - y),
                );
                let j = DMatrix::from_fn(10, 2, |i, k| if k == 0 { 1.0 } else { xs[i] });
                (r, j)
            },
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        assert!((out.params[0] - 3.0).abs() < 1e-12);
        assert!((out.params[1] + 0.5).abs() < 1e-12);
    }
}
