use nalgebra::{Cholesky, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::linear::linear_from_observations;
use super::{ensure_complete, observations, Observation};
use crate::error::{Error, Result};
use crate::expsim::CountRecord;
use crate::polkit::{c, DensityMatrix, Mat4};

type Params = SVector<f64, 16>;
type Square = SMatrix<f64, 16, 16>;

/// Starting point of the likelihood ascent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    /// `T = I/2`, i.e. `rho = I/4`.
    MaximallyMixed,
    /// Linear inversion, eigenvalues clamped at `parameter_floor`, then
    /// factored as `T^dagger T`.
    LinearInversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleConfig {
    pub max_iterations: usize,
    /// Stop once the gradient norm of the count-normalized log-likelihood
    /// falls below this.
    pub gradient_tolerance: f64,
    /// Eigenvalue clamp used when building the starting point.
    pub parameter_floor: f64,
    pub start: StartPoint,
    /// When set, subtract `S1 S2 window / T` accidentals before fitting.
    pub accidental_window_s: Option<f64>,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-9,
            parameter_floor: 1e-6,
            start: StartPoint::LinearInversion,
            accidental_window_s: None,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::invalid("gradient_tolerance must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if !(self.parameter_floor >= 0.0) {
            return Err(Error::invalid("parameter_floor must be >= 0"));
        }
        if let Some(w) = self.accidental_window_s {
            if !(w > 0.0) {
                return Err(Error::invalid("accidental window must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MleResult {
    pub state: DensityMatrix,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Poisson log-likelihood (up to the count-only constant) at `state`,
    /// with the pair intensity profiled out.
    pub log_likelihood: f64,
    pub start: StartPoint,
}

/// Off-diagonal slots of `T`, in parameter order.
const LOWER: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn t_from_params(p: &Params) -> Mat4 {
    let mut t = Mat4::zeros();
    for i in 0..4 {
        t[(i, i)] = c(p[i], 0.0);
    }
    for (k, &(i, j)) in LOWER.iter().enumerate() {
        t[(i, j)] = c(p[4 + 2 * k], p[5 + 2 * k]);
    }
    t
}

fn params_from_t(t: &Mat4) -> Params {
    let mut p = Params::zeros();
    for i in 0..4 {
        p[i] = t[(i, i)].re;
    }
    for (k, &(i, j)) in LOWER.iter().enumerate() {
        p[4 + 2 * k] = t[(i, j)].re;
        p[5 + 2 * k] = t[(i, j)].im;
    }
    p
}

fn unnormalized(p: &Params) -> Mat4 {
    let t = t_from_params(p);
    t.adjoint() * t
}

/// `tr(P T^dagger T)` is a quadratic form in the 16 real parameters; build
/// its matrix by polarization.
fn quadratic_form(projector: &Mat4) -> Square {
    let mu = |p: &Params| (projector * unnormalized(p)).trace().re;
    let unit = |a: usize| {
        let mut p = Params::zeros();
        p[a] = 1.0;
        p
    };
    let diag: Vec<f64> = (0..16).map(|a| mu(&unit(a))).collect();
    let mut q = Square::zeros();
    for a in 0..16 {
        q[(a, a)] = diag[a];
        for b in 0..a {
            let v = 0.5 * (mu(&(unit(a) + unit(b))) - diag[a] - diag[b]);
            q[(a, b)] = v;
            q[(b, a)] = v;
        }
    }
    q
}

/// Count-normalized Poisson objective `sum w_k ln q_k - sum q_k`.
struct Objective {
    forms: Vec<Square>,
    weights: Vec<f64>,
    total_form: Square,
}

impl Objective {
    fn new(obs: &[Observation]) -> Result<Self> {
        let total: f64 = obs.iter().map(|o| o.counts).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidState("no counts to reconstruct from".into()));
        }
        let mean_duration = obs.iter().map(|o| o.duration).sum::<f64>() / obs.len() as f64;
        let forms: Vec<Square> = obs
            .iter()
            .map(|o| quadratic_form(&o.projector) * (o.duration / mean_duration))
            .collect();
        let total_form = forms.iter().fold(Square::zeros(), |acc, q| acc + q);
        Ok(Self {
            weights: obs.iter().map(|o| o.counts / total).collect(),
            forms,
            total_form,
        })
    }

    fn value(&self, p: &Params) -> f64 {
        let mut f = -(p.transpose() * self.total_form * p)[0];
        for (q, &w) in self.forms.iter().zip(&self.weights) {
            if w > 0.0 {
                let m = (p.transpose() * q * p)[0];
                if !(m > 0.0) {
                    return f64::NEG_INFINITY;
                }
                f += w * m.ln();
            }
        }
        f
    }

    fn gradient_hessian(&self, p: &Params) -> (Params, Square) {
        let qp = self.total_form * p;
        let mut g = -2.0 * qp;
        let mut h = -2.0 * self.total_form;
        for (q, &w) in self.forms.iter().zip(&self.weights) {
            if w > 0.0 {
                let v = q * p;
                let m = p.dot(&v);
                g += v * (2.0 * w / m);
                h += q * (2.0 * w / m) - v * v.transpose() * (4.0 * w / (m * m));
            }
        }
        (g, h)
    }

    /// Rescale so the expected total matches the observed total (the
    /// stationarity condition along the intensity direction).
    fn rescale(&self, p: &Params) -> Params {
        let s = (p.transpose() * self.total_form * p)[0];
        if s > 0.0 {
            p / s.sqrt()
        } else {
            *p
        }
    }
}

fn density_from_params(p: &Params) -> DensityMatrix {
    let m = unnormalized(p);
    let tr = m.trace().re;
    let rho = m / c(tr, 0.0);
    DensityMatrix::from_matrix_unchecked((rho + rho.adjoint()) * c(0.5, 0.0))
}

fn maximally_mixed_start() -> Params {
    let mut p = Params::zeros();
    for i in 0..4 {
        p[i] = 0.5;
    }
    p
}

/// Lower-triangular `T` with `T^dagger T = m` (m positive definite).
fn factor(m: &Mat4) -> Option<Mat4> {
    let mut j = Mat4::zeros();
    for i in 0..4 {
        j[(i, 3 - i)] = c(1.0, 0.0);
    }
    let l = Cholesky::new(j * m * j)?.unpack();
    Some((j * l * j).adjoint())
}

fn start_state(obs: &[Observation], config: &MleConfig) -> DensityMatrix {
    match config.start {
        StartPoint::MaximallyMixed => DensityMatrix::maximally_mixed(),
        StartPoint::LinearInversion => linear_from_observations(obs)
            .and_then(|est| DensityMatrix::project_to_physical(&est.matrix, config.parameter_floor))
            .unwrap_or_else(|_| DensityMatrix::maximally_mixed()),
    }
}

/// Basis order of a reverse pivoted Cholesky factorization: position 3 gets
/// the largest diagonal entry, position 2 the largest remaining Schur
/// complement, and so on.
///
/// Without pivoting, a rank-deficient optimum can have a continuum of
/// triangular factors (e.g. a state supported on HV and VH fits in either of
/// the last two rows) and the Newton iteration crawls along it.
fn pivot_order(rho: &DensityMatrix) -> [usize; 4] {
    let mut m = *rho.matrix();
    let mut remaining = vec![0, 1, 2, 3];
    let mut order = [0; 4];
    for pos in (0..4).rev() {
        let (slot, &i) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| m[(*a.1, *a.1)].re.total_cmp(&m[(*b.1, *b.1)].re))
            .expect("non-empty");
        order[pos] = i;
        remaining.remove(slot);
        let pivot = m[(i, i)].re;
        if pivot > 1e-300 {
            for &j in &remaining {
                for &k in &remaining {
                    let update = m[(j, i)] * m[(i, k)] / pivot;
                    m[(j, k)] -= update;
                }
            }
        }
    }
    order
}

/// `Pi m Pi^T` with `Pi[pos, order[pos]] = 1`.
fn permute(m: &Mat4, order: &[usize; 4]) -> Mat4 {
    Mat4::from_fn(|a, b| m[(order[a], order[b])])
}

fn unpermute(m: &Mat4, order: &[usize; 4]) -> Mat4 {
    let mut out = Mat4::zeros();
    for a in 0..4 {
        for b in 0..4 {
            out[(order[a], order[b])] = m[(a, b)];
        }
    }
    out
}

/// Triangular parameters of `rho` in the permuted basis, lifted off the
/// boundary by mixing in `floor` of white noise.
fn params_for(rho: &DensityMatrix, order: &[usize; 4], floor: f64) -> Params {
    let lifted = rho
        .mix(&DensityMatrix::maximally_mixed(), floor.clamp(1e-12, 0.5))
        .unwrap_or_else(|_| DensityMatrix::maximally_mixed());
    factor(&permute(lifted.matrix(), order))
        .map(|t| params_from_t(&t))
        .unwrap_or_else(maximally_mixed_start)
}

/// Poisson log-likelihood of the records under `rho`, maximized over the
/// overall pair intensity and without the `ln n!` terms.
pub fn log_likelihood(records: &[CountRecord], rho: &DensityMatrix) -> Result<f64> {
    Ok(log_likelihood_obs(&observations(records, None)?, rho))
}

pub(crate) fn log_likelihood_obs(obs: &[Observation], rho: &DensityMatrix) -> f64 {
    let probs: Vec<f64> = obs
        .iter()
        .map(|o| (o.projector * rho.matrix()).trace().re.max(0.0))
        .collect();
    let total: f64 = obs.iter().map(|o| o.counts).sum();
    let exposure: f64 = obs.iter().zip(&probs).map(|(o, p)| o.duration * p).sum();
    if !(exposure > 0.0) {
        return f64::NEG_INFINITY;
    }
    let intensity = total / exposure;
    obs.iter()
        .zip(&probs)
        .map(|(o, &p)| {
            let mu = intensity * o.duration * p;
            if o.counts > 0.0 {
                if mu > 0.0 {
                    o.counts * mu.ln() - mu
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                -mu
            }
        })
        .sum()
}

/// Maximum-likelihood density matrix from tomography records.
///
/// Ascends the Poisson likelihood over the 16 real parameters of `T` with a
/// damped Newton (Levenberg-Marquardt) iteration on the exact Hessian.
pub fn mle_reconstruct(records: &[CountRecord], config: &MleConfig) -> Result<MleResult> {
    config.validate()?;
    let obs = observations(records, config.accidental_window_s)?;
    mle_from_observations(&obs, config)
}

/// Iterations between checks of the pivot order.
const REPIVOT_EVERY: usize = 25;

pub(crate) fn mle_from_observations(obs: &[Observation], config: &MleConfig) -> Result<MleResult> {
    ensure_complete(obs)?;
    let permuted = |order: &[usize; 4]| -> Vec<Observation> {
        obs.iter()
            .map(|o| Observation {
                projector: permute(&o.projector, order),
                ..o.clone()
            })
            .collect()
    };

    let start = start_state(obs, config);
    let mut order = pivot_order(&start);
    let mut objective = Objective::new(&permuted(&order))?;
    let mut p = objective.rescale(&params_for(&start, &order, config.parameter_floor));
    let mut value = objective.value(&p);
    if !value.is_finite() {
        // A clamped start can still miss observed outcomes; fall back.
        p = objective.rescale(&maximally_mixed_start());
        value = objective.value(&p);
    }
    let (mut g, mut h) = objective.gradient_hessian(&p);
    let mut lambda = 1e-6;
    let mut iterations = 0;

    while g.norm() >= config.gradient_tolerance {
        if iterations >= config.max_iterations || lambda > 1e20 {
            return Err(Error::Convergence {
                iterations,
                gradient_norm: g.norm(),
                best: Box::new(state_from(&p, &order)),
            });
        }
        if iterations > 0 && iterations % REPIVOT_EVERY == 0 {
            let current = state_from(&p, &order);
            let next = pivot_order(&current);
            if next != order {
                let obj = Objective::new(&permuted(&next))?;
                let q = obj.rescale(&params_for(&current, &next, config.parameter_floor));
                let v = obj.value(&q);
                if v.is_finite() {
                    order = next;
                    objective = obj;
                    p = q;
                    value = v;
                    (g, h) = objective.gradient_hessian(&p);
                    lambda = 1e-6;
                }
            }
        }
        iterations += 1;
        let mut damped = -h;
        for i in 0..16 {
            damped[(i, i)] += lambda;
        }
        let Some(chol) = Cholesky::new(damped) else {
            lambda = (lambda * 10.0).max(1e-12);
            continue;
        };
        let step = chol.solve(&g);
        let trial = p + step;
        let trial_value = objective.value(&trial);
        let improved = trial_value > value;
        // Near the optimum the objective change drops below rounding; then
        // accept steps that shrink the gradient without losing likelihood.
        let flat = trial_value.is_finite()
            && trial_value >= value - 8.0 * f64::EPSILON * value.abs().max(1.0);
        let (tg, th) = if improved || flat {
            objective.gradient_hessian(&trial)
        } else {
            (g, h)
        };
        if improved || (flat && tg.norm() < g.norm()) {
            p = trial;
            value = trial_value;
            g = tg;
            h = th;
            lambda = (lambda * 0.1).max(1e-15);
        } else {
            lambda = (lambda * 10.0).max(1e-12);
        }
    }

    let state = state_from(&p, &order);
    Ok(MleResult {
        log_likelihood: log_likelihood_obs(obs, &state),
        state,
        iterations,
        gradient_norm: g.norm(),
        start: config.start,
    })
}

fn state_from(p: &Params, order: &[usize; 4]) -> DensityMatrix {
    let rho = density_from_params(p);
    DensityMatrix::from_matrix_unchecked(unpermute(rho.matrix(), order))
}
