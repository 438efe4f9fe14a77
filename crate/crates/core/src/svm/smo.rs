//! SMO on the dual `min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a_i <= C_i`,
//! with `Q_ij = y_i y_j K(x_i, x_j)`.
//!
//! Working pairs are the maximal KKT violators; the two-variable update and
//! the bias estimate follow the usual LIBSVM formulation.

use super::cache::KernelCache;
use super::{KernelSpec, SolverConfig};
use crate::dataset::Dataset;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective at the returned point.
    pub objective: f64,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub violation: f64,
}

pub(super) fn solve(
    data: &Dataset,
    kernel: KernelSpec,
    upper: &[f64],
    cfg: &SolverConfig,
) -> (Vec<f64>, f64, SolveStats) {
    let l = data.len();
    let y: Vec<f64> = data.labels().iter().map(|&v| v as f64).collect();
    let mut alpha = vec![0.0; l];
    let mut grad = vec![-1.0; l];
    let mut cache = KernelCache::new(data, kernel, cfg.cache_budget);
    let max_iter = cfg.max_passes.saturating_mul(l.max(1));

    let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < upper[t]) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < upper[t]);

    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        for t in 0..l {
            let v = -y[t] * grad[t];
            if in_up(t, &alpha) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(t, &alpha) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        violation = g_max - g_min;
        if i == usize::MAX || j == usize::MAX || violation < cfg.kkt_tolerance {
            converged = true;
            if i == usize::MAX || j == usize::MAX {
                violation = 0.0;
            }
            break;
        }
        iterations += 1;

        let (kii, kjj) = (cache.diag(i), cache.diag(j));
        let (row_i, row_j) = cache.pair(i, j);
        let kij = row_i[j];
        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if y[i] != y[j] {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        // keep the box exact despite rounding in the clip arithmetic
        ai = ai.clamp(0.0, ci);
        aj = aj.clamp(0.0, cj);
        alpha[i] = ai;
        alpha[j] = aj;

        let (di, dj) = (ai - old_i, aj - old_j);
        for k in 0..l {
            grad[k] += y[k] * (y[i] * row_i[k] * di + y[j] * row_j[k] * dj);
        }
    }

    let bias = -rho(&y, &alpha, &grad, upper);
    let objective = 0.5
        * alpha
            .iter()
            .zip(&grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>();
    (
        alpha,
        bias,
        SolveStats {
            iterations,
            converged,
            objective,
            violation,
        },
    )
}

fn rho(y: &[f64], alpha: &[f64], grad: &[f64], upper: &[f64]) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= upper[t];
        let at_lower = alpha[t] <= 0.0;
        if at_upper && at_lower {
            // C_t = 0: the point cannot move and carries no information
            continue;
        }
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    }
}
