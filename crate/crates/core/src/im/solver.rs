//! SMO-style solver for the nu-SVR dual.
//!
//! The problem, over multipliers `a, a*` in `[0, C/N]^N`:
//!
//! ```text
//! minimize   1/2 (a - a*)^T K (a - a*) + y^T (a - a*)
//! subject to 1^T (a - a*) = 0,   1^T (a + a*) <= C nu
//! ```
//!
//! with predictions `f(x) = sum_i (a*_i - a_i) k(x_i, x) + b`.
//!
//! The objective depends on the multipliers only through `lambda = a - a*`,
//! so any optimum of the inequality-budget problem is matched, with equal
//! objective value, by a point that holds the budget at exactly `C nu`
//! (distribute the slack over `a_i = a*_i` pairs; capacity suffices since
//! `nu <= 1`). Together with the equality constraint this pins both block
//! sums to `C nu / 2`. The solver therefore starts from a feasible point
//! with both sums at `C nu / 2` and takes pairwise steps within one block at
//! a time — such steps preserve both sums — choosing the maximal
//! KKT-violating pair over the two blocks, exactly in the spirit of
//! working-set SMO. Each step minimizes the objective along the chosen
//! direction under the box, so the dual objective never increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::all_finite;

use super::{kernel_matrix, Kernel, KernelMatrix, SvrConfig};

/// A fitted single-coordinate regressor.
///
/// `support_vectors`/`coefficients` carry only the inputs with nonzero
/// `a*_i - a_i`; the full multiplier vectors are retained for the dual
/// feasibility invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `a*_i - a_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    /// Half-width of the insensitive tube recovered from the KKT conditions.
    pub epsilon: f64,
    pub kernel: Kernel,
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// Dual objective value at exit.
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn train_nu_svr(inputs: &[Vec<f64>], y: &[f64], config: &SvrConfig) -> Result<SvrModel> {
    let kernel = kernel_matrix(inputs, &config.kernel);
    train_nu_svr_with_kernel(&kernel, inputs, y, config)
}

pub fn train_nu_svr_with_kernel(
    kernel: &KernelMatrix,
    inputs: &[Vec<f64>],
    y: &[f64],
    config: &SvrConfig,
) -> Result<SvrModel> {
    config.validate()?;
    let n = y.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "nu-SVR needs at least 2 training examples, got {n}"
        )));
    }
    if kernel.n() != n || inputs.len() != n {
        return Err(Error::dimension(n, kernel.n(), "kernel matrix"));
    }
    if !all_finite(y) {
        return Err(Error::Numeric("non-finite regression target".into()));
    }

    let cap = config.c / n as f64;
    let budget_half = config.c * config.nu / 2.0;

    // Feasible start: fill both blocks greedily to C nu / 2.
    let mut alpha = vec![0.0; n];
    let mut remaining = budget_half;
    for a in alpha.iter_mut() {
        *a = cap.min(remaining);
        remaining -= *a;
        if remaining <= 0.0 {
            break;
        }
    }
    let mut alpha_star = alpha.clone();

    // lambda = alpha - alpha_star is zero at start, so h = K lambda = 0.
    let mut h = vec![0.0; n];
    let g = |h: &[f64], i: usize| h[i] + y[i];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        // Maximal violating pair in the alpha block: move mass from the
        // largest gradient (decreasable) to the smallest (increasable).
        let mut a_up: Option<usize> = None; // argmin g with alpha_i < cap
        let mut a_dn: Option<usize> = None; // argmax g with alpha_i > 0
        for i in 0..n {
            let gi = g(&h, i);
            if alpha[i] < cap && a_up.map_or(true, |j| gi < g(&h, j)) {
                a_up = Some(i);
            }
            if alpha[i] > 0.0 && a_dn.map_or(true, |j| gi > g(&h, j)) {
                a_dn = Some(i);
            }
        }
        let violation_a = match (a_up, a_dn) {
            (Some(i), Some(j)) if i != j => g(&h, j) - g(&h, i),
            _ => f64::NEG_INFINITY,
        };

        // Same for the alpha* block, whose gradient is -g.
        let mut s_up: Option<usize> = None; // argmax g with alpha*_i < cap
        let mut s_dn: Option<usize> = None; // argmin g with alpha*_i > 0
        for i in 0..n {
            let gi = g(&h, i);
            if alpha_star[i] < cap && s_up.map_or(true, |j| gi > g(&h, j)) {
                s_up = Some(i);
            }
            if alpha_star[i] > 0.0 && s_dn.map_or(true, |j| gi < g(&h, j)) {
                s_dn = Some(i);
            }
        }
        let violation_s = match (s_up, s_dn) {
            (Some(i), Some(j)) if i != j => g(&h, i) - g(&h, j),
            _ => f64::NEG_INFINITY,
        };

        if violation_a.max(violation_s) <= config.tolerance {
            converged = true;
            break;
        }

        if violation_a >= violation_s {
            let (i, j) = (a_up.unwrap(), a_dn.unwrap());
            let curvature = (kernel.at(i, i) + kernel.at(j, j) - 2.0 * kernel.at(i, j)).max(1e-12);
            let step = (violation_a / curvature)
                .min(cap - alpha[i])
                .min(alpha[j]);
            alpha[i] += step;
            alpha[j] -= step;
            // lambda_i += step, lambda_j -= step
            for m in 0..n {
                h[m] += step * (kernel.at(i, m) - kernel.at(j, m));
            }
        } else {
            let (i, j) = (s_up.unwrap(), s_dn.unwrap());
            let curvature = (kernel.at(i, i) + kernel.at(j, j) - 2.0 * kernel.at(i, j)).max(1e-12);
            let step = (violation_s / curvature)
                .min(cap - alpha_star[i])
                .min(alpha_star[j]);
            alpha_star[i] += step;
            alpha_star[j] -= step;
            // lambda_i -= step, lambda_j += step
            for m in 0..n {
                h[m] -= step * (kernel.at(i, m) - kernel.at(j, m));
            }
        }
        iterations += 1;
    }
    if !converged {
        log::warn!(
            "nu-SVR did not reach tolerance {} within {} iterations; returning best iterate",
            config.tolerance,
            config.max_iterations
        );
    }

    // Bias and tube width from the KKT conditions: free alpha give
    // g_i = b - eps, free alpha* give g_i = b + eps; with no free
    // multipliers the bound constraints bracket the value.
    let bound_tol = 1e-9 * cap.max(1.0);
    let r1 = kkt_level(
        n,
        |i| alpha[i],
        cap,
        bound_tol,
        |i| g(&h, i),
        Side::Alpha,
    );
    let r2 = kkt_level(
        n,
        |i| alpha_star[i],
        cap,
        bound_tol,
        |i| g(&h, i),
        Side::AlphaStar,
    );
    let bias = (r1 + r2) / 2.0;
    let epsilon = ((r2 - r1) / 2.0).max(0.0);

    // Dual objective: 1/2 lambda^T h + y^T lambda.
    let mut objective = 0.0;
    for i in 0..n {
        let lambda = alpha[i] - alpha_star[i];
        objective += 0.5 * lambda * h[i] + y[i] * lambda;
    }

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        let coef = alpha_star[i] - alpha[i];
        if coef != 0.0 {
            support_vectors.push(inputs[i].clone());
            coefficients.push(coef);
        }
    }

    Ok(SvrModel {
        support_vectors,
        coefficients,
        bias,
        epsilon,
        kernel: config.kernel.clone(),
        alpha,
        alpha_star,
        dual_objective: objective,
        iterations,
        converged,
    })
}

enum Side {
    Alpha,
    AlphaStar,
}

/// The KKT level of one block: the mean gradient over free multipliers, or
/// the midpoint of the interval bracketed by the bound multipliers.
fn kkt_level(
    n: usize,
    value: impl Fn(usize) -> f64,
    cap: f64,
    tol: f64,
    g: impl Fn(usize) -> f64,
    side: Side,
) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..n {
        let v = value(i);
        let gi = g(i);
        if v > tol && v < cap - tol {
            free_sum += gi;
            free_count += 1;
        } else if v <= tol {
            // At zero: alpha block has g_i >= level, alpha* block g_i <= level.
            match side {
                Side::Alpha => upper = upper.min(gi),
                Side::AlphaStar => lower = lower.max(gi),
            }
        } else {
            // At the cap: opposite inequality.
            match side {
                Side::Alpha => lower = lower.max(gi),
                Side::AlphaStar => upper = upper.min(gi),
            }
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if lower.is_finite() && upper.is_finite() {
        (lower + upper) / 2.0
    } else if lower.is_finite() {
        lower
    } else {
        upper
    }
}
