//! Instance mapping: a bank of independent nu-SVR models, one per embedding
//! coordinate, sharing a precomputed kernel matrix.

mod solver;

pub use solver::{train_nu_svr, train_nu_svr_with_kernel, SvrModel};

use serde::{Deserialize, Serialize};

use crate::concept_space::{scattering, ConceptStore};
use crate::error::{Error, Result};
use crate::vecmath::{dot, euclidean, squared_distance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Polynomial { degree: u32, coef0: f64 },
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Polynomial { degree, coef0 } => (dot(a, b) + coef0).powi(*degree as i32),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

/// Dense symmetric kernel matrix over the training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Evaluates the kernel over all pairs; exactly symmetric because each pair
/// is evaluated once and mirrored.
pub fn kernel_matrix(inputs: &[Vec<f64>], kernel: &Kernel) -> KernelMatrix {
    let n = inputs.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&inputs[i], &inputs[j]);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    KernelMatrix { n, values }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    /// Support-vector budget parameter in (0, 1].
    pub nu: f64,
    /// Regularization constant.
    pub c: f64,
    pub kernel: Kernel,
    /// Largest tolerated KKT violation at exit.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            nu: 0.25,
            c: 1.0,
            kernel: Kernel::Rbf { gamma: 1.0 },
            tolerance: 1e-8,
            max_iterations: 200_000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::Config(format!("nu must be in (0, 1], got {}", self.nu)));
        }
        if self.c <= 0.0 {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if self.tolerance <= 0.0 {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Kernel expansion plus bias for one coordinate.
pub fn predict_svr(model: &SvrModel, x: &[f64]) -> f64 {
    let mut value = model.bias;
    for (sv, coef) in model.support_vectors.iter().zip(&model.coefficients) {
        value += coef * model.kernel.eval(sv, x);
    }
    value
}

/// One nu-SVR per target coordinate, sharing the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImModel {
    pub models: Vec<SvrModel>,
    pub input_dim: usize,
    pub target_dim: usize,
}

/// Trains the coordinate models against a kernel matrix computed once.
/// Per-coordinate failures are aggregated with their coordinate index.
pub fn train_im(inputs: &[Vec<f64>], targets: &[Vec<f64>], config: &SvrConfig) -> Result<ImModel> {
    config.validate()?;
    if inputs.len() != targets.len() {
        return Err(Error::dimension(inputs.len(), targets.len(), "targets"));
    }
    if inputs.len() < 2 {
        return Err(Error::Config("regression needs at least 2 instances".into()));
    }
    let input_dim = inputs[0].len();
    let target_dim = targets[0].len();
    for (i, t) in targets.iter().enumerate() {
        if t.len() != target_dim {
            return Err(Error::dimension(target_dim, t.len(), format!("target {i}")));
        }
    }
    let kernel = kernel_matrix(inputs, &config.kernel);
    let mut models = Vec::with_capacity(target_dim);
    let mut failures = Vec::new();
    for coord in 0..target_dim {
        let y: Vec<f64> = targets.iter().map(|t| t[coord]).collect();
        match train_nu_svr_with_kernel(&kernel, inputs, &y, config) {
            Ok(model) => models.push(model),
            Err(e) => failures.push((coord, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::ImTraining(failures));
    }
    Ok(ImModel {
        models,
        input_dim,
        target_dim,
    })
}

/// Coordinate-wise prediction of the embedding target.
pub fn predict_im(model: &ImModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim {
        return Err(Error::dimension(model.input_dim, x.len(), "instance vector"));
    }
    Ok(model.models.iter().map(|m| predict_svr(m, x)).collect())
}

/// Mean regression error, the scattering of the store, and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionStats {
    /// Mean Euclidean error over the test instances.
    pub mean_error: f64,
    /// Mean pairwise distance among known semantics-set concepts.
    pub scattering: f64,
    /// `mean_error / scattering`.
    pub relative_error: f64,
}

/// Evaluates the regressor against ground-truth targets, scaled by the
/// concept scattering. A zero scattering leaves the ratio undefined and is
/// signalled explicitly.
pub fn regression_error(
    model: &ImModel,
    test: &[(Vec<f64>, Vec<f64>)],
    store: &ConceptStore,
) -> Result<RegressionStats> {
    if test.is_empty() {
        return Err(Error::Config("no test instances".into()));
    }
    let mut sum = 0.0;
    for (x, target) in test {
        let predicted = predict_im(model, x)?;
        sum += euclidean(&predicted, target);
    }
    let mean_error = sum / test.len() as f64;
    let s = scattering(store)?;
    if s == 0.0 {
        return Err(Error::Numeric(
            "scattering is zero; relative regression error undefined".into(),
        ));
    }
    Ok(RegressionStats {
        mean_error,
        scattering: s,
        relative_error: mean_error / s,
    })
}
