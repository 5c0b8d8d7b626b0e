//! One-vs-rest logistic regression fit by L-BFGS.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lbfgs::{minimize, LbfgsParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub memory: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 100,
            tol: 1e-4,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// One row per class: `[bias, w_1 .. w_d]`.
    pub theta: Array2<f64>,
    pub params: LogRegParams,
    pub iterations: Vec<usize>,
    pub grad_norms: Vec<f64>,
    /// Line-search failures replaced by a gradient step.
    pub fallbacks: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Binary objective `0.5 ||w||^2 + C sum ln(1 + exp(-y_i (b + w.x_i)))` with
/// `y_i` in {-1, +1}; the bias `theta[0]` is not penalized.
pub fn objective(x: ArrayView2<f64>, y: &[f64], c: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let b = theta[0];
    let w = ArrayView1::from(&theta[1..]);
    let z = x.dot(&w) + b;
    let mut f = 0.5 * w.dot(&w);
    let mut coef = Array1::zeros(y.len());
    for (i, (&zi, &yi)) in z.iter().zip(y).enumerate() {
        let m = yi * zi;
        f += c * softplus(-m);
        coef[i] = -c * yi * sigmoid(-m);
    }
    let gw = x.t().dot(&coef) + w;
    let mut g = Vec::with_capacity(theta.len());
    g.push(coef.sum());
    g.extend(gw.iter());
    (f, g)
}

pub fn logreg_train(ds: &Dataset, params: &LogRegParams) -> Result<LogRegModel> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(params.c > 0.0) {
        return Err(Error::Param(format!("C = {} must be positive", params.c)));
    }
    let d = ds.n_features();
    let lp = LbfgsParams {
        memory: params.memory,
        max_iter: params.max_iter,
        tol: params.tol,
        ..Default::default()
    };
    let mut theta = Array2::zeros((ds.lmax, d + 1));
    let mut iterations = Vec::new();
    let mut grad_norms = Vec::new();
    let mut fallbacks = 0;
    for class in 0..ds.lmax {
        let y: Vec<f64> = ds.y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let r = minimize(|t| objective(ds.x.view(), &y, params.c, t), vec![0.0; d + 1], &lp);
        if r.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                model: "logreg",
                iteration: r.iterations,
                detail: format!("class {class} parameters"),
            });
        }
        theta.row_mut(class).assign(&Array1::from(r.x));
        iterations.push(r.iterations);
        grad_norms.push(r.grad_norm);
        fallbacks += r.fallbacks;
    }
    Ok(LogRegModel {
        theta,
        params: params.clone(),
        iterations,
        grad_norms,
        fallbacks,
    })
}

impl Classifier for LogRegModel {
    fn lmax(&self) -> usize {
        self.theta.nrows()
    }

    fn n_features(&self) -> usize {
        self.theta.ncols() - 1
    }

    /// Per-class sigmoid scores.
    fn decision_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let w = self.theta.slice(ndarray::s![.., 1..]);
        let b = self.theta.column(0);
        let mut z = x.dot(&w.t()) + &b.insert_axis(Axis(0));
        z.mapv_inplace(sigmoid);
        z
    }
}
