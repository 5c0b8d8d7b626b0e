//! Fully connected network with ReLU hidden layers, softmax cross-entropy
//! loss and Adam updates.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty, applied as `alpha / (2 * batch) * sum ||W||^2`.
    pub alpha: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early stop once the epoch loss fails to improve by `tol` for
    /// `n_iter_no_change` consecutive epochs.
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![100, 100],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            alpha: 1e-4,
            batch_size: 200,
            max_epochs: 200,
            tol: 1e-4,
            n_iter_no_change: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub adam: AdamState,
    pub params: MlpParams,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

/// Row-wise softmax.
pub fn softmax(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

impl MlpModel {
    fn sizes(n_in: usize, lmax: usize, params: &MlpParams) -> Vec<(usize, usize)> {
        let mut dims = vec![n_in];
        dims.extend(&params.hidden);
        dims.push(lmax);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn with_layers(layers: Vec<Layer>, params: &MlpParams) -> Self {
        let zeros: Vec<Layer> = layers.iter().map(Layer::zeros_like).collect();
        Self {
            adam: AdamState {
                m: zeros.clone(),
                v: zeros,
                t: 0,
            },
            layers,
            params: params.clone(),
            loss_curve: Vec::new(),
        }
    }

    /// Glorot-uniform weights and biases, bound `sqrt(6 / (fan_in + fan_out))`.
    pub fn init(n_in: usize, lmax: usize, params: &MlpParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let layers = Self::sizes(n_in, lmax, params)
            .into_iter()
            .map(|(i, o)| {
                let bound = (6.0 / (i + o) as f64).sqrt();
                Layer {
                    w: Array2::from_shape_fn((i, o), |_| rng.gen_range(-bound..bound)),
                    b: Array1::from_shape_fn(o, |_| rng.gen_range(-bound..bound)),
                }
            })
            .collect();
        Self::with_layers(layers, params)
    }

    pub fn zeros(n_in: usize, lmax: usize, params: &MlpParams) -> Self {
        let layers = Self::sizes(n_in, lmax, params)
            .into_iter()
            .map(|(i, o)| Layer {
                w: Array2::zeros((i, o)),
                b: Array1::zeros(o),
            })
            .collect();
        Self::with_layers(layers, params)
    }

    /// Activations of every layer, input first, output logits last.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.w) + &layer.b;
            if l < last {
                relu_inplace(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Output-layer pre-activations.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).pop().expect("output layer")
    }

    /// Penalized mean cross-entropy over the batch and its gradient.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: &[usize]) -> (f64, Vec<Layer>) {
        let n = x.nrows() as f64;
        let acts = self.forward(x);
        let p = softmax(acts.last().expect("output"));
        let mut loss = -y
            .iter()
            .enumerate()
            .map(|(i, &c)| p[[i, c]].max(1e-300).ln())
            .sum::<f64>()
            / n;
        let alpha = self.params.alpha;
        loss += 0.5 * alpha / n * self.layers.iter().map(|l| l.w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();

        let mut delta = p;
        y.iter().enumerate().for_each(|(i, &c)| delta[[i, c]] -= 1.0);
        delta.mapv_inplace(|v| v / n);
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let a = &acts[l];
            let w = a.t().dot(&delta) + &self.layers[l].w * (alpha / n);
            let b = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].w.t());
                Zip::from(&mut back).and(a).for_each(|d, &act| {
                    if act <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Layer { w, b });
        }
        grads.reverse();
        (loss, grads)
    }

    fn adam_step(&mut self, grads: &[Layer]) {
        let p = &self.params;
        let st = &mut self.adam;
        st.t += 1;
        let t = st.t as i32;
        let lr = p.learning_rate * (1.0 - p.beta2.powi(t)).sqrt() / (1.0 - p.beta1.powi(t));
        let (b1, b2, eps) = (p.beta1, p.beta2, p.epsilon);
        for (((layer, g), m), v) in self.layers.iter_mut().zip(grads).zip(&mut st.m).zip(&mut st.v) {
            Zip::from(&mut layer.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * *m / (v.sqrt() + eps);
            });
            Zip::from(&mut layer.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * *m / (v.sqrt() + eps);
            });
        }
    }

    /// Runs up to `epochs` passes of minibatch Adam over `ds`.
    pub fn fit_epochs(&mut self, ds: &Dataset, epochs: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut order: Vec<usize> = (0..ds.len()).collect();
        let bs = self.params.batch_size.max(1);
        let mut best = self.loss_curve.iter().copied().fold(f64::INFINITY, f64::min);
        let mut stale = 0;
        for _ in 0..epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for chunk in order.chunks(bs) {
                let xb = ds.x.select(Axis(0), chunk);
                let yb: Vec<usize> = chunk.iter().map(|&i| ds.y[i]).collect();
                let (loss, grads) = self.loss_and_grad(xb.view(), &yb);
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        model: "mlp",
                        iteration: self.adam.t as usize,
                        detail: format!("batch loss {loss} at epoch {}", self.loss_curve.len()),
                    });
                }
                total += loss * chunk.len() as f64;
                self.adam_step(&grads);
            }
            let epoch_loss = total / ds.len() as f64;
            self.loss_curve.push(epoch_loss);
            if epoch_loss > best - self.params.tol {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(epoch_loss);
            if stale > self.params.n_iter_no_change {
                break;
            }
        }
        Ok(())
    }
}

pub fn mlp_train(ds: &Dataset, params: &MlpParams) -> Result<MlpModel> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = MlpModel::init(ds.n_features(), ds.lmax, params);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
    model.fit_epochs(ds, params.max_epochs, &mut rng)?;
    Ok(model)
}

impl Classifier for MlpModel {
    fn lmax(&self) -> usize {
        self.layers.last().map_or(0, |l| l.b.len())
    }

    fn n_features(&self) -> usize {
        self.layers[0].w.nrows()
    }

    /// Softmax class probabilities.
    fn decision_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        softmax(&self.logits(x))
    }

    /// Argmax over the output pre-activations.
    fn predict_batch(&self, x: ArrayView2<f64>) -> Vec<usize> {
        self.logits(x)
            .axis_iter(Axis(0))
            .map(|r| beamsearch_core::detect::argmax(&r.to_vec()))
            .collect()
    }
}
