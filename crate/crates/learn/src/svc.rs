//! One-vs-rest support vector classification solved by SMO with
//! second-order working set selection.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Kernel {
    /// `exp(-gamma |a - b|^2)`
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Linear => a.dot(&b),
        }
    }

    /// Kernel matrix between the rows of `a` and `b`.
    pub fn matrix(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
        let mut k = a.dot(&b.t());
        if let Kernel::Rbf { gamma } = *self {
            let na: Vec<f64> = a.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
            let nb: Vec<f64> = b.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
            for ((i, j), v) in k.indexed_iter_mut() {
                *v = (-gamma * (na[i] + nb[j] - 2.0 * *v).max(0.0)).exp();
            }
        }
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum KernelChoice {
    /// `gamma: None` selects `1 / (n_features * variance)` of the training set.
    Rbf { gamma: Option<f64> },
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvcParams {
    pub c: f64,
    pub kernel: KernelChoice,
    /// KKT tolerance on the maximal violating pair.
    pub tol: f64,
    /// Iteration cap per binary problem; `None` means `max(10^7, 100 n)`.
    pub max_iter: Option<usize>,
    pub cache_mb: usize,
}

impl Default for SvcParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: KernelChoice::Rbf { gamma: None },
            tol: 1e-3,
            max_iter: None,
            cache_mb: 1024,
        }
    }
}

/// Lazily computed kernel rows over a fixed training matrix, kept in single
/// precision with FIFO eviction. Rows do not depend on labels, so one cache
/// serves every one-vs-rest problem.
pub struct KernelCache<'a> {
    x: ArrayView2<'a, f64>,
    kernel: Kernel,
    sq: Vec<f64>,
    diag: Vec<f64>,
    rows: Vec<Option<Box<[f32]>>>,
    fifo: VecDeque<usize>,
    cap_rows: usize,
}

impl<'a> KernelCache<'a> {
    pub fn new(x: ArrayView2<'a, f64>, kernel: Kernel, cache_mb: usize) -> Self {
        let n = x.nrows();
        let sq: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
        let diag = (0..n).map(|i| kernel.eval(x.row(i), x.row(i))).collect();
        let cap_rows = ((cache_mb << 20) / (4 * n.max(1))).max(2);
        let mut cache = Self {
            x,
            kernel,
            sq,
            diag,
            rows: vec![None; n],
            fifo: VecDeque::new(),
            cap_rows,
        };
        if cap_rows >= n && n > 0 {
            cache.fill_all();
        }
        cache
    }

    /// Computes every row up front in blocks of matrix products.
    fn fill_all(&mut self) {
        const BLOCK: usize = 512;
        let n = self.x.nrows();
        for lo in (0..n).step_by(BLOCK) {
            let hi = (lo + BLOCK).min(n);
            let k = self.kernel.matrix(self.x.slice(ndarray::s![lo..hi, ..]), self.x);
            for (r, row) in k.axis_iter(Axis(0)).enumerate() {
                self.rows[lo + r] = Some(row.iter().map(|&v| v as f32).collect());
                self.fifo.push_back(lo + r);
            }
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn row(&mut self, i: usize) -> &[f32] {
        if self.rows[i].is_none() {
            if self.fifo.len() >= self.cap_rows {
                let old = self.fifo.pop_front().expect("non-empty");
                self.rows[old] = None;
            }
            let dots = self.x.dot(&self.x.row(i));
            let row: Box<[f32]> = match self.kernel {
                Kernel::Linear => dots.iter().map(|&v| v as f32).collect(),
                Kernel::Rbf { gamma } => dots
                    .iter()
                    .zip(&self.sq)
                    .map(|(&d, &s)| (-gamma * (self.sq[i] + s - 2.0 * d).max(0.0)).exp() as f32)
                    .collect(),
            };
            self.rows[i] = Some(row);
            self.fifo.push_back(i);
        }
        self.rows[i].as_deref().expect("filled")
    }
}

/// Dual solution of one binary problem
/// `min 0.5 a^T Q a - sum a, 0 <= a <= C, y^T a = 0`, `Q_ij = y_i y_j K_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    /// Decision value is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Maximal violating pair gap `m(a) - M(a)` at exit.
    pub kkt_gap: f64,
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// `m(a) - M(a)` for gradient `g` of the dual objective.
pub fn violation(alpha: &[f64], y: &[f64], g: &[f64], c: f64) -> f64 {
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..y.len() {
        let v = -y[t] * g[t];
        if in_up(alpha[t], y[t], c) {
            up = up.max(v);
        }
        if in_low(alpha[t], y[t], c) {
            low = low.min(v);
        }
    }
    if up.is_finite() && low.is_finite() {
        up - low
    } else {
        0.0
    }
}

pub fn smo_solve(cache: &mut KernelCache, y: &[f64], c: f64, tol: f64, max_iter: usize) -> Result<BinarySolution> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let diag = cache.diag.clone();
    let mut it = 0;
    let gap = loop {
        // i: maximal -y G over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t], c) && -y[t] * g[t] > gmax {
                gmax = -y[t] * g[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t], c) {
                gmin = gmin.min(-y[t] * g[t]);
            }
        }
        let gap = if i == usize::MAX || !gmin.is_finite() { 0.0 } else { gmax - gmin };
        if gap < tol {
            break gap;
        }
        if it >= max_iter {
            return Err(Error::NotConverged {
                iterations: it,
                violation: gap,
            });
        }
        it += 1;

        // j: second-order selection over I_low
        let qd_i = diag[i];
        let ki = cache.row(i);
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t], c) {
                continue;
            }
            let b = gmax + y[t] * g[t];
            if b > 0.0 {
                let mut a = qd_i + diag[t] - 2.0 * ki[t] as f64;
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -b * b / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            break gap;
        }
        let kij = ki[j] as f64;
        let (ai, aj) = (alpha[i], alpha[j]);
        let quad = (qd_i + diag[j] - 2.0 * kij).max(TAU);
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        let yi = y[i];
        let ki = cache.row(i);
        for t in 0..n {
            g[t] += y[t] * yi * ki[t] as f64 * di;
        }
        let yj = y[j];
        let kj = cache.row(j);
        for t in 0..n {
            g[t] += y[t] * yj * kj[t] as f64 * dj;
        }
    };

    // rho from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    let objective = 0.5 * alpha.iter().zip(&g).map(|(a, gi)| a * (gi - 1.0)).sum::<f64>();
    Ok(BinarySolution {
        alpha,
        rho,
        objective,
        iterations: it,
        kkt_gap: gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub kernel: Kernel,
    pub c: f64,
    /// Union of the support vectors of all classes.
    pub support: Array2<f64>,
    /// Training-set row index of each support vector.
    pub support_index: Vec<usize>,
    /// `alpha_i y_i` per class (rows) and support vector (columns).
    pub dual_coef: Array2<f64>,
    pub rho: Vec<f64>,
    pub iterations: Vec<usize>,
    pub kkt_gap: Vec<f64>,
}

pub fn resolve_kernel(choice: KernelChoice, ds: &Dataset) -> Kernel {
    match choice {
        KernelChoice::Linear => Kernel::Linear,
        KernelChoice::Rbf { gamma: Some(gamma) } => Kernel::Rbf { gamma },
        KernelChoice::Rbf { gamma: None } => {
            let var = ds.feature_variance();
            let gamma = if var > 0.0 { 1.0 / (ds.n_features() as f64 * var) } else { 1.0 };
            Kernel::Rbf { gamma }
        }
    }
}

pub fn svc_train(ds: &Dataset, params: &SvcParams) -> Result<SvcModel> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(params.c > 0.0) {
        return Err(Error::Param(format!("C = {} must be positive", params.c)));
    }
    let kernel = resolve_kernel(params.kernel, ds);
    let n = ds.len();
    let max_iter = params.max_iter.unwrap_or((100 * n).max(10_000_000));
    let mut cache = KernelCache::new(ds.x.view(), kernel, params.cache_mb);
    let mut solutions = Vec::with_capacity(ds.lmax);
    for class in 0..ds.lmax {
        let y: Vec<f64> = ds.y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        solutions.push((smo_solve(&mut cache, &y, params.c, params.tol, max_iter)?, y));
    }
    let support_index: Vec<usize> = (0..n)
        .filter(|&t| solutions.iter().any(|(s, _)| s.alpha[t] > 0.0))
        .collect();
    let mut dual_coef = Array2::zeros((ds.lmax, support_index.len()));
    for (class, (s, y)) in solutions.iter().enumerate() {
        for (k, &t) in support_index.iter().enumerate() {
            dual_coef[[class, k]] = s.alpha[t] * y[t];
        }
    }
    Ok(SvcModel {
        kernel,
        c: params.c,
        support: ds.x.select(Axis(0), &support_index),
        dual_coef,
        rho: solutions.iter().map(|(s, _)| s.rho).collect(),
        iterations: solutions.iter().map(|(s, _)| s.iterations).collect(),
        kkt_gap: solutions.iter().map(|(s, _)| s.kkt_gap).collect(),
        support_index,
    })
}

impl SvcModel {
    /// Recomputes, in double precision from the stored coefficients, the
    /// largest KKT gap over the one-vs-rest problems on training set `ds`.
    pub fn kkt_residual(&self, ds: &Dataset) -> f64 {
        let k = self.kernel.matrix(ds.x.view(), self.support.view());
        let f = k.dot(&self.dual_coef.t());
        (0..self.dual_coef.nrows())
            .map(|class| {
                let y: Vec<f64> = ds.y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
                let mut alpha = vec![0.0; ds.len()];
                for (k, &t) in self.support_index.iter().enumerate() {
                    alpha[t] = self.dual_coef[[class, k]] * y[t];
                }
                let g: Vec<f64> = (0..ds.len()).map(|t| y[t] * f[[t, class]] - 1.0).collect();
                violation(&alpha, &y, &g, self.c)
            })
            .fold(0.0, f64::max)
    }
}

impl Classifier for SvcModel {
    fn lmax(&self) -> usize {
        self.rho.len()
    }

    fn n_features(&self) -> usize {
        self.support.ncols()
    }

    fn decision_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let k = self.kernel.matrix(x, self.support.view());
        let rho = Array1::from(self.rho.clone());
        k.dot(&self.dual_coef.t()) - &rho.insert_axis(Axis(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::blobs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xor(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::new();
        for i in 0..n {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            x[[i, 0]] = a;
            x[[i, 1]] = b;
            y.push(((a > 0.0) != (b > 0.0)) as usize);
        }
        Dataset::new(x, y, 2).unwrap()
    }

    fn accuracy(m: &SvcModel, ds: &Dataset) -> f64 {
        m.predict_batch(ds.x.view()).iter().zip(&ds.y).filter(|(a, b)| a == b).count() as f64 / ds.len() as f64
    }

    #[test]
    fn self_similarity_is_one() {
        let k = Kernel::Rbf { gamma: 0.37 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let x = Array1::from_shape_fn(288, |_| rng.gen_range(-5.0..5.0));
            assert_eq!(k.eval(x.view(), x.view()), 1.0);
        }
    }

    #[test]
    fn xor_needs_the_kernel() {
        let ds = xor(200, 1);
        let rbf = svc_train(
            &ds,
            &SvcParams {
                c: 10.0,
                kernel: KernelChoice::Rbf { gamma: Some(2.0) },
                ..Default::default()
            },
        )
        .unwrap();
        let lin = svc_train(
            &ds,
            &SvcParams {
                kernel: KernelChoice::Linear,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(accuracy(&rbf, &ds) >= 0.95, "rbf {}", accuracy(&rbf, &ds));
        assert!(accuracy(&lin, &ds) < 0.75, "linear {}", accuracy(&lin, &ds));
    }

    /// Exact minimum of the dual by enumerating which coordinates sit at 0,
    /// at C, or free, and solving the equality-constrained stationarity
    /// system for the free ones.
    fn brute_force_dual(q: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
        let n = y.len();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
            if !free.is_empty() {
                // [Q_FF y_F; y_F^T 0] [a_F; lambda] = [1 - Q_FU C; -y_U^T C]
                let m = free.len() + 1;
                let mut a = vec![vec![0.0; m + 1]; m];
                for (r, &i) in free.iter().enumerate() {
                    for (s, &j) in free.iter().enumerate() {
                        a[r][s] = q[i][j];
                    }
                    a[r][m - 1] = y[i];
                    a[r][m] = 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q[i][j] * c).sum::<f64>();
                    a[m - 1][r] = y[i];
                }
                a[m - 1][m] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
                let Some(sol) = gauss(a) else { continue };
                for (r, &i) in free.iter().enumerate() {
                    alpha[i] = sol[r];
                }
            }
            let feasible = alpha.iter().all(|&a| a >= -1e-12 && a <= c + 1e-12)
                && alpha.iter().zip(y).map(|(a, y)| a * y).sum::<f64>().abs() < 1e-9;
            if feasible {
                let mut obj = -alpha.iter().sum::<f64>();
                for i in 0..n {
                    for j in 0..n {
                        obj += 0.5 * alpha[i] * alpha[j] * q[i][j];
                    }
                }
                best = best.min(obj);
            }
        }
        best
    }

    fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
        let m = a.len();
        for col in 0..m {
            let piv = (col..m).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
            if a[piv][col].abs() < 1e-12 {
                return None;
            }
            a.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for k in col..=m {
                        a[r][k] -= f * a[col][k];
                    }
                }
            }
        }
        Some((0..m).map(|r| a[r][m] / a[r][r]).collect())
    }

    #[test]
    fn smo_matches_brute_force_qp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let x = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-1.0..1.0));
            let y: Vec<f64> = (0..6).map(|i| if (i + trial) % 3 == 0 { 1.0 } else { -1.0 }).collect();
            let kernel = Kernel::Rbf { gamma: 1.5 };
            let c = 2.0;
            let q: Vec<Vec<f64>> = (0..6)
                .map(|i| (0..6).map(|j| y[i] * y[j] * kernel.eval(x.row(i), x.row(j))).collect())
                .collect();
            let mut cache = KernelCache::new(x.view(), kernel, 1);
            let s = smo_solve(&mut cache, &y, c, 1e-3, 100_000).unwrap();
            let oracle = brute_force_dual(&q, &y, c);
            assert!((s.objective - oracle).abs() < 1e-3, "trial {trial}: smo {} oracle {oracle}", s.objective);
            assert!(s.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        }
    }

    #[test]
    fn decision_values_match_kernel_sum() {
        let ds = blobs(4, 40, 16, 1.5, 8);
        let m = svc_train(&ds, &SvcParams::default()).unwrap();
        let probe = blobs(4, 25, 16, 2.0, 9);
        let Kernel::Rbf { gamma } = m.kernel else { panic!() };
        for row in probe.x.axis_iter(Axis(0)) {
            let d = m.scores(row.as_slice().unwrap()).unwrap();
            for c in 0..4 {
                let mut v = -m.rho[c];
                for (k, sv) in m.support.axis_iter(Axis(0)).enumerate() {
                    let d2: f64 = sv.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum();
                    v += m.dual_coef[[c, k]] * (-gamma * d2).exp();
                }
                assert!((d[c] - v).abs() < 1e-9, "{} vs {v}", d[c]);
            }
        }
        assert_eq!(m.predict(probe.x.row(0).as_slice().unwrap()).unwrap(), m.predict(probe.x.row(0).as_slice().unwrap()).unwrap());
    }

    #[test]
    fn separable_train_accuracy_and_kkt() {
        let ds = blobs(8, 60, 32, 1.0, 10);
        let m = svc_train(&ds, &SvcParams::default()).unwrap();
        assert!(accuracy(&m, &ds) >= 0.99);
        assert!(m.kkt_gap.iter().all(|&g| g < 1e-3));
        assert!(m.kkt_residual(&ds) < 1e-3, "{}", m.kkt_residual(&ds));
        for &c in m.dual_coef.iter() {
            assert!(c.abs() <= m.c + 1e-12);
        }
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let ds = xor(100, 2);
        let r = svc_train(
            &ds,
            &SvcParams {
                max_iter: Some(3),
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::NotConverged { iterations: 3, .. })));
    }
}
