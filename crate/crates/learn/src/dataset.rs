use beamsearch_core::detect::DmrsFeatureVector;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Labeled feature matrix, one row per vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub lmax: usize,
}

/// Disjoint, exhaustive partition of dataset row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>, lmax: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!("{} rows, {} labels", x.nrows(), y.len())));
        }
        if let Some(&label) = y.iter().find(|&&l| l >= lmax) {
            return Err(Error::LabelOutOfRange { label, lmax });
        }
        Ok(Self { x, y, lmax })
    }

    pub fn from_vectors(vectors: &[DmrsFeatureVector], lmax: usize) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyDataset)?;
        let d = first.x.len();
        let mut x = Array2::zeros((vectors.len(), d));
        let mut y = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            if v.x.len() != d {
                return Err(Error::FeatureLength {
                    expected: d,
                    got: v.x.len(),
                });
            }
            y.push(v.label.ok_or(Error::Unlabeled(i))?);
            x.row_mut(i).iter_mut().zip(&v.x).for_each(|(a, b)| *a = *b);
        }
        Self::new(x, y, lmax)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            lmax: self.lmax,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.lmax];
        self.y.iter().for_each(|&l| c[l] += 1);
        c
    }

    /// Variance over all matrix entries.
    pub fn feature_variance(&self) -> f64 {
        let n = self.x.len() as f64;
        let mean = self.x.sum() / n;
        self.x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
    }

    /// Per-class shuffled row indices; the permutation depends only on `seed`.
    fn shuffled_by_class(&self, pool: &[usize], seed: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class = vec![Vec::new(); self.lmax];
        pool.iter().for_each(|&i| by_class[self.y[i]].push(i));
        by_class.iter_mut().for_each(|c| c.shuffle(&mut rng));
        by_class
    }

    /// Stratified split: each class contributes `round(train_fraction * n_c)`
    /// vectors to the training side.
    pub fn stratified_split(&self, train_fraction: f64, seed: u64) -> Split {
        let all: Vec<usize> = (0..self.len()).collect();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in self.shuffled_by_class(&all, seed) {
            let k = (train_fraction * c.len() as f64).round() as usize;
            train.extend_from_slice(&c[..k]);
            test.extend_from_slice(&c[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Split { train, test }
    }

    /// Draws `n` indices from `pool` with class proportions preserved
    /// (largest-remainder rounding). For a fixed seed, smaller draws are
    /// subsets of larger ones.
    pub fn stratified_sample(&self, pool: &[usize], n: usize, seed: u64) -> Vec<usize> {
        let n = n.min(pool.len());
        let classes = self.shuffled_by_class(pool, seed);
        let total = pool.len() as f64;
        let exact: Vec<f64> = classes.iter().map(|c| n as f64 * c.len() as f64 / total).collect();
        let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
        let mut left = n - take.iter().sum::<usize>();
        for c in order {
            if left == 0 {
                break;
            }
            if take[c] < classes[c].len() {
                take[c] += 1;
                left -= 1;
            }
        }
        let mut out: Vec<usize> = classes
            .iter()
            .zip(&take)
            .flat_map(|(c, &k)| c[..k].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}
