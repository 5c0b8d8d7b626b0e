//! Random forest of gini-split decision trees on bootstrap samples.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{plurality, Classifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Candidate features per split; `None` means `round(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 100,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_counts(&self, x: ArrayView1<f64>) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let counts = self.leaf_counts(x);
        let c: Vec<f64> = counts.iter().map(|&v| v as f64).collect();
        beamsearch_core::detect::argmax(&c)
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub lmax: usize,
    pub n_features: usize,
    pub params: ForestParams,
    /// Out-of-bag accuracy over rows left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    lmax: usize,
    max_depth: usize,
    min_split: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.lmax];
        rows.iter().for_each(|&r| c[self.y[r]] += 1);
        c
    }

    /// Best `(feature, threshold, weighted child gini)` over up to `mtry`
    /// non-constant features drawn in random order.
    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64, f64)> {
        let mut features: Vec<usize> = (0..self.x.ncols()).collect();
        features.shuffle(rng);
        let n = rows.len() as f64;
        let total = self.counts(rows);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut examined = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in features {
            if examined == self.mtry {
                break;
            }
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            examined += 1;
            let mut left = vec![0u32; self.lmax];
            let mut right = total.clone();
            for k in 0..pairs.len() - 1 {
                let c = pairs[k].1;
                left[c] += 1;
                right[c] -= 1;
                if pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let score = (nl * gini(&left) + (n - nl) * gini(&right)) / n;
                if best.map_or(true, |b| score < b.2) {
                    best = Some((f, 0.5 * (pairs[k].0 + pairs[k + 1].0), score));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        if gini(&counts) == 0.0 || depth >= self.max_depth || rows.len() < self.min_split {
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(&rows, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| self.x[[row, feature]] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on `rows` (with repeats) of the dataset.
pub fn grow_tree(ds: &Dataset, rows: Vec<usize>, params: &ForestParams, rng: &mut ChaCha8Rng) -> Tree {
    let d = ds.n_features();
    let mtry = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().round() as usize)
        .clamp(1, d);
    let mut g = Grower {
        x: ds.x.view(),
        y: &ds.y,
        lmax: ds.lmax,
        max_depth: params.max_depth,
        min_split: params.min_samples_split.max(2),
        mtry,
        nodes: Vec::new(),
    };
    g.grow(rows, 0, rng);
    Tree { nodes: g.nodes }
}

pub fn forest_train(ds: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.n_trees == 0 {
        return Err(Error::Param("n_trees must be positive".into()));
    }
    let n = ds.len();
    let grown: Vec<(Tree, Vec<bool>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64 + 1);
            let mut in_bag = vec![!params.bootstrap; n];
            let rows: Vec<usize> = if params.bootstrap {
                (0..n)
                    .map(|_| {
                        let r = rng.gen_range(0..n);
                        in_bag[r] = true;
                        r
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            (grow_tree(ds, rows, params, &mut rng), in_bag)
        })
        .collect();

    let mut votes = vec![vec![0.0; ds.lmax]; n];
    for (tree, in_bag) in &grown {
        for (i, row) in ds.x.axis_iter(Axis(0)).enumerate() {
            if !in_bag[i] {
                votes[i][tree.predict(row)] += 1.0;
            }
        }
    }
    let (hit, seen) = votes.iter().zip(&ds.y).fold((0usize, 0usize), |(h, s), (v, &y)| {
        if v.iter().sum::<f64>() > 0.0 {
            (h + (beamsearch_core::detect::argmax(v) == y) as usize, s + 1)
        } else {
            (h, s)
        }
    });
    Ok(ForestModel {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        lmax: ds.lmax,
        n_features: ds.n_features(),
        params: params.clone(),
        oob_accuracy: (seen > 0).then(|| hit as f64 / seen as f64),
    })
}

impl Classifier for ForestModel {
    fn lmax(&self) -> usize {
        self.lmax
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Tree vote counts per class.
    fn decision_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.lmax));
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            for t in &self.trees {
                out[[i, t.predict(row)]] += 1.0;
            }
        }
        out
    }
}

impl ForestModel {
    pub fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        plurality(self.trees.iter().map(|t| t.predict(x)), self.lmax)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::blobs;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[0, 7, 0]), 0.0);
        assert_eq!(gini(&[5, 5]), 0.5);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let mut ds = blobs(3, 10, 4, 1.0, 1);
        ds.y.iter_mut().for_each(|l| *l = 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = grow_tree(&ds, (0..ds.len()).collect(), &ForestParams::default(), &mut rng);
        assert_eq!(t.nodes, vec![Node::Leaf { counts: vec![0, 0, 30] }]);
    }

    #[test]
    fn children_partition_parent() {
        let ds = blobs(4, 30, 8, 2.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = grow_tree(&ds, (0..ds.len()).collect(), &ForestParams::default(), &mut rng);
        let total = |id: usize| -> u32 {
            fn go(nodes: &[Node], id: usize) -> u32 {
                match &nodes[id] {
                    Node::Leaf { counts } => counts.iter().sum(),
                    Node::Split { left, right, .. } => go(nodes, *left) + go(nodes, *right),
                }
            }
            go(&t.nodes, id)
        };
        assert_eq!(total(0), 120);
        // fully grown without bootstrap: training rows are reproduced
        let hits = ds.x.axis_iter(Axis(0)).zip(&ds.y).filter(|(r, &y)| t.predict(*r) == y).count();
        assert_eq!(hits, 120);
        assert!(t.depth() <= 100);
    }

    #[test]
    fn oob_on_blobs() {
        let ds = blobs(8, 60, 64, 1.0, 3);
        let f = forest_train(&ds, &ForestParams::default()).unwrap();
        assert_eq!(f.trees.len(), 100);
        assert!(f.oob_accuracy.unwrap() >= 0.98, "{:?}", f.oob_accuracy);
    }

    #[test]
    fn prediction_matches_traversal_oracle() {
        let ds = blobs(4, 40, 16, 2.5, 4);
        let p = ForestParams {
            n_trees: 15,
            ..Default::default()
        };
        let f = forest_train(&ds, &p).unwrap();
        let probe = blobs(4, 25, 16, 3.0, 5);
        for row in probe.x.axis_iter(Axis(0)) {
            let mut votes = [0usize; 4];
            for t in &f.trees {
                // independent walk over the node list
                let mut at = 0;
                let leaf = loop {
                    match &t.nodes[at] {
                        Node::Split { feature, threshold, left, right } => {
                            at = if row[*feature] <= *threshold { *left } else { *right };
                        }
                        Node::Leaf { counts } => break counts,
                    }
                };
                let mut best = 0;
                for c in 1..4 {
                    if leaf[c] > leaf[best] {
                        best = c;
                    }
                }
                votes[best] += 1;
            }
            let mut expect = 0;
            for c in 1..4 {
                if votes[c] > votes[expect] {
                    expect = c;
                }
            }
            assert_eq!(f.predict(row.as_slice().unwrap()).unwrap(), expect);
            assert_eq!(f.predict_row(row), expect);
        }
    }

    #[test]
    fn deterministic_training() {
        let ds = blobs(3, 20, 8, 2.0, 6);
        let p = ForestParams {
            n_trees: 5,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(forest_train(&ds, &p).unwrap(), forest_train(&ds, &p).unwrap());
    }
}
