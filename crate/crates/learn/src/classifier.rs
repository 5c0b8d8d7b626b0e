use beamsearch_core::detect::argmax;
use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Uniform prediction interface over feature rows.
pub trait Classifier {
    fn lmax(&self) -> usize;

    fn n_features(&self) -> usize;

    /// Per-class scores for every row; larger is more likely.
    fn decision_batch(&self, x: ArrayView2<f64>) -> Array2<f64>;

    /// Argmax of the scores, ties to the lowest class.
    fn predict_batch(&self, x: ArrayView2<f64>) -> Vec<usize> {
        let d = self.decision_batch(x);
        d.axis_iter(Axis(0))
            .map(|r| argmax(r.as_slice().expect("row-major scores")))
            .collect()
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = self.checked_row(x)?;
        Ok(self.decision_batch(row).into_raw_vec())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        let row = self.checked_row(x)?;
        Ok(self.predict_batch(row)[0])
    }

    fn checked_row<'a>(&self, x: &'a [f64]) -> Result<ArrayView2<'a, f64>> {
        if x.len() != self.n_features() {
            return Err(Error::FeatureLength {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(ArrayView2::from_shape((1, x.len()), x).expect("contiguous"))
    }
}

/// Plurality over class votes, ties to the lowest class.
pub fn plurality(votes: impl IntoIterator<Item = usize>, lmax: usize) -> usize {
    let mut counts = vec![0.0; lmax];
    votes.into_iter().for_each(|v| counts[v] += 1.0);
    argmax(&counts)
}
