use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::classifier::{plurality, Classifier};
use crate::forest::ForestModel;
use crate::logreg::LogRegModel;
use crate::mlp::MlpModel;
use crate::svc::SvcModel;

/// Hard majority vote over the four member classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingModel {
    pub mlp: MlpModel,
    pub logreg: LogRegModel,
    pub svc: SvcModel,
    pub forest: ForestModel,
}

impl VotingModel {
    pub fn member_predictions(&self, x: ArrayView2<f64>) -> [Vec<usize>; 4] {
        [
            self.mlp.predict_batch(x),
            self.logreg.predict_batch(x),
            self.svc.predict_batch(x),
            self.forest.predict_batch(x),
        ]
    }
}

/// Majority over member predictions, ties to the lowest class.
pub fn vote(predictions: &[usize], lmax: usize) -> usize {
    plurality(predictions.iter().copied(), lmax)
}

impl Classifier for VotingModel {
    fn lmax(&self) -> usize {
        self.mlp.lmax()
    }

    fn n_features(&self) -> usize {
        self.mlp.n_features()
    }

    /// Member vote counts per class.
    fn decision_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let members = self.member_predictions(x);
        let mut out = Array2::zeros((x.nrows(), self.lmax()));
        for m in &members {
            for (i, &p) in m.iter().enumerate() {
                out[[i, p]] += 1.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(vote(&[4, 4, 4, 4], 8), 4);
        assert_eq!(vote(&[2, 2, 5, 7], 8), 2);
        assert_eq!(vote(&[1, 1, 2, 2], 8), 1);
        assert_eq!(vote(&[7, 6, 5, 4], 8), 4);
    }
}
