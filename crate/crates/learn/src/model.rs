use std::fmt;
use std::path::Path;
use std::str::FromStr;

use beamsearch_core::detect::{DmrsFeatureVector, NormalizationState};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{forest_train, ForestModel, ForestParams};
use crate::logreg::{logreg_train, LogRegModel, LogRegParams};
use crate::mlp::{mlp_train, MlpModel, MlpParams};
use crate::svc::{svc_train, SvcModel, SvcParams};
use crate::vote::VotingModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Logreg,
    Svc,
    Forest,
    Vote,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [Self::Mlp, Self::Logreg, Self::Svc, Self::Forest, Self::Vote];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mlp => "mlp",
            Self::Logreg => "logreg",
            Self::Svc => "svc",
            Self::Forest => "forest",
            Self::Vote => "vote",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Param(format!("unknown model kind '{s}'")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub mlp: MlpParams,
    pub logreg: LogRegParams,
    pub svc: SvcParams,
    pub forest: ForestParams,
}

impl TrainParams {
    /// Same hyperparameters with every model seed derived from `seed`.
    pub fn seeded(mut self, seed: u64) -> Self {
        self.mlp.seed = seed;
        self.forest.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Model {
    Mlp(MlpModel),
    Logreg(LogRegModel),
    Svc(SvcModel),
    Forest(ForestModel),
    Vote(Box<VotingModel>),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Mlp(_) => ModelKind::Mlp,
            Model::Logreg(_) => ModelKind::Logreg,
            Model::Svc(_) => ModelKind::Svc,
            Model::Forest(_) => ModelKind::Forest,
            Model::Vote(_) => ModelKind::Vote,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Mlp(m) => m,
            Model::Logreg(m) => m,
            Model::Svc(m) => m,
            Model::Forest(m) => m,
            Model::Vote(m) => m.as_ref(),
        }
    }
}

impl Classifier for Model {
    fn lmax(&self) -> usize {
        self.inner().lmax()
    }

    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn decision_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.inner().decision_batch(x)
    }

    fn predict_batch(&self, x: ArrayView2<f64>) -> Vec<usize> {
        self.inner().predict_batch(x)
    }
}

pub fn train(kind: ModelKind, ds: &Dataset, params: &TrainParams) -> Result<Model> {
    Ok(match kind {
        ModelKind::Mlp => Model::Mlp(mlp_train(ds, &params.mlp)?),
        ModelKind::Logreg => Model::Logreg(logreg_train(ds, &params.logreg)?),
        ModelKind::Svc => Model::Svc(svc_train(ds, &params.svc)?),
        ModelKind::Forest => Model::Forest(forest_train(ds, &params.forest)?),
        ModelKind::Vote => Model::Vote(Box::new(VotingModel {
            mlp: mlp_train(ds, &params.mlp)?,
            logreg: logreg_train(ds, &params.logreg)?,
            svc: svc_train(ds, &params.svc)?,
            forest: forest_train(ds, &params.forest)?,
        })),
    })
}

/// A trained model together with the feature normalization it was fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    /// `None` when the model consumes raw features.
    pub normalization: Option<NormalizationState>,
    pub model: Model,
}

impl Detector {
    /// Fits the normalization (if requested) on `vectors`, then the model on
    /// the normalized features.
    pub fn fit(kind: ModelKind, vectors: &[DmrsFeatureVector], lmax: usize, normalize: bool, params: &TrainParams) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let normalization = normalize.then(|| NormalizationState::fit(vectors));
        let prepared: Vec<DmrsFeatureVector> = match &normalization {
            Some(n) => vectors.iter().map(|v| n.apply(v)).collect::<std::result::Result<_, _>>()?,
            None => vectors.to_vec(),
        };
        let ds = Dataset::from_vectors(&prepared, lmax)?;
        Ok(Self {
            normalization,
            model: train(kind, &ds, params)?,
        })
    }

    /// Applies the stored normalization to the rows of `x` in place.
    pub fn prepare(&self, x: &mut Array2<f64>) {
        if let Some(n) = &self.normalization {
            x.mapv_inplace(|v| v / n.np_factor.sqrt());
        }
    }

    pub fn predict(&self, v: &DmrsFeatureVector) -> Result<usize> {
        match &self.normalization {
            Some(n) => self.model.predict(&n.apply(v)?.x),
            None => self.model.predict(&v.x),
        }
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Vec<usize> {
        let mut x = x.clone();
        self.prepare(&mut x);
        self.model.predict_batch(x.view())
    }
}

pub const MODEL_FORMAT: &str = "beamsearch-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the dataset file, hex.
    pub dataset_sha256: Option<String>,
    pub n_train: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

/// On-disk JSON container for a trained detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub detector: Detector,
}

impl ModelFile {
    pub fn new(detector: Detector, provenance: Provenance) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            provenance,
            detector,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s)?;
        if f.format != MODEL_FORMAT {
            return Err(Error::Format(format!("format '{}' is not '{MODEL_FORMAT}'", f.format)));
        }
        if f.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported version {}", f.version)));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
