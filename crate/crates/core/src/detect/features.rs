use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nr_seq::DMRS_LEN;
use crate::ssb_phy::{dmrs_positions, RxSymbols};

/// Real features per vector: real and imaginary part of each DMRS symbol.
pub const FEATURE_LEN: usize = 2 * DMRS_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Sim,
    Capture,
}

/// Received DMRS symbols as 288 interleaved reals `[re0, im0, re1, im1, ..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmrsFeatureVector {
    pub x: Vec<f64>,
    pub label: Option<usize>,
    pub snr_db: Option<f64>,
    pub source: FeatureSource,
}

impl DmrsFeatureVector {
    pub fn from_symbols(symbols: &[Complex64], source: FeatureSource) -> Self {
        Self {
            x: symbols.iter().flat_map(|z| [z.re, z.im]).collect(),
            label: None,
            snr_db: None,
            source,
        }
    }

    pub fn symbols(&self) -> Vec<Complex64> {
        self.x
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect()
    }

    /// Mean power per feature, `sum x_i^2 / 288`.
    pub fn mean_power(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>() / self.x.len() as f64
    }

    /// Rounds every feature to single precision, the storage precision of
    /// dataset files.
    pub fn quantized(mut self) -> Self {
        self.x.iter_mut().for_each(|v| *v = *v as f32 as f64);
        self
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }
}

/// Gathers the DMRS symbols of SSB symbols 1..3 in sequence order:
/// 60 from the first row, 24 from the second, 60 from the third.
pub fn dmrs_extract(rf: &RxSymbols, v: usize) -> DmrsFeatureVector {
    let symbols: Vec<Complex64> = dmrs_positions(v)
        .iter()
        .map(|&(l, k)| rf[l - 1][k])
        .collect();
    DmrsFeatureVector::from_symbols(&symbols, FeatureSource::Sim)
}

/// Running ensemble mean of per-vector power, used to scale all vectors to
/// unit mean power.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    pub np_factor: f64,
    pub count: u64,
}

impl NormalizationState {
    pub fn update(&mut self, vec: &DmrsFeatureVector) {
        self.count += 1;
        self.np_factor += (vec.mean_power() - self.np_factor) / self.count as f64;
    }

    pub fn fit<'a>(vectors: impl IntoIterator<Item = &'a DmrsFeatureVector>) -> Self {
        let mut s = Self::default();
        vectors.into_iter().for_each(|v| s.update(v));
        s
    }

    pub fn apply(&self, vec: &DmrsFeatureVector) -> Result<DmrsFeatureVector> {
        if self.count == 0 || !(self.np_factor > 0.0) {
            return Err(Error::EmptyNormalization);
        }
        Ok(vec.scaled(1.0 / self.np_factor.sqrt()))
    }
}

/// Optionally folds `vec` into `state`, then divides it by `sqrt(N_p)`.
pub fn normalize(
    vec: &DmrsFeatureVector,
    state: &mut NormalizationState,
    update: bool,
) -> Result<DmrsFeatureVector> {
    if update {
        state.update(vec);
    }
    state.apply(vec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nr_seq::pci_compose;
    use crate::ssb_phy::{grid_assemble, PbchPayload, SsbGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows(g: &SsbGrid) -> RxSymbols {
        std::array::from_fn(|i| g.re[i + 1].clone())
    }

    #[test]
    fn marker_injection_fixes_offsets() {
        let cell = pci_compose(0, 0).unwrap();
        assert_eq!(cell.v(), 0);
        let mut g = grid_assemble(0, cell, 8, &PbchPayload::from_info(&[0; 168]).unwrap()).unwrap();
        // overwrite DMRS REs with markers 1..=144, walking row 1, row 2, row 3
        let mut marker = 1.0;
        for l in 1..4 {
            for k in 0..240 {
                let dmrs = k % 4 == 0 && (l != 2 || k < 48 || k >= 192);
                if dmrs {
                    g.re[l][k] = Complex64::new(marker, -marker);
                    marker += 1.0;
                }
            }
        }
        assert_eq!(marker, 145.0);
        let f = dmrs_extract(&rows(&g), 0);
        assert_eq!(f.x.len(), FEATURE_LEN);
        for (m, z) in f.symbols().iter().enumerate() {
            assert_eq!(*z, Complex64::new(m as f64 + 1.0, -(m as f64) - 1.0));
        }
        // offsets 0, 60, 84 hold the first marker of rows 1, 2, 3
        let s = f.symbols();
        assert_eq!((s[0].re, s[60].re, s[84].re), (1.0, 61.0, 85.0));
    }

    #[test]
    fn extraction_follows_v() {
        let p = PbchPayload::from_info(&[1; 168]).unwrap();
        let c0 = pci_compose(0, 0).unwrap();
        let c1 = pci_compose(0, 1).unwrap();
        assert_eq!((c0.v(), c1.v()), (0, 1));
        let mut g0 = grid_assemble(0, c0, 8, &p).unwrap();
        let mut g1 = grid_assemble(0, c1, 8, &p).unwrap();
        // same DMRS values placed at the two shifts
        let vals: Vec<Complex64> = (0..144).map(|m| Complex64::new(m as f64, 1.0)).collect();
        for (g, v) in [(&mut g0, 0), (&mut g1, 1)] {
            for (&(l, k), z) in crate::ssb_phy::dmrs_positions(v).iter().zip(&vals) {
                g.re[l][k] = *z;
            }
        }
        assert_eq!(dmrs_extract(&rows(&g0), 0).x, dmrs_extract(&rows(&g1), 1).x);
    }

    #[test]
    fn zero_rows_zero_features() {
        let z = vec![Complex64::new(0.0, 0.0); 240];
        let f = dmrs_extract(&[z.clone(), z.clone(), z], 2);
        assert!(f.x.iter().all(|v| *v == 0.0));
    }

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> DmrsFeatureVector {
        DmrsFeatureVector {
            x: (0..FEATURE_LEN).map(|_| rng.gen_range(-1.0..1.0) * scale).collect(),
            label: None,
            snr_db: None,
            source: FeatureSource::Sim,
        }
    }

    #[test]
    fn constant_power_dataset() {
        let mut st = NormalizationState::default();
        let v = DmrsFeatureVector {
            x: (0..FEATURE_LEN).map(|i| if i % 3 == 0 { 2.0 } else { -2.0 }).collect(),
            label: None,
            snr_db: None,
            source: FeatureSource::Sim,
        };
        let mut out = Vec::new();
        for _ in 0..10 {
            out.push(normalize(&v, &mut st, true).unwrap());
        }
        assert_eq!(st.np_factor, 4.0);
        for o in out {
            assert!((o.mean_power() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_cancels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<_> = (0..50).map(|_| random_vec(&mut rng, 1.0)).collect();
        let scaled: Vec<_> = data.iter().map(|v| v.scaled(10.0)).collect();
        let a = NormalizationState::fit(&data);
        let b = NormalizationState::fit(&scaled);
        assert!((b.np_factor / a.np_factor - 100.0).abs() < 1e-9);
        for (x, y) in data.iter().zip(&scaled) {
            let (nx, ny) = (a.apply(x).unwrap(), b.apply(y).unwrap());
            for (p, q) in nx.x.iter().zip(&ny.x) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn streaming_equals_batch_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<_> = (0..1000)
            .map(|i| random_vec(&mut rng, 1.0 + (i % 7) as f64))
            .collect();
        let batch = data.iter().map(|v| v.x.iter().map(|x| x * x).sum::<f64>() / 288.0).sum::<f64>() / 1000.0;
        let mut st = NormalizationState::default();
        for v in &data {
            normalize(v, &mut st, true).unwrap();
        }
        assert!((st.np_factor - batch).abs() < 1e-12 * batch);
        assert_eq!(st.count, 1000);
    }

    #[test]
    fn empty_state_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = random_vec(&mut rng, 1.0);
        let mut st = NormalizationState::default();
        assert_eq!(normalize(&v, &mut st, false), Err(Error::EmptyNormalization));
    }

    #[test]
    fn quantized_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = random_vec(&mut rng, 3.0).quantized();
        assert_eq!(v.clone().quantized(), v);
    }
}
