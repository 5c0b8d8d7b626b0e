use crate::error::Result;
use crate::nr_seq::{dmrs_bank, CellIdentity, DmrsSequence};

use super::features::DmrsFeatureVector;

/// Correlation scores `Re{sum_k r[k] conj(s_i[k])}` against each candidate
/// and the winning index (ties to the lowest).
pub fn correlate_bank(vec: &DmrsFeatureVector, bank: &[DmrsSequence]) -> (usize, Vec<f64>) {
    let scores: Vec<f64> = bank
        .iter()
        .map(|s| {
            vec.x
                .chunks_exact(2)
                .zip(&s.symbols)
                .map(|(r, s)| r[0] * s.re + r[1] * s.im)
                .sum()
        })
        .collect();
    (super::argmax(&scores), scores)
}

/// Blind SSB index detection by correlating the raw received DMRS against
/// the `lmax` candidate sequences of `cell`.
pub fn correlate_detect(
    vec: &DmrsFeatureVector,
    cell: CellIdentity,
    lmax: usize,
) -> Result<(usize, Vec<f64>)> {
    Ok(correlate_bank(vec, &dmrs_bank(cell, lmax)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chansim::complex_gaussian;
    use crate::detect::FeatureSource;
    use crate::nr_seq::pci_compose;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimum squared Euclidean distance, evaluated term by term.
    fn min_distance(vec: &DmrsFeatureVector, bank: &[DmrsSequence]) -> usize {
        let r = vec.symbols();
        let d: Vec<f64> = bank
            .iter()
            .map(|s| r.iter().zip(&s.symbols).map(|(a, b)| (a - b).norm_sqr()).sum())
            .collect();
        let mut best = 0;
        for i in 1..d.len() {
            if d[i] < d[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn self_correlation_scores_144() {
        let cell = pci_compose(12, 0).unwrap();
        let bank = dmrs_bank(cell, 8).unwrap();
        let v = DmrsFeatureVector::from_symbols(&bank[3].symbols, FeatureSource::Sim);
        let (i, scores) = correlate_detect(&v, cell, 8).unwrap();
        assert_eq!(i, 3);
        assert!((scores[3] - 144.0).abs() < 1e-9);
    }

    #[test]
    fn agrees_with_euclidean_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for t in 0..1000 {
            let cell = crate::nr_seq::CellIdentity::from_nid_cell(rng.gen_range(0..1008)).unwrap();
            let bank = dmrs_bank(cell, 8).unwrap();
            let sigma = rng.gen_range(0.3..3.0);
            let noisy: Vec<Complex64> = bank[t % 8]
                .symbols
                .iter()
                .map(|s| s + complex_gaussian(&mut rng) * sigma)
                .collect();
            let v = DmrsFeatureVector::from_symbols(&noisy, FeatureSource::Sim);
            assert_eq!(correlate_bank(&v, &bank).0, min_distance(&v, &bank));
        }
    }

    proptest! {
        #[test]
        fn positive_scaling_preserves_decision(seed in any::<u64>(), alpha in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cell = pci_compose(rng.gen_range(0..336), rng.gen_range(0..3)).unwrap();
            let bank = dmrs_bank(cell, 8).unwrap();
            let noisy: Vec<Complex64> = bank[rng.gen_range(0..8)]
                .symbols
                .iter()
                .map(|s| s + complex_gaussian(&mut rng) * 1.5)
                .collect();
            let v = DmrsFeatureVector::from_symbols(&noisy, FeatureSource::Sim);
            let (a, sa) = correlate_bank(&v, &bank);
            let (b, sb) = correlate_bank(&v.scaled(alpha), &bank);
            prop_assert_eq!(a, b);
            let order = |s: &[f64]| {
                let mut idx: Vec<usize> = (0..s.len()).collect();
                idx.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
                idx
            };
            prop_assert_eq!(order(&sa), order(&sb));
        }
    }
}
