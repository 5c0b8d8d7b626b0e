//! Cell search and blind SSB index detection.
//!
//! PSS timing and `N_ID^2`, SSS `N_ID^1`, DMRS feature extraction with power
//! normalization, the correlation detector, and the selector that decides
//! between correlation and a learned detector.

mod correlate;
mod features;
mod search;
mod selector;

pub use correlate::{correlate_bank, correlate_detect};
pub use features::{
    dmrs_extract, normalize, DmrsFeatureVector, FeatureSource, NormalizationState, FEATURE_LEN,
};
pub use search::{
    cell_search, pss_peaks, pss_replicas, pss_search, refine_timing, sss_detect, PssHit, SearchResult, PSS_FLOOR_FACTOR,
};
pub use selector::{Branch, SelectorConfig, SelectorState};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
