use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nr_seq::{dmrs_sequence, pss_sequence, sss_sequence, CellIdentity, DMRS_LEN};

use super::pbch::{encode_pbch, PbchPayload};

pub const SSB_SYMBOLS: usize = 4;
pub const SSB_SUBCARRIERS: usize = 240;
pub const PSS_SYMBOL: usize = 0;
pub const SSS_SYMBOL: usize = 2;
pub const PBCH_DATA_RES: usize = 432;

const SYNC_FIRST: usize = 56;
const SYNC_LAST: usize = 182;
// PBCH on the SSS symbol sits below 48 and from 192 upward.
const SSS_PBCH_LOW_END: usize = 48;
const SSS_PBCH_HIGH_START: usize = 192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReKind {
    Pss,
    Sss,
    PbchData,
    Dmrs,
    Zero,
}

/// Role of resource element `(symbol, k)` in an SSB with DMRS shift `v`.
pub fn re_kind(symbol: usize, k: usize, v: usize) -> ReKind {
    debug_assert!(symbol < SSB_SYMBOLS && k < SSB_SUBCARRIERS && v < 4);
    let pbch = |k: usize| {
        if k % 4 == v {
            ReKind::Dmrs
        } else {
            ReKind::PbchData
        }
    };
    match symbol {
        0 if (SYNC_FIRST..=SYNC_LAST).contains(&k) => ReKind::Pss,
        0 => ReKind::Zero,
        2 if (SYNC_FIRST..=SYNC_LAST).contains(&k) => ReKind::Sss,
        2 if k < SSS_PBCH_LOW_END || k >= SSS_PBCH_HIGH_START => pbch(k),
        2 => ReKind::Zero,
        _ => pbch(k),
    }
}

/// `(symbol, subcarrier)` of each DMRS symbol in sequence order: the 60 of
/// symbol 1, the 24 of symbol 2 (low block then high block), the 60 of
/// symbol 3.
pub fn dmrs_positions(v: usize) -> Vec<(usize, usize)> {
    positions_of(ReKind::Dmrs, v)
}

pub(crate) fn pbch_data_positions(v: usize) -> Vec<(usize, usize)> {
    positions_of(ReKind::PbchData, v)
}

fn positions_of(kind: ReKind, v: usize) -> Vec<(usize, usize)> {
    (1..SSB_SYMBOLS)
        .flat_map(|l| (0..SSB_SUBCARRIERS).map(move |k| (l, k)))
        .filter(|&(l, k)| re_kind(l, k, v) == kind)
        .collect()
}

/// One SSB as a 4 x 240 grid of resource elements, symbol-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsbGrid {
    pub re: Vec<Vec<Complex64>>,
    pub issb: usize,
    pub cell: CellIdentity,
}

impl SsbGrid {
    pub fn empty(issb: usize, cell: CellIdentity) -> Self {
        Self {
            re: vec![vec![Complex64::new(0.0, 0.0); SSB_SUBCARRIERS]; SSB_SYMBOLS],
            issb,
            cell,
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.re
            .iter()
            .flatten()
            .filter(|z| z.re != 0.0 || z.im != 0.0)
            .count()
    }
}

/// Places PSS, SSS, PBCH data and DMRS for one SSB.
pub fn grid_assemble(
    issb: usize,
    cell: CellIdentity,
    lmax: usize,
    payload: &PbchPayload,
) -> Result<SsbGrid> {
    if payload.bits.len() != super::PBCH_BLOCK_BITS {
        return Err(Error::FeatureLength {
            expected: super::PBCH_BLOCK_BITS,
            got: payload.bits.len(),
        });
    }
    let mut grid = SsbGrid::empty(issb, cell);
    let pss = pss_sequence(cell.nid2())?;
    let sss = sss_sequence(cell.nid1(), cell.nid2())?;
    for (n, k) in (SYNC_FIRST..=SYNC_LAST).enumerate() {
        grid.re[PSS_SYMBOL][k] = Complex64::new(pss[n], 0.0);
        grid.re[SSS_SYMBOL][k] = Complex64::new(sss[n], 0.0);
    }
    let v = cell.v();
    let dmrs = dmrs_sequence(issb, cell, lmax)?;
    let positions = dmrs_positions(v);
    debug_assert_eq!(positions.len(), DMRS_LEN);
    for (&(l, k), s) in positions.iter().zip(&dmrs.symbols) {
        grid.re[l][k] = *s;
    }
    let data = encode_pbch(&payload.bits);
    for (&(l, k), s) in pbch_data_positions(v).iter().zip(&data) {
        grid.re[l][k] = *s;
    }
    Ok(grid)
}
