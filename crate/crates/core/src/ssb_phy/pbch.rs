//! PBCH stand-in payload: 168 information bits protected by CRC-24, repeated
//! over the 432 PBCH data resource elements.
//!
//! The 192-bit block (information + CRC) is cycled to 432 coded bits, those
//! form 216 QPSK symbols, and each symbol is sent on two consecutive data REs.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nr_seq::{dmrs_sequence, qpsk, CellIdentity, DmrsSequence, DMRS_LEN};

use super::grid::{dmrs_positions, pbch_data_positions, PBCH_DATA_RES};
use super::ofdm::RxSymbols;

pub const PAYLOAD_BITS: usize = 168;
pub const CRC_BITS: usize = 24;
pub const PBCH_BLOCK_BITS: usize = PAYLOAD_BITS + CRC_BITS;
const CODED_BITS: usize = PBCH_DATA_RES;
const CRC24A_POLY: u32 = 0x86_4cfb;
const MIN_CHANNEL_MAGNITUDE: f64 = 1e-30;

/// CRC-24 (generator 0x1864CFB) of a bit string, MSB first.
pub fn crc24(bits: &[u8]) -> u32 {
    let mut crc = 0u32;
    for &b in bits {
        let fb = ((crc >> 23) & 1) ^ (b as u32 & 1);
        crc = (crc << 1) & 0xff_ffff;
        if fb == 1 {
            crc ^= CRC24A_POLY;
        }
    }
    crc
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PbchPayload {
    /// Information bits followed by the CRC.
    pub bits: Vec<u8>,
    pub crc_ok: bool,
}

impl PbchPayload {
    pub fn from_info(info: &[u8]) -> Result<Self> {
        if info.len() != PAYLOAD_BITS {
            return Err(Error::FeatureLength {
                expected: PAYLOAD_BITS,
                got: info.len(),
            });
        }
        let mut bits: Vec<u8> = info.iter().map(|b| b & 1).collect();
        let crc = crc24(&bits);
        bits.extend((0..CRC_BITS).rev().map(|i| ((crc >> i) & 1) as u8));
        Ok(Self { bits, crc_ok: true })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let info: Vec<u8> = (0..PAYLOAD_BITS).map(|_| rng.gen::<bool>() as u8).collect();
        Self::from_info(&info).expect("fixed length")
    }

    pub fn info(&self) -> &[u8] {
        &self.bits[..PAYLOAD_BITS.min(self.bits.len())]
    }

    fn failed() -> Self {
        Self {
            bits: vec![0; PBCH_BLOCK_BITS],
            crc_ok: false,
        }
    }
}

/// The 432 PBCH data symbols in data-RE order.
pub(crate) fn encode_pbch(block: &[u8]) -> Vec<Complex64> {
    let coded: Vec<u8> = (0..CODED_BITS).map(|i| block[i % block.len()]).collect();
    coded
        .chunks_exact(2)
        .flat_map(|b| {
            let s = qpsk(b[0], b[1]);
            [s, s]
        })
        .collect()
}

/// Zero-forcing estimate `conj(X_p) * Y_p` at every DMRS position.
pub fn channel_estimate(rx_dmrs: &[Complex64], reference: &DmrsSequence) -> Result<Vec<Complex64>> {
    if rx_dmrs.len() != reference.symbols.len() {
        return Err(Error::FeatureLength {
            expected: reference.symbols.len(),
            got: rx_dmrs.len(),
        });
    }
    Ok(rx_dmrs
        .iter()
        .zip(&reference.symbols)
        .map(|(y, x)| x.conj() * y)
        .collect())
}

/// One-tap equalization `y * conj(h) / |h|^2`.
pub fn equalize(yd: Complex64, h: Complex64) -> Result<Complex64> {
    let mag = h.norm();
    if !(mag >= MIN_CHANNEL_MAGNITUDE) {
        return Err(Error::Equalization(mag));
    }
    Ok(yd * h.conj() / h.norm_sqr())
}

/// Index into the DMRS list of the nearest pilot in the same symbol for each
/// PBCH data RE (ties go to the lower subcarrier).
fn nearest_pilot(v: usize) -> Vec<usize> {
    let pilots = dmrs_positions(v);
    pbch_data_positions(v)
        .iter()
        .map(|&(l, k)| {
            let mut best = usize::MAX;
            let mut best_d = usize::MAX;
            for (i, &(pl, pk)) in pilots.iter().enumerate() {
                if pl == l && pk.abs_diff(k) < best_d {
                    best_d = pk.abs_diff(k);
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Recovers the PBCH block under the DMRS hypothesis `issb`.
///
/// Equalized symbols are combined across repetitions with channel-power
/// weights before the hard decision; `crc_ok` reports the CRC check.
pub fn pbch_recover(rf: &RxSymbols, issb: usize, cell: CellIdentity, lmax: usize) -> PbchPayload {
    let Ok(reference) = dmrs_sequence(issb, cell, lmax) else {
        return PbchPayload::failed();
    };
    let v = cell.v();
    let rx_dmrs: Vec<Complex64> = dmrs_positions(v)
        .iter()
        .map(|&(l, k)| rf[l - 1][k])
        .collect();
    let h = match channel_estimate(&rx_dmrs, &reference) {
        Ok(h) => h,
        Err(_) => return PbchPayload::failed(),
    };
    debug_assert_eq!(h.len(), DMRS_LEN);
    let mut soft = vec![0.0f64; PBCH_BLOCK_BITS];
    for (re, (&(l, k), &pilot)) in pbch_data_positions(v)
        .iter()
        .zip(&nearest_pilot(v))
        .enumerate()
    {
        let hk = h[pilot];
        let Ok(z) = equalize(rf[l - 1][k], hk) else {
            return PbchPayload::failed();
        };
        let z = z * hk.norm_sqr();
        let sym = re / 2;
        soft[(2 * sym) % PBCH_BLOCK_BITS] += z.re;
        soft[(2 * sym + 1) % PBCH_BLOCK_BITS] += z.im;
    }
    let bits: Vec<u8> = soft.iter().map(|&s| (s < 0.0) as u8).collect();
    let crc_ok = crc24(&bits) == 0;
    PbchPayload { bits, crc_ok }
}
