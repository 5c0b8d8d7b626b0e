//! Pseudo-random and synchronization sequences for the SS/PBCH block.
//!
//! Covers the length-31 gold sequence `c[n]`, the PBCH DMRS symbols seeded
//! from the SSB index and cell id, and the PSS/SSS m-sequence constructions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{check_range, Error, Result};

/// Burn-in length of the gold sequence generator.
pub const GOLD_NC: usize = 1600;
pub const PSS_LEN: usize = 127;
pub const SSS_LEN: usize = 127;
/// Number of PBCH DMRS symbols in one SSB.
pub const DMRS_LEN: usize = 144;

pub const MAX_NID1: u16 = 335;
pub const MAX_NID2: u8 = 2;
pub const MAX_NID_CELL: u16 = 1007;

/// Physical cell identity split into its PSS and SSS parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellIdentity {
    nid1: u16,
    nid2: u8,
}

impl CellIdentity {
    pub fn nid1(&self) -> u16 {
        self.nid1
    }

    pub fn nid2(&self) -> u8 {
        self.nid2
    }

    pub fn nid_cell(&self) -> u16 {
        self.nid2 as u16 + 3 * self.nid1
    }

    /// DMRS subcarrier shift.
    pub fn v(&self) -> usize {
        (self.nid_cell() % 4) as usize
    }

    pub fn from_nid_cell(nid_cell: u16) -> Result<Self> {
        check_range("nid_cell", nid_cell as i64, 0, MAX_NID_CELL as i64)?;
        Ok(Self {
            nid1: nid_cell / 3,
            nid2: (nid_cell % 3) as u8,
        })
    }
}

/// Builds a cell identity from `(N_ID^1, N_ID^2)`.
pub fn pci_compose(nid1: u16, nid2: u8) -> Result<CellIdentity> {
    check_range("nid1", nid1 as i64, 0, MAX_NID1 as i64)?;
    check_range("nid2", nid2 as i64, 0, MAX_NID2 as i64)?;
    Ok(CellIdentity { nid1, nid2 })
}

/// Gold sequence generator with both 31-bit registers packed into words.
///
/// Bit `i` of each register holds `x(n + i)` for the current position `n`.
#[derive(Debug, Clone)]
pub struct GoldSequence {
    x1: u32,
    x2: u32,
}

impl GoldSequence {
    pub fn new(c_init: u32) -> Self {
        let mut g = Self {
            x1: 1,
            x2: c_init & 0x7fff_ffff,
        };
        for _ in 0..GOLD_NC {
            g.advance();
        }
        g
    }

    #[inline]
    fn advance(&mut self) {
        let f1 = (self.x1 ^ (self.x1 >> 3)) & 1;
        let f2 = (self.x2 ^ (self.x2 >> 1) ^ (self.x2 >> 2) ^ (self.x2 >> 3)) & 1;
        self.x1 = (self.x1 >> 1) | (f1 << 30);
        self.x2 = (self.x2 >> 1) | (f2 << 30);
    }
}

impl Iterator for GoldSequence {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let bit = ((self.x1 ^ self.x2) & 1) as u8;
        self.advance();
        Some(bit)
    }
}

/// First `length` bits of the gold sequence seeded with `c_init`.
pub fn gold_c(c_init: u32, length: usize) -> Vec<u8> {
    GoldSequence::new(c_init).take(length).collect()
}

/// DMRS scrambling seed for SSB index `issb` in cell `nid_cell`.
///
/// For `lmax != 8` only the low three bits of `issb` enter the seed.
pub fn dmrs_cinit(issb: usize, nid_cell: u16, lmax: usize) -> Result<u32> {
    if lmax == 0 {
        return Err(Error::OutOfRange {
            name: "lmax",
            value: 0,
            min: 1,
            max: i64::MAX,
        });
    }
    check_range("issb", issb as i64, 0, lmax as i64 - 1)?;
    check_range("nid_cell", nid_cell as i64, 0, MAX_NID_CELL as i64)?;
    let i = (issb & 0x7) as u32 + 1;
    let n = nid_cell as u32;
    Ok((1 << 11) * i * (n / 4 + 1) + (1 << 6) * i + n % 4)
}

/// The 144 PBCH DMRS symbols of one SSB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmrsSequence {
    pub symbols: Vec<Complex64>,
    pub issb: usize,
    pub cell: CellIdentity,
}

/// Maps a bit pair onto the unit-power QPSK alphabet.
#[inline]
pub fn qpsk(b0: u8, b1: u8) -> Complex64 {
    Complex64::new(
        FRAC_1_SQRT_2 * (1.0 - 2.0 * b0 as f64),
        FRAC_1_SQRT_2 * (1.0 - 2.0 * b1 as f64),
    )
}

pub fn dmrs_sequence(issb: usize, cell: CellIdentity, lmax: usize) -> Result<DmrsSequence> {
    let c = gold_c(dmrs_cinit(issb, cell.nid_cell(), lmax)?, 2 * DMRS_LEN);
    let symbols = c.chunks_exact(2).map(|b| qpsk(b[0], b[1])).collect();
    Ok(DmrsSequence {
        symbols,
        issb,
        cell,
    })
}

/// The `lmax` candidate DMRS sequences of a cell, indexed by SSB index.
pub fn dmrs_bank(cell: CellIdentity, lmax: usize) -> Result<Vec<DmrsSequence>> {
    (0..lmax).map(|i| dmrs_sequence(i, cell, lmax)).collect()
}

/// Order-7 m-sequence `x(i+7) = (x(i+a) + x(i)) mod 2` with `x(0..7)` given.
fn m_sequence(tap: usize, init: [u8; 7]) -> [u8; 127] {
    let mut x = [0u8; 127];
    x[..7].copy_from_slice(&init);
    for i in 0..120 {
        x[i + 7] = (x[i + tap] + x[i]) % 2;
    }
    x
}

// [x(0), .., x(6)] for the register states written as [x(6) .. x(0)] = 1110110
// and 0000001.
const PSS_INIT: [u8; 7] = [0, 1, 1, 0, 1, 1, 1];
const SSS_INIT: [u8; 7] = [1, 0, 0, 0, 0, 0, 0];

pub fn pss_sequence(nid2: u8) -> Result<Vec<f64>> {
    check_range("nid2", nid2 as i64, 0, MAX_NID2 as i64)?;
    let x = m_sequence(4, PSS_INIT);
    let shift = 43 * nid2 as usize;
    Ok((0..PSS_LEN)
        .map(|n| 1.0 - 2.0 * x[(n + shift) % 127] as f64)
        .collect())
}

pub fn sss_sequence(nid1: u16, nid2: u8) -> Result<Vec<f64>> {
    check_range("nid1", nid1 as i64, 0, MAX_NID1 as i64)?;
    check_range("nid2", nid2 as i64, 0, MAX_NID2 as i64)?;
    let x0 = m_sequence(4, SSS_INIT);
    let x1 = m_sequence(1, SSS_INIT);
    let m0 = 15 * (nid1 as usize / 112) + 5 * nid2 as usize;
    let m1 = nid1 as usize % 112;
    Ok((0..SSS_LEN)
        .map(|n| {
            (1.0 - 2.0 * x0[(n + m0) % 127] as f64) * (1.0 - 2.0 * x1[(n + m1) % 127] as f64)
        })
        .collect())
}
