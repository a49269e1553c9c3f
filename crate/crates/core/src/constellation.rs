//! Unit-energy BPSK and square QAM alphabets with a per-axis Gray map.
//!
//! Bit labels are read most significant first. For QAM the first half of a
//! label selects the in-phase level and the second half the quadrature
//! level; each half is a reflected Gray code over the PAM levels ordered
//! from the most positive amplitude down, so an all-zero label maps to the
//! upper-right corner (QPSK `00 → (1 + i)/√2`). BPSK maps `0 → +1`,
//! `1 → −1`.

use crate::error::{check_len, invalid, Result};
use crate::math::C64;
use serde::{Deserialize, Serialize};

/// Constellation families the simulator understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn order(self) -> usize {
        match self {
            Self::Bpsk => 2,
            Self::Qpsk => 4,
            Self::Qam16 => 16,
            Self::Qam64 => 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<C64>,
    /// Amplitude levels on the in-phase axis (descending).
    re_levels: Vec<f64>,
    /// Amplitude levels on the quadrature axis; `[0.0]` for BPSK.
    im_levels: Vec<f64>,
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

fn pam_levels(levels: usize, scale: f64) -> Vec<f64> {
    (0..levels)
        .map(|i| (levels as f64 - 1.0 - 2.0 * i as f64) * scale)
        .collect()
}

impl Constellation {
    /// Builds BPSK (`order = 2`) or square QAM (`order = 4^k`).
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(invalid(format!("constellation order {order} is not a power of two ≥ 2")));
        }
        let bits = order.trailing_zeros() as usize;
        if order == 2 {
            return Ok(Self {
                order,
                bits_per_symbol: 1,
                points: vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
                re_levels: vec![1.0, -1.0],
                im_levels: vec![0.0],
            });
        }
        if bits % 2 != 0 {
            return Err(invalid(format!("order {order} is not a square QAM alphabet")));
        }
        let side = 1usize << (bits / 2);
        // Mean energy of the odd-integer grid is 2(side² − 1)/3.
        let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let levels = pam_levels(side, scale);
        let half = bits / 2;
        let points = (0..order)
            .map(|label| {
                let gi = label >> half;
                let gq = label & (side - 1);
                C64::new(levels[gray_to_binary(gi)], levels[gray_to_binary(gq)])
            })
            .collect();
        Ok(Self {
            order,
            bits_per_symbol: bits,
            points,
            re_levels: levels.clone(),
            im_levels: levels,
        })
    }

    pub fn from_modulation(m: Modulation) -> Self {
        Self::new(m.order()).expect("built-in modulations are valid")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn is_real(&self) -> bool {
        self.order == 2
    }

    /// Points indexed by their bit label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn re_levels(&self) -> &[f64] {
        &self.re_levels
    }

    pub fn im_levels(&self) -> &[f64] {
        &self.im_levels
    }

    pub fn point(&self, label: usize) -> C64 {
        self.points[label]
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    /// Label of the point closest to `z`.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Maps a bit stream (one `u8` per bit) to symbols.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let k = self.bits_per_symbol;
        if bits.len() % k != 0 {
            return Err(invalid(format!(
                "{} bits do not fill whole {k}-bit symbols",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(k)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.points[label]
            })
            .collect())
    }

    /// Nearest-point decisions followed by label expansion.
    pub fn demap_bits(&self, symbols: &[C64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &z in symbols {
            self.push_label_bits(self.nearest(z), &mut out);
        }
        out
    }

    pub fn push_label_bits(&self, label: usize, out: &mut Vec<u8>) {
        for shift in (0..self.bits_per_symbol).rev() {
            out.push(((label >> shift) & 1) as u8);
        }
    }

    /// Bit difference between two labels.
    pub fn label_distance(a: usize, b: usize) -> u32 {
        (a ^ b).count_ones()
    }

    /// Maps a whole frame, checking the expected symbol count.
    pub fn map_frame(&self, bits: &[u8], symbols: usize) -> Result<Vec<C64>> {
        check_len(symbols * self.bits_per_symbol, bits.len())?;
        self.map_bits(bits)
    }
}
