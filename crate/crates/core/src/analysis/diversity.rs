//! Numerical diversity order: the smallest total rank of `Ω(e)` over error
//! vectors and hardware realizations.

use rand::Rng;

use super::codeword::CodewordOperator;
use crate::constellation::Constellation;
use crate::error::Result;
use crate::link::{random_labels, ImpairedLink};
use crate::math::{CMat, CVec, C64};

/// Relative eigenvalue threshold for the numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiversityReport {
    /// Smallest `rank Ω = Σ_j rank Ω_j` seen.
    pub min_rank: usize,
    /// Smallest `rank Ω_j` of each receive antenna.
    pub per_rx_min_rank: Vec<usize>,
    /// Error vectors evaluated.
    pub evaluated: usize,
}

impl DiversityReport {
    pub fn diversity_order(&self) -> usize {
        self.min_rank
    }
}

fn numerical_rank(omega: &CMat) -> usize {
    let herm = (omega + omega.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigenvalues();
    let top = eig.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&v| v > RANK_TOLERANCE * top).count()
}

/// Ranks `Ω(e)` for every single-symbol error at minimum distance plus
/// `random_vectors` differences of random codeword pairs, on each link
/// produced by `make_link`.
pub fn diversity_probe<R, F>(
    mut make_link: F,
    constellation: &Constellation,
    realizations: usize,
    random_vectors: usize,
    rng: &mut R,
) -> Result<DiversityReport>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<ImpairedLink>,
{
    let pts = constellation.points();
    let step = pts
        .iter()
        .skip(1)
        .map(|&p| p - pts[0])
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C64::new(1.0, 0.0));
    let mut report = DiversityReport { min_rank: usize::MAX, per_rx_min_rank: Vec::new(), evaluated: 0 };
    for _ in 0..realizations {
        let link = make_link(rng)?;
        if report.per_rx_min_rank.is_empty() {
            report.per_rx_min_rank = vec![usize::MAX; link.rx];
        }
        let len = link.tx_len();
        let mut vectors: Vec<CVec> = (0..len)
            .map(|i| {
                let mut e = CVec::zeros(len);
                e[i] = step;
                e
            })
            .collect();
        while vectors.len() < len + random_vectors {
            let (_, a) = random_labels(constellation, len, rng);
            let (_, b) = random_labels(constellation, len, rng);
            let e = a - b;
            if e.norm() > 0.0 {
                vectors.push(e);
            }
        }
        for e in &vectors {
            let xi = CodewordOperator::linear(&link, e)?;
            let ranks: Vec<usize> = xi.omega_blocks().iter().map(numerical_rank).collect();
            report.min_rank = report.min_rank.min(ranks.iter().sum());
            for (slot, r) in report.per_rx_min_rank.iter_mut().zip(ranks) {
                *slot = (*slot).min(r);
            }
            report.evaluated += 1;
        }
    }
    Ok(report)
}
