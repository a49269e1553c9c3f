//! Imperfect channel knowledge: Gaussian estimation errors on path gains
//! or on the banded support of the effective channel.

use crate::channel::{band_support, ChannelRealization};
use crate::error::{invalid, Result};
use crate::link::ImpairedLink;
use crate::math::{complex_normal, CMat};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How the estimation-error term enters the LMMSE weighting matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiErrorForm {
    /// The realized `H̃·H̃ᴴ`.
    #[default]
    Realization,
    /// Its mean, `σ_h²` times the support count of each row.
    Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CsiModel {
    /// Error variance per estimated coefficient; zero is perfect CSI.
    pub sigma_h2: f64,
    #[serde(default)]
    pub error_form: CsiErrorForm,
}

impl CsiModel {
    pub fn perfect() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma_h2: f64) -> Self {
        Self { sigma_h2, error_form: CsiErrorForm::Realization }
    }

    pub fn is_perfect(&self) -> bool {
        self.sigma_h2 == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sigma_h2) {
            return Err(invalid(format!("CSI error variance {} outside [0, 1]", self.sigma_h2)));
        }
        Ok(())
    }
}

/// `ĥ = h + e`, `e ~ CN(0, σ_h²)` on every path gain.
pub fn perturb_gains<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    sigma_h2: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if sigma_h2 == 0.0 {
        return Ok(channel.clone());
    }
    let gains: Vec<_> = channel
        .gains()
        .into_iter()
        .map(|g| g + complex_normal(rng, sigma_h2))
        .collect();
    channel.with_gains(&gains)
}

/// Stacked `NJ × NM` mask of the banded support of every antenna pair.
pub fn effective_support(link: &ImpairedLink) -> Vec<Vec<bool>> {
    let n = link.n();
    let ch = link.channel();
    let mut mask = vec![vec![false; link.tx_len()]; link.rx_len()];
    for j in 0..link.rx {
        for m in 0..link.tx {
            let band = band_support(ch.taps(j, m), &link.params);
            for (r, line) in band.iter().enumerate() {
                for (c, &on) in line.iter().enumerate() {
                    mask[j * n + r][m * n + c] = on;
                }
            }
        }
    }
    mask
}

/// Estimate `Ĥ = H + E` with `E ~ CN(0, σ_h²)` on the masked entries.
/// Returns the estimate and the error `H̃ = H − Ĥ`.
pub fn inject_heff_error<R: Rng + ?Sized>(
    h: &CMat,
    mask: &[Vec<bool>],
    sigma_h2: f64,
    rng: &mut R,
) -> (CMat, CMat) {
    let mut err = CMat::zeros(h.nrows(), h.ncols());
    if sigma_h2 > 0.0 {
        for (r, line) in mask.iter().enumerate() {
            for (c, &on) in line.iter().enumerate() {
                if on {
                    err[(r, c)] = complex_normal(rng, sigma_h2);
                }
            }
        }
    }
    (h + &err, -err)
}

/// `E[H̃H̃ᴴ]`: diagonal, `σ_h²` times the number of masked entries per row.
pub fn expected_error_gram(mask: &[Vec<bool>], sigma_h2: f64) -> CMat {
    let n = mask.len();
    let mut out = CMat::zeros(n, n);
    for (r, line) in mask.iter().enumerate() {
        out[(r, r)].re = sigma_h2 * line.iter().filter(|&&b| b).count() as f64;
    }
    out
}
