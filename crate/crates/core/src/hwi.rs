//! Transceiver hardware impairment models.
//!
//! Multiplicative impairments (oscillator phase noise, carrier frequency
//! offset) are diagonal unit-modulus matrices. Additive impairments follow
//! their Bussgang-style statistical surrogates: the DAC uses the additive
//! quantization noise model, the power amplifier a soft-envelope limiter
//! reduced to a linear gain plus Gaussian distortion, IQ imbalance mixes in
//! the conjugate, and the DC offset adds a constant.

use crate::error::{invalid, Result};
use crate::math::{cis_turns, complex_normal, CMat, CVec, C64};
use crate::modem::AfdmParams;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Local-oscillator sharing across the antennas on one side of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoMode {
    /// One oscillator drives every antenna.
    #[default]
    Clo,
    /// One oscillator per antenna.
    Slo,
}

/// Impairment knobs. The default is ideal hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwiConfig {
    pub pn_enabled: bool,
    /// Transmit oscillator constant (s).
    pub psi_t: f64,
    /// Receive oscillator constant (s).
    pub psi_r: f64,
    pub pn_mode: LoMode,
    /// Normalized carrier frequency offset.
    pub cfo: f64,
    /// DAC resolution; `None` is an ideal converter.
    pub dac_bits: Option<u32>,
    /// IQ gain imbalance.
    pub iqi_lambda: f64,
    /// IQ phase imbalance (rad).
    pub iqi_beta: f64,
    /// PA clipping level `20·log10(ν)`; `None` is a linear amplifier.
    pub pa_clip_db: Option<f64>,
    /// Average input power seen by the amplifier.
    pub pa_ps: f64,
    /// DC offset magnitude.
    pub dco: f64,
    /// DC offset phase (rad).
    pub dco_phase: f64,
}

impl Default for HwiConfig {
    fn default() -> Self {
        Self {
            pn_enabled: false,
            psi_t: 0.0,
            psi_r: 0.0,
            pn_mode: LoMode::Clo,
            cfo: 0.0,
            dac_bits: None,
            iqi_lambda: 0.0,
            iqi_beta: 0.0,
            pa_clip_db: None,
            pa_ps: 1.0,
            dco: 0.0,
            dco_phase: 0.0,
        }
    }
}

impl HwiConfig {
    pub fn ideal() -> Self {
        Self::default()
    }

    /// `|d_T| = 0.02`, 5-bit DAC, CFO 0.04, 1° / 0.02 IQ imbalance, 4 dB clipping.
    pub fn scheme1() -> Self {
        Self {
            cfo: 0.04,
            dac_bits: Some(5),
            iqi_lambda: 0.02,
            iqi_beta: 1f64.to_radians(),
            pa_clip_db: Some(4.0),
            dco: 0.02,
            ..Self::default()
        }
    }

    /// As [`HwiConfig::scheme1`] with `|d_T| = 0.04` and gain imbalance 0.05.
    pub fn scheme2() -> Self {
        Self {
            dco: 0.04,
            iqi_lambda: 0.05,
            ..Self::scheme1()
        }
    }

    /// Drops phase noise and CFO, keeping DAC, IQI, PA and DCO.
    pub fn additive_only(&self) -> Self {
        Self {
            pn_enabled: false,
            cfo: 0.0,
            ..self.clone()
        }
    }

    pub fn is_ideal(&self) -> bool {
        !self.pn_enabled
            && self.cfo == 0.0
            && self.dac_bits.is_none()
            && self.iqi_lambda == 0.0
            && self.iqi_beta == 0.0
            && self.pa_clip_db.is_none()
            && self.dco == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.pn_enabled && !(self.psi_t >= 0.0 && self.psi_r >= 0.0) {
            return Err(invalid("oscillator constants must be non-negative"));
        }
        if !self.cfo.is_finite() {
            return Err(invalid("CFO must be finite"));
        }
        if self.dac_bits == Some(0) {
            return Err(invalid("DAC resolution must be at least one bit"));
        }
        if !(0.0..=1.0).contains(&self.iqi_lambda) {
            return Err(invalid(format!("IQ gain imbalance {} outside [0, 1]", self.iqi_lambda)));
        }
        if !(0.0..=PI / 2.0).contains(&self.iqi_beta) {
            return Err(invalid(format!("IQ phase imbalance {} outside [0, π/2]", self.iqi_beta)));
        }
        if !(self.pa_ps > 0.0) {
            return Err(invalid("PA input power must be positive"));
        }
        if let Some(db) = self.pa_clip_db {
            if !db.is_finite() {
                return Err(invalid("PA clipping level must be finite"));
            }
        }
        if !(self.dco >= 0.0) || !self.dco_phase.is_finite() {
            return Err(invalid("DC offset magnitude must be non-negative"));
        }
        Ok(())
    }

    /// Scalar gains and variances implied by the configuration.
    pub fn scalars(&self) -> HwiScalars {
        let eta = self.dac_bits.map_or(0.0, dac_scaling_factor);
        let (rho1, rho2) = iqi_params(self.iqi_lambda, self.iqi_beta);
        let (k_pa, sigma_q2) = match self.pa_clip_db {
            Some(db) => sel_pa_params(10f64.powf(db / 20.0), self.pa_ps),
            None => (1.0, 0.0),
        };
        HwiScalars {
            rho1,
            rho2,
            k_pa,
            sigma_q2,
            eta,
            d_t: C64::from_polar(self.dco, self.dco_phase),
        }
    }
}

/// Scalar parameters of one impairment configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwiScalars {
    pub rho1: C64,
    pub rho2: C64,
    pub k_pa: f64,
    pub sigma_q2: f64,
    pub eta: f64,
    pub d_t: C64,
}

impl HwiScalars {
    /// Overall linear gain `K·√(1−η)` applied to the data path.
    pub fn linear_gain(&self) -> f64 {
        self.k_pa * (1.0 - self.eta).sqrt()
    }
}

/// Scaling factor of the additive quantization noise model: tabulated up
/// to five bits, `√3·π·2^{−2b−1}` beyond.
pub fn dac_scaling_factor(bits: u32) -> f64 {
    match bits {
        0 => 1.0,
        1 => 0.3634,
        2 => 0.1175,
        3 => 0.03454,
        4 => 0.009497,
        5 => 0.002499,
        b => 3f64.sqrt() * PI * 2f64.powi(-2 * b as i32 - 1),
    }
}

/// `√(1−η)·s + n`, `n ~ CN(0, η)`.
pub fn dac_quantize<R: Rng + ?Sized>(s: &[C64], eta: f64, rng: &mut R) -> Vec<C64> {
    let g = (1.0 - eta).sqrt();
    s.iter().map(|&v| g * v + complex_normal(rng, eta)).collect()
}

/// `(ρ1, ρ2) = (cos β + iλ sin β, λ cos β − i sin β)`.
pub fn iqi_params(lambda: f64, beta: f64) -> (C64, C64) {
    let (sb, cb) = beta.sin_cos();
    (C64::new(cb, lambda * sb), C64::new(lambda * cb, -sb))
}

pub fn iqi_apply(s: &[C64], rho1: C64, rho2: C64) -> Vec<C64> {
    s.iter().map(|&v| rho1 * v + rho2 * v.conj()).collect()
}

/// Linear gain and distortion variance of a soft-envelope limiter driven by
/// a circular Gaussian input of power `ps`, clipping at `ν·√ps`.
pub fn sel_pa_params(nu: f64, ps: f64) -> (f64, f64) {
    if nu == f64::INFINITY {
        return (1.0, 0.0);
    }
    let tail = (-nu * nu).exp();
    let k = 1.0 - tail + PI.sqrt() / 2.0 * nu * statrs::function::erf::erfc(nu);
    let var = ps * (1.0 - tail - k * k);
    (k, var.max(0.0))
}

/// `K·s + q`, `q ~ CN(0, σ_q²)`.
pub fn sel_pa_apply<R: Rng + ?Sized>(s: &[C64], k_pa: f64, sigma_q2: f64, rng: &mut R) -> Vec<C64> {
    s.iter().map(|&v| k_pa * v + complex_normal(rng, sigma_q2)).collect()
}

/// Deterministic soft-envelope limiter, for cross-checking the surrogate.
pub fn sel_clip(s: &[C64], nu: f64, ps: f64) -> Vec<C64> {
    let a = nu * ps.sqrt();
    s.iter()
        .map(|&v| {
            let r = v.norm();
            if r <= a {
                v
            } else {
                v * (a / r)
            }
        })
        .collect()
}

pub fn dco_apply(s: &[C64], d_t: C64) -> Vec<C64> {
    s.iter().map(|&v| v + d_t).collect()
}

/// Per-sample phase-increment variance `4π²f_c²ψT_s`.
pub fn pn_increment_variance(psi: f64, params: &AfdmParams) -> f64 {
    4.0 * PI * PI * params.f_c * params.f_c * psi * params.sample_interval()
}

/// Wiener phase trajectory of length `n`: `θ(0) ~ U[0, 2π)`, then Gaussian
/// increments of variance `var`.
pub fn pn_trajectory<R: Rng + ?Sized>(n: usize, var: f64, rng: &mut R) -> Vec<f64> {
    let sd = var.sqrt();
    let mut theta = Vec::with_capacity(n);
    let mut cur: f64 = rng.random_range(0.0..2.0 * PI);
    theta.push(cur);
    for _ in 1..n {
        let z: f64 = rng.sample(StandardNormal);
        cur += sd * z;
        theta.push(cur);
    }
    theta
}

fn oscillators<R: Rng + ?Sized>(count: usize, n: usize, var: f64, mode: LoMode, rng: &mut R) -> Vec<Vec<C64>> {
    let draw = |rng: &mut R| -> Vec<C64> {
        pn_trajectory(n, var, rng).into_iter().map(|t| C64::from_polar(1.0, t)).collect()
    };
    match mode {
        LoMode::Clo => {
            let shared = draw(rng);
            vec![shared; count]
        }
        LoMode::Slo => (0..count).map(|_| draw(rng)).collect(),
    }
}

/// Diagonals of the transmit (`M` blocks) and receive (`J` blocks) phase
/// noise matrices. Disabled phase noise yields all-ones diagonals.
pub fn pn_matrices<R: Rng + ?Sized>(
    config: &HwiConfig,
    params: &AfdmParams,
    tx: usize,
    rx: usize,
    rng: &mut R,
) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let n = params.n;
    if !config.pn_enabled {
        let ones = vec![C64::new(1.0, 0.0); n];
        return (vec![ones.clone(); tx], vec![ones; rx]);
    }
    let var_t = pn_increment_variance(config.psi_t, params);
    let var_r = pn_increment_variance(config.psi_r, params);
    let t = oscillators(tx, n, var_t, config.pn_mode, rng);
    let r = oscillators(rx, n, var_r, config.pn_mode, rng);
    (t, r)
}

/// Diagonal of one CFO block, `e^{i2πφn/N}`; every receive antenna shares it.
pub fn cfo_diagonal(phi: f64, n: usize) -> Vec<C64> {
    (0..n).map(|i| cis_turns(phi * i as f64 / n as f64)).collect()
}

/// Dense block-diagonal `NJ × NJ` CFO matrix.
pub fn cfo_matrix(phi: f64, n: usize, rx: usize) -> CMat {
    block_diagonal(&vec![cfo_diagonal(phi, n); rx])
}

/// Dense block-diagonal matrix from per-block diagonals.
pub fn block_diagonal(blocks: &[Vec<C64>]) -> CMat {
    let d: Vec<C64> = blocks.iter().flatten().copied().collect();
    CMat::from_diagonal(&CVec::from_vec(d))
}
