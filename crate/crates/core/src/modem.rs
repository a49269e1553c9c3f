//! DAFT-domain multicarrier modem.
//!
//! The DAFT matrix is `A = Λ_{c2} F Λ_{c1}` with `Λ_c = diag(e^{-i2πc n²})`
//! and `F` the unitary DFT. Modulation maps DAFT-domain symbols onto chirp
//! subcarriers with `s = Aᴴ x`; demodulation is `y = A r`. Setting
//! `c1 = c2 = 0` turns the modem into plain OFDM.
//!
//! Vector transforms run through an FFT; [`Daft::matrix`] materializes the
//! dense matrix for reference and analysis.

use crate::error::{check_len, invalid, Result};
use crate::math::{cis_turns, CMat, C64};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Waveform geometry and chirp parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfdmParams {
    /// Number of chirp subcarriers `N`.
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    /// Chirp-periodic prefix length in samples.
    pub cpp_len: usize,
    /// Integer Doppler budget used for chirp design.
    pub k_max: u32,
    /// Guard for fractional Doppler spreading.
    pub k_nu: u32,
    /// Maximum normalized delay.
    pub l_max: usize,
    /// Subcarrier spacing (Hz).
    pub delta_f: f64,
    /// Carrier frequency (Hz).
    pub f_c: f64,
}

impl AfdmParams {
    /// AFDM parameters with `c1` from [`select_c1`], the default irrational
    /// `c2 = 1/(2πN²)` and a prefix of `l_max` samples.
    pub fn new(n: usize, k_max: u32, k_nu: u32, l_max: usize, delta_f: f64, f_c: f64) -> Result<Self> {
        let params = Self {
            n,
            c1: select_c1(k_max, k_nu, n),
            c2: default_c2(n),
            cpp_len: l_max,
            k_max,
            k_nu,
            l_max,
            delta_f,
            f_c,
        };
        params.validate()?;
        Ok(params)
    }

    /// The same geometry with `c1 = c2 = 0`, i.e. OFDM with a cyclic prefix.
    pub fn into_ofdm(mut self) -> Self {
        self.c1 = 0.0;
        self.c2 = 0.0;
        self
    }

    pub fn is_ofdm(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid(format!("N must be positive, got {}", self.n)));
        }
        if !(self.delta_f > 0.0 && self.f_c > 0.0) {
            return Err(invalid("subcarrier spacing and carrier frequency must be positive"));
        }
        if !satisfies_dimension_constraint(self.k_max, self.k_nu, self.l_max, self.n) {
            return Err(invalid(format!(
                "2(k_max + k_nu)(l_max + 1) + l_max < N violated for k_max={}, k_nu={}, l_max={}, N={}",
                self.k_max, self.k_nu, self.l_max, self.n
            )));
        }
        if self.cpp_len < self.l_max {
            return Err(invalid(format!(
                "prefix length {} shorter than l_max {}",
                self.cpp_len, self.l_max
            )));
        }
        if self.cpp_len > self.n {
            return Err(invalid(format!("prefix length {} exceeds N = {}", self.cpp_len, self.n)));
        }
        Ok(())
    }

    /// Frame duration `T = 1/Δf`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Sampling interval `T_s = 1/(NΔf)`.
    pub fn sample_interval(&self) -> f64 {
        1.0 / (self.n as f64 * self.delta_f)
    }

    pub fn sample_rate(&self) -> f64 {
        self.n as f64 * self.delta_f
    }
}

/// `c1 = (2(k_max + k_ν) + 1) / (2N)`, the chirp rate that keeps the
/// DAFT-domain responses of distinct paths apart.
pub fn select_c1(k_max: u32, k_nu: u32, n: usize) -> f64 {
    (2.0 * (k_max as f64 + k_nu as f64) + 1.0) / (2.0 * n as f64)
}

/// Default second chirp parameter: small and irrational.
pub fn default_c2(n: usize) -> f64 {
    1.0 / (2.0 * PI * (n * n) as f64)
}

pub fn satisfies_dimension_constraint(k_max: u32, k_nu: u32, l_max: usize, n: usize) -> bool {
    2 * (k_max as usize + k_nu as usize) * (l_max + 1) + l_max < n
}

/// DAFT transform of a fixed size with precomputed chirps and FFT plans.
#[derive(Clone)]
pub struct Daft {
    n: usize,
    c1: f64,
    c2: f64,
    chirp1: Vec<C64>,
    chirp2: Vec<C64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Daft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Daft")
            .field("n", &self.n)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish()
    }
}

impl Daft {
    pub fn new(n: usize, c1: f64, c2: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("DAFT size must be positive"));
        }
        let chirp = |c: f64| -> Vec<C64> {
            (0..n).map(|i| cis_turns(-c * (i * i) as f64)).collect()
        };
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            c1,
            c2,
            chirp1: chirp(c1),
            chirp2: chirp(c2),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        })
    }

    pub fn from_params(params: &AfdmParams) -> Result<Self> {
        Self::new(params.n, params.c1, params.c2)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Dense `A`, built entrywise as `A(p, q) = e^{-i2π(c2 p² + c1 q² + pq/N)}/√N`.
    pub fn matrix(&self) -> CMat {
        let n = self.n;
        CMat::from_fn(n, n, |p, q| {
            let dft = cis_turns(-(((p * q) % n) as f64) / n as f64);
            self.chirp2[p] * dft * self.chirp1[q] * self.scale
        })
    }

    /// `y = A r` in place.
    pub fn demodulate_in_place(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.n);
        for (v, c) in buf.iter_mut().zip(&self.chirp1) {
            *v *= c;
        }
        self.forward.process(buf);
        for (v, c) in buf.iter_mut().zip(&self.chirp2) {
            *v *= c * self.scale;
        }
    }

    /// `s = Aᴴ x` in place.
    pub fn modulate_in_place(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.n);
        for (v, c) in buf.iter_mut().zip(&self.chirp2) {
            *v *= c.conj();
        }
        self.inverse.process(buf);
        for (v, c) in buf.iter_mut().zip(&self.chirp1) {
            *v *= c.conj() * self.scale;
        }
    }

    pub fn modulate(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n, x.len())?;
        let mut s = x.to_vec();
        self.modulate_in_place(&mut s);
        Ok(s)
    }

    pub fn demodulate(&self, r: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n, r.len())?;
        let mut y = r.to_vec();
        self.demodulate_in_place(&mut y);
        Ok(y)
    }

    /// `A·X` for an `N × k` matrix.
    pub fn apply_left(&self, x: &CMat) -> CMat {
        assert_eq!(x.nrows(), self.n);
        let mut out = x.clone();
        for mut col in out.column_iter_mut() {
            self.demodulate_in_place(col.as_mut_slice());
        }
        out
    }

    /// `X·Aᴴ` for a `k × N` matrix, via `(A·Xᴴ)ᴴ`.
    pub fn right_adjoint(&self, x: &CMat) -> CMat {
        self.apply_left(&x.adjoint()).adjoint()
    }

    /// `X·Aᵀ` for a `k × N` matrix, via `(A·Xᵀ)ᵀ`.
    pub fn right_transpose(&self, x: &CMat) -> CMat {
        self.apply_left(&x.transpose()).transpose()
    }

    /// `A·X·Aᴴ`.
    pub fn conjugate(&self, x: &CMat) -> CMat {
        self.right_adjoint(&self.apply_left(x))
    }

    /// `A·X·Aᵀ`, the operator seen by a conjugated DAFT-domain input.
    pub fn conjugate_transpose_right(&self, x: &CMat) -> CMat {
        self.right_transpose(&self.apply_left(x))
    }
}

/// Prepend the chirp-periodic prefix:
/// `s(n) = s(N+n)·e^{-i2πc1(N² + 2Nn)}` for `n = -L..-1`.
pub fn add_cpp(s: &[C64], c1: f64, cpp_len: usize) -> Result<Vec<C64>> {
    let n = s.len();
    if cpp_len > n {
        return Err(invalid(format!("prefix length {cpp_len} exceeds frame length {n}")));
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(n + cpp_len);
    for idx in (1..=cpp_len).rev() {
        let m = -(idx as f64);
        let phase = cis_turns(-c1 * (nf * nf + 2.0 * nf * m));
        out.push(s[n - idx] * phase);
    }
    out.extend_from_slice(s);
    Ok(out)
}

/// Drop the first `cpp_len` samples.
pub fn remove_cpp(r: &[C64], cpp_len: usize) -> Result<Vec<C64>> {
    if r.len() < cpp_len {
        return Err(invalid(format!(
            "received block of {} samples is shorter than the prefix ({cpp_len})",
            r.len()
        )));
    }
    Ok(r[cpp_len..].to_vec())
}
