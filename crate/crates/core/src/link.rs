//! End-to-end impaired link in the DAFT domain.
//!
//! With the transmit chain `š = K(ρ1 s̃ + ρ2 s̃* + d_T·1) + q`,
//! `s̃ = Φ_T(√(1−η)·Aᴴx + n)`, a receive chain `y = (I⊗A)·P·Φ_R·(Θ š + w̃)`
//! splits into five terms:
//!
//! * desired signal `H_eff x`, `H_eff = ρ1 K √(1−η) C Φ_T (I⊗Aᴴ)`;
//! * mirror interference `G x*`, `G = ρ2 K √(1−η) C Φ_T* (I⊗Aᵀ)`;
//! * DC interference `K d_T C 1`;
//! * distortion `C (Kρ1 Φ_T n + Kρ2 Φ_T* n* + q)`;
//! * noise `(I⊗A) P Φ_R w̃`,
//!
//! where `C = (I⊗A)·P·Φ_R·Θ` is the receive-side operator.

use crate::channel::{apply_time_domain, build_td_matrix, ChannelRealization, PathTap};
use crate::constellation::Constellation;
use crate::error::{check_len, invalid, Result};
use crate::hwi::{cfo_diagonal, pn_matrices, HwiConfig, HwiScalars};
use crate::math::{complex_normal, CMat, CVec, C64};
use crate::modem::{add_cpp, AfdmParams, Daft};
use rand::Rng;

/// One draw of the multiplicative impairments.
#[derive(Debug, Clone, PartialEq)]
pub struct HwiRealization {
    /// Transmit phase-noise diagonals, one per transmit antenna.
    pub phi_t: Vec<Vec<C64>>,
    /// Receive phase-noise diagonals, one per receive antenna.
    pub phi_r: Vec<Vec<C64>>,
    /// CFO diagonal shared by every receive antenna.
    pub cfo: Vec<C64>,
}

impl HwiRealization {
    pub fn draw<R: Rng + ?Sized>(
        config: &HwiConfig,
        params: &AfdmParams,
        tx: usize,
        rx: usize,
        rng: &mut R,
    ) -> Self {
        let (phi_t, phi_r) = pn_matrices(config, params, tx, rx, rng);
        Self { phi_t, phi_r, cfo: cfo_diagonal(config.cfo, params.n) }
    }

    /// Combined receive diagonal `P_j Φ_{R,j}`.
    pub fn rx_diagonal(&self, j: usize) -> Vec<C64> {
        self.cfo.iter().zip(&self.phi_r[j]).map(|(a, b)| a * b).collect()
    }
}

/// One realized impaired link.
#[derive(Debug, Clone)]
pub struct ImpairedLink {
    pub params: AfdmParams,
    pub tx: usize,
    pub rx: usize,
    pub config: HwiConfig,
    pub scalars: HwiScalars,
    pub hwi: HwiRealization,
    /// Noise variance per complex receive sample.
    pub sigma2: f64,
    channel: ChannelRealization,
    daft: Daft,
    theta: CMat,
    rx_op: CMat,
    h_eff: CMat,
    mirror_op: CMat,
    v_di: CVec,
    /// IQ imbalance present: the mirror operator is non-zero.
    has_mirror: bool,
    /// DAC or PA noise present: the distortion term is non-zero.
    has_distortion: bool,
}

impl ImpairedLink {
    /// Draws the multiplicative impairments and assembles the link.
    pub fn realize<R: Rng + ?Sized>(
        channel: &ChannelRealization,
        config: &HwiConfig,
        sigma2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let hwi = HwiRealization::draw(config, &channel.params, channel.tx, channel.rx, rng);
        Self::assemble(channel, config, hwi, sigma2)
    }

    /// Assembles the link for a given impairment draw.
    pub fn assemble(
        channel: &ChannelRealization,
        config: &HwiConfig,
        hwi: HwiRealization,
        sigma2: f64,
    ) -> Result<Self> {
        config.validate()?;
        channel.params.validate()?;
        if !(sigma2 >= 0.0) {
            return Err(invalid(format!("noise variance {sigma2} must be non-negative")));
        }
        let (n, tx, rx) = (channel.params.n, channel.tx, channel.rx);
        if hwi.phi_t.len() != tx || hwi.phi_r.len() != rx {
            return Err(crate::Error::Dimension(format!(
                "impairment draw has {}×{} oscillators for a {}×{} array",
                hwi.phi_t.len(),
                hwi.phi_r.len(),
                tx,
                rx
            )));
        }
        for d in hwi.phi_t.iter().chain(&hwi.phi_r).chain(std::iter::once(&hwi.cfo)) {
            check_len(n, d.len())?;
        }
        let daft = Daft::from_params(&channel.params)?;
        let scalars = config.scalars();
        let theta = build_td_matrix(channel);

        let mut rx_op = theta.clone();
        for j in 0..rx {
            let d = hwi.rx_diagonal(j);
            let mut rows = rx_op.rows_mut(j * n, n);
            for (r, dr) in d.iter().enumerate() {
                rows.row_mut(r).iter_mut().for_each(|v| *v *= dr);
            }
            let transformed = daft.apply_left(&rows.clone_owned());
            rows.copy_from(&transformed);
        }

        let gain = scalars.linear_gain();
        let mut h_eff = CMat::zeros(n * rx, n * tx);
        let mut mirror_op = CMat::zeros(n * rx, n * tx);
        for m in 0..tx {
            let mut cols = rx_op.columns(m * n, n).clone_owned();
            let mut cols_conj = cols.clone();
            for (c, phase) in hwi.phi_t[m].iter().enumerate() {
                let direct = *phase * scalars.rho1 * gain;
                let mirrored = phase.conj() * scalars.rho2 * gain;
                cols.column_mut(c).iter_mut().for_each(|v| *v *= direct);
                cols_conj.column_mut(c).iter_mut().for_each(|v| *v *= mirrored);
            }
            h_eff.columns_mut(m * n, n).copy_from(&daft.right_adjoint(&cols));
            mirror_op.columns_mut(m * n, n).copy_from(&daft.right_transpose(&cols_conj));
        }
        let dc = CVec::from_element(n * tx, scalars.d_t * scalars.k_pa);
        let v_di = &rx_op * dc;

        Ok(Self {
            params: channel.params.clone(),
            tx,
            rx,
            config: config.clone(),
            scalars,
            hwi,
            sigma2,
            channel: channel.clone(),
            daft,
            theta,
            rx_op,
            h_eff,
            mirror_op,
            v_di,
            has_mirror: scalars.rho2 != C64::new(0.0, 0.0),
            has_distortion: scalars.eta != 0.0 || scalars.sigma_q2 != 0.0,
        })
    }

    /// The same impairment draw and noise level over a different channel,
    /// e.g. the receiver's estimate.
    pub fn with_channel(&self, channel: &ChannelRealization) -> Result<Self> {
        Self::assemble(channel, &self.config, self.hwi.clone(), self.sigma2)
    }

    pub fn channel(&self) -> &ChannelRealization {
        &self.channel
    }

    pub fn daft(&self) -> &Daft {
        &self.daft
    }

    /// Time-domain stacked channel `Θ`.
    pub fn theta(&self) -> &CMat {
        &self.theta
    }

    /// Receive-side operator `(I⊗A)·P·Φ_R·Θ`.
    pub fn rx_operator(&self) -> &CMat {
        &self.rx_op
    }

    pub fn h_eff(&self) -> &CMat {
        &self.h_eff
    }

    pub fn mirror_op(&self) -> &CMat {
        &self.mirror_op
    }

    pub fn v_di(&self) -> &CVec {
        &self.v_di
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn tx_len(&self) -> usize {
        self.params.n * self.tx
    }

    pub fn rx_len(&self) -> usize {
        self.params.n * self.rx
    }

    /// Transmit-side distortion `Kρ1 Φ_T n + Kρ2 Φ_T* n* + q`.
    pub fn distortion_input(&self, dac_noise: &CVec, pa_noise: &CVec) -> CVec {
        let n = self.n();
        let s = &self.scalars;
        CVec::from_fn(self.tx_len(), |i, _| {
            let rotated = self.hwi.phi_t[i / n][i % n] * dac_noise[i];
            s.k_pa * (s.rho1 * rotated + s.rho2 * rotated.conj()) + pa_noise[i]
        })
    }

    /// Deterministic offset `v_DI + C·u` for known transmit-side noise.
    pub fn known_offset(&self, dac_noise: &CVec, pa_noise: &CVec) -> CVec {
        if !self.has_distortion {
            return self.v_di.clone();
        }
        &self.v_di + &self.rx_op * self.distortion_input(dac_noise, pa_noise)
    }

    /// Receive noise `(I⊗A) P Φ_R w̃` for a time-domain draw `w̃`.
    pub fn rotate_noise(&self, w: &CVec) -> CVec {
        let n = self.n();
        let mut out = w.clone();
        for j in 0..self.rx {
            let d = self.hwi.rx_diagonal(j);
            let seg = &mut out.as_mut_slice()[j * n..(j + 1) * n];
            for (v, dj) in seg.iter_mut().zip(&d) {
                *v *= dj;
            }
            self.daft.demodulate_in_place(seg);
        }
        out
    }

    /// Draws one frame's transmit-side and receiver noise and forms the
    /// five-term received signal.
    pub fn transmit_frame<R: Rng + ?Sized>(&self, x: &CVec, rng: &mut R) -> Result<FrameTranscript> {
        check_len(self.tx_len(), x.len())?;
        let s = &self.scalars;
        let dac_noise = CVec::from_fn(self.tx_len(), |_, _| complex_normal(rng, s.eta));
        let pa_noise = CVec::from_fn(self.tx_len(), |_, _| complex_normal(rng, s.sigma_q2));
        let w_td = CVec::from_fn(self.rx_len(), |_, _| complex_normal(rng, self.sigma2));
        Ok(self.frame_from_draws(x, dac_noise, pa_noise, w_td))
    }

    /// Five-term received signal for explicit noise draws.
    pub fn frame_from_draws(&self, x: &CVec, dac_noise: CVec, pa_noise: CVec, w_td: CVec) -> FrameTranscript {
        let desired = &self.h_eff * x;
        // Skipped products are exact zeros.
        let mirror = if self.has_mirror { &self.mirror_op * x.conjugate() } else { CVec::zeros(self.rx_len()) };
        let dc = self.v_di.clone();
        let distortion = if self.has_distortion {
            &self.rx_op * self.distortion_input(&dac_noise, &pa_noise)
        } else {
            CVec::zeros(self.rx_len())
        };
        let noise = self.rotate_noise(&w_td);
        let y = &desired + &mirror + &dc + &distortion + &noise;
        FrameTranscript {
            x: x.clone(),
            y,
            desired,
            mirror,
            dc,
            distortion,
            noise,
            dac_noise,
            pa_noise,
            w_td,
        }
    }

    /// Transmit-chain output `š` for one frame, sample by sample.
    pub fn transmit_chain(&self, x: &CVec, dac_noise: &CVec, pa_noise: &CVec) -> Result<CVec> {
        check_len(self.tx_len(), x.len())?;
        let n = self.n();
        let s = &self.scalars;
        let root = (1.0 - s.eta).sqrt();
        let mut out = CVec::zeros(self.tx_len());
        for m in 0..self.tx {
            let td = self.daft.modulate(&x.as_slice()[m * n..(m + 1) * n])?;
            for i in 0..n {
                let idx = m * n + i;
                let quantized = root * td[i] + dac_noise[idx];
                let rotated = self.hwi.phi_t[m][i] * quantized;
                let iq = s.rho1 * rotated + s.rho2 * rotated.conj();
                out[idx] = s.k_pa * (iq + s.d_t) + pa_noise[idx];
            }
        }
        Ok(out)
    }

    /// Sample-level reference receiver: prefix insertion, time-varying
    /// multipath, receiver noise, CFO and phase noise, prefix removal and
    /// DAFT demodulation.
    pub fn simulate_samples(&self, x: &CVec, dac_noise: &CVec, pa_noise: &CVec, w_td: &CVec) -> Result<CVec> {
        let n = self.n();
        let cpp = self.params.cpp_len;
        let chain = self.transmit_chain(x, dac_noise, pa_noise)?;
        let framed: Vec<Vec<C64>> = (0..self.tx)
            .map(|m| add_cpp(&chain.as_slice()[m * n..(m + 1) * n], self.params.c1, cpp))
            .collect::<Result<_>>()?;
        let mut y = CVec::zeros(self.rx_len());
        for j in 0..self.rx {
            let mut r: Vec<C64> = w_td.as_slice()[j * n..(j + 1) * n].to_vec();
            for (m, frame) in framed.iter().enumerate() {
                let part = apply_time_domain(self.channel.taps(j, m), frame, n, cpp)?;
                for (a, b) in r.iter_mut().zip(part) {
                    *a += b;
                }
            }
            for (v, d) in r.iter_mut().zip(self.hwi.rx_diagonal(j)) {
                *v *= d;
            }
            self.daft.demodulate_in_place(&mut r);
            y.as_mut_slice()[j * n..(j + 1) * n].copy_from_slice(&r);
        }
        Ok(y)
    }

    /// `A·P_j·Φ_{R,j}·B_p·v` for a time-domain vector `v` of one transmit
    /// antenna: the response of path `p` of pair `(j, m)` with unit gain.
    pub fn path_response(&self, j: usize, m: usize, p: usize, v: &[C64]) -> Vec<C64> {
        let tap: &PathTap = &self.channel.taps(j, m)[p];
        let n = self.n();
        let diag = tap.diagonal(n, self.params.c1);
        let rx = self.hwi.rx_diagonal(j);
        let mut out = vec![C64::new(0.0, 0.0); n];
        crate::channel::apply_path(&diag, tap.delay, v, &mut out);
        for (o, d) in out.iter_mut().zip(&rx) {
            *o *= d;
        }
        self.daft.demodulate_in_place(&mut out);
        out
    }

    /// Covariance of the receive noise term, `σ²·I`: the receive rotations
    /// are unitary.
    pub fn noise_covariance(&self) -> CMat {
        CMat::identity(self.rx_len(), self.rx_len()) * C64::new(self.sigma2, 0.0)
    }

    /// Exact second moment of `v_MI + v_DI + v_NI + w̄` for i.i.d.
    /// zero-mean unit-energy symbols.
    pub fn interference_covariance(&self) -> CMat {
        let s = &self.scalars;
        let distortion = s.k_pa * s.k_pa * (s.rho1.norm_sqr() + s.rho2.norm_sqr()) * s.eta + s.sigma_q2;
        let mut r = &self.mirror_op * self.mirror_op.adjoint();
        r += &self.v_di * self.v_di.adjoint();
        if distortion > 0.0 {
            r += &self.rx_op * self.rx_op.adjoint() * C64::new(distortion, 0.0);
        }
        for i in 0..self.rx_len() {
            r[(i, i)] += self.sigma2;
        }
        r
    }
}

/// Monte-Carlo second moment of `v = y − H_eff x` over `frames` draws with
/// symbols uniform over the constellation.
pub fn estimate_rv_covariance<R: Rng + ?Sized>(
    link: &ImpairedLink,
    constellation: &Constellation,
    frames: usize,
    rng: &mut R,
) -> Result<CMat> {
    if frames == 0 {
        return Err(invalid("at least one frame is required"));
    }
    let len = link.rx_len();
    let mut acc = CMat::zeros(len, len);
    for _ in 0..frames {
        let x = random_symbols(constellation, link.tx_len(), rng);
        let t = link.transmit_frame(&x, rng)?;
        let v = t.interference();
        acc.ger(C64::new(1.0, 0.0), &v, &v.conjugate(), C64::new(1.0, 0.0));
    }
    acc /= C64::new(frames as f64, 0.0);
    // Enforce exact Hermitian symmetry against rounding.
    let herm = (&acc + acc.adjoint()) * C64::new(0.5, 0.0);
    Ok(herm)
}

/// Uniform symbol vector.
pub fn random_symbols<R: Rng + ?Sized>(constellation: &Constellation, len: usize, rng: &mut R) -> CVec {
    let order = constellation.order();
    CVec::from_fn(len, |_, _| constellation.point(rng.random_range(0..order)))
}

/// Uniform symbol vector together with its labels.
pub fn random_labels<R: Rng + ?Sized>(constellation: &Constellation, len: usize, rng: &mut R) -> (Vec<usize>, CVec) {
    let order = constellation.order();
    let labels: Vec<usize> = (0..len).map(|_| rng.random_range(0..order)).collect();
    let x = CVec::from_iterator(len, labels.iter().map(|&l| constellation.point(l)));
    (labels, x)
}

/// One transmitted frame and its received-signal decomposition.
#[derive(Debug, Clone)]
pub struct FrameTranscript {
    pub x: CVec,
    pub y: CVec,
    pub desired: CVec,
    pub mirror: CVec,
    pub dc: CVec,
    pub distortion: CVec,
    pub noise: CVec,
    /// DAC noise `n`.
    pub dac_noise: CVec,
    /// PA distortion `q`.
    pub pa_noise: CVec,
    /// Time-domain receiver noise `w̃`.
    pub w_td: CVec,
}

impl FrameTranscript {
    /// Sum of the five terms in the order used to form `y`.
    pub fn reconstruct(&self) -> CVec {
        &self.desired + &self.mirror + &self.dc + &self.distortion + &self.noise
    }

    /// Everything but the desired signal.
    pub fn interference(&self) -> CVec {
        &self.mirror + &self.dc + &self.distortion + &self.noise
    }
}
