//! Doubly-selective multipath channels.
//!
//! Each transmit/receive antenna pair sees `P` paths, each with a complex
//! gain, an integer delay `l` and a (possibly fractional) normalized Doppler
//! `k`. In the time domain a path acts as `h·Γ·Δ_k·Π^l`, where `Π` is the
//! forward cyclic shift, `Δ_k = diag(e^{i2πkn/N})` and `Γ` carries the
//! prefix phase for the first `l` samples.

use crate::error::{invalid, Result};
use crate::math::{cis_turns, complex_normal, CMat, C64, ZERO};
use crate::modem::{AfdmParams, Daft};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTap {
    pub gain: C64,
    pub delay: usize,
    pub doppler: f64,
}

impl PathTap {
    pub fn new(gain: C64, delay: usize, doppler: f64) -> Self {
        Self { gain, delay, doppler }
    }

    /// Diagonal of `Γ·Δ_k`; the path operator is `diag(d)·Π^l`.
    pub fn diagonal(&self, n: usize, c1: f64) -> Vec<C64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let doppler = cis_turns(self.doppler * i as f64 / nf);
                if i < self.delay {
                    let shift = (self.delay - i) as f64;
                    doppler * cis_turns(-c1 * (nf * nf - 2.0 * nf * shift))
                } else {
                    doppler
                }
            })
            .collect()
    }

    /// Index offset between output and input DAFT bins:
    /// `(2N·c1·l − k) mod N`.
    pub fn index_offset(&self, n: usize, c1: f64) -> f64 {
        let nf = n as f64;
        (2.0 * nf * c1 * self.delay as f64 - self.doppler).rem_euclid(nf)
    }
}

/// Doppler sampling law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DopplerModel {
    /// `k = k_max·cos θ`, `θ ~ U[0, π]`.
    JakesFractional,
    /// Uniform integers in `[−k_max, k_max]` with `k_max` the integer budget.
    IntegerOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerProfile {
    pub model: DopplerModel,
    /// Real maximum normalized Doppler for the Jakes law.
    pub k_max: f64,
}

/// Taps for a `J × M` antenna array, stored row-major over `(j, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub params: AfdmParams,
    pub tx: usize,
    pub rx: usize,
    pub paths: usize,
    taps: Vec<Vec<PathTap>>,
}

impl ChannelRealization {
    pub fn from_taps(
        params: AfdmParams,
        tx: usize,
        rx: usize,
        taps: Vec<Vec<PathTap>>,
    ) -> Result<Self> {
        if tx == 0 || rx == 0 {
            return Err(invalid("antenna counts must be positive"));
        }
        if taps.len() != tx * rx {
            return Err(invalid(format!(
                "expected {} antenna pairs, got {}",
                tx * rx,
                taps.len()
            )));
        }
        let paths = taps[0].len();
        if paths == 0 || taps.iter().any(|t| t.len() != paths) {
            return Err(invalid("every antenna pair needs the same positive number of paths"));
        }
        if let Some(t) = taps.iter().flatten().find(|t| t.delay > params.l_max) {
            return Err(invalid(format!("delay {} exceeds l_max {}", t.delay, params.l_max)));
        }
        Ok(Self { params, tx, rx, paths, taps })
    }

    pub fn taps(&self, j: usize, m: usize) -> &[PathTap] {
        &self.taps[j * self.tx + m]
    }

    pub fn all_taps(&self) -> &[Vec<PathTap>] {
        &self.taps
    }

    /// Same geometry with gains replaced, ordered `j·(M·P) + m·P + p`.
    pub fn with_gains(&self, gains: &[C64]) -> Result<Self> {
        crate::error::check_len(self.gain_count(), gains.len())?;
        let mut out = self.clone();
        for (k, tap) in out.taps.iter_mut().flatten().enumerate() {
            tap.gain = gains[k];
        }
        Ok(out)
    }

    /// Path gains ordered `j·(M·P) + m·P + p`.
    pub fn gains(&self) -> Vec<C64> {
        self.taps.iter().flatten().map(|t| t.gain).collect()
    }

    pub fn gain_count(&self) -> usize {
        self.tx * self.rx * self.paths
    }

    /// Same taps with different waveform parameters (e.g. an OFDM twin).
    pub fn with_params(&self, params: AfdmParams) -> Self {
        Self { params, ..self.clone() }
    }
}

/// Draws an i.i.d. realization: gains `CN(0, 1/P)`, first delay zero, other
/// delays uniform over `{1, …, l_max}` with replacement.
pub fn sample_channel<R: Rng + ?Sized>(
    tx: usize,
    rx: usize,
    paths: usize,
    params: &AfdmParams,
    doppler: DopplerProfile,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if paths == 0 {
        return Err(invalid("at least one path is required"));
    }
    if paths > 1 && params.l_max == 0 {
        return Err(invalid("l_max = 0 leaves no delay for paths beyond the first"));
    }
    let var = 1.0 / paths as f64;
    let k_int = params.k_max as i64;
    let mut taps = Vec::with_capacity(tx * rx);
    for _ in 0..tx * rx {
        let mut pair = Vec::with_capacity(paths);
        for p in 0..paths {
            let gain = complex_normal(rng, var);
            let delay = if p == 0 { 0 } else { rng.random_range(1..=params.l_max) };
            let k = match doppler.model {
                DopplerModel::JakesFractional => {
                    let theta: f64 = rng.random_range(0.0..=PI);
                    doppler.k_max * theta.cos()
                }
                DopplerModel::IntegerOnly => rng.random_range(-k_int..=k_int) as f64,
            };
            pair.push(PathTap::new(gain, delay, k));
        }
        taps.push(pair);
    }
    ChannelRealization::from_taps(params.clone(), tx, rx, taps)
}

/// Applies one path operator `diag(d)·Π^l` to `v`.
pub fn apply_path(diag: &[C64], delay: usize, v: &[C64], out: &mut [C64]) {
    let n = v.len();
    for i in 0..n {
        out[i] = diag[i] * v[(i + n - delay % n) % n];
    }
}

/// Time-domain block `Σ_p h_p Γ_p Δ_{k_p} Π^{l_p}`.
pub fn build_td_block(taps: &[PathTap], params: &AfdmParams) -> CMat {
    let n = params.n;
    let mut h = CMat::zeros(n, n);
    for tap in taps {
        let d = tap.diagonal(n, params.c1);
        for (row, dr) in d.iter().enumerate() {
            let col = (row + n - tap.delay % n) % n;
            h[(row, col)] += tap.gain * dr;
        }
    }
    h
}

/// Stacked `NJ × NM` time-domain channel.
pub fn build_td_matrix(real: &ChannelRealization) -> CMat {
    let n = real.params.n;
    let mut out = CMat::zeros(n * real.rx, n * real.tx);
    for j in 0..real.rx {
        for m in 0..real.tx {
            let block = build_td_block(real.taps(j, m), &real.params);
            out.view_mut((j * n, m * n), (n, n)).copy_from(&block);
        }
    }
    out
}

/// Time- and DAFT-domain stacked channel matrices.
#[derive(Debug, Clone)]
pub struct DaftChannel {
    pub h: CMat,
    pub hbar: CMat,
}

pub fn build_daft_channel(real: &ChannelRealization) -> Result<DaftChannel> {
    let daft = Daft::from_params(&real.params)?;
    let n = real.params.n;
    let hbar = build_td_matrix(real);
    let mut h = CMat::zeros(hbar.nrows(), hbar.ncols());
    for j in 0..real.rx {
        for m in 0..real.tx {
            let block = hbar.view((j * n, m * n), (n, n)).clone_owned();
            h.view_mut((j * n, m * n), (n, n)).copy_from(&daft.conjugate(&block));
        }
    }
    Ok(DaftChannel { h, hbar })
}

/// DAFT-domain entry `(n, n′)` of one antenna pair from the closed-form
/// phase and Dirichlet-kernel factors.
pub fn elementwise_channel_entry(row: usize, col: usize, taps: &[PathTap], params: &AfdmParams) -> C64 {
    let nn = params.n;
    let nf = nn as f64;
    let (c1, c2) = (params.c1, params.c2);
    let (r, c) = (row as f64, col as f64);
    let mut acc = ZERO;
    for tap in taps {
        let l = tap.delay as f64;
        let phase = cis_turns(c1 * l * l - c * l / nf + c2 * (c * c - r * r));
        acc += tap.gain * phase * dirichlet(r - c + tap.index_offset(nn, c1), nn);
    }
    acc / nf
}

/// `(e^{-i2πx} − 1)/(e^{-i2πx/N} − 1)`, equal to `N` at `x ≡ 0 (mod N)`.
fn dirichlet(x: f64, n: usize) -> C64 {
    let nf = n as f64;
    let den = cis_turns(-x / nf) - 1.0;
    if den.norm() < 1e-12 {
        return C64::new(nf, 0.0);
    }
    (cis_turns(-x) - 1.0) / den
}

/// Column index on which row `row` of a path concentrates its energy.
pub fn peak_index(row: usize, tap: &PathTap, params: &AfdmParams) -> usize {
    let n = params.n;
    let pos = (row as f64 + tap.index_offset(n, params.c1)).rem_euclid(n as f64);
    (pos.round() as usize) % n
}

/// Banded support mask: for each row, columns within `k_ν` of any path peak.
pub fn band_support(taps: &[PathTap], params: &AfdmParams) -> Vec<Vec<bool>> {
    let n = params.n;
    let kv = params.k_nu as i64;
    let mut mask = vec![vec![false; n]; n];
    for (row, line) in mask.iter_mut().enumerate() {
        for tap in taps {
            let peak = peak_index(row, tap, params) as i64;
            for off in -kv..=kv {
                line[(peak + off).rem_euclid(n as i64) as usize] = true;
            }
        }
    }
    mask
}

/// `k_max = v·f_c/(c·Δf)` with `v` in km/h.
pub fn velocity_to_kmax(v_kmh: f64, f_c: f64, delta_f: f64) -> f64 {
    let v = v_kmh / 3.6;
    v * f_c / (SPEED_OF_LIGHT * delta_f)
}

/// Sample-level channel: prefix-extended input through the delayed,
/// Doppler-rotated paths, returning the `N` samples after the prefix.
/// The Doppler phase runs on the output sample index, matching
/// [`build_td_block`].
pub fn apply_time_domain(taps: &[PathTap], framed: &[C64], n: usize, cpp_len: usize) -> Result<Vec<C64>> {
    crate::error::check_len(n + cpp_len, framed.len())?;
    if let Some(t) = taps.iter().find(|t| t.delay > cpp_len) {
        return Err(invalid(format!("delay {} exceeds the prefix length {cpp_len}", t.delay)));
    }
    let nf = n as f64;
    let mut out = vec![ZERO; n];
    for tap in taps {
        for (i, o) in out.iter_mut().enumerate() {
            let s = framed[cpp_len + i - tap.delay];
            *o += tap.gain * cis_turns(tap.doppler * i as f64 / nf) * s;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{complex_normal_vec, max_abs_diff, ONE};
    use crate::modem::{add_cpp, select_c1, default_c2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, k_max: u32, k_nu: u32, l_max: usize) -> AfdmParams {
        AfdmParams::new(n, k_max, k_nu, l_max, 15e3, 4e9).unwrap()
    }

    #[test]
    fn identity_and_shift_blocks() {
        let p = params(8, 1, 0, 1);
        let h = build_td_block(&[PathTap::new(ONE, 0, 0.0)], &p);
        assert!(max_abs_diff(&h, &CMat::identity(8, 8)) < 1e-15);
        let p0 = p.clone().into_ofdm();
        let h = build_td_block(&[PathTap::new(ONE, 1, 0.0)], &p0);
        for r in 0..8 {
            for c in 0..8 {
                let expected = if c == (r + 7) % 8 { 1.0 } else { 0.0 };
                assert!((h[(r, c)] - C64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn td_block_matches_discrete_time_response() {
        // r(n) = Σ_u s(n−u)·h̃(n,u), h̃(n,u) = h·e^{i2πk(n−u)/N}·δ(u−l), with
        // the prefix supplying s at negative indices. The response equals
        // the block of a path whose gain is rotated by e^{−i2πkl/N}.
        let n = 4;
        let mut p = params(8, 1, 0, 1);
        p.n = n;
        p.c1 = 3.0 / 8.0;
        p.c2 = 0.0;
        let (l, k) = (1usize, 0.5);
        let rotated = PathTap::new(cis_turns(-k * l as f64 / n as f64), l, k);
        let block = build_td_block(&[rotated], &p);
        for col in 0..n {
            let mut s = vec![ZERO; n];
            s[col] = ONE;
            let framed = add_cpp(&s, p.c1, 1).unwrap();
            for row in 0..n {
                let idx = 1 + row as isize - l as isize;
                let sample = framed[idx as usize];
                let r = cis_turns(k * (row as f64 - l as f64) / n as f64) * sample;
                assert!((block[(row, col)] - r).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sample_level_channel_matches_td_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(16, 1, 1, 2);
        let taps = vec![
            PathTap::new(complex_normal(&mut rng, 1.0), 0, 0.4),
            PathTap::new(complex_normal(&mut rng, 1.0), 2, -0.9),
            PathTap::new(complex_normal(&mut rng, 1.0), 1, 0.0),
        ];
        let s: Vec<C64> = complex_normal_vec(&mut rng, 16, 1.0).iter().copied().collect();
        let r = apply_time_domain(&taps, &add_cpp(&s, p.c1, p.cpp_len).unwrap(), 16, p.cpp_len).unwrap();
        let expected = build_td_block(&taps, &p) * crate::math::CVec::from_vec(s);
        for (a, b) in r.iter().zip(expected.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn elementwise_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for &(n, k_max, k_nu, l_max) in &[(8usize, 1u32, 0u32, 1usize), (16, 1, 2, 1), (16, 1, 1, 2)] {
            let p = params(n, k_max, k_nu, l_max);
            for _ in 0..10 {
                let real = sample_channel(
                    1,
                    1,
                    l_max + 1,
                    &p,
                    DopplerProfile { model: DopplerModel::JakesFractional, k_max: k_max as f64 },
                    &mut rng,
                )
                .unwrap();
                let dc = build_daft_channel(&real).unwrap();
                for r in 0..n {
                    for c in 0..n {
                        let e = elementwise_channel_entry(r, c, real.taps(0, 0), &p);
                        assert!((dc.h[(r, c)] - e).norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn integer_doppler_singularity_gives_n() {
        let p = params(8, 1, 0, 1);
        let tap = PathTap::new(ONE, 1, 1.0);
        let ind = tap.index_offset(8, p.c1);
        assert_eq!(ind, 2.0);
        let col = (3 + 2) % 8;
        // ζ1 has unit modulus, so |entry| = |ζ2|/N = 1.
        let e = elementwise_channel_entry(3, col, &[tap], &p);
        assert!((e.norm() - 1.0).abs() < 1e-12);
        assert_eq!(dirichlet(8.0, 8), C64::new(8.0, 0.0));
        let zero = PathTap::new(ZERO, 1, 0.3);
        assert_eq!(elementwise_channel_entry(2, 5, &[zero], &p), ZERO);
    }

    #[test]
    fn identity_channel_in_daft_domain() {
        let p = params(8, 1, 0, 1);
        let real = ChannelRealization::from_taps(p, 1, 1, vec![vec![PathTap::new(ONE, 0, 0.0)]]).unwrap();
        let dc = build_daft_channel(&real).unwrap();
        assert!(max_abs_diff(&dc.h, &CMat::identity(8, 8)) < 1e-13);
    }

    #[test]
    fn two_path_bands_concentrate_energy() {
        let p = params(16, 1, 2, 1);
        assert_eq!(p.c1, 7.0 / 32.0);
        let taps = [PathTap::new(ONE, 0, 0.3), PathTap::new(ONE, 1, 1.2)];
        let real = ChannelRealization::from_taps(p.clone(), 1, 1, vec![taps.to_vec()]).unwrap();
        let h = build_daft_channel(&real).unwrap().h;
        let mask = band_support(&taps, &p);
        for (row, line) in mask.iter().enumerate() {
            assert_eq!(line.iter().filter(|&&b| b).count(), 10);
            let total: f64 = (0..16).map(|c| h[(row, c)].norm_sqr()).sum();
            let inside: f64 = (0..16).filter(|&c| line[c]).map(|c| h[(row, c)].norm_sqr()).sum();
            assert!(inside / total > 0.9, "row {row}: {}", inside / total);
            for tap in &taps {
                let peak = peak_index(row, tap, &p);
                let single = ChannelRealization::from_taps(p.clone(), 1, 1, vec![vec![*tap]]).unwrap();
                let hp = build_daft_channel(&single).unwrap().h;
                let argmax = (0..16)
                    .max_by(|&a, &b| hp[(row, a)].norm().partial_cmp(&hp[(row, b)].norm()).unwrap())
                    .unwrap();
                assert_eq!(argmax, peak);
            }
        }
    }

    #[test]
    fn frobenius_norm_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = params(16, 1, 1, 2);
        let real = sample_channel(
            2,
            2,
            3,
            &p,
            DopplerProfile { model: DopplerModel::JakesFractional, k_max: 0.8 },
            &mut rng,
        )
        .unwrap();
        let dc = build_daft_channel(&real).unwrap();
        assert!((dc.h.norm() - dc.hbar.norm()).abs() < 1e-10);
    }

    #[test]
    fn single_path_and_lti_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = params(8, 0, 0, 2);
        let profile = DopplerProfile { model: DopplerModel::IntegerOnly, k_max: 0.0 };
        let mut power = 0.0;
        let draws = 10_000;
        for _ in 0..draws {
            let real = sample_channel(1, 1, 1, &p, profile, &mut rng).unwrap();
            let t = real.taps(0, 0)[0];
            assert_eq!(t.delay, 0);
            assert_eq!(t.doppler, 0.0);
            power += t.gain.norm_sqr();
        }
        assert!((power / draws as f64 - 1.0).abs() < 0.03);
        let lti = sample_channel(2, 2, 3, &p, profile, &mut rng).unwrap();
        assert!(lti.all_taps().iter().flatten().all(|t| t.doppler == 0.0));
        let flat = params(8, 1, 0, 0);
        assert!(sample_channel(1, 1, 2, &flat, profile, &mut rng).is_err());
    }

    #[test]
    fn first_column_energy_is_unit_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = params(16, 1, 1, 2);
        let profile = DopplerProfile { model: DopplerModel::JakesFractional, k_max: 1.0 };
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let real = sample_channel(1, 1, 3, &p, profile, &mut rng).unwrap();
            let hb = build_td_block(real.taps(0, 0), &p);
            acc += hb.column(0).norm_squared();
        }
        assert!((acc / draws as f64 - 1.0).abs() < 0.02, "{}", acc / draws as f64);
    }

    #[test]
    fn jakes_doppler_follows_arcsine_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = params(16, 1, 1, 2);
        let profile = DopplerProfile { model: DopplerModel::JakesFractional, k_max: 1.0 };
        let mut ks = Vec::with_capacity(100_000);
        while ks.len() < 100_000 {
            let real = sample_channel(1, 1, 1, &p, profile, &mut rng).unwrap();
            ks.push(real.taps(0, 0)[0].doppler);
        }
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |k: f64| 1.0 - k.clamp(-1.0, 1.0).acos() / PI;
        let n = ks.len() as f64;
        let stat = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let f = cdf(k);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(stat < 0.01, "KS statistic {stat}");
    }

    #[test]
    fn velocity_conversion() {
        assert_eq!(velocity_to_kmax(0.0, 4e9, 15e3), 0.0);
        let k = velocity_to_kmax(540.0, 4e9, 15e3);
        assert!((k - 0.133_426).abs() < 1e-5, "{k}");
        assert!((velocity_to_kmax(1080.0, 4e9, 15e3) - 2.0 * k).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn integer_doppler_paths_do_not_overlap(
            n_pow in 4u32..7,
            k_max in 0u32..3,
            k_nu in 0u32..2,
            seed in any::<u64>(),
        ) {
            let n = 1usize << n_pow;
            let l_max = 2usize;
            prop_assume!(crate::modem::satisfies_dimension_constraint(k_max, k_nu, l_max, n));
            let p = AfdmParams {
                n,
                c1: select_c1(k_max, k_nu, n),
                c2: default_c2(n),
                cpp_len: l_max,
                k_max,
                k_nu,
                l_max,
                delta_f: 15e3,
                f_c: 4e9,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut taps: Vec<PathTap> = Vec::new();
            for _ in 0..6 {
                let l = rng.random_range(0..=l_max);
                let k = rng.random_range(-(k_max as i64)..=k_max as i64) as f64;
                if !taps.iter().any(|t| t.delay == l && t.doppler == k) {
                    taps.push(PathTap::new(ONE, l, k));
                }
            }
            for row in 0..n {
                let mut peaks: Vec<usize> = taps.iter().map(|t| peak_index(row, t, &p)).collect();
                peaks.sort_unstable();
                peaks.dedup();
                prop_assert_eq!(peaks.len(), taps.len());
            }
        }
    }
}
