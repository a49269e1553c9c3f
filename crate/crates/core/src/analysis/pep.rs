//! Unconditional pairwise error probabilities and the union bound on the
//! average bit error rate of ML detection.

use std::collections::BTreeMap;

use rand::Rng;

use super::codeword::CodewordOperator;
use crate::constellation::Constellation;
use crate::error::{invalid, Result};
use crate::link::ImpairedLink;
use crate::math::{CMat, CVec, C64};

/// Second-order statistics the pairwise error probability averages over.
#[derive(Debug, Clone)]
pub struct PepContext {
    /// Covariance of the stacked path gains. `None` is the i.i.d. model
    /// `(1/P)·I`.
    pub covariance: Option<CMat>,
    pub paths: usize,
    pub sigma2: f64,
    pub sigma_h2: f64,
}

impl PepContext {
    pub fn iid(paths: usize, sigma2: f64, sigma_h2: f64) -> Self {
        Self { covariance: None, paths, sigma2, sigma_h2 }
    }

    pub fn with_covariance(mut self, gamma: CMat) -> Self {
        self.covariance = Some(gamma);
        self
    }

    /// Exponent scales of the two Q-approximation terms. With `sigma_h2 = 0`
    /// these are `1/(4σ²)` and `1/(3σ²)`.
    pub fn kappas(&self, sigma_h2: f64) -> (f64, f64) {
        let s = sigma_h2 + self.sigma2;
        (1.0 / (4.0 * s), 1.0 / (3.0 * s))
    }

    fn tap_variance(&self, sigma_h2: f64) -> f64 {
        1.0 / self.paths as f64 + sigma_h2
    }
}

/// `1/(12 Π(1+κ1 γ λ)) + 1/(4 Π(1+κ2 γ λ))` for eigenvalues `λ` of `Ω` and
/// per-tap variance `γ`.
fn pep_from_eigenvalues(eig: &[f64], gamma: f64, k1: f64, k2: f64) -> f64 {
    let l1: f64 = eig.iter().map(|&l| (k1 * gamma * l).ln_1p()).sum();
    let l2: f64 = eig.iter().map(|&l| (k2 * gamma * l).ln_1p()).sum();
    (-l1).exp() / 12.0 + (-l2).exp() / 4.0
}

fn pep_general(xi: &CodewordOperator, ctx: &PepContext, gamma: &CMat, sigma_h2: f64) -> Result<f64> {
    let omega = xi.omega();
    let l = omega.nrows();
    if gamma.shape() != (l, l) {
        return Err(invalid(format!("gain covariance {:?} does not match {l} gains", gamma.shape())));
    }
    let mut g = gamma.clone();
    for i in 0..l {
        g[(i, i)].re += sigma_h2;
    }
    let (k1, k2) = ctx.kappas(sigma_h2);
    let det = |k: f64| {
        let m = CMat::identity(l, l) + &g * &omega * C64::new(k, 0.0);
        m.lu().determinant().re
    };
    Ok(1.0 / (12.0 * det(k1)) + 1.0 / (4.0 * det(k2)))
}

fn pep(xi: &CodewordOperator, ctx: &PepContext, sigma_h2: f64) -> Result<f64> {
    match &ctx.covariance {
        Some(g) => pep_general(xi, ctx, g, sigma_h2),
        None => {
            let (k1, k2) = ctx.kappas(sigma_h2);
            Ok(pep_from_eigenvalues(&xi.omega_eigenvalues(), ctx.tap_variance(sigma_h2), k1, k2))
        }
    }
}

/// Pairwise error probability between `xc` and `xe` averaged over the
/// channel, with perfect channel knowledge.
pub fn upep(link: &ImpairedLink, xc: &CVec, xe: &CVec, ctx: &PepContext) -> Result<f64> {
    let xi = CodewordOperator::linear(link, &(xe - xc))?;
    pep(&xi, ctx, 0.0)
}

/// As [`upep`], with Gaussian gain-estimation errors of variance
/// `ctx.sigma_h2` widening the gain covariance and the noise.
pub fn upep_imperfect_csi(link: &ImpairedLink, xc: &CVec, xe: &CVec, ctx: &PepContext) -> Result<f64> {
    let xi = CodewordOperator::linear(link, &(xe - xc))?;
    pep(&xi, ctx, ctx.sigma_h2)
}

#[derive(Debug, Clone, Copy)]
pub struct UnionBoundOptions {
    /// Largest number of distinct error vectors enumerated exactly.
    pub max_events: usize,
    /// Pairs drawn when enumeration is too large.
    pub sample_pairs: usize,
}

impl Default for UnionBoundOptions {
    fn default() -> Self {
        Self { max_events: 1 << 20, sample_pairs: 20_000 }
    }
}

/// Error events of one link realization: eigenvalues of `Ω(e)` with the
/// bit-distance weight of every codeword pair sharing `e`.
#[derive(Debug, Clone)]
pub struct UnionBound {
    events: Vec<(f64, Vec<f64>)>,
    /// Set when pairs were sampled rather than enumerated.
    pub sampled: bool,
}

impl UnionBound {
    pub fn events(&self) -> usize {
        self.events.len()
    }

    /// Bound on the average BER for the given SNR context. Uses
    /// `ctx.sigma_h2`, so perfect CSI is `sigma_h2 = 0`.
    pub fn ber(&self, ctx: &PepContext) -> f64 {
        let (k1, k2) = ctx.kappas(ctx.sigma_h2);
        let g = ctx.tap_variance(ctx.sigma_h2);
        self.events
            .iter()
            .map(|(w, eig)| w * pep_from_eigenvalues(eig, g, k1, k2))
            .sum()
    }
}

/// Per-symbol difference classes: `(difference, pair count, summed bit
/// distance)`, keyed so that equal differences collapse.
fn symbol_classes(constellation: &Constellation) -> Vec<(C64, f64, f64)> {
    let mut map: BTreeMap<(i64, i64), (C64, f64, f64)> = BTreeMap::new();
    let q = constellation.order();
    for a in 0..q {
        for b in 0..q {
            let d = constellation.point(a) - constellation.point(b);
            let key = ((d.re * 1e9).round() as i64, (d.im * 1e9).round() as i64);
            let entry = map.entry(key).or_insert((d, 0.0, 0.0));
            entry.1 += 1.0;
            entry.2 += Constellation::label_distance(a, b) as f64;
        }
    }
    map.into_values().collect()
}

/// Collects the error events of `link` for the union bound
/// `P_a ≤ Σ D(b_c, b_e) P(x_c → x_e) / (2^{L_b} L_b)`.
///
/// Pairs sharing an error vector share their pairwise probability, so the
/// double sum is enumerated over distinct error vectors with aggregated bit
/// weights. Past `max_events` distinct vectors, ordered pairs are sampled
/// uniformly and the sum rescaled.
pub fn aber_union_bound<R: Rng + ?Sized>(
    link: &ImpairedLink,
    constellation: &Constellation,
    opts: UnionBoundOptions,
    rng: &mut R,
) -> Result<UnionBound> {
    let symbols = link.tx_len();
    let bits = (symbols * constellation.bits_per_symbol()) as f64;
    let classes = symbol_classes(constellation);
    let total_events = (classes.len() as f64).powi(symbols as i32);
    let eigen = |e: &CVec| CodewordOperator::linear(link, e).map(|xi| xi.omega_eigenvalues());
    let mut events = Vec::new();
    if total_events <= opts.max_events as f64 {
        let codewords = (constellation.order() as f64).powi(symbols as i32);
        let zero = classes.iter().position(|c| c.0.norm() == 0.0).unwrap_or(0);
        let mut idx = vec![0usize; symbols];
        loop {
            if idx.iter().any(|&i| i != zero) {
                let e = CVec::from_iterator(symbols, idx.iter().map(|&i| classes[i].0));
                let count: f64 = idx.iter().map(|&i| classes[i].1).product();
                let dist: f64 = idx.iter().map(|&i| classes[i].2 / classes[i].1).sum();
                events.push((count * dist / (codewords * bits), eigen(&e)?));
            }
            // Odometer over class indices.
            let mut k = 0;
            while k < symbols {
                idx[k] += 1;
                if idx[k] < classes.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == symbols {
                break;
            }
        }
        return Ok(UnionBound { events, sampled: false });
    }
    if opts.sample_pairs == 0 {
        return Err(invalid("union bound needs a positive sample budget"));
    }
    let q = constellation.order();
    let codewords = (q as f64).powi(symbols as i32);
    let scale = (codewords - 1.0) / (bits * opts.sample_pairs as f64);
    for _ in 0..opts.sample_pairs {
        let (c, e) = loop {
            let c: Vec<usize> = (0..symbols).map(|_| rng.random_range(0..q)).collect();
            let e: Vec<usize> = (0..symbols).map(|_| rng.random_range(0..q)).collect();
            if c != e {
                break (c, e);
            }
        };
        let dist: u32 = c.iter().zip(&e).map(|(&a, &b)| Constellation::label_distance(a, b)).sum();
        let diff = CVec::from_iterator(
            symbols,
            c.iter().zip(&e).map(|(&a, &b)| constellation.point(a) - constellation.point(b)),
        );
        events.push((scale * dist as f64, eigen(&diff)?));
    }
    Ok(UnionBound { events, sampled: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, ChannelRealization, DopplerModel, DopplerProfile, PathTap};
    use crate::hwi::HwiConfig;
    use crate::math::{complex_normal, db_to_linear, q_function, ONE};
    use crate::modem::AfdmParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_path(n: usize) -> ImpairedLink {
        let p = AfdmParams::new(n, 0, 0, 0, 15e3, 4e9).unwrap();
        let ch = ChannelRealization::from_taps(p, 1, 1, vec![vec![PathTap::new(ONE, 0, 0.0)]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        ImpairedLink::realize(&ch, &HwiConfig::ideal(), 0.0, &mut rng).unwrap()
    }

    fn geometry(rng: &mut ChaCha8Rng, cfg: &HwiConfig) -> ImpairedLink {
        let p = AfdmParams::new(8, 1, 0, 1, 15e3, 4e9).unwrap();
        let ch = sample_channel(1, 2, 2, &p, DopplerProfile { model: DopplerModel::JakesFractional, k_max: 1.0 }, rng)
            .unwrap();
        ImpairedLink::realize(&ch, cfg, 0.0, rng).unwrap()
    }

    fn bpsk_flip(n: usize, at: usize) -> (CVec, CVec) {
        let xc = CVec::from_element(n, ONE);
        let mut xe = xc.clone();
        xe[at] = -ONE;
        (xc, xe)
    }

    #[test]
    fn noise_limit_is_one_third() {
        let link = single_path(4);
        let (xc, xe) = bpsk_flip(4, 1);
        let p = upep(&link, &xc, &xe, &PepContext::iid(1, 1e12, 0.0)).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_path_closed_form() {
        let link = single_path(4);
        let (xc, xe) = bpsk_flip(4, 2);
        let s2 = 0.1;
        let d = 4.0; // |e|² with an orthonormal single-path response
        let p = upep(&link, &xc, &xe, &PepContext::iid(1, s2, 0.0)).unwrap();
        let expected = 1.0 / (12.0 * (1.0 + d / (4.0 * s2))) + 1.0 / (4.0 * (1.0 + d / (3.0 * s2)));
        assert!((p - expected).abs() < 1e-12);
    }

    #[test]
    fn decreasing_in_snr_and_increasing_in_csi_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let link = geometry(&mut rng, &HwiConfig::scheme1());
        let (xc, xe) = bpsk_flip(8, 3);
        let mut last = 1.0;
        for snr in (0..=30).step_by(5) {
            let ctx = PepContext::iid(2, 1.0 / db_to_linear(snr as f64), 0.0);
            let p = upep(&link, &xc, &xe, &ctx).unwrap();
            assert!(p < last && p > 0.0 && p <= 1.0 / 3.0);
            last = p;
            // Estimation error only hurts once the noise is below a tap's
            // variance; at lower SNR the widened covariance dominates.
            let mut prev = p;
            for sh in [0.005, 0.01, 0.02].into_iter().filter(|_| ctx.sigma2 < 0.5) {
                let q = upep_imperfect_csi(&link, &xc, &xe, &PepContext::iid(2, ctx.sigma2, sh)).unwrap();
                assert!(q > prev);
                prev = q;
            }
            // Zero estimation error reduces exactly.
            let z = upep_imperfect_csi(&link, &xc, &xe, &ctx).unwrap();
            assert_eq!(z, p);
        }
    }

    #[test]
    fn general_covariance_matches_iid_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let link = geometry(&mut rng, &HwiConfig::scheme1());
        let (xc, xe) = bpsk_flip(8, 0);
        let ctx = PepContext::iid(2, 0.05, 0.01);
        let gamma = CMat::identity(4, 4) * C64::new(0.5, 0.0);
        let a = upep_imperfect_csi(&link, &xc, &xe, &ctx).unwrap();
        let b = upep_imperfect_csi(&link, &xc, &xe, &ctx.clone().with_covariance(gamma)).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    /// Average of the exact conditional PEP over gain draws `h ~ CN(0, γI)`.
    fn mc_cpep(xi: &CodewordOperator, gamma: f64, noise: f64, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
        let width = xi.blocks[0].ncols() * xi.blocks.len();
        let mut acc = 0.0;
        for _ in 0..draws {
            let h: Vec<C64> = (0..width).map(|_| complex_normal(rng, gamma)).collect();
            let d = xi.apply(&h).unwrap().norm_squared();
            acc += q_function((d / (2.0 * noise)).sqrt());
        }
        acc / draws as f64
    }

    #[test]
    fn monte_carlo_conditional_pep() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let link = single_path(4);
        let (xc, xe) = bpsk_flip(4, 1);
        let s2 = 1.0 / db_to_linear(10.0);
        let xi = CodewordOperator::linear(&link, &(&xe - &xc)).unwrap();
        let mc = mc_cpep(&xi, 1.0, s2, 100_000, &mut rng);
        let p = upep(&link, &xc, &xe, &PepContext::iid(1, s2, 0.0)).unwrap();
        assert!((p - mc).abs() / mc < 0.10, "{p} vs {mc}");

        let sh = 0.02;
        let mc = mc_cpep(&xi, 1.0 + sh, s2 + sh, 100_000, &mut rng);
        let p = upep_imperfect_csi(&link, &xc, &xe, &PepContext::iid(1, s2, sh)).unwrap();
        assert!((p - mc).abs() / mc < 0.10, "{p} vs {mc}");
    }

    #[test]
    fn single_symbol_bound_is_one_pep() {
        let link = single_path(1);
        let bpsk = Constellation::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ub = aber_union_bound(&link, &bpsk, UnionBoundOptions::default(), &mut rng).unwrap();
        assert!(!ub.sampled);
        let ctx = PepContext::iid(1, 0.1, 0.0);
        let (xc, xe) = bpsk_flip(1, 0);
        let p = upep(&link, &xc, &xe, &ctx).unwrap();
        assert!((ub.ber(&ctx) - p).abs() < 1e-14);
    }

    #[test]
    fn grouped_enumeration_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = AfdmParams::new(2, 0, 0, 1, 15e3, 4e9).unwrap();
        let ch = sample_channel(1, 1, 2, &p, DopplerProfile { model: DopplerModel::IntegerOnly, k_max: 0.0 }, &mut rng)
            .unwrap();
        let link = ImpairedLink::realize(&ch, &HwiConfig::scheme1(), 0.0, &mut rng).unwrap();
        let qpsk = Constellation::new(4).unwrap();
        let ctx = PepContext::iid(2, 0.2, 0.01);
        let ub = aber_union_bound(&link, &qpsk, UnionBoundOptions::default(), &mut rng).unwrap();
        // Brute-force double sum over the 16 codewords.
        let mut acc = 0.0;
        for c in 0..16usize {
            for e in 0..16usize {
                if c == e {
                    continue;
                }
                let lc = [c % 4, c / 4];
                let le = [e % 4, e / 4];
                let xc = CVec::from_iterator(2, lc.iter().map(|&l| qpsk.point(l)));
                let xe = CVec::from_iterator(2, le.iter().map(|&l| qpsk.point(l)));
                let d: u32 = lc.iter().zip(&le).map(|(&a, &b)| Constellation::label_distance(a, b)).sum();
                acc += d as f64 * upep_imperfect_csi(&link, &xc, &xe, &ctx).unwrap();
            }
        }
        let brute = acc / (16.0 * 4.0);
        assert!((ub.ber(&ctx) - brute).abs() < 1e-12 * brute);
        // The sampled estimate is unbiased for the same sum.
        let opts = UnionBoundOptions { max_events: 1, sample_pairs: 40_000 };
        let sampled = aber_union_bound(&link, &qpsk, opts, &mut rng).unwrap();
        assert!(sampled.sampled);
        assert!((sampled.ber(&ctx) / brute - 1.0).abs() < 0.03);
    }

    #[test]
    fn bound_rises_with_csi_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let link = geometry(&mut rng, &HwiConfig::scheme1());
        let bpsk = Constellation::new(2).unwrap();
        let ub = aber_union_bound(&link, &bpsk, UnionBoundOptions::default(), &mut rng).unwrap();
        assert_eq!(ub.events(), 3usize.pow(8) - 1);
        for snr in [5.0, 10.0, 20.0, 30.0] {
            let s2 = 1.0 / db_to_linear(snr);
            let a = ub.ber(&PepContext::iid(2, s2, 0.01));
            let b = ub.ber(&PepContext::iid(2, s2, 0.02));
            assert!(b > a);
        }
    }
}
