//! Linear MMSE equalization with the mirror, DC and distortion terms folded
//! into a coloured interference covariance.

use crate::constellation::Constellation;
use crate::error::{check_len, Error, Result};
use crate::math::{CMat, CVec, C64};
use nalgebra::Cholesky;

/// Equalizer `G = Ĥᴴ W⁻¹`, `W = ĤĤᴴ + Z + R_v`, with `Z` the channel-error
/// Gram term.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    g: CMat,
    report: EqualizerReport,
}

/// Per-symbol quality figures of an equalizer.
#[derive(Debug, Clone)]
pub struct EqualizerReport {
    /// `T = G·Ĥ`.
    pub t: CMat,
    /// `χ_c = T(c,c)/(1 − T(c,c))`.
    pub sinr: Vec<f64>,
    /// Set when `W` needed diagonal loading to factor.
    pub regularized: bool,
}

impl EqualizerReport {
    /// Mean diagonal of `T`.
    pub fn mean_gain(&self) -> f64 {
        let k = self.t.nrows();
        (0..k).map(|c| self.t[(c, c)].re).sum::<f64>() / k as f64
    }

    pub fn mean_sinr(&self) -> f64 {
        self.sinr.iter().sum::<f64>() / self.sinr.len() as f64
    }
}

/// Jitter added to the diagonal when the Cholesky factorization fails.
const JITTER: f64 = 1e-12;

impl LmmseFilter {
    pub fn new(h_hat: &CMat, error_gram: &CMat, r_v: &CMat) -> Result<Self> {
        let rows = h_hat.nrows();
        for m in [error_gram, r_v] {
            if m.shape() != (rows, rows) {
                return Err(Error::Dimension(format!(
                    "covariance {:?} does not match {rows} receive samples",
                    m.shape()
                )));
            }
        }
        let mut w = h_hat * h_hat.adjoint() + error_gram + r_v;
        // Symmetrize against rounding before factoring.
        w = (&w + w.adjoint()) * C64::new(0.5, 0.0);
        let scale = (0..rows).map(|i| w[(i, i)].re).sum::<f64>() / rows as f64;
        let mut regularized = false;
        let mut load = JITTER * scale.max(1.0);
        let chol = loop {
            if let Some(c) = Cholesky::new(w.clone()) {
                break c;
            }
            regularized = true;
            for i in 0..rows {
                w[(i, i)].re += load;
            }
            load *= 10.0;
            if load > scale.max(1.0) {
                return Err(Error::InvalidParams("LMMSE weighting matrix is not positive definite".into()));
            }
        };
        // W⁻¹Ĥ, then G = (W⁻¹Ĥ)ᴴ since W is Hermitian.
        let wh = chol.solve(h_hat);
        let g = wh.adjoint();
        let t = &g * h_hat;
        let sinr = (0..t.nrows())
            .map(|c| {
                let d = t[(c, c)].re;
                d / (1.0 - d)
            })
            .collect();
        Ok(Self { g, report: EqualizerReport { t, sinr, regularized } })
    }

    pub fn matrix(&self) -> &CMat {
        &self.g
    }

    pub fn report(&self) -> &EqualizerReport {
        &self.report
    }

    /// Soft estimates `x̂ = G y`.
    pub fn equalize(&self, y: &CVec) -> Result<CVec> {
        check_len(self.g.ncols(), y.len())?;
        Ok(&self.g * y)
    }

    /// Nearest-point labels after removing the per-symbol bias `T(c,c)`.
    pub fn decide(&self, y: &CVec, constellation: &Constellation) -> Result<Vec<usize>> {
        let x_hat = self.equalize(y)?;
        Ok(x_hat
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let bias = self.report.t[(c, c)].re;
                let z = if bias > 0.0 { v / bias } else { v };
                constellation.nearest(z)
            })
            .collect())
    }
}

/// SINR of symbol `c` from the explicit signal/interference split of the
/// filter output: `|g_cᴴĥ_c|² / (Σ_{c'≠c}|g_cᴴĥ_{c'}|² + g_cᴴ Z g_c)`, with
/// `Z` the error Gram plus interference covariance.
pub fn sinr_from_decomposition(g: &CMat, h_hat: &CMat, z: &CMat, c: usize) -> f64 {
    let row = g.row(c);
    let signal = (row * h_hat.column(c))[(0, 0)].norm_sqr();
    let mut interf = 0.0;
    for k in 0..h_hat.ncols() {
        if k != c {
            interf += (row * h_hat.column(k))[(0, 0)].norm_sqr();
        }
    }
    interf += (row * z * row.adjoint())[(0, 0)].re;
    signal / interf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, DopplerModel, DopplerProfile};
    use crate::hwi::HwiConfig;
    use crate::link::{random_labels, ImpairedLink};
    use crate::math::complex_normal;
    use crate::modem::AfdmParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ident(n: usize, v: f64) -> CMat {
        CMat::identity(n, n) * C64::new(v, 0.0)
    }

    #[test]
    fn scalar_wiener_filter() {
        let h = CMat::identity(1, 1);
        let f = LmmseFilter::new(&h, &CMat::zeros(1, 1), &ident(1, 1.0)).unwrap();
        assert!((f.report().t[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((f.report().sinr[0] - 1.0).abs() < 1e-14);
        assert!(!f.report().regularized);
    }

    #[test]
    fn zero_forcing_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = CMat::from_fn(6, 6, |_, _| complex_normal(&mut rng, 1.0));
        let f = LmmseFilter::new(&h, &CMat::zeros(6, 6), &ident(6, 1e-12)).unwrap();
        assert!(f.report().sinr.iter().all(|&s| s > 1e6));
    }

    #[test]
    fn sinr_identity_matches_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let h = CMat::from_fn(8, 6, |_, _| complex_normal(&mut rng, 1.0));
            let e = CMat::from_fn(8, 6, |_, _| complex_normal(&mut rng, 0.01));
            let gram = &e * e.adjoint();
            let b = CMat::from_fn(8, 8, |_, _| complex_normal(&mut rng, 0.05));
            let rv = &b * b.adjoint() + ident(8, 0.1);
            let f = LmmseFilter::new(&h, &gram, &rv).unwrap();
            let z = &gram + &rv;
            for c in 0..6 {
                let direct = sinr_from_decomposition(f.matrix(), &h, &z, c);
                assert!((direct - f.report().sinr[c]).abs() < 1e-9 * direct.max(1.0));
                let t = f.report().t[(c, c)].re;
                assert!(t > 0.0 && t < 1.0);
            }
        }
    }

    #[test]
    fn singular_weighting_is_regularized() {
        let h = CMat::zeros(3, 2);
        let f = LmmseFilter::new(&h, &CMat::zeros(3, 3), &CMat::zeros(3, 3)).unwrap();
        assert!(f.report().regularized);
    }

    #[test]
    fn output_second_moment_matches_t() {
        // E{x̂x̂ᴴ} = G(ĤĤᴴ + R_v)Gᴴ = T when W is the true covariance.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = AfdmParams::new(8, 1, 0, 1, 15e3, 4e9).unwrap();
        let ch = sample_channel(1, 1, 2, &p, DopplerProfile { model: DopplerModel::JakesFractional, k_max: 1.0 }, &mut rng)
            .unwrap();
        let link = ImpairedLink::realize(&ch, &HwiConfig::ideal(), 0.3, &mut rng).unwrap();
        let f = LmmseFilter::new(link.h_eff(), &CMat::zeros(8, 8), &link.interference_covariance()).unwrap();
        let qpsk = Constellation::new(4).unwrap();
        let frames = 10_000;
        let mut acc = CMat::zeros(8, 8);
        for _ in 0..frames {
            let (_, x) = random_labels(&qpsk, 8, &mut rng);
            let t = link.transmit_frame(&x, &mut rng).unwrap();
            let xh = f.equalize(&t.y).unwrap();
            acc.ger(C64::new(1.0, 0.0), &xh, &xh.conjugate(), C64::new(1.0, 0.0));
        }
        acc /= C64::new(frames as f64, 0.0);
        let t = &f.report().t;
        let scale = (0..8).map(|c| t[(c, c)].re).fold(0.0, f64::max);
        let err = acc.iter().zip(t.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err / scale < 0.05, "{err}");
    }
}
