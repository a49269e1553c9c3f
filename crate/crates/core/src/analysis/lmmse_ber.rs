//! Closed-form BER of the LMMSE receiver from its per-symbol SINRs.

use crate::constellation::Constellation;
use crate::detect::EqualizerReport;
use crate::math::q_function;

/// `(u1, u2)` of the square-QAM BER approximation `u1·Q(√(u2·χ))`.
///
/// BPSK is not square QAM; its exact `Q(√(2χ))` is used instead.
pub fn ber_coefficients(constellation: &Constellation) -> (f64, f64) {
    let q = constellation.order() as f64;
    if constellation.order() == 2 {
        return (1.0, 2.0);
    }
    let u1 = 4.0 / q.log2() * (1.0 - 1.0 / q.sqrt());
    let u2 = 3.0 / (q - 1.0);
    (u1, u2)
}

fn ber_from_gain(t: f64, u1: f64, u2: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    let sinr = (t / (1.0 - t)).max(0.0);
    u1 * q_function((u2 * sinr).sqrt())
}

/// Mean of `u1·Q(√(u2·χ_c))` over all detected symbols.
pub fn lmmse_ber_approx(report: &EqualizerReport, constellation: &Constellation) -> f64 {
    let (u1, u2) = ber_coefficients(constellation);
    let k = report.t.nrows();
    (0..k).map(|c| ber_from_gain(report.t[(c, c)].re, u1, u2)).sum::<f64>() / k as f64
}

/// The same expression evaluated at the mean diagonal gain.
///
/// Bounds [`lmmse_ber_approx`] from below whenever the map from `T(c,c)` to
/// BER is convex, which holds for BPSK and QPSK. For larger QAM orders it
/// is concave over mid-range gains and the ordering can flip.
pub fn lmmse_ber_lower_bound(report: &EqualizerReport, constellation: &Constellation) -> f64 {
    let (u1, u2) = ber_coefficients(constellation);
    ber_from_gain(report.mean_gain(), u1, u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{CMat, C64};
    use proptest::prelude::*;

    fn report(diag: &[f64]) -> EqualizerReport {
        let t = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&d| C64::new(d, 0.0)),
        ));
        let sinr = diag.iter().map(|&d| d / (1.0 - d)).collect();
        EqualizerReport { t, sinr, regularized: false }
    }

    #[test]
    fn coefficients() {
        let (u1, u2) = ber_coefficients(&Constellation::new(4).unwrap());
        assert!((u1 - 1.0).abs() < 1e-15 && (u2 - 1.0).abs() < 1e-15);
        let (u1, u2) = ber_coefficients(&Constellation::new(16).unwrap());
        assert!((u1 - 0.75).abs() < 1e-15 && (u2 - 0.2).abs() < 1e-15);
        let (u1, u2) = ber_coefficients(&Constellation::new(64).unwrap());
        assert!((u1 - 4.0 / 6.0 * 0.875).abs() < 1e-15 && (u2 - 3.0 / 63.0).abs() < 1e-15);
    }

    #[test]
    fn limits_and_equality() {
        let qpsk = Constellation::new(4).unwrap();
        let r = report(&[1.0 - 1e-14; 4]);
        assert!(lmmse_ber_approx(&r, &qpsk) < 1e-100);
        let r = report(&[0.7; 6]);
        assert!((lmmse_ber_approx(&r, &qpsk) - lmmse_ber_lower_bound(&r, &qpsk)).abs() < 1e-16);
        let r = report(&[0.3]);
        let expected = q_function((0.3f64 / 0.7).sqrt());
        assert!((lmmse_ber_approx(&r, &qpsk) - expected).abs() < 1e-16);
        assert_eq!(lmmse_ber_approx(&r, &qpsk), lmmse_ber_lower_bound(&r, &qpsk));
    }

    #[test]
    fn higher_order_can_exceed_the_mean_gain_value() {
        // Concave region of the 16-QAM map.
        let qam = Constellation::new(16).unwrap();
        let r = report(&[0.4, 0.8]);
        assert!(lmmse_ber_lower_bound(&r, &qam) > lmmse_ber_approx(&r, &qam));
    }

    proptest! {
        #[test]
        fn mean_gain_bounds_from_below(diag in proptest::collection::vec(0.001f64..0.999, 1..32), order in prop::sample::select(vec![2usize, 4])) {
            let c = Constellation::new(order).unwrap();
            let r = report(&diag);
            let lo = lmmse_ber_lower_bound(&r, &c);
            let pe = lmmse_ber_approx(&r, &c);
            prop_assert!(lo <= pe * (1.0 + 1e-12) + 1e-300);
        }
    }
}
