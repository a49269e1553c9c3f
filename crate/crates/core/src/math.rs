//! Shared numeric helpers: complex aliases, Gaussian sampling and the
//! Gaussian tail function.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `e^{i 2π t}` with the argument reduced modulo one first, so that large
/// chirp phases such as `c·n²` keep full precision.
#[inline]
pub fn cis_turns(t: f64) -> C64 {
    let frac = t - t.floor();
    C64::from_polar(1.0, 2.0 * PI * frac)
}

/// One draw of CN(0, variance).
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVec {
    CVec::from_fn(len, |_, _| complex_normal(rng, variance))
}

/// Gaussian tail probability `Q(x) = P[N(0,1) > x]`.
pub fn q_function(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    0.5 * statrs::function::erf::erfc(x * FRAC_1_SQRT_2)
}

/// Two-exponential approximation `Q(x) ≈ e^{-x²/2}/12 + e^{-2x²/3}/4`.
///
/// Underestimates `Q` near the origin (`q_approx(0) = 1/3`) and is the form
/// the pairwise-error averages are built on.
pub fn q_approx(x: f64) -> f64 {
    let x2 = x * x;
    (-x2 / 2.0).exp() / 12.0 + (-2.0 * x2 / 3.0).exp() / 4.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Block-diagonal `I_K ⊗ X`.
pub fn kron_identity(k: usize, x: &CMat) -> CMat {
    let (r, c) = x.shape();
    let mut out = CMat::zeros(k * r, k * c);
    for b in 0..k {
        out.view_mut((b * r, b * c), (r, c)).copy_from(x);
    }
    out
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
