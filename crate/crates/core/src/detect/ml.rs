//! Maximum-likelihood detection over the widely-linear model
//! `y = H x + G x* + c + noise`.
//!
//! The default search is a Schnorr–Euchner sphere decoder on the real
//! representation `[Re y; Im y]`, exact for any square QAM alphabet. An
//! exhaustive enumeration is kept as a reference.

use crate::constellation::Constellation;
use crate::error::{check_len, Error, Result};
use crate::link::{FrameTranscript, ImpairedLink};
use crate::math::{CMat, CVec, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Largest hypothesis count accepted by default.
pub const DEFAULT_SEARCH_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    #[default]
    Sphere,
    Exhaustive,
}

/// Whether the receiver metric includes the frame's transmit-side
/// distortion realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionHandling {
    /// `Ξ(x)·ĥ` includes the realized DAC/PA distortion column.
    #[default]
    Known,
    /// Only the DC offset is subtracted; the distortion acts as noise.
    Noise,
}

/// `y ≈ H x + G x* + offset`.
#[derive(Debug, Clone)]
pub struct MlModel {
    pub h: CMat,
    pub g: CMat,
    pub offset: CVec,
}

impl MlModel {
    pub fn new(h: CMat, g: CMat, offset: CVec) -> Result<Self> {
        if h.shape() != g.shape() || offset.len() != h.nrows() {
            return Err(Error::Dimension(format!(
                "model shapes {:?}, {:?}, offset {}",
                h.shape(),
                g.shape(),
                offset.len()
            )));
        }
        Ok(Self { h, g, offset })
    }

    /// Model built from the receiver's view of the link (estimated gains,
    /// true impairment draw).
    pub fn from_link(link: &ImpairedLink, frame: &FrameTranscript, handling: DistortionHandling) -> Self {
        let offset = match handling {
            DistortionHandling::Known => link.known_offset(&frame.dac_noise, &frame.pa_noise),
            DistortionHandling::Noise => link.v_di().clone(),
        };
        Self { h: link.h_eff().clone(), g: link.mirror_op().clone(), offset }
    }

    pub fn predict(&self, x: &CVec) -> CVec {
        &self.h * x + &self.g * x.conjugate() + &self.offset
    }

    pub fn metric(&self, y: &CVec, x: &CVec) -> f64 {
        (y - self.predict(x)).norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlDecision {
    pub labels: Vec<usize>,
    pub symbols: CVec,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlDetector {
    pub method: SearchMethod,
    pub cap: u64,
}

impl Default for MlDetector {
    fn default() -> Self {
        Self { method: SearchMethod::Sphere, cap: DEFAULT_SEARCH_CAP }
    }
}

impl MlDetector {
    pub fn exhaustive() -> Self {
        Self { method: SearchMethod::Exhaustive, ..Self::default() }
    }

    /// Rejects alphabets whose `|A|^K` exceeds the cap.
    pub fn check_space(&self, order: usize, symbols: usize) -> Result<()> {
        let hyp = (order as f64).powi(symbols as i32);
        if hyp > self.cap as f64 {
            return Err(Error::SearchSpace { hypotheses: hyp, cap: self.cap });
        }
        Ok(())
    }

    pub fn detect(&self, y: &CVec, model: &MlModel, constellation: &Constellation) -> Result<MlDecision> {
        check_len(model.h.nrows(), y.len())?;
        let search = self.prepare(&model.h, &model.g, constellation)?;
        let labels = search.decide(&(y - &model.offset))?;
        let symbols = CVec::from_iterator(labels.len(), labels.iter().map(|&l| constellation.point(l)));
        let metric = model.metric(y, &symbols);
        Ok(MlDecision { labels, symbols, metric })
    }

    /// Search state for a fixed `(H, G)`, reusable across frames that share
    /// the channel.
    pub fn prepare<'a>(&self, h: &'a CMat, g: &'a CMat, constellation: &'a Constellation) -> Result<MlSearch<'a>> {
        if h.shape() != g.shape() {
            return Err(Error::Dimension(format!("model shapes {:?}, {:?}", h.shape(), g.shape())));
        }
        let k = h.ncols();
        self.check_space(constellation.order(), k)?;
        let dims = if constellation.is_real() { k } else { 2 * k };
        let kind = if self.method == SearchMethod::Sphere && 2 * h.nrows() >= dims {
            SearchKind::Sphere(Box::new(SphereBasis::new(h, g, constellation)))
        } else {
            SearchKind::Exhaustive
        };
        Ok(MlSearch { h, g, constellation, kind })
    }
}

enum SearchKind {
    Exhaustive,
    Sphere(Box<SphereBasis>),
}

/// Prepared ML search over `y − offset ≈ H x + G x*`.
pub struct MlSearch<'a> {
    h: &'a CMat,
    g: &'a CMat,
    constellation: &'a Constellation,
    kind: SearchKind,
}

impl MlSearch<'_> {
    /// Labels of the minimizer for an offset-free observation.
    pub fn decide(&self, target: &CVec) -> Result<Vec<usize>> {
        check_len(self.h.nrows(), target.len())?;
        Ok(match &self.kind {
            SearchKind::Exhaustive => exhaustive(target, self.h, self.g, self.constellation),
            SearchKind::Sphere(basis) => basis.search(target, self.constellation),
        })
    }
}

fn exhaustive(target: &CVec, h: &CMat, g: &CMat, constellation: &Constellation) -> Vec<usize> {
    let k = h.ncols();
    let order = constellation.order();
    let pts = constellation.points();
    let mut labels = vec![0usize; k];
    let x0 = CVec::from_element(k, pts[0]);
    let mut resid = target - h * &x0 - g * x0.conjugate();
    let mut best = resid.norm_squared();
    let mut best_labels = labels.clone();
    let mut steps = 0u64;
    'outer: loop {
        // Lexicographic odometer: the last symbol varies fastest.
        let mut pos = k;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            let old = pts[labels[pos]];
            labels[pos] = (labels[pos] + 1) % order;
            let delta = pts[labels[pos]] - old;
            let hc = h.column(pos);
            let gc = g.column(pos);
            let dc = delta.conj();
            for r in 0..resid.len() {
                resid[r] -= hc[r] * delta + gc[r] * dc;
            }
            if labels[pos] != 0 {
                break;
            }
        }
        steps += 1;
        if steps % 4096 == 0 {
            let x = CVec::from_iterator(k, labels.iter().map(|&l| pts[l]));
            resid = target - h * &x - g * x.conjugate();
        }
        let d = resid.norm_squared();
        if d < best {
            best = d;
            best_labels.copy_from_slice(&labels);
        }
    }
    best_labels
}

struct Sphere<'a> {
    r: &'a DMatrix<f64>,
    target: DVector<f64>,
    /// Candidate amplitudes per real dimension.
    levels: Vec<&'a [f64]>,
    z: Vec<usize>,
    best: f64,
    best_z: Vec<usize>,
    label_of: &'a [Vec<usize>],
    real: bool,
}

impl Sphere<'_> {
    fn labels(&self, z: &[usize]) -> Vec<usize> {
        if self.real {
            z.iter().map(|&i| self.label_of[i][0]).collect()
        } else {
            z.chunks(2).map(|c| self.label_of[c[0]][c[1]]).collect()
        }
    }

    fn search(&mut self, level: usize, partial: f64) {
        let mut acc = self.target[level];
        for col in level + 1..self.z.len() {
            acc -= self.r[(level, col)] * self.levels[col][self.z[col]];
        }
        let diag = self.r[(level, level)];
        let center = if diag.abs() > 1e-300 { acc / diag } else { 0.0 };
        let lv = self.levels[level];
        // Nearest level first, ties to the lower index.
        let mut small = [0usize; 16];
        let mut large = Vec::new();
        let order: &mut [usize] = if lv.len() <= small.len() {
            &mut small[..lv.len()]
        } else {
            large.resize(lv.len(), 0);
            &mut large
        };
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        order.sort_unstable_by(|&a, &b| {
            (lv[a] - center)
                .abs()
                .partial_cmp(&(lv[b] - center).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &idx in order.iter() {
            let e = diag * (lv[idx] - center);
            let d = partial + e * e;
            if d > self.best {
                break;
            }
            self.z[level] = idx;
            if level == 0 {
                if d < self.best || self.labels(&self.z) < self.labels(&self.best_z) {
                    self.best = d;
                    self.best_z.clone_from(&self.z);
                }
            } else {
                self.search(level - 1, d);
            }
        }
    }
}

/// Real-valued triangular form of the model on the interleaved unknowns
/// `[Re x0, Im x0, Re x1, ...]`.
struct SphereBasis {
    q_t: DMatrix<f64>,
    r: DMatrix<f64>,
    /// Constellation label of each (Re level, Im level) pair.
    label_of: Vec<Vec<usize>>,
}

impl SphereBasis {
    fn new(h: &CMat, g: &CMat, constellation: &Constellation) -> Self {
        let k = h.ncols();
        let rows = h.nrows();
        let real = constellation.is_real();
        let dims = if real { k } else { 2 * k };
        let sum = h + g;
        let diff = h - g;
        let i = C64::new(0.0, 1.0);
        // Im columns act as i(H − G).
        let mut a = DMatrix::<f64>::zeros(2 * rows, dims);
        for s in 0..k {
            let re_col = if real { s } else { 2 * s };
            for r in 0..rows {
                a[(r, re_col)] = sum[(r, s)].re;
                a[(rows + r, re_col)] = sum[(r, s)].im;
                if !real {
                    let b = i * diff[(r, s)];
                    a[(r, re_col + 1)] = b.re;
                    a[(rows + r, re_col + 1)] = b.im;
                }
            }
        }
        let qr = a.qr();
        let label_of = constellation
            .re_levels()
            .iter()
            .map(|&a| constellation.im_levels().iter().map(|&b| constellation.nearest(C64::new(a, b))).collect())
            .collect();
        Self { q_t: qr.q().transpose(), r: qr.r(), label_of }
    }

    fn search(&self, target: &CVec, constellation: &Constellation) -> Vec<usize> {
        let real = constellation.is_real();
        let dims = self.r.ncols();
        let k = if real { dims } else { dims / 2 };
        let yr = DVector::from_iterator(2 * target.len(), target.iter().map(|v| v.re).chain(target.iter().map(|v| v.im)));
        let re = constellation.re_levels();
        let im = constellation.im_levels();
        let mut levels: Vec<&[f64]> = Vec::with_capacity(dims);
        for _ in 0..k {
            levels.push(re);
            if !real {
                levels.push(im);
            }
        }
        let mut s = Sphere {
            r: &self.r,
            target: &self.q_t * yr,
            levels,
            z: vec![0; dims],
            best: f64::INFINITY,
            best_z: vec![0; dims],
            label_of: &self.label_of,
            real,
        };
        s.search(dims - 1, 0.0);
        s.labels(&s.best_z.clone())
    }
}
