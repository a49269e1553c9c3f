//! Seeded Monte-Carlo sweep over an SNR grid.
//!
//! Randomness is split per unit of work: the ChaCha8 key of a channel block
//! is the four little-endian words `(seed, snr index, block index, stream)`,
//! so any worker may run any block and the reduction, done in block order,
//! sees the same numbers for every pool size.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Detector, Metric, SweepConfig};
use crate::analysis::{aber_union_bound, lmmse_ber_approx, lmmse_ber_lower_bound, PepContext, UnionBoundOptions};
use crate::channel::sample_channel;
use crate::constellation::Constellation;
use crate::detect::csi::{effective_support, expected_error_gram, inject_heff_error, perturb_gains};
use crate::detect::{CsiErrorForm, DistortionHandling, LmmseFilter, MlDetector};
use crate::error::{Error, Result};
use crate::link::{random_labels, ImpairedLink};
use crate::math::{db_to_linear, linear_to_db, CMat};
use crate::modem::AfdmParams;

/// Channel blocks dispatched to the pool between stopping checks.
const BATCH_BLOCKS: u64 = 64;

const STREAM_CHANNEL: u64 = 0;
const STREAM_BOUND: u64 = 1;

/// Generator of work unit `(snr_index, block)` on `stream`.
pub fn unit_rng(seed: u64, snr_index: u64, block: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, snr_index, block, stream]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrRow {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    /// `bit_errors / (frames·L_b)`; empty for analytic-only rows.
    pub ber_sim: Option<f64>,
    /// ML union bound or LMMSE closed-form approximation.
    pub ber_theory: Option<f64>,
    /// LMMSE Jensen lower bound.
    pub ber_lower: Option<f64>,
    pub mean_sinr_db: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub version: String,
    pub seed: u64,
    pub wall_time_s: f64,
    /// Set when the union bound sampled codeword pairs.
    pub bound_sampled: bool,
    pub config: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub metadata: Metadata,
    pub rows: Vec<SnrRow>,
}

/// LMMSE figures of one channel draw.
#[derive(Debug, Clone, Copy, Default)]
struct LmmseStats {
    ber_approx: f64,
    ber_lower: f64,
    sinr: f64,
}

/// One channel draw: its LMMSE figures and the bit errors of each frame.
struct Block {
    lmmse: LmmseStats,
    errors: Vec<u64>,
}

struct Prepared {
    params: AfdmParams,
    constellation: Constellation,
    bits_per_frame: u64,
}

impl Prepared {
    fn new(cfg: &SweepConfig) -> Result<Self> {
        cfg.validate()?;
        let constellation = cfg.constellation();
        let bits_per_frame = (cfg.n * cfg.tx * constellation.bits_per_symbol()) as u64;
        Ok(Self { params: cfg.params()?, constellation, bits_per_frame })
    }

    fn link(&self, cfg: &SweepConfig, sigma2: f64, rng: &mut ChaCha8Rng) -> Result<ImpairedLink> {
        let ch = sample_channel(cfg.tx, cfg.rx, cfg.paths, &self.params, cfg.doppler_profile(), rng)?;
        ImpairedLink::realize(&ch, &cfg.hwi, sigma2, rng)
    }
}

/// One channel and impairment draw followed by `count` frames.
fn run_block(cfg: &SweepConfig, prep: &Prepared, sigma2: f64, count: u64, rng: &mut ChaCha8Rng) -> Result<Block> {
    let link = prep.link(cfg, sigma2, rng)?;
    let c = &prep.constellation;
    let len = link.tx_len();
    match cfg.detector {
        Detector::Ml => {
            let rx_view = if cfg.csi.is_perfect() {
                link.clone()
            } else {
                link.with_channel(&perturb_gains(link.channel(), cfg.csi.sigma_h2, rng)?)?
            };
            let search = MlDetector::default().prepare(rx_view.h_eff(), rx_view.mirror_op(), c)?;
            let errors = (0..count)
                .map(|_| {
                    let (labels, x) = random_labels(c, len, rng);
                    let frame = link.transmit_frame(&x, rng)?;
                    let offset = match cfg.ml_distortion {
                        DistortionHandling::Known => rx_view.known_offset(&frame.dac_noise, &frame.pa_noise),
                        DistortionHandling::Noise => rx_view.v_di().clone(),
                    };
                    Ok(bit_errors(&labels, &search.decide(&(&frame.y - offset))?))
                })
                .collect::<Result<_>>()?;
            Ok(Block { lmmse: LmmseStats::default(), errors })
        }
        Detector::Lmmse => {
            let mask;
            let (h_hat, gram) = if cfg.csi.is_perfect() {
                (link.h_eff().clone(), CMat::zeros(link.rx_len(), link.rx_len()))
            } else {
                mask = effective_support(&link);
                let (h_hat, err) = inject_heff_error(link.h_eff(), &mask, cfg.csi.sigma_h2, rng);
                let gram = match cfg.csi.error_form {
                    CsiErrorForm::Realization => &err * err.adjoint(),
                    CsiErrorForm::Expectation => expected_error_gram(&mask, cfg.csi.sigma_h2),
                };
                (h_hat, gram)
            };
            let filter = LmmseFilter::new(&h_hat, &gram, &link.interference_covariance())?;
            let report = filter.report();
            let lmmse = LmmseStats {
                ber_approx: lmmse_ber_approx(report, c),
                ber_lower: lmmse_ber_lower_bound(report, c),
                sinr: report.mean_sinr(),
            };
            let errors = (0..count)
                .map(|_| {
                    let (labels, x) = random_labels(c, len, rng);
                    let frame = link.transmit_frame(&x, rng)?;
                    Ok(bit_errors(&labels, &filter.decide(&frame.y, c)?))
                })
                .collect::<Result<_>>()?;
            Ok(Block { lmmse, errors })
        }
    }
}

fn bit_errors(sent: &[usize], decided: &[usize]) -> u64 {
    sent.iter()
        .zip(decided)
        .map(|(&a, &b)| Constellation::label_distance(a, b) as u64)
        .sum()
}

/// Union bound at every grid point, averaged over `bound_draws` link
/// realizations.
fn union_bound_curve(cfg: &SweepConfig, prep: &Prepared, snrs: &[f64]) -> Result<(Vec<f64>, bool)> {
    let draws = cfg.theory.bound_draws.max(1);
    let opts = UnionBoundOptions { max_events: cfg.theory.max_events, sample_pairs: cfg.theory.sample_pairs };
    let bounds: Vec<_> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = unit_rng(cfg.seed, u64::MAX, d, STREAM_BOUND);
            let link = prep.link(cfg, 0.0, &mut rng)?;
            aber_union_bound(&link, &prep.constellation, opts, &mut rng)
        })
        .collect::<Result<_>>()?;
    let sampled = bounds.iter().any(|b| b.sampled);
    let curve = snrs
        .iter()
        .map(|&snr| {
            let ctx = PepContext::iid(cfg.paths, 1.0 / db_to_linear(snr), cfg.csi.sigma_h2);
            bounds.iter().map(|b| b.ber(&ctx)).sum::<f64>() / draws as f64
        })
        .collect();
    Ok((curve, sampled))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn metadata(cfg: &SweepConfig, wall: f64, sampled: bool) -> Metadata {
    Metadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        wall_time_s: wall,
        bound_sampled: sampled,
        config: cfg.clone(),
    }
}

/// Runs the Monte-Carlo sweep. `workers = None` uses rayon's default pool
/// size; the result does not depend on it.
pub fn run_sweep(cfg: &SweepConfig, workers: Option<usize>) -> Result<SweepResult> {
    let start = Instant::now();
    let prep = Prepared::new(cfg)?;
    let snrs = cfg.snr.points();
    pool(workers)?.install(|| {
        let (bound, sampled) = if cfg.theory.enabled && cfg.detector == Detector::Ml {
            let (c, s) = union_bound_curve(cfg, &prep, &snrs)?;
            (Some(c), s)
        } else {
            (None, false)
        };
        let mut rows = Vec::with_capacity(snrs.len());
        for (si, &snr) in snrs.iter().enumerate() {
            let row_start = Instant::now();
            let sigma2 = 1.0 / db_to_linear(snr);
            let stop = &cfg.stopping;
            let fpc = cfg.frames_per_channel;
            let mut frames = 0u64;
            let mut bit_errors = 0u64;
            let (mut approx, mut lower, mut sinr) = (0.0, 0.0, 0.0);
            let mut next_block = 0u64;
            'outer: while frames < stop.max_frames {
                let blocks_left = (stop.max_frames - frames).div_ceil(fpc);
                let batch = blocks_left.min(BATCH_BLOCKS);
                let results: Vec<Block> = (next_block..next_block + batch)
                    .into_par_iter()
                    .map(|b| {
                        let mut rng = unit_rng(cfg.seed, si as u64, b, STREAM_CHANNEL);
                        run_block(cfg, &prep, sigma2, fpc, &mut rng)
                    })
                    .collect::<Result<_>>()?;
                next_block += batch;
                for (block, e) in results.iter().flat_map(|b| b.errors.iter().map(move |&e| (b, e))) {
                    frames += 1;
                    bit_errors += e;
                    approx += block.lmmse.ber_approx;
                    lower += block.lmmse.ber_lower;
                    sinr += block.lmmse.sinr;
                    let enough = cfg.metric == Metric::Ber && bit_errors >= stop.min_bit_errors;
                    if enough || frames == stop.max_frames {
                        break 'outer;
                    }
                }
            }
            let n = frames as f64;
            let lmmse = cfg.detector == Detector::Lmmse;
            rows.push(SnrRow {
                snr_db: snr,
                frames,
                bit_errors,
                ber_sim: Some(bit_errors as f64 / (n * prep.bits_per_frame as f64)),
                ber_theory: match &bound {
                    Some(c) => Some(c[si]),
                    None if lmmse && cfg.theory.enabled => Some(approx / n),
                    None => None,
                },
                ber_lower: (lmmse && cfg.theory.enabled).then(|| lower / n),
                mean_sinr_db: lmmse.then(|| linear_to_db(sinr / n)),
                wall_time_s: row_start.elapsed().as_secs_f64(),
            });
        }
        Ok(SweepResult { metadata: metadata(cfg, start.elapsed().as_secs_f64(), sampled), rows })
    })
}

/// Analytic curves only. The ML union bound uses the configured draws; for
/// LMMSE the closed form is averaged over `stopping.max_frames` channel
/// draws without transmitting frames.
pub fn run_analysis(cfg: &SweepConfig, workers: Option<usize>) -> Result<SweepResult> {
    let start = Instant::now();
    let prep = Prepared::new(cfg)?;
    let snrs = cfg.snr.points();
    pool(workers)?.install(|| {
        let mut sampled = false;
        let rows = match cfg.detector {
            Detector::Ml => {
                let (curve, s) = union_bound_curve(cfg, &prep, &snrs)?;
                sampled = s;
                snrs.iter()
                    .zip(curve)
                    .map(|(&snr, b)| analytic_row(snr, Some(b), None, None))
                    .collect()
            }
            Detector::Lmmse => {
                let frames = cfg.stopping.max_frames;
                let mut rows = Vec::new();
                for (si, &snr) in snrs.iter().enumerate() {
                    let sigma2 = 1.0 / db_to_linear(snr);
                    let stats: Vec<LmmseStats> = (0..frames)
                        .into_par_iter()
                        .map(|b| {
                            let mut rng = unit_rng(cfg.seed, si as u64, b, STREAM_CHANNEL);
                            run_block(cfg, &prep, sigma2, 0, &mut rng).map(|blk| blk.lmmse)
                        })
                        .collect::<Result<_>>()?;
                    let n = frames as f64;
                    let mean = |f: fn(&LmmseStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
                    rows.push(analytic_row(
                        snr,
                        Some(mean(|s| s.ber_approx)),
                        Some(mean(|s| s.ber_lower)),
                        Some(linear_to_db(mean(|s| s.sinr))),
                    ));
                }
                rows
            }
        };
        Ok(SweepResult { metadata: metadata(cfg, start.elapsed().as_secs_f64(), sampled), rows })
    })
}

fn analytic_row(snr_db: f64, theory: Option<f64>, lower: Option<f64>, sinr: Option<f64>) -> SnrRow {
    SnrRow {
        snr_db,
        frames: 0,
        bit_errors: 0,
        ber_sim: None,
        ber_theory: theory,
        ber_lower: lower,
        mean_sinr_db: sinr,
        wall_time_s: 0.0,
    }
}
