//! One preset per reproduced figure, sized to run on a desktop.
//!
//! A recipe is a list of labelled series; each series is a complete
//! [`SweepConfig`] producing one curve.

use super::config::{Detector, DopplerConfig, Metric, SnrGrid, Stopping, SweepConfig, Waveform};
use crate::constellation::Modulation;
use crate::detect::CsiModel;
use crate::hwi::{HwiConfig, LoMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub config: SweepConfig,
}

pub fn recipe_names() -> &'static [&'static str] {
    &["fig3", "fig4", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12"]
}

/// Shared LMMSE setting: QPSK, `N = 32`, `M = J = 2`, three paths at
/// 540 km/h.
fn lmmse_base() -> SweepConfig {
    SweepConfig {
        n: 32,
        tx: 2,
        rx: 2,
        paths: 3,
        snr: SnrGrid { start: 0.0, stop: 30.0, step: 5.0 },
        stopping: Stopping { max_frames: 2_000, min_bit_errors: 200 },
        seed: 1,
        ..SweepConfig::default()
    }
}

fn both_waveforms(label: &str, cfg: SweepConfig) -> [Series; 2] {
    [
        Series { label: format!("afdm-{label}"), config: SweepConfig { waveform: Waveform::Afdm, ..cfg.clone() } },
        Series { label: format!("ofdm-{label}"), config: SweepConfig { waveform: Waveform::Ofdm, ..cfg } },
    ]
}

fn with_hwi(hwi: HwiConfig) -> SweepConfig {
    SweepConfig { hwi, ..lmmse_base() }
}

fn ml_base() -> SweepConfig {
    SweepConfig {
        n: 8,
        tx: 1,
        rx: 2,
        paths: 2,
        modulation: Modulation::Bpsk,
        detector: Detector::Ml,
        snr: SnrGrid { start: 0.0, stop: 24.0, step: 3.0 },
        stopping: Stopping { max_frames: 20_000, min_bit_errors: 200 },
        seed: 1,
        ..SweepConfig::default()
    }
}

pub fn figure_recipe(name: &str) -> Option<Vec<Series>> {
    let ideal = HwiConfig::ideal;
    let series = match name {
        "fig3" => [0.0, 0.04, 0.08]
            .into_iter()
            .flat_map(|cfo| both_waveforms(&format!("cfo{cfo}"), with_hwi(HwiConfig { cfo, ..ideal() })))
            .collect(),
        "fig4" => {
            let pn = |mode| HwiConfig { pn_enabled: true, psi_t: 1e-17, psi_r: 1e-17, pn_mode: mode, ..ideal() };
            [("ideal", ideal()), ("clo", pn(LoMode::Clo)), ("slo", pn(LoMode::Slo))]
                .into_iter()
                .flat_map(|(l, h)| both_waveforms(l, with_hwi(h)))
                .collect()
        }
        "fig6" => std::iter::once(("ideal".to_string(), ideal()))
            .chain([3, 4, 5].map(|b| (format!("dac{b}"), HwiConfig { dac_bits: Some(b), ..ideal() })))
            .flat_map(|(l, h)| both_waveforms(&l, with_hwi(h)))
            .collect(),
        "fig7" => std::iter::once(("ideal".to_string(), ideal()))
            .chain([(0.05, 1.0), (0.05, 2.0), (0.1, 1.0)].map(|(lambda, deg): (f64, f64)| {
                (
                    format!("iqi{lambda}-{deg}deg"),
                    HwiConfig { iqi_lambda: lambda, iqi_beta: deg.to_radians(), ..ideal() },
                )
            }))
            .flat_map(|(l, h)| both_waveforms(&l, with_hwi(h)))
            .collect(),
        "fig8" => std::iter::once(("ideal".to_string(), ideal()))
            .chain([4.0, 2.0, 1.0].map(|db| (format!("clip{db}dB"), HwiConfig { pa_clip_db: Some(db), ..ideal() })))
            .flat_map(|(l, h)| both_waveforms(&l, with_hwi(h)))
            .collect(),
        "fig9" => {
            let mut out = Vec::new();
            for (csi_label, csi) in [("perfect", CsiModel::perfect()), ("sigma0.01", CsiModel::gaussian(0.01))] {
                for d in [0.0, 0.4, 0.8] {
                    out.push(Series {
                        label: format!("{csi_label}-dco{d}"),
                        config: SweepConfig {
                            hwi: HwiConfig { dco: d, ..ideal() },
                            csi,
                            metric: Metric::Sinr,
                            snr: SnrGrid { start: 0.0, stop: 32.0, step: 4.0 },
                            stopping: Stopping { max_frames: 200, min_bit_errors: 0 },
                            ..lmmse_base()
                        },
                    });
                }
            }
            out
        }
        "fig10" => [
            ("ideal", ideal(), 0.0),
            ("imp-csi", ideal(), 0.02),
            ("hwi", HwiConfig::scheme1(), 0.0),
            ("imp-csi-hwi", HwiConfig::scheme1(), 0.02),
        ]
        .into_iter()
        .map(|(l, h, s)| Series {
            label: l.to_string(),
            config: SweepConfig { hwi: h, csi: CsiModel::gaussian(s), ..ml_base() },
        })
        .collect(),
        "fig11" => [
            ("ideal", ideal(), 0.0),
            ("imp-csi", ideal(), 0.005),
            ("hwi", HwiConfig::scheme2(), 0.0),
            ("imp-csi-hwi", HwiConfig::scheme2(), 0.005),
        ]
        .into_iter()
        .map(|(l, h, s)| Series {
            label: l.to_string(),
            config: SweepConfig {
                n: 16,
                hwi: h,
                csi: CsiModel::gaussian(s),
                snr: SnrGrid { start: 0.0, stop: 40.0, step: 4.0 },
                ..lmmse_base()
            },
        })
        .collect(),
        "fig12" => [0.0, 90.0, 180.0, 270.0, 360.0, 450.0, 540.0]
            .into_iter()
            .flat_map(|v| {
                both_waveforms(
                    &format!("v{v}"),
                    SweepConfig {
                        hwi: HwiConfig::scheme1().additive_only(),
                        snr: SnrGrid::single(20.0),
                        doppler: DopplerConfig { velocity_kmh: Some(v), ..DopplerConfig::default() },
                        ..lmmse_base()
                    },
                )
            })
            .collect(),
        _ => return None,
    };
    Some(series)
}
