//! Sweep configuration, read from TOML.

use serde::{Deserialize, Deserializer, Serialize};

use crate::channel::{velocity_to_kmax, DopplerModel, DopplerProfile};
use crate::constellation::{Constellation, Modulation};
use crate::detect::{CsiModel, DistortionHandling, MlDetector};
use crate::error::{Error, Result};
use crate::hwi::HwiConfig;
use crate::modem::{satisfies_dimension_constraint, AfdmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    #[default]
    Afdm,
    Ofdm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Ml,
    #[default]
    Lmmse,
}

/// Quantity the stopping rule tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Stop on `min_bit_errors` or `max_frames`.
    #[default]
    Ber,
    /// Output SINR only needs a fixed frame budget: run `max_frames`.
    Sinr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn single(snr_db: f64) -> Self {
        Self { start: snr_db, stop: snr_db, step: 1.0 }
    }

    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start || !self.start.is_finite() || !self.stop.is_finite() {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DopplerConfig {
    /// Terminal speed; converted with the carrier and subcarrier spacing.
    pub velocity_kmh: Option<f64>,
    /// Explicit maximum normalized Doppler; overrides the velocity.
    pub k_max: Option<f64>,
    pub model: DopplerModel,
    /// Guard width of the chirp rate. Defaults to the largest of 2, 1, 0
    /// that fits the dimension constraint.
    pub k_nu: Option<u32>,
}

impl Default for DopplerConfig {
    fn default() -> Self {
        Self { velocity_kmh: Some(540.0), k_max: None, model: DopplerModel::JakesFractional, k_nu: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stopping {
    pub max_frames: u64,
    pub min_bit_errors: u64,
}

impl Default for Stopping {
    fn default() -> Self {
        Self { max_frames: 200_000, min_bit_errors: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub enabled: bool,
    /// Link realizations the ML union bound is averaged over.
    pub bound_draws: usize,
    /// Distinct error vectors enumerated exactly before sampling.
    pub max_events: usize,
    pub sample_pairs: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self { enabled: true, bound_draws: 20, max_events: 1 << 20, sample_pairs: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub waveform: Waveform,
    pub n: usize,
    pub tx: usize,
    pub rx: usize,
    pub paths: usize,
    /// Largest delay tap; defaults to `paths − 1`.
    pub l_max: Option<usize>,
    pub modulation: Modulation,
    pub snr: SnrGrid,
    pub doppler: DopplerConfig,
    pub delta_f: f64,
    pub f_c: f64,
    pub detector: Detector,
    pub ml_distortion: DistortionHandling,
    pub csi: CsiModel,
    #[serde(deserialize_with = "hwi_section")]
    pub hwi: HwiConfig,
    pub stopping: Stopping,
    /// Frames sent over each channel and impairment draw.
    pub frames_per_channel: u64,
    pub metric: Metric,
    pub theory: TheoryConfig,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            waveform: Waveform::Afdm,
            n: 64,
            tx: 1,
            rx: 1,
            paths: 3,
            l_max: None,
            modulation: Modulation::Qpsk,
            snr: SnrGrid { start: 0.0, stop: 30.0, step: 5.0 },
            doppler: DopplerConfig::default(),
            delta_f: 15e3,
            f_c: 4e9,
            detector: Detector::Lmmse,
            ml_distortion: DistortionHandling::Known,
            csi: CsiModel::perfect(),
            hwi: HwiConfig::ideal(),
            stopping: Stopping::default(),
            frames_per_channel: 1,
            metric: Metric::Ber,
            theory: TheoryConfig::default(),
            seed: 0,
        }
    }
}

/// Named impairment presets accepted by `hwi = "<name>"` and `--preset`.
pub fn hwi_preset(name: &str) -> Option<HwiConfig> {
    match name {
        "ideal" => Some(HwiConfig::ideal()),
        "scheme1" => Some(HwiConfig::scheme1()),
        "scheme2" => Some(HwiConfig::scheme2()),
        "scheme1-additive" => Some(HwiConfig::scheme1().additive_only()),
        "scheme2-additive" => Some(HwiConfig::scheme2().additive_only()),
        _ => None,
    }
}

/// `hwi = "scheme1"`, or a table whose optional `preset` key supplies the
/// base values that the remaining keys override.
fn hwi_section<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<HwiConfig, D::Error> {
    use serde::de::Error as _;
    let value = toml::Value::deserialize(de)?;
    let (base, mut table) = match value {
        toml::Value::String(name) => {
            return hwi_preset(&name).ok_or_else(|| D::Error::custom(format!("unknown HWI preset `{name}`")));
        }
        toml::Value::Table(t) => (HwiConfig::ideal(), t),
        other => return Err(D::Error::custom(format!("hwi must be a preset name or a table, got {}", other.type_str()))),
    };
    let base = match table.remove("preset") {
        Some(toml::Value::String(name)) => {
            hwi_preset(&name).ok_or_else(|| D::Error::custom(format!("unknown HWI preset `{name}`")))?
        }
        Some(_) => return Err(D::Error::custom("hwi.preset must be a string")),
        None => base,
    };
    let mut merged = match toml::Value::try_from(&base).map_err(D::Error::custom)? {
        toml::Value::Table(t) => t,
        _ => unreachable!("HwiConfig serializes to a table"),
    };
    merged.extend(table);
    toml::Value::Table(merged).try_into().map_err(D::Error::custom)
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::from_modulation(self.modulation)
    }

    pub fn l_max(&self) -> usize {
        self.l_max.unwrap_or(self.paths.saturating_sub(1))
    }

    /// Real maximum normalized Doppler of the Jakes law.
    pub fn doppler_k_max(&self) -> f64 {
        match (self.doppler.k_max, self.doppler.velocity_kmh) {
            (Some(k), _) => k,
            (None, Some(v)) => velocity_to_kmax(v, self.f_c, self.delta_f),
            (None, None) => 0.0,
        }
    }

    pub fn doppler_profile(&self) -> DopplerProfile {
        DopplerProfile { model: self.doppler.model, k_max: self.doppler_k_max() }
    }

    /// Waveform parameters: integer Doppler budget from the rounded maximum
    /// Doppler, `c1` from the guard width, zeroed chirps for OFDM.
    pub fn params(&self) -> Result<AfdmParams> {
        let k_int = self.doppler_k_max().round() as u32;
        let l_max = self.l_max();
        let k_nu = match self.doppler.k_nu {
            Some(k) => k,
            None => [2, 1, 0]
                .into_iter()
                .find(|&k| satisfies_dimension_constraint(k_int, k, l_max, self.n))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "N = {} cannot hold k_max = {k_int} with l_max = {l_max}",
                        self.n
                    ))
                })?,
        };
        let p = AfdmParams::new(self.n, k_int, k_nu, l_max, self.delta_f, self.f_c)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(match self.waveform {
            Waveform::Afdm => p,
            Waveform::Ofdm => p.into_ofdm(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.snr.points().is_empty() {
            return bad(format!("SNR grid {:?} is empty", self.snr));
        }
        if self.tx == 0 || self.rx == 0 || self.paths == 0 {
            return bad("antenna and path counts must be positive".into());
        }
        if self.stopping.max_frames == 0 {
            return bad("max_frames must be positive".into());
        }
        if self.frames_per_channel == 0 {
            return bad("frames_per_channel must be positive".into());
        }
        if self.paths > 1 && self.l_max() == 0 {
            return bad("l_max must be positive with more than one path".into());
        }
        if !(self.doppler_k_max() >= 0.0) {
            return bad("maximum Doppler must be non-negative".into());
        }
        self.hwi.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.csi.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.params()?;
        if self.detector == Detector::Ml {
            MlDetector::default().check_space(self.modulation.order(), self.n * self.tx)?;
        }
        if self.metric == Metric::Sinr && self.detector != Detector::Lmmse {
            return bad("the SINR metric needs the LMMSE detector".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_and_overrides() {
        let cfg = SweepConfig::from_toml_str("hwi = \"scheme1\"").unwrap();
        assert_eq!(cfg.hwi, HwiConfig::scheme1());
        let cfg = SweepConfig::from_toml_str("[hwi]\npreset = \"scheme1\"\ncfo = 0.08\n").unwrap();
        assert_eq!(cfg.hwi, HwiConfig { cfo: 0.08, ..HwiConfig::scheme1() });
        let cfg = SweepConfig::from_toml_str("[hwi]\ndco = 0.4\n").unwrap();
        assert_eq!(cfg.hwi, HwiConfig { dco: 0.4, ..HwiConfig::ideal() });
        assert!(SweepConfig::from_toml_str("hwi = \"scheme9\"").is_err());
        assert!(SweepConfig::from_toml_str("[hwi]\nbogus = 1\n").is_err());
    }

    #[test]
    fn scheme1_is_table_row() {
        let h = hwi_preset("scheme1").unwrap();
        assert_eq!((h.dco, h.dac_bits, h.cfo, h.iqi_lambda, h.pa_clip_db), (0.02, Some(5), 0.04, 0.02, Some(4.0)));
        assert!((h.iqi_beta - 1f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids_and_search_spaces() {
        assert!(SweepConfig::from_toml_str("[snr]\nstart = 10\nstop = 0\nstep = 1\n").is_err());
        assert!(SweepConfig::from_toml_str("[snr]\nstart = 0\nstop = 10\nstep = 0\n").is_err());
        let err = SweepConfig::from_toml_str("detector = \"ml\"\nn = 64").unwrap_err();
        assert!(matches!(err, Error::SearchSpace { .. }));
        assert!(SweepConfig::from_toml_str("detector = \"ml\"\nn = 8\npaths = 2\nmodulation = \"bpsk\"").is_ok());
        assert!(SweepConfig::from_toml_str("unknown_key = 3").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SweepConfig {
            hwi: HwiConfig { pn_enabled: true, psi_t: 1e-17, psi_r: 1e-17, ..HwiConfig::scheme2() },
            ..SweepConfig::default()
        };
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(SweepConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn derived_parameters() {
        let cfg = SweepConfig::default();
        assert!((cfg.doppler_k_max() - 0.133426).abs() < 1e-5);
        let p = cfg.params().unwrap();
        assert_eq!((p.k_max, p.k_nu, p.l_max), (0, 2, 2));
        let cfg = SweepConfig { n: 8, paths: 2, ..SweepConfig::default() };
        assert_eq!(cfg.params().unwrap().k_nu, 1);
        let ofdm = SweepConfig { waveform: Waveform::Ofdm, ..SweepConfig::default() };
        assert!(ofdm.params().unwrap().is_ofdm());
        assert_eq!(SnrGrid { start: 0.0, stop: 30.0, step: 5.0 }.points().len(), 7);
    }
}
