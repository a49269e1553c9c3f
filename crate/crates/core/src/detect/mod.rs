//! Symbol detectors and receiver-side channel knowledge.

pub mod csi;
pub mod lmmse;
pub mod ml;

pub use csi::{CsiErrorForm, CsiModel};
pub use lmmse::{EqualizerReport, LmmseFilter};
pub use ml::{DistortionHandling, MlDecision, MlDetector, MlModel, MlSearch, SearchMethod};
