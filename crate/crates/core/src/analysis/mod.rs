//! Closed-form performance predictions: codeword matrices, pairwise error
//! probabilities and their union bound, numerical diversity probes, and the
//! LMMSE BER approximation with its Jensen lower bound.

pub mod codeword;
pub mod diversity;
pub mod lmmse_ber;
pub mod pep;

pub use crate::math::{q_approx, q_function};
pub use codeword::CodewordOperator;
pub use diversity::{diversity_probe, DiversityReport};
pub use lmmse_ber::{ber_coefficients, lmmse_ber_approx, lmmse_ber_lower_bound};
pub use pep::{aber_union_bound, upep, upep_imperfect_csi, PepContext, UnionBound, UnionBoundOptions};
