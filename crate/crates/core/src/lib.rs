//! Periodically driven Lindblad dynamics: algebraic relaxation conditions,
//! decay rates, propagators, monodromy spectra and limit cycles.
//!
//! Superoperators are real `d² × d²` matrices in the generalized Gell-Mann
//! basis with `𝟙/√d` first. `ħ = 1` throughout.

pub mod cycle;
pub mod error;
pub mod lindblad;
pub mod models;
pub mod operator;
mod par;
pub mod propagation;
pub mod serde_matrix;

pub use cycle::{Classification, LimitCycle, RateCertificate, SpectralReport};
pub use error::{Error, Result};
pub use lindblad::{DissipationChannel, LindbladGenerator, Protocol, SpanAnalysis};
pub use models::ModelSpec;
pub use operator::superop::SuperOp;
pub use operator::{DensityMatrix, Domain, HermitianOp};
pub use par::{is_parallel, sample_rng};
pub use propagation::{PropagationOptions, Propagator, SliceRule};
