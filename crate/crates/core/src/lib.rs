pub mod error;
pub mod linalg;
pub mod medium;
pub mod scalar;
pub mod beam;
pub mod ode;
pub mod initial_data;
pub mod field;
pub mod synthesis;
pub mod phase_space;
pub mod validation;
pub mod harness;

pub use error::{Error, Result};
pub use medium::{Branch, MediumModel};

/// Double-precision beam state, the type used by every pipeline stage.
pub type BeamState64<const D: usize> = beam::BeamState<f64, D>;
/// Single-precision beam state for storage and low-accuracy experiments.
pub type BeamState32<const D: usize> = beam::BeamState<f32, D>;
pub type PhaseTaylor64<const D: usize> = beam::PhaseTaylor<f64, D>;
pub type PhaseTaylor32<const D: usize> = beam::PhaseTaylor<f32, D>;
pub type Complex64 = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;
