//! Oracles, error norms and convergence studies.

pub mod energy;
pub mod exact;
pub mod fd;
pub mod study;

pub use energy::{energy_norm, weighted_l2, EnergyNorm};
pub use exact::{dalembert_field, exact_dalembert, exact_spherical, ExactKind, RadialProfile};
pub use fd::{fd_reference, fd_snapshots, FdOptions};
pub use study::{convergence_study, fit_slope, residual_norm, ConvergenceReport, StudySetup};
