//! Numerical laboratory for the continuous-time random walk pinning model.
//!
//! A walk `X` is rewarded by `β` for every unit of time spent on top of an
//! independent walk `Y` (the disorder) that jumps at rate `ρ`. The crate
//! computes quenched partition functions by a Feynman–Kac solver, the annealed
//! model through its renewal representation, Monte Carlo estimators on top of
//! the renewal picture, and the experiment drivers that tie them together.

pub mod annealed;
pub mod bessel;
pub mod disorder;
pub mod error;
pub mod experiments;
pub mod fk;
pub mod kernel;
pub mod lattice;
pub mod quad;
pub mod renewal;
pub mod rng;
pub mod roots;
pub mod walk;

pub use annealed::{
    annealed_free_energy, contact_fraction, critical_point, pure_free_energy, AnnealedSolution, ExponentFit,
};
pub use disorder::{sample_disorder, DisorderPath};
pub use error::{PinError, Result};
pub use experiments::{
    lowtemp_lower_bound_formula, lowtemp_report, quenched_fe_estimate, sandwich_report, smoothing_report,
    FreeEnergyCurve, LowTempReport,
};
pub use fk::{
    free_log_partition, interval_log_partition, mean_local_time, pinned_log_partition, PartitionResult, SolverOptions,
};
pub use kernel::JumpKernel;
pub use renewal::{pure_partition_mc, sample_excursion, sample_tilted_renewal, Excursion, RenewalPath};
pub use walk::{green_function, laplace_p0, transition_probability, GreenResult, LaplaceP0};
