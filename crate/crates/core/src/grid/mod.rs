//! Linearized multi-machine grid model.
//!
//! The model state concatenates generator bus angles `δ`, load bus angles
//! `θ`, and generator frequency deviations `ω` (Hz). The descriptor form
//! carries the load-bus angle rows as algebraic constraints; eliminating
//! them yields the reduced form on `(δ, ω)` used for production stepping.
//!
//! Block conventions: for a coupling block `X`, `X¹ := diag(X·1)` is the
//! diagonal of row sums. Off-diagonal admittance entries hold the raw branch
//! susceptance; unconnected bus pairs are zero. Frequency-row gain blocks
//! fold the droop gain into the proportional diagonal (`K^P + R`), both
//! acting on `ω` in pu/Hz.

mod build;
mod sim;
mod stability;

pub use build::{
    build_admittance, build_descriptor, reduce, row_sum_diag, AdmittancePartition,
    DescriptorSystem, ReducedSystem,
};
pub use sim::{DescriptorSim, GridInput, SimState};
pub use stability::{
    abscissa_sweep, critical_gain_bisect, dlaa_system_matrix, power_flow_residual,
    spectral_abscissa, CriticalGain, MARGINAL_RE_EPS,
};
