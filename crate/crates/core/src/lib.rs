//! Finite-difference simulation of the thermistor system
//!
//! ```text
//! div(σ(u) ∇φ) = 0,    u_t - Δu = σ(u) |∇φ|²
//! ```
//!
//! with Dirichlet data on the parabolic boundary, solved by Picard iteration
//! of the decoupling map (potential solve, then one backward-Euler heat step).
//! Alongside the solver sit runtime monitors for the a priori bounds (maximum
//! principle, Joule energy, exponential moments, De Giorgi level sequences)
//! and numeric checkers for the auxiliary inequalities they rest on.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conductivity;
pub mod config_io;
pub mod coupler;
pub mod elliptic;
pub mod error;
pub mod estimates;
pub mod expr;
pub mod grid;
pub mod oracle;
pub mod parabolic;

pub use conductivity::{verify_h1, ConductivityModel, H1Constants, H1Report, MonotoneCubic};
pub use config_io::{load_config, load_config_without_h1, parse_config, to_canonical_json, write_outputs, Manifest};
pub use coupler::{
    apply_b, homotopy_sweep, picard_advance, run_simulation, slab_criterion, Aborted, SimState, SlabCriterion,
    SolverConfig, Trajectory,
};
pub use elliptic::{assemble, solve_spd, LinearSystem, SolverSettings};
pub use error::{ConfigError, Error, Result, Violation, ViolationTag};
pub use estimates::{report, EstimateReport};
pub use expr::{Expr, ScalarFn};
pub use grid::{Dim, FaceCoeffs, Field, GridSpec};
pub use parabolic::{implicit_euler_step, BoundaryData};
