//! Robust predefined-time consensus for first-order perturbed agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: weighted undirected graphs, Laplacian / incidence views, the
//!   algebraic connectivity and the local error signals the protocols consume.
//! - [`fixed_time`]: the scalar fixed-time system, its settling bound, a brute
//!   force Euler oracle for it and a sampled Lyapunov-rate checker.
//! - [`protocol`]: the two nonlinear consensus laws (node-error form `A` and
//!   edge-error form `B`) and the closed-loop vector field.
//! - [`gains`]: gain design and certificate verification.
//! - [`sim`]: switched networks, disturbances and the fixed-step integrator.
//! - [`analysis`]: settling detection and Lyapunov / average-consensus checks.
//! - [`ineq`]: executable checks for the convexity and norm inequalities the
//!   convergence arguments rest on.

pub mod analysis;
pub mod error;
pub mod fixed_time;
pub mod gains;
pub mod graph;
pub mod ineq;
pub mod linalg;
pub mod protocol;
pub mod sim;
pub mod special;

pub use analysis::{diameter, detect_settling, SettlingReport};
pub use error::{Error, Result};
pub use fixed_time::{scalar_settling_oracle, RhoParams};
pub use gains::{GainCertificate, Theorem};
pub use graph::{LaplacianView, WeightedGraph};
pub use protocol::{GainSchedule, ProtocolParams, Variant};
pub use sim::{simulate, DisturbanceModel, SimOptions, SimTrace, SwitchedNetwork};
