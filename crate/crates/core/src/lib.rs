//! Finite-dimensional observer-based boundary control of the 1D reaction-diffusion
//! (heat) equation with Dirichlet actuation and a single in-domain point sensor.
//!
//! The crate is organised around four subsystems:
//!
//! * [`modal`] exact Dirichlet eigenpairs, input/output coefficients of the
//!   dynamically extended modal model and the reduced matrices used for design;
//! * [`synthesis`] observer and controller gain design, closed-loop matrix assembly,
//!   the continuous-time and sampled-data stability LMIs and the Halanay rate;
//! * [`sdp`] a small dense semidefinite feasibility engine (primal-dual interior point
//!   with Nesterov-Todd scaling) and an independent certificate checker;
//! * [`sim`] a spectral closed-loop simulator with exponential stepping, generalized
//!   hold and two independent sampling sequences.

pub mod error;
pub mod linalg;
pub mod modal;
pub mod sdp;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
pub use modal::{ModalModel, SystemConfig};
pub use sdp::{LmiProblem, SolveOptions, SolveOutcome, SolveStatus};
pub use sim::{SimConfig, Trajectory};
pub use synthesis::{ClosedLoopMatrices, GainSet, LmiCertificate};
