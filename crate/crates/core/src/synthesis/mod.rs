//! Gain design, closed-loop assembly and the stability LMIs.

mod closed_loop;
mod gains;
mod lmi;

pub use closed_loop::{assemble_closed_loop, ClosedLoopMatrices};
pub use gains::{
    certify, controller_matrix, design_controller_gain, design_gains, design_observer_gain,
    lyapunov_form, observer_matrix, verify_gains, GainReport, GainSet, DESIGN_CONDITION_BOUND,
    REFERENCE_K0, REFERENCE_L0,
};
pub use lmi::{
    build_continuous_lmi, build_sampled_lmis, halanay_rate, max_feasible_tau_u, sampling_weight,
    verify_continuous, verify_sampled, ContinuousLmi, LmiCertificate, SampledLmi, Verification,
};
