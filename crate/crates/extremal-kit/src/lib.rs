//! Classification and numerical integration of time-optimal extremals for
//! three-dimensional control-affine systems `x' = f0 + u1 f1 + u2 f2` with
//! the control constrained to the closed unit disk.

pub mod classify;
pub mod cli;
pub mod error;
pub mod flow;
pub mod oracle;
pub mod poly;
pub mod rk;
pub mod specfile;
pub mod system;
pub mod vec3;
pub mod verify;

pub use classify::{
    classify_point, classify_state, equilibrium_angles, jump_controls, singular_control, Case,
    ClassificationReport, ControlValue,
};
pub use error::{Error, Result};
pub use flow::{
    flow_map, integrate_extremal, integrate_limit_arc, lipschitz_probe, BlowupState,
    ExtremalTrajectory, IntegratorConfig, SwitchEvent, TerminationReason,
};
pub use oracle::{
    direct_search_linear_example, envelope_fit, fd_bracket_oracle, model_radial_ode,
    poisson_consistency, DirectSearchOptions, DirectSearchResult, ModelOdeConfig, ModelOdeRun,
};
pub use poly::{Monomial, Poly, PolyField};
pub use specfile::SystemSpecFile;
pub use system::{CanonicalState, ControlSystem};
pub use verify::{run_suite, CheckResult, VerificationReport, VerifyOptions};

// Compile and run every code block in the book as a doc-test so the guide
// cannot drift out of sync with the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/defining-systems.md")]
    pub struct DefiningSystems;
    #[doc = include_str!("../../../book/src/classification.md")]
    pub struct Classification;
    #[doc = include_str!("../../../book/src/integrating-extremals.md")]
    pub struct IntegratingExtremals;
    #[doc = include_str!("../../../book/src/singular-arcs.md")]
    pub struct SingularArcs;
    #[doc = include_str!("../../../book/src/validation.md")]
    pub struct Validation;
    #[doc = include_str!("../../../book/src/command-line.md")]
    pub struct CommandLine;
}
