//! Dynamics, control, and simulation of planar piecewise-constant-curvature
//! (PCC) soft manipulators.
//!
//! The arm is modeled as a chain of constant-curvature segments, each
//! configured by a single degree-of-curvature angle. An equivalent rigid
//! chain (one revolute-prismatic-prismatic-revolute group per segment, with
//! the segment mass lumped at the chord midpoint) reproduces the soft arm's
//! kinematics and inertia exactly; projecting its dynamics onto the curvature
//! coordinates yields a compact model `B q̈ + (C + D) q̇ + G + K q = τ + Jᵀ f`
//! that standard model-based controllers can act on.
//!
//! Modules:
//! - [`kinematics`]: closed-form segment transforms and chain forward kinematics
//! - [`augmented`]: the equivalent rigid chain, the map `ξ = m(q)`, and
//!   augmented-space dynamics terms
//! - [`dynamics`]: projected curvature-space dynamics with stiffness, damping,
//!   and the actuation map
//! - [`control`]: curvature tracking, Cartesian impedance with surface
//!   following, and a PID baseline
//! - [`task_priority`]: floating-base hierarchical control with dynamically
//!   consistent nullspace projection
//! - [`sim`]: fixed-step closed-loop simulation with penalty wall contact and
//!   actuator lag filters
//! - [`ident`]: stiffness/damping/actuator identification from step responses

pub mod augmented;
pub mod control;
pub mod description;
pub mod dynamics;
pub mod error;
pub mod ident;
pub mod kinematics;
pub mod series;
pub mod sim;
pub mod task_priority;

pub use description::{BaseKind, RobotDescription, SegmentImpedance, SegmentParams};
pub use dynamics::{ControlInput, DynamicsEval, SoftRobotModel};
pub use error::{Error, Result};
pub use kinematics::{PlanarTransform, SegmentGeometry};
