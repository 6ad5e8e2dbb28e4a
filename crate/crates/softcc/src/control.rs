//! Model-based controllers for the soft arm.
//!
//! The curvature controller feeds the reference through the arm's own
//! impedance instead of cancelling it: `τ = K q̄ + D q̄̇ + C q̄̇ + B q̄̈ + G +
//! I_q ∫(q̄ - q)`. Substituted into the plant this leaves the natural PD
//! action `K (q̄ - q) + D (q̄̇ - q̇)`, so the arm stays soft during contact.
//!
//! The Cartesian impedance controller simulates a spring-damper between the
//! tip and a reference point, cancels the configuration-dependent terms
//! `C q̇ + G + K q`, and integrates the tip error only along the surface
//! tangent. A two-phase supervisor (approach, then explore) feeds it
//! references while sliding along a wall.

use nalgebra::{DVector, Vector2};

use crate::dynamics::DynamicsEval;
use crate::error::{ensure_finite, Error, Result};

/// Default clamp on the integral torque contribution, N·m.
pub const DEFAULT_ANTIWINDUP: f64 = 10.0;

const UNIT_NORM_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Curvature dynamic controller
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct CurvatureGains {
    /// Integral gain `I_q`, N·m/s.
    pub integral_gain: f64,
    /// Clamp on the integral torque, N·m.
    pub antiwindup: f64,
}

impl CurvatureGains {
    pub fn new(integral_gain: f64) -> Result<Self> {
        if !(integral_gain.is_finite() && integral_gain >= 0.0) {
            return Err(Error::invalid("integral_gain", "must be finite and >= 0"));
        }
        Ok(CurvatureGains {
            integral_gain,
            antiwindup: DEFAULT_ANTIWINDUP,
        })
    }
}

/// Reference sample for curvature control: `(q̄, q̄̇, q̄̈)`.
#[derive(Debug, Clone)]
pub struct CurvatureReference {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub qddot: DVector<f64>,
}

/// `τ = K q̄ + D q̄̇ + C(q,q̇) q̄̇ + B(q) q̄̈ + G(q) + I_q ∫(q̄ - q)`, with the
/// integral supplied by the caller.
pub fn curvature_control(
    dyn_eval: &DynamicsEval,
    reference: &CurvatureReference,
    integral_gain: f64,
    integral: &DVector<f64>,
) -> DVector<f64> {
    &dyn_eval.k * &reference.q
        + &dyn_eval.d * &reference.qdot
        + &dyn_eval.c * &reference.qdot
        + &dyn_eval.b * &reference.qddot
        + &dyn_eval.g
        + integral_gain * integral
}

/// Curvature controller with trapezoidal integral state.
#[derive(Debug, Clone)]
pub struct CurvatureController {
    pub gains: CurvatureGains,
    integral: DVector<f64>,
    prev_error: Option<DVector<f64>>,
}

impl CurvatureController {
    pub fn new(dof: usize, gains: CurvatureGains) -> Self {
        CurvatureController {
            gains,
            integral: DVector::zeros(dof),
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral.fill(0.0);
        self.prev_error = None;
    }

    pub fn integral(&self) -> &DVector<f64> {
        &self.integral
    }

    /// Advances the error integral by `dt` and returns the control torque.
    pub fn step(
        &mut self,
        dyn_eval: &DynamicsEval,
        q: &DVector<f64>,
        reference: &CurvatureReference,
        dt: f64,
    ) -> Result<DVector<f64>> {
        ensure_finite("curvature_control", q.iter())?;
        let error = &reference.q - q;
        let prev = self.prev_error.take().unwrap_or_else(|| error.clone());
        self.integral += 0.5 * dt * (&prev + &error);
        self.prev_error = Some(error);
        if self.gains.integral_gain > 0.0 {
            let limit = self.gains.antiwindup / self.gains.integral_gain;
            for v in self.integral.iter_mut() {
                *v = v.clamp(-limit, limit);
            }
        }
        Ok(curvature_control(
            dyn_eval,
            reference,
            self.gains.integral_gain,
            &self.integral,
        ))
    }
}

// ---------------------------------------------------------------------------
// Cartesian impedance controller
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct CartesianGains {
    /// Diagonal of the desired Cartesian stiffness `K_c`.
    pub stiffness: Vector2<f64>,
    /// Diagonal of the desired Cartesian damping `D_c`.
    pub damping: Vector2<f64>,
    /// Tangential integral gain `I_c`.
    pub integral_gain: f64,
    /// Clamp on the integral tip force, N.
    pub antiwindup: f64,
}

impl CartesianGains {
    /// Gains used on the desk-scale hardware: `K_c = diag(13, 13)`,
    /// `D_c = diag(6, 6)`, `I_c = 1.9`.
    pub fn desk_preset() -> Self {
        CartesianGains {
            stiffness: Vector2::new(13.0, 13.0),
            damping: Vector2::new(6.0, 6.0),
            integral_gain: 1.9,
            antiwindup: DEFAULT_ANTIWINDUP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness.x > 0.0 && self.stiffness.y > 0.0) {
            return Err(Error::invalid("stiffness", "diagonal must be > 0"));
        }
        if !(self.damping.x > 0.0 && self.damping.y > 0.0) {
            return Err(Error::invalid("damping", "diagonal must be > 0"));
        }
        if !self.integral_gain.is_finite() {
            return Err(Error::invalid("integral_gain", "must be finite"));
        }
        Ok(())
    }
}

/// `τ = Jᵀ (K_c (x_d - x) - D_c J q̇) + C q̇ + G + K q + I_c Jᵀ n∥ ∫ n∥ᵀ(x_d - x)`.
///
/// `integral` is the accumulated tangential error `∫ n∥ᵀ(x_d - x)`; during
/// the approach phase `n∥ = 0` and the term vanishes.
pub fn cartesian_impedance_control(
    dyn_eval: &DynamicsEval,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    x_d: &Vector2<f64>,
    n_par: &Vector2<f64>,
    gains: &CartesianGains,
    integral: f64,
) -> DVector<f64> {
    let x = dyn_eval.tip;
    let tip_vel = &dyn_eval.j * qdot;
    let spring = Vector2::new(
        gains.stiffness.x * (x_d.x - x.x) - gains.damping.x * tip_vel[0],
        gains.stiffness.y * (x_d.y - x.y) - gains.damping.y * tip_vel[1],
    );
    let integral_force = gains.integral_gain * integral * n_par;
    let tip_force = DVector::from_column_slice(&[
        spring.x + integral_force.x,
        spring.y + integral_force.y,
    ]);
    dyn_eval.j.transpose() * tip_force + &dyn_eval.c * qdot + &dyn_eval.g + &dyn_eval.k * q
}

/// Cartesian impedance controller with tangential integral state.
#[derive(Debug, Clone)]
pub struct CartesianImpedanceController {
    pub gains: CartesianGains,
    integral: f64,
    prev_error: Option<f64>,
}

impl CartesianImpedanceController {
    pub fn new(gains: CartesianGains) -> Result<Self> {
        gains.validate()?;
        Ok(CartesianImpedanceController {
            gains,
            integral: 0.0,
            prev_error: None,
        })
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn step(
        &mut self,
        dyn_eval: &DynamicsEval,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        x_d: &Vector2<f64>,
        n_par: &Vector2<f64>,
        dt: f64,
    ) -> Result<DVector<f64>> {
        ensure_finite("cartesian_impedance_control", q.iter().chain(qdot.iter()))?;
        ensure_finite(
            "cartesian_impedance_control",
            [&x_d.x, &x_d.y, &n_par.x, &n_par.y],
        )?;
        let error = n_par.dot(&(x_d - dyn_eval.tip));
        let prev = self.prev_error.take().unwrap_or(error);
        self.integral += 0.5 * dt * (prev + error);
        self.prev_error = Some(error);
        if self.gains.integral_gain != 0.0 {
            let limit = (self.gains.antiwindup / self.gains.integral_gain).abs();
            self.integral = self.integral.clamp(-limit, limit);
        }
        Ok(cartesian_impedance_control(
            dyn_eval,
            q,
            qdot,
            x_d,
            n_par,
            &self.gains,
            self.integral,
        ))
    }
}

// ---------------------------------------------------------------------------
// Surface-following supervisor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfacePhase {
    Approaching,
    Exploring,
    Done,
}

/// Contact reading handed to the supervisor (from sensors on hardware, from
/// the wall model in simulation).
#[derive(Debug, Clone, Copy)]
pub struct ContactInfo {
    pub in_contact: bool,
    /// Unit tangent to the environment at the contact point.
    pub n_par: Vector2<f64>,
    /// Unit outward normal (inside → outside of the environment).
    pub n_perp: Vector2<f64>,
}

impl ContactInfo {
    pub fn none() -> Self {
        ContactInfo {
            in_contact: false,
            n_par: Vector2::zeros(),
            n_perp: Vector2::zeros(),
        }
    }
}

/// Supervisor state: the phase, the surface frame, the commanded reference,
/// and the tangential integral accumulator shared with the impedance
/// controller.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceFollowState {
    pub phase: SurfacePhase,
    pub n_par: Vector2<f64>,
    pub n_perp: Vector2<f64>,
    pub x_d: Vector2<f64>,
    pub integral: f64,
}

impl SurfaceFollowState {
    /// Initial state: approaching the attractor `x_0` with zeroed normals.
    pub fn approaching(x_0: Vector2<f64>) -> Self {
        SurfaceFollowState {
            phase: SurfacePhase::Approaching,
            n_par: Vector2::zeros(),
            n_perp: Vector2::zeros(),
            x_d: x_0,
            integral: 0.0,
        }
    }
}

fn check_unit(name: &'static str, v: &Vector2<f64>) -> Result<()> {
    if (v.norm() - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(
            name,
            format!("must be unit, norm = {}", v.norm()),
        ));
    }
    Ok(())
}

/// One supervisor transition.
///
/// While no contact has occurred the reference stays at `x_0` with zeroed
/// normals. The first contact switches to exploring: the surface frame is
/// read from the sensor and the reference becomes `x_t - n⊥ δ`, pressed δ
/// beyond the surface so contact is maintained while the tip slides toward
/// `x_t`. Exploration terminates once the error component along `n∥` drops
/// to `ε`; the phase machine never returns to approaching.
pub fn surface_follow_step(
    state: &SurfaceFollowState,
    contact: &ContactInfo,
    x: &Vector2<f64>,
    x_0: &Vector2<f64>,
    x_t: &Vector2<f64>,
    delta: f64,
    epsilon: f64,
) -> Result<SurfaceFollowState> {
    if !(delta > 0.0 && epsilon > 0.0) {
        return Err(Error::invalid("delta/epsilon", "must be > 0"));
    }
    let mut next = *state;
    match state.phase {
        SurfacePhase::Approaching => {
            if contact.in_contact {
                check_unit("n_par", &contact.n_par)?;
                check_unit("n_perp", &contact.n_perp)?;
                next.phase = SurfacePhase::Exploring;
                next.n_par = contact.n_par;
                next.n_perp = contact.n_perp;
                next.x_d = x_t - delta * contact.n_perp;
            } else {
                next.n_par = Vector2::zeros();
                next.n_perp = Vector2::zeros();
                next.x_d = *x_0;
            }
        }
        SurfacePhase::Exploring => {
            // Line-6 guard: only the error along the surface counts.
            let tangential = state.n_par.dot(&(x - state.x_d)).abs();
            if tangential <= epsilon {
                next.phase = SurfacePhase::Done;
            } else if contact.in_contact {
                check_unit("n_par", &contact.n_par)?;
                check_unit("n_perp", &contact.n_perp)?;
                next.n_par = contact.n_par;
                next.n_perp = contact.n_perp;
                next.x_d = x_t - delta * contact.n_perp;
            }
            // On momentary separation the last surface frame is kept.
        }
        SurfacePhase::Done => {}
    }
    Ok(next)
}

// ---------------------------------------------------------------------------
// PID baseline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Hand-tuned baseline gains: kP = 2 N·m, kI = 1 N·m/s, kD = 10 N·m·s.
    pub fn baseline_preset() -> Self {
        PidGains {
            kp: 2.0,
            ki: 1.0,
            kd: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.kp, "kp"), (self.ki, "ki"), (self.kd, "kd")] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// `τ = kP (q̄ - q) + kI ∫(q̄ - q) + kD (q̄̇ - q̇)` with the integral supplied
/// by the caller.
pub fn pid_baseline(
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qbar: &DVector<f64>,
    qbar_dot: &DVector<f64>,
    gains: &PidGains,
    integral: &DVector<f64>,
) -> DVector<f64> {
    gains.kp * (qbar - q) + gains.ki * integral + gains.kd * (qbar_dot - qdot)
}

#[derive(Debug, Clone)]
pub struct PidController {
    pub gains: PidGains,
    integral: DVector<f64>,
    prev_error: Option<DVector<f64>>,
    antiwindup: f64,
}

impl PidController {
    pub fn new(dof: usize, gains: PidGains) -> Result<Self> {
        gains.validate()?;
        Ok(PidController {
            gains,
            integral: DVector::zeros(dof),
            prev_error: None,
            antiwindup: DEFAULT_ANTIWINDUP,
        })
    }

    pub fn step(
        &mut self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        qbar: &DVector<f64>,
        qbar_dot: &DVector<f64>,
        dt: f64,
    ) -> Result<DVector<f64>> {
        ensure_finite("pid_baseline", q.iter().chain(qdot.iter()))?;
        let error = qbar - q;
        let prev = self.prev_error.take().unwrap_or_else(|| error.clone());
        self.integral += 0.5 * dt * (&prev + &error);
        self.prev_error = Some(error);
        if self.gains.ki > 0.0 {
            let limit = self.antiwindup / self.gains.ki;
            for v in self.integral.iter_mut() {
                *v = v.clamp(-limit, limit);
            }
        }
        Ok(pid_baseline(
            q,
            qdot,
            qbar,
            qbar_dot,
            &self.gains,
            &self.integral,
        ))
    }
}

// ---------------------------------------------------------------------------
// Reference trajectories
// ---------------------------------------------------------------------------

/// Per-segment sinusoidal curvature reference
/// `q̄(t) = π/20 - (π/24) cos((2/3) π t)` with analytic derivatives.
pub fn reference_js_tj(t: f64) -> (f64, f64, f64) {
    let omega = 2.0 / 3.0 * std::f64::consts::PI;
    let amp = std::f64::consts::PI / 24.0;
    let q = std::f64::consts::PI / 20.0 - amp * (omega * t).cos();
    let qdot = amp * omega * (omega * t).sin();
    let qddot = amp * omega * omega * (omega * t).cos();
    (q, qdot, qddot)
}

/// [`reference_js_tj`] broadcast to every segment; the first `base_dofs`
/// entries (floating-base coordinates) stay zero.
pub fn reference_js_tj_vec(t: f64, dof: usize, base_dofs: usize) -> CurvatureReference {
    let (q, qd, qdd) = reference_js_tj(t);
    let fill = |v: f64| DVector::from_fn(dof, |i, _| if i < base_dofs { 0.0 } else { v });
    CurvatureReference {
        q: fill(q),
        qdot: fill(qd),
        qddot: fill(qdd),
    }
}

/// Lissajous tip reference `x_d = [0.3 sin(2t) + 0.4, 0.3 cos(t) - 0.4]` m.
pub fn reference_lissajous(t: f64) -> Vector2<f64> {
    Vector2::new(0.3 * (2.0 * t).sin() + 0.4, 0.3 * t.cos() - 0.4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::RobotDescription;
    use crate::dynamics::SoftRobotModel;
    use approx::assert_abs_diff_eq;
    use nalgebra::Cholesky;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn model_n(n: usize) -> SoftRobotModel {
        let mut d = RobotDescription::planar_five_segment();
        d.segments.truncate(n);
        SoftRobotModel::new(d).unwrap()
    }

    #[test]
    fn static_feedforward_on_reference() {
        // Sitting on a static reference with zero integral the controller
        // outputs the pure elastic feed-forward K q̄.
        let model = model_n(3);
        let qbar = DVector::from_vec(vec![0.2, -0.4, 0.1]);
        let eval = model.project_dynamics(&qbar, &DVector::zeros(3)).unwrap();
        let reference = CurvatureReference {
            q: qbar.clone(),
            qdot: DVector::zeros(3),
            qddot: DVector::zeros(3),
        };
        let tau = curvature_control(&eval, &reference, 0.0, &DVector::zeros(3));
        let expected = model.stiffness_matrix() * &qbar;
        for i in 0..3 {
            assert_abs_diff_eq!(tau[i], expected[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_loop_identity() {
        // Substituting the control law into the model must leave
        // B (q̈ - q̄̈) + C (q̇ - q̄̇) = K (q̄ - q) + D (q̄̇ - q̇) + I_q ∫e.
        let model = model_n(4);
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..10 {
            let q = DVector::from_fn(4, |_, _| rng.gen_range(-1.5..1.5));
            let qdot = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let qbar = DVector::from_fn(4, |_, _| rng.gen_range(-1.5..1.5));
            let qbar_dot = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let qbar_ddot = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let integral = DVector::from_fn(4, |_, _| rng.gen_range(-0.5..0.5));
            let i_gain = 0.3;

            let eval = model.project_dynamics(&q, &qdot).unwrap();
            let reference = CurvatureReference {
                q: qbar.clone(),
                qdot: qbar_dot.clone(),
                qddot: qbar_ddot.clone(),
            };
            let tau = curvature_control(&eval, &reference, i_gain, &integral);

            // Plant acceleration from the same evaluated terms.
            let rhs = &tau - (&eval.c + &eval.d) * &qdot - &eval.g - &eval.k * &q;
            let qddot = Cholesky::new(eval.b.clone()).unwrap().solve(&rhs);

            let lhs = &eval.b * (&qddot - &qbar_ddot) + &eval.c * (&qdot - &qbar_dot);
            let rhs2 =
                &eval.k * (&qbar - &q) + &eval.d * (&qbar_dot - &qdot) + i_gain * &integral;
            for i in 0..4 {
                assert_abs_diff_eq!(lhs[i], rhs2[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn integral_antiwindup_clamps() {
        let model = model_n(2);
        let gains = CurvatureGains {
            integral_gain: 1.0,
            antiwindup: 0.5,
        };
        let mut ctrl = CurvatureController::new(2, gains);
        let q = DVector::zeros(2);
        let eval = model.project_dynamics(&q, &DVector::zeros(2)).unwrap();
        let reference = CurvatureReference {
            q: DVector::from_vec(vec![5.0, -5.0]),
            qdot: DVector::zeros(2),
            qddot: DVector::zeros(2),
        };
        for _ in 0..1000 {
            ctrl.step(&eval, &q, &reference, 0.1).unwrap();
        }
        for v in ctrl.integral().iter() {
            assert!(v.abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn cartesian_pure_cancellation_at_reference() {
        let model = model_n(3);
        let q = DVector::from_vec(vec![0.3, 0.2, -0.1]);
        let qdot = DVector::zeros(3);
        let eval = model.project_dynamics(&q, &qdot).unwrap();
        let x_d = eval.tip;
        let tau = cartesian_impedance_control(
            &eval,
            &q,
            &qdot,
            &x_d,
            &Vector2::zeros(),
            &CartesianGains::desk_preset(),
            0.0,
        );
        let expected = &eval.g + model.stiffness_matrix() * &q;
        for i in 0..3 {
            assert_abs_diff_eq!(tau[i], expected[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn desk_preset_matches_hardware_gains() {
        let g = CartesianGains::desk_preset();
        assert_eq!(g.stiffness, Vector2::new(13.0, 13.0));
        assert_eq!(g.damping, Vector2::new(6.0, 6.0));
        assert_eq!(g.integral_gain, 1.9);
    }

    #[test]
    fn integral_force_acts_along_tangent() {
        let model = model_n(3);
        let q = DVector::from_vec(vec![0.3, 0.2, -0.1]);
        let qdot = DVector::zeros(3);
        let eval = model.project_dynamics(&q, &qdot).unwrap();
        let n_par = Vector2::new(0.0, 1.0);
        let n_perp = Vector2::new(-1.0, 0.0);
        assert_abs_diff_eq!(n_par.dot(&n_perp), 0.0, epsilon = 1e-15);

        let x_d = eval.tip + Vector2::new(0.05, 0.02);
        let gains = CartesianGains::desk_preset();
        let with_integral =
            cartesian_impedance_control(&eval, &q, &qdot, &x_d, &n_par, &gains, 0.7);
        let without = cartesian_impedance_control(&eval, &q, &qdot, &x_d, &n_par, &gains, 0.0);
        // The integral contribution in tip space is a multiple of n∥.
        let diff = with_integral - without;
        let tip_force = gains.integral_gain * 0.7 * n_par;
        let expected =
            eval.j.transpose() * DVector::from_column_slice(&[tip_force.x, tip_force.y]);
        for i in 0..3 {
            assert_abs_diff_eq!(diff[i], expected[i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(tip_force.dot(&n_perp), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn supervisor_stays_on_attractor_without_contact() {
        let x0 = Vector2::new(0.283, 0.135);
        let mut state = SurfaceFollowState::approaching(x0);
        for _ in 0..100 {
            state = surface_follow_step(
                &state,
                &ContactInfo::none(),
                &Vector2::new(0.1, 0.0),
                &x0,
                &Vector2::new(0.220, 0.160),
                0.05,
                0.01,
            )
            .unwrap();
            assert_eq!(state.phase, SurfacePhase::Approaching);
            assert_eq!(state.x_d, x0);
            assert_eq!(state.n_par, Vector2::zeros());
        }
    }

    #[test]
    fn supervisor_contact_sets_pressed_reference() {
        let x0 = Vector2::new(0.283, 0.135);
        let x_t = Vector2::new(0.220, 0.160);
        let state = SurfaceFollowState::approaching(x0);
        let contact = ContactInfo {
            in_contact: true,
            n_par: Vector2::new(0.0, 1.0),
            n_perp: Vector2::new(1.0, 0.0),
        };
        let next = surface_follow_step(
            &state,
            &contact,
            &Vector2::new(0.22, 0.1),
            &x0,
            &x_t,
            0.05,
            0.01,
        )
        .unwrap();
        assert_eq!(next.phase, SurfacePhase::Exploring);
        assert_abs_diff_eq!(next.x_d.x, 0.170, epsilon = 1e-12);
        assert_abs_diff_eq!(next.x_d.y, 0.160, epsilon = 1e-12);
    }

    #[test]
    fn supervisor_terminates_on_tangential_error_only() {
        let x0 = Vector2::new(0.283, 0.135);
        let x_t = Vector2::new(0.220, 0.160);
        let contact = ContactInfo {
            in_contact: true,
            n_par: Vector2::new(0.0, 1.0),
            n_perp: Vector2::new(1.0, 0.0),
        };
        let mut state = SurfaceFollowState::approaching(x0);
        state =
            surface_follow_step(&state, &contact, &Vector2::new(0.22, 0.1), &x0, &x_t, 0.05, 0.01)
                .unwrap();
        // Large normal error, zero tangential error: done anyway.
        let x = Vector2::new(0.3, state.x_d.y);
        state = surface_follow_step(&state, &contact, &x, &x0, &x_t, 0.05, 0.01).unwrap();
        assert_eq!(state.phase, SurfacePhase::Done);
    }

    #[test]
    fn supervisor_never_regresses_and_rejects_bad_normals() {
        let x0 = Vector2::new(0.283, 0.135);
        let x_t = Vector2::new(0.220, 0.160);
        let contact = ContactInfo {
            in_contact: true,
            n_par: Vector2::new(0.0, 1.0),
            n_perp: Vector2::new(1.0, 0.0),
        };
        let mut state = SurfaceFollowState::approaching(x0);
        state =
            surface_follow_step(&state, &contact, &Vector2::new(0.22, 0.0), &x0, &x_t, 0.05, 0.01)
                .unwrap();
        assert_eq!(state.phase, SurfacePhase::Exploring);
        // Contact lost: stays exploring with the last frame.
        state = surface_follow_step(
            &state,
            &ContactInfo::none(),
            &Vector2::new(0.22, 0.0),
            &x0,
            &x_t,
            0.05,
            0.01,
        )
        .unwrap();
        assert_eq!(state.phase, SurfacePhase::Exploring);
        assert_eq!(state.n_perp, Vector2::new(1.0, 0.0));

        let bad = ContactInfo {
            in_contact: true,
            n_par: Vector2::new(0.0, 2.0),
            n_perp: Vector2::new(1.0, 0.0),
        };
        assert!(
            surface_follow_step(&state, &bad, &Vector2::new(0.22, 0.0), &x0, &x_t, 0.05, 0.01)
                .is_err()
        );
    }

    #[test]
    fn pid_values() {
        let gains = PidGains::baseline_preset();
        assert_eq!((gains.kp, gains.ki, gains.kd), (2.0, 1.0, 10.0));

        let q = DVector::from_vec(vec![0.1, 0.2]);
        let zero = DVector::zeros(2);
        // Zero error, zero integral → zero torque.
        let tau = pid_baseline(&q, &zero, &q, &zero, &gains, &zero);
        assert_eq!(tau.amax(), 0.0);

        // Proportional-only response to a step error.
        let gains = PidGains {
            kp: 2.0,
            ki: 0.0,
            kd: 0.0,
        };
        let qbar = DVector::from_vec(vec![0.4, 0.0]);
        let tau = pid_baseline(&q, &zero, &qbar, &zero, &gains, &zero);
        assert_abs_diff_eq!(tau[0], 2.0 * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(tau[1], 2.0 * -0.2, epsilon = 1e-15);
    }

    #[test]
    fn js_tj_reference_values() {
        let (q0, qd0, _) = reference_js_tj(0.0);
        assert_abs_diff_eq!(q0, PI / 20.0 - PI / 24.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q0, 0.026180, epsilon = 1e-6);
        assert_abs_diff_eq!(qd0, 0.0, epsilon = 1e-15);

        // Half period of cos((2/3)π t) is t = 1.5 s.
        let (q, _, _) = reference_js_tj(1.5);
        assert_abs_diff_eq!(q, PI / 20.0 + PI / 24.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 0.287979, epsilon = 1e-6);

        // Analytic derivative consistency.
        let h = 1e-6;
        for &t in &[0.3, 0.9, 2.2] {
            let (_, qd, qdd) = reference_js_tj(t);
            let (qp, qdp, _) = reference_js_tj(t + h);
            let (qm, qdm, _) = reference_js_tj(t - h);
            assert_abs_diff_eq!(qd, (qp - qm) / (2.0 * h), epsilon = 1e-8);
            assert_abs_diff_eq!(qdd, (qdp - qdm) / (2.0 * h), epsilon = 1e-8);
        }
    }

    #[test]
    fn lissajous_values() {
        let x = reference_lissajous(0.0);
        assert_abs_diff_eq!(x.x, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(x.y, -0.1, epsilon = 1e-15);

        let x = reference_lissajous(PI / 2.0);
        assert_abs_diff_eq!(x.x, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(x.y, -0.4, epsilon = 1e-12);

        // The figure closes after 2π (lcm of the component periods).
        let a = reference_lissajous(0.37);
        let b = reference_lissajous(0.37 + 2.0 * PI);
        assert_abs_diff_eq!(a.x, b.x, epsilon = 1e-12);
        assert_abs_diff_eq!(a.y, b.y, epsilon = 1e-12);
    }
}
