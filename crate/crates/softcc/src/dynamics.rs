//! Curvature-space dynamics of the soft arm, obtained by projecting the
//! augmented rigid-chain dynamics onto the manifold `ξ = m(q)`:
//!
//! ```text
//! B(q) q̈ + (C(q,q̇) + D) q̇ + G(q) + K q = τ + Jᵀ f_ext
//! B = J_mᵀ B_ξ J_m      C = J_mᵀ B_ξ J̇_m + J_mᵀ C_ξ J_m
//! G = J_mᵀ G_ξ          J = J_ξ J_m
//! ```
//!
//! `K` and `D` are the diagonal elastic and dissipative matrices (zero on the
//! base block when the base floats). After projection `B(q)` is symmetric
//! positive definite, so accelerations come from a Cholesky solve; no
//! inversion ever happens in augmented space, where massless links make
//! `B_ξ` singular.

use nalgebra::{Cholesky, DMatrix, DVector, Vector2};

use crate::augmented::{AugmentedChain, PointSelector};
use crate::description::RobotDescription;
use crate::error::{ensure_finite, Error, Result};

/// Dynamics terms evaluated at one state `(q, q̇)`.
#[derive(Debug, Clone)]
pub struct DynamicsEval {
    /// Inertia matrix, symmetric positive definite.
    pub b: DMatrix<f64>,
    /// Coriolis/centrifugal matrix (Christoffel convention, so that
    /// `Ḃ - 2C` is skew-symmetric).
    pub c: DMatrix<f64>,
    /// Gravity torque vector.
    pub g: DVector<f64>,
    /// Diagonal stiffness matrix.
    pub k: DMatrix<f64>,
    /// Diagonal damping matrix.
    pub d: DMatrix<f64>,
    /// Tip translation Jacobian (2 × dof).
    pub j: DMatrix<f64>,
    /// Tip position, m.
    pub tip: Vector2<f64>,
    /// Tip orientation (unwrapped), rad.
    pub tip_rotation: f64,
}

/// Generalized input: actuation torques plus an external tip wrench.
#[derive(Debug, Clone)]
pub struct ControlInput {
    /// Generalized torques (dimension = dof).
    pub tau: DVector<f64>,
    /// External force applied at the tip, N.
    pub f_ext: Vector2<f64>,
}

impl ControlInput {
    pub fn zero(dof: usize) -> Self {
        ControlInput {
            tau: DVector::zeros(dof),
            f_ext: Vector2::zeros(),
        }
    }

    pub fn torque(tau: DVector<f64>) -> Self {
        ControlInput {
            tau,
            f_ext: Vector2::zeros(),
        }
    }
}

/// The projected soft-robot model.
#[derive(Debug, Clone)]
pub struct SoftRobotModel {
    description: RobotDescription,
    chain: AugmentedChain,
    stiffness_diag: DVector<f64>,
    damping_diag: DVector<f64>,
}

impl SoftRobotModel {
    pub fn new(description: RobotDescription) -> Result<Self> {
        description.validate()?;
        let chain = AugmentedChain::new(&description);
        let dof = description.dof();
        let base = dof - description.segment_count();
        let mut stiffness_diag = DVector::zeros(dof);
        let mut damping_diag = DVector::zeros(dof);
        for (i, seg) in description.segments.iter().enumerate() {
            stiffness_diag[base + i] = seg.impedance.stiffness();
            damping_diag[base + i] = seg.impedance.damping();
        }
        Ok(SoftRobotModel {
            description,
            chain,
            stiffness_diag,
            damping_diag,
        })
    }

    pub fn description(&self) -> &RobotDescription {
        &self.description
    }

    pub fn chain(&self) -> &AugmentedChain {
        &self.chain
    }

    /// Number of CC segments.
    pub fn segment_count(&self) -> usize {
        self.description.segment_count()
    }

    /// Generalized-coordinate count (segments plus base coordinates when
    /// floating).
    pub fn dof(&self) -> usize {
        self.description.dof()
    }

    pub fn is_floating(&self) -> bool {
        self.description.base.is_floating()
    }

    /// Diagonal stiffness matrix `K`.
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.stiffness_diag)
    }

    /// Diagonal damping matrix `D`.
    pub fn damping_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.damping_diag)
    }

    fn check_state(&self, context: &'static str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dof(),
                actual: v.len(),
            });
        }
        ensure_finite(context, v.iter())
    }

    /// Inertia matrix `B(q) = J_mᵀ B_ξ J_m`.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state("mass_matrix", q)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let b_xi = self.chain.inertia(&xi)?;
        Ok(jm.transpose() * b_xi * jm)
    }

    /// Full dynamics evaluation with the Coriolis matrix, used by the
    /// model-based controllers and the property checks.
    pub fn project_dynamics(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DynamicsEval> {
        self.check_state("project_dynamics", q)?;
        self.check_state("project_dynamics", qdot)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let jm_dot = self.chain.map_jacobian_dot(q, qdot)?;
        let xi_dot = &jm * qdot;

        let (b_xi, c_xi, g_xi) = self.chain.augmented_dynamics(&xi, &xi_dot)?;
        let jm_t = jm.transpose();
        let b = &jm_t * &b_xi * &jm;
        let c = &jm_t * &b_xi * &jm_dot + &jm_t * &c_xi * &jm;
        let g = &jm_t * &g_xi;

        let eval = self.chain.eval(&xi, &xi_dot)?;
        let j_xi = self.chain.task_jacobian(&eval, PointSelector::Tip, false)?;
        let j = &j_xi * &jm;
        let tip_frame = eval.frames.last().expect("chain has frames");

        Ok(DynamicsEval {
            b,
            c,
            g,
            k: self.stiffness_matrix(),
            d: self.damping_matrix(),
            j,
            tip: tip_frame.pose.translation,
            tip_rotation: tip_frame.pose.rotation,
        })
    }

    /// Projected Coriolis/centrifugal force `C(q, q̇) q̇`, computed without
    /// finite differences. Agrees with the Christoffel matrix route and is
    /// cheap enough for the integrator's inner loop.
    pub fn coriolis_force(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state("coriolis_force", q)?;
        self.check_state("coriolis_force", qdot)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let jm_dot = self.chain.map_jacobian_dot(q, qdot)?;
        let xi_dot = &jm * qdot;
        let eval = self.chain.eval(&xi, &xi_dot)?;
        let b_xi = self.chain.inertia_from_eval(&eval);
        let c_xi_force = self.chain.coriolis_force(&eval, &xi_dot);
        Ok(jm.transpose() * (b_xi * (jm_dot * qdot) + c_xi_force))
    }

    /// Forward dynamics
    /// `q̈ = B⁻¹ (τ + Jᵀ f_ext - (C + D) q̇ - G - K q)`.
    pub fn forward_dynamics(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        input: &ControlInput,
    ) -> Result<DVector<f64>> {
        ensure_finite("forward_dynamics", [&input.f_ext.x, &input.f_ext.y])?;
        let f_ext = input.f_ext;
        let (qddot, _, _) = self.forward_dynamics_with(q, qdot, &input.tau, |_, _| f_ext)?;
        Ok(qddot)
    }

    /// Forward dynamics with the external tip force supplied as a function of
    /// the tip position and velocity, so environment models (penalty walls,
    /// localized disturbances) are evaluated inside the same chain pass.
    /// Returns `(q̈, tip, tip velocity)`.
    pub fn forward_dynamics_with<F>(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        tau: &DVector<f64>,
        tip_force: F,
    ) -> Result<(DVector<f64>, Vector2<f64>, Vector2<f64>)>
    where
        F: FnOnce(Vector2<f64>, Vector2<f64>) -> Vector2<f64>,
    {
        self.dynamics_with(q, qdot, tau, tip_force, true)
    }

    /// [`Self::forward_dynamics_with`] without the damping force `D q̇`.
    ///
    /// The lumped chord-midpoint inertia is severely ill-conditioned (the
    /// wiggle mode of a five-segment arm carries ~1e-8 kg·m²), which puts the
    /// damped dynamics far outside any explicit stability region. The
    /// simulator therefore relaxes the damping term exactly in a separate
    /// substep ([`Self::damping_decay`]) and integrates the remaining
    /// conservative dynamics with RK4.
    pub fn conservative_dynamics_with<F>(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        tau: &DVector<f64>,
        tip_force: F,
    ) -> Result<(DVector<f64>, Vector2<f64>, Vector2<f64>)>
    where
        F: FnOnce(Vector2<f64>, Vector2<f64>) -> Vector2<f64>,
    {
        self.dynamics_with(q, qdot, tau, tip_force, false)
    }

    /// Exact relaxation of the damping term at frozen configuration:
    /// `q̇ ← exp(-B(q)⁻¹ D t) q̇`. Kinetic energy decays monotonically under
    /// this map for any `t ≥ 0`.
    pub fn damping_decay(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        Ok(self.damping_decay_operator(q, t)? * qdot)
    }

    /// The relaxation map `exp(-B(q)⁻¹ D t)` as a matrix, computed through
    /// the symmetric form `G = L⁻¹ D L⁻ᵀ` of the Cholesky factor `B = L Lᵀ`:
    /// `Φ = L⁻ᵀ V e^{-Λt} Vᵀ Lᵀ`.
    pub fn damping_decay_operator(&self, q: &DVector<f64>, t: f64) -> Result<DMatrix<f64>> {
        self.check_state("damping_decay", q)?;
        if !(t >= 0.0) {
            return Err(Error::invalid("t", "must be >= 0"));
        }
        let dof = self.dof();
        let b = self.mass_matrix(q)?;
        let chol = Cholesky::new(b).ok_or_else(|| Error::Integration {
            time: f64::NAN,
            what: "inertia matrix lost positive definiteness".into(),
        })?;
        let l = chol.l();

        let d_mat = DMatrix::from_diagonal(&self.damping_diag);
        let w = l
            .solve_lower_triangular(&d_mat)
            .ok_or_else(|| Error::invalid("inertia", "triangular solve failed"))?;
        let g = l
            .solve_lower_triangular(&w.transpose())
            .ok_or_else(|| Error::invalid("inertia", "triangular solve failed"))?
            .transpose();
        let g_sym = 0.5 * (&g + g.transpose());
        let eig = g_sym.symmetric_eigen();

        let mut exp_modal = eig.eigenvectors.clone();
        for (i, mut col) in exp_modal.column_iter_mut().enumerate() {
            col *= (-eig.eigenvalues[i] * t).exp();
        }
        let core = exp_modal * eig.eigenvectors.transpose();
        let right = core * l.transpose();
        l.transpose()
            .solve_upper_triangular(&right)
            .ok_or_else(|| Error::invalid("inertia", "triangular solve failed"))
    }

    fn dynamics_with<F>(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        tau: &DVector<f64>,
        tip_force: F,
        include_damping: bool,
    ) -> Result<(DVector<f64>, Vector2<f64>, Vector2<f64>)>
    where
        F: FnOnce(Vector2<f64>, Vector2<f64>) -> Vector2<f64>,
    {
        self.check_state("forward_dynamics", q)?;
        self.check_state("forward_dynamics", qdot)?;
        self.check_state("forward_dynamics", tau)?;

        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let jm_dot = self.chain.map_jacobian_dot(q, qdot)?;
        let xi_dot = &jm * qdot;
        let eval = self.chain.eval(&xi, &xi_dot)?;
        let b_xi = self.chain.inertia_from_eval(&eval);
        let jm_t = jm.transpose();

        let b = &jm_t * &b_xi * &jm;
        let coriolis =
            &jm_t * (&b_xi * (&jm_dot * qdot) + self.chain.coriolis_force(&eval, &xi_dot));
        let gravity = &jm_t * self.chain.gravity_torque(&eval);

        let tip_frame = eval.frames.last().expect("chain has frames");
        let tip = tip_frame.pose.translation;
        let tip_vel = tip_frame.vel;
        let f_ext = tip_force(tip, tip_vel);
        ensure_finite("forward_dynamics", [&f_ext.x, &f_ext.y])?;

        let j_xi = self.chain.task_jacobian(&eval, PointSelector::Tip, false)?;
        let j = &j_xi * &jm;
        let f = DVector::from_column_slice(&[f_ext.x, f_ext.y]);

        let mut rhs = tau + j.transpose() * f - coriolis - gravity;
        for i in 0..self.dof() {
            if include_damping {
                rhs[i] -= self.damping_diag[i] * qdot[i];
            }
            rhs[i] -= self.stiffness_diag[i] * q[i];
        }

        let chol = Cholesky::new(b).ok_or_else(|| Error::Integration {
            time: f64::NAN,
            what: "inertia matrix lost positive definiteness".into(),
        })?;
        Ok((chol.solve(&rhs), tip, tip_vel))
    }

    /// Position, velocity, orientation, and angular rate of the tip.
    pub fn tip_state(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<(Vector2<f64>, Vector2<f64>, f64, f64)> {
        self.check_state("tip_state", q)?;
        self.check_state("tip_state", qdot)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let xi_dot = &jm * qdot;
        let eval = self.chain.eval(&xi, &xi_dot)?;
        let tip = eval.frames.last().expect("chain has frames");
        Ok((
            tip.pose.translation,
            tip.vel,
            tip.pose.rotation,
            tip.rot_rate,
        ))
    }

    /// Task Jacobian of a selected point in curvature space: `J_ξ J_m`.
    pub fn point_jacobian(
        &self,
        q: &DVector<f64>,
        selector: PointSelector,
        with_rotation: bool,
    ) -> Result<DMatrix<f64>> {
        self.check_state("point_jacobian", q)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let eval = self.chain.eval(&xi, &DVector::zeros(self.chain.dim()))?;
        Ok(self.chain.task_jacobian(&eval, selector, with_rotation)? * jm)
    }

    /// The full actuation field `A(q) = J_mᵀ A_ξ(m(q))` mapping per-segment
    /// end wrenches `[f_x, f_y, τ]` (expressed in the local frame of the
    /// segment's distal end, with the opposite wrench transported to the
    /// proximal end) to generalized torques. Shape dof × 3n.
    pub fn actuation_field(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state("actuation_field", q)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let eval = self.chain.eval(&xi, &DVector::zeros(self.chain.dim()))?;
        let n = self.segment_count();
        let dim = self.chain.dim();

        let mut a_xi = DMatrix::zeros(dim, 3 * n);
        for seg in 1..=n {
            let j_distal = eval.frame_jacobian(seg);
            let j_proximal = eval.frame_jacobian(seg - 1);
            let distal = &eval.frames[seg];
            let proximal = &eval.frames[seg - 1];
            let r = distal.pose.translation - proximal.pose.translation;

            // Local wrench basis: f_x, f_y in the distal frame, then a pure
            // torque. The reaction at the proximal end is the same world
            // wrench transported to the proximal origin, with opposite sign.
            for (col, local) in [
                Vector2::new(1.0, 0.0),
                Vector2::new(0.0, 1.0),
                Vector2::zeros(),
            ]
            .iter()
            .enumerate()
            {
                let torque = if col == 2 { 1.0 } else { 0.0 };
                let f_world = distal.pose.rotate_vector(local);
                let w_distal = DVector::from_column_slice(&[f_world.x, f_world.y, torque]);
                let cross = r.x * f_world.y - r.y * f_world.x;
                let w_proximal =
                    DVector::from_column_slice(&[f_world.x, f_world.y, torque + cross]);
                let contribution =
                    j_distal.transpose() * w_distal - j_proximal.transpose() * w_proximal;
                a_xi.column_mut(3 * (seg - 1) + col).copy_from(&contribution);
            }
        }
        Ok(jm.transpose() * a_xi)
    }

    /// Actuation map for internal torque pairs applied at both segment ends
    /// (the pure-torque columns of [`Self::actuation_field`]). Shape dof × n;
    /// for a fixed-base arm this is the identity.
    pub fn actuation_map(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let field = self.actuation_field(q)?;
        let n = self.segment_count();
        let mut a = DMatrix::zeros(self.dof(), n);
        for seg in 0..n {
            a.column_mut(seg).copy_from(&field.column(3 * seg + 2));
        }
        Ok(a)
    }

    /// Gravity torque vector `G(q) = J_mᵀ G_ξ`.
    pub fn gravity_vector(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state("gravity_vector", q)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let eval = self.chain.eval(&xi, &DVector::zeros(self.chain.dim()))?;
        Ok(jm.transpose() * self.chain.gravity_torque(&eval))
    }

    /// Kinetic energy at `(q, q̇)`, J.
    pub fn kinetic_energy(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        self.check_state("kinetic_energy", q)?;
        self.check_state("kinetic_energy", qdot)?;
        let xi = self.chain.map(q)?;
        let jm = self.chain.map_jacobian(q)?;
        let xi_dot = &jm * qdot;
        let eval = self.chain.eval(&xi, &xi_dot)?;
        Ok(self.chain.kinetic_energy(&eval, &xi_dot))
    }

    /// Gravitational potential energy at `q`, J.
    pub fn gravity_potential(&self, q: &DVector<f64>) -> Result<f64> {
        self.check_state("gravity_potential", q)?;
        let xi = self.chain.map(q)?;
        let eval = self.chain.eval(&xi, &DVector::zeros(self.chain.dim()))?;
        Ok(self.chain.potential_energy(&eval))
    }

    /// Elastic potential energy `½ qᵀ K q`, J.
    pub fn elastic_potential(&self, q: &DVector<f64>) -> Result<f64> {
        self.check_state("elastic_potential", q)?;
        let mut e = 0.0;
        for i in 0..self.dof() {
            e += 0.5 * self.stiffness_diag[i] * q[i] * q[i];
        }
        Ok(e)
    }

    /// Total mechanical energy (kinetic + gravity + elastic), J.
    pub fn total_energy(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        Ok(self.kinetic_energy(q, qdot)? + self.gravity_potential(q)? + self.elastic_potential(q)?)
    }
}
