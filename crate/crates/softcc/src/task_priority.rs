//! Hierarchical task-priority control with dynamically consistent nullspace
//! projection, for the floating-base arm.
//!
//! Each task contributes `N_k^suc J_kᵀ (K_k Δ_k - D_k J_k q̇)`, where
//! `N_k^suc` is the nullspace projector of all strictly higher-priority task
//! Jacobians stacked, built with the inertia-weighted pseudo-inverse
//! `J^{B+} = B⁻¹Jᵀ(J B⁻¹ Jᵀ)⁻¹`. Torque filtered through such a projector
//! produces zero instantaneous acceleration of the protected tasks
//! (`J B⁻¹ N = 0`), in the transient as well as at steady state. Gravity
//! compensation is added on top.

use nalgebra::{Cholesky, DMatrix, DVector};
use std::f64::consts::PI;

use crate::dynamics::SoftRobotModel;
use crate::error::{ensure_finite, Error, Result};

/// Rank tolerance on the weighted Gram matrix `J B⁻¹ Jᵀ`.
pub const GRAM_RANK_TOL: f64 = 1e-10;

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Planar orientation offset: the shortest rotation from `phi` to `phi_d`.
pub fn orientation_offset(phi: f64, phi_d: f64) -> f64 {
    wrap_angle(phi_d - phi)
}

/// Dynamically consistent pseudo-inverse `J^{B+} = B⁻¹Jᵀ(J B⁻¹ Jᵀ)⁻¹`.
///
/// Errors with [`Error::SingularTask`] when the weighted Gram matrix has a
/// singular value below [`GRAM_RANK_TOL`]; near-singular tasks are never
/// regularized silently.
pub fn dyn_consistent_pinv(j: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (pinv, _) = weighted_inverse_pair(j, b)?;
    Ok(pinv)
}

/// Nullspace projector `N = I - Jᵀ (J^{B+})ᵀ` of a task (or stack of tasks)
/// with Jacobian `J`.
pub fn nullspace_projector(j: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (_, n) = weighted_inverse_pair(j, b)?;
    Ok(n)
}

/// Cholesky of the Jacobi-scaled inertia. The physical inertia spans many
/// orders of magnitude (gram-scale segment terms against a kilogram-scale
/// base), and the spread is diagonal-driven; solving in the unit-diagonal
/// scaling recovers it as accuracy that a raw solve loses to conditioning.
struct ScaledInertia {
    scale: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl ScaledInertia {
    fn new(b: &DMatrix<f64>) -> Result<Self> {
        let dof = b.nrows();
        let mut scale = DVector::zeros(dof);
        for i in 0..dof {
            if !(b[(i, i)] > 0.0) {
                return Err(Error::invalid(
                    "inertia",
                    "matrix is not symmetric positive definite",
                ));
            }
            scale[i] = b[(i, i)].sqrt();
        }
        let scaled = DMatrix::from_fn(dof, dof, |r, c| b[(r, c)] / (scale[r] * scale[c]));
        let chol = Cholesky::new(scaled).ok_or_else(|| {
            Error::invalid("inertia", "matrix is not symmetric positive definite")
        })?;
        Ok(ScaledInertia { scale, chol })
    }

    /// `J B⁻¹` for a rows × dof Jacobian.
    fn j_binv(&self, j: &DMatrix<f64>) -> DMatrix<f64> {
        let mut js = j.clone();
        for (i, mut col) in js.column_iter_mut().enumerate() {
            col /= self.scale[i];
        }
        let mut g = self.chol.solve(&js.transpose()).transpose();
        for (i, mut col) in g.column_iter_mut().enumerate() {
            col /= self.scale[i];
        }
        g
    }

    /// `B⁻¹ rhs` column-wise.
    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.scale.len();
        let mut scaled = rhs.clone();
        for r in 0..n {
            for c in 0..rhs.ncols() {
                scaled[(r, c)] /= self.scale[r];
            }
        }
        let mut x = self.chol.solve(&scaled);
        for r in 0..n {
            for c in 0..rhs.ncols() {
                x[(r, c)] /= self.scale[r];
            }
        }
        x
    }
}

/// `J B⁻¹` via the scaled solve; the building block the projector identities
/// are verified against.
pub fn inertia_weighted_jacobian(j: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(ScaledInertia::new(b)?.j_binv(j))
}

/// `‖J B⁻¹ N‖∞`: how much of the higher-priority task space a projected
/// torque can still reach.
pub fn annihilation_residual(
    j: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n: &DMatrix<f64>,
) -> Result<f64> {
    Ok((inertia_weighted_jacobian(j, b)? * n).amax())
}

/// Computes `(J^{B+}, N)` from the inertia-whitened task directions
/// `Y = L̃⁻¹ S⁻¹ Jᵀ` (where `B = S L̃ L̃ᵀ S`): with `Y = Q R`,
///
/// ```text
/// J^{B+} = S⁻¹ L̃⁻ᵀ Q R⁻ᵀ        N = I - (Jᵀ R⁻¹) (Qᵀ L̃⁻¹ S⁻¹)
/// ```
///
/// The annihilation `J B⁻¹ N = ((I - QQᵀ) Y)ᵀ L̃⁻¹ S⁻¹` then rests on the
/// orthogonality of `Q`, which holds to machine precision, instead of on the
/// conditioning of the weighted Gram matrix.
fn weighted_inverse_pair(
    j: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let dof = b.nrows();
    let rows = j.nrows();
    if j.ncols() != dof || b.ncols() != dof {
        return Err(Error::DimensionMismatch {
            context: "dyn_consistent_pinv",
            expected: dof,
            actual: j.ncols(),
        });
    }
    ensure_finite("dyn_consistent_pinv", j.iter().chain(b.iter()))?;

    let scaled = ScaledInertia::new(b)?;
    let l = scaled.chol.l();

    // Y = L̃⁻¹ S⁻¹ Jᵀ.
    let mut jt_scaled = j.transpose();
    for r in 0..dof {
        for c in 0..rows {
            jt_scaled[(r, c)] /= scaled.scale[r];
        }
    }
    let y = l
        .solve_lower_triangular(&jt_scaled)
        .ok_or_else(|| Error::invalid("inertia", "triangular solve failed"))?;

    // Rank contract on the weighted Gram matrix JB⁻¹Jᵀ = YᵀY: its singular
    // values are the squares of Y's.
    let svd = y.clone().svd(false, false);
    let sigma_min_y = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
    let sigma_min = sigma_min_y * sigma_min_y;
    if !sigma_min.is_finite() || sigma_min < GRAM_RANK_TOL {
        return Err(Error::SingularTask { sigma_min });
    }

    let qr = y.qr();
    let q = qr.q();
    let r_fact = qr.r();

    // U = L̃⁻ᵀ Q, then scale rows by S⁻¹: columns span the same space as
    // B⁻¹Jᵀ.
    let mut u = l
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or_else(|| Error::invalid("inertia", "triangular solve failed"))?;
    for row in 0..dof {
        for c in 0..rows {
            u[(row, c)] /= scaled.scale[row];
        }
    }

    // pinv = U R⁻ᵀ  (solve R Xᵀ = Uᵀ  ⇔  X = U R⁻ᵀ).
    let pinv = r_fact
        .solve_upper_triangular(&u.transpose())
        .ok_or(Error::SingularTask { sigma_min })?
        .transpose();

    // N = I - (Jᵀ R⁻¹)(Uᵀ) with Jᵀ R⁻¹ = (R⁻ᵀ J)ᵀ.
    let z = r_fact
        .transpose()
        .solve_lower_triangular(j)
        .ok_or(Error::SingularTask { sigma_min })?
        .transpose();
    let n = DMatrix::identity(dof, dof) - z * u.transpose();
    Ok((pinv, n))
}

// ---------------------------------------------------------------------------
// Task specifications
// ---------------------------------------------------------------------------

/// What a task controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Tip orientation (1 row).
    TipOrientation,
    /// Tip position (2 rows).
    TipPosition,
    /// Floating-base orientation (1 row); requires a floating base.
    BaseOrientation,
}

impl TaskKind {
    pub fn rows(&self) -> usize {
        match self {
            TaskKind::TipPosition => 2,
            _ => 1,
        }
    }
}

/// Time-dependent task reference.
#[derive(Debug, Clone, Copy)]
pub enum TaskTarget {
    /// Fixed point, m.
    Position(nalgebra::Vector2<f64>),
    /// Fixed orientation, rad.
    Orientation(f64),
    /// `θ_d(t) = offset + amplitude · sin(2π t / period)`.
    OrientationCycle {
        offset: f64,
        amplitude: f64,
        period: f64,
    },
}

/// One prioritized task. Position in the task list is the priority rank
/// (index 0 is the highest).
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Diagonal task stiffness (length = rows).
    pub stiffness: DVector<f64>,
    /// Diagonal task damping (length = rows).
    pub damping: DVector<f64>,
    pub target: TaskTarget,
}

impl TaskSpec {
    pub fn tip_position(k: f64, d: f64, target: nalgebra::Vector2<f64>) -> Self {
        TaskSpec {
            kind: TaskKind::TipPosition,
            stiffness: DVector::from_element(2, k),
            damping: DVector::from_element(2, d),
            target: TaskTarget::Position(target),
        }
    }

    pub fn tip_orientation(k: f64, d: f64, phi_d: f64) -> Self {
        TaskSpec {
            kind: TaskKind::TipOrientation,
            stiffness: DVector::from_element(1, k),
            damping: DVector::from_element(1, d),
            target: TaskTarget::Orientation(phi_d),
        }
    }

    pub fn base_orientation(k: f64, d: f64, target: TaskTarget) -> Self {
        TaskSpec {
            kind: TaskKind::BaseOrientation,
            stiffness: DVector::from_element(1, k),
            damping: DVector::from_element(1, d),
            target,
        }
    }

    fn validate(&self) -> Result<()> {
        let rows = self.kind.rows();
        if self.stiffness.len() != rows || self.damping.len() != rows {
            return Err(Error::invalid("task gains", "diagonal length must match task rows"));
        }
        if self.stiffness.iter().chain(self.damping.iter()).any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::invalid("task gains", "must be finite and >= 0"));
        }
        Ok(())
    }

    fn target_angle(&self, t: f64) -> f64 {
        match self.target {
            TaskTarget::Orientation(phi) => phi,
            TaskTarget::OrientationCycle {
                offset,
                amplitude,
                period,
            } => offset + amplitude * (2.0 * PI * t / period).sin(),
            TaskTarget::Position(_) => 0.0,
        }
    }
}

/// Everything one controller evaluation produces; the simulator records the
/// per-task errors and the acceptance checks read the projectors.
#[derive(Debug, Clone)]
pub struct HierarchyEval {
    /// Control torque including gravity compensation, dimension dof.
    pub tau: DVector<f64>,
    /// `‖Δ_k‖` per task.
    pub task_errors: Vec<f64>,
    /// Task Jacobians, in priority order.
    pub jacobians: Vec<DMatrix<f64>>,
    /// Successive projectors `N_k^suc` (element 0 is the identity).
    pub projectors: Vec<DMatrix<f64>>,
    /// Projector for the full task stack (nullspace of every task).
    pub full_projector: DMatrix<f64>,
    /// Inertia matrix at the evaluated configuration.
    pub b: DMatrix<f64>,
}

/// The prioritized controller.
#[derive(Debug, Clone)]
pub struct HierarchicalController {
    pub tasks: Vec<TaskSpec>,
}

impl HierarchicalController {
    pub fn new(tasks: Vec<TaskSpec>) -> Result<Self> {
        for task in &tasks {
            task.validate()?;
        }
        Ok(HierarchicalController { tasks })
    }

    fn task_jacobian(
        &self,
        model: &SoftRobotModel,
        q: &DVector<f64>,
        kind: TaskKind,
    ) -> Result<DMatrix<f64>> {
        match kind {
            TaskKind::TipPosition => {
                let j = model.point_jacobian(q, crate::augmented::PointSelector::Tip, false)?;
                Ok(j)
            }
            TaskKind::TipOrientation => {
                let j = model.point_jacobian(q, crate::augmented::PointSelector::Tip, true)?;
                Ok(j.rows(2, 1).into_owned())
            }
            TaskKind::BaseOrientation => {
                if !model.is_floating() {
                    return Err(Error::Config(
                        "base orientation task requires a floating base".into(),
                    ));
                }
                let mut j = DMatrix::zeros(1, model.dof());
                j[(0, 2)] = 1.0;
                Ok(j)
            }
        }
    }

    fn task_offset(
        &self,
        task: &TaskSpec,
        model: &SoftRobotModel,
        q: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        match task.kind {
            TaskKind::TipPosition => {
                let (tip, _, _, _) = model.tip_state(q, &DVector::zeros(model.dof()))?;
                let x_d = match task.target {
                    TaskTarget::Position(p) => p,
                    _ => return Err(Error::Config("tip position task needs a position target".into())),
                };
                Ok(DVector::from_column_slice(&[x_d.x - tip.x, x_d.y - tip.y]))
            }
            TaskKind::TipOrientation => {
                let (_, _, rot, _) = model.tip_state(q, &DVector::zeros(model.dof()))?;
                Ok(DVector::from_element(
                    1,
                    orientation_offset(rot, task.target_angle(t)),
                ))
            }
            TaskKind::BaseOrientation => Ok(DVector::from_element(
                1,
                orientation_offset(q[2], task.target_angle(t)),
            )),
        }
    }

    /// Evaluates the control law at `(q, q̇)` and time `t`.
    pub fn evaluate(
        &self,
        model: &SoftRobotModel,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        t: f64,
    ) -> Result<HierarchyEval> {
        let dof = model.dof();
        let total_rows: usize = self.tasks.iter().map(|t| t.kind.rows()).sum();
        if total_rows > dof {
            return Err(Error::RankOverflow {
                rows: total_rows,
                dofs: dof,
            });
        }

        let b = model.mass_matrix(q)?;
        let mut tau = model.gravity_vector(q)?;
        let mut task_errors = Vec::with_capacity(self.tasks.len());
        let mut jacobians = Vec::with_capacity(self.tasks.len());
        let mut projectors = Vec::with_capacity(self.tasks.len());

        let mut stacked: Option<DMatrix<f64>> = None;
        for task in &self.tasks {
            let j = self.task_jacobian(model, q, task.kind)?;
            let projector = match &stacked {
                None => DMatrix::identity(dof, dof),
                Some(hp) => nullspace_projector(hp, &b)?,
            };

            let offset = self.task_offset(task, model, q, t)?;
            task_errors.push(offset.norm());

            let task_vel = &j * qdot;
            let mut force = DVector::zeros(j.nrows());
            for r in 0..j.nrows() {
                force[r] = task.stiffness[r] * offset[r] - task.damping[r] * task_vel[r];
            }
            tau += &projector * (j.transpose() * force);

            stacked = Some(match stacked {
                None => j.clone(),
                Some(hp) => stack_rows(&hp, &j),
            });
            jacobians.push(j);
            projectors.push(projector);
        }

        let full_projector = match &stacked {
            None => DMatrix::identity(dof, dof),
            Some(hp) => nullspace_projector(hp, &b)?,
        };

        Ok(HierarchyEval {
            tau,
            task_errors,
            jacobians,
            projectors,
            full_projector,
            b,
        })
    }
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}
