//! The dynamically consistent rigid chain equivalent to a planar PCC arm.
//!
//! Each constant-curvature segment maps to four rigid joints: a revolute half
//! bend, two prismatic extensions along the chord, and a second revolute half
//! bend (`[q/2, L sin(q/2)/q, L sin(q/2)/q, q/2]`). The segment mass is a
//! point mass attached after the first prismatic joint, which places it at
//! the midpoint of the segment chord for every configuration. Composing the
//! four joint motions reproduces the segment transform exactly, so the rigid
//! chain and the soft arm share all segment-end frames.
//!
//! A floating base prepends three coordinates `(x_b, y_b, θ_b)` that pass
//! through the configuration map unchanged.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::description::{BaseKind, RobotDescription};
use crate::error::{ensure_finite, Error, Result};
use crate::kinematics::PlanarTransform;
use crate::series;

/// Joints in the rigid chain per CC segment.
pub const JOINTS_PER_SEGMENT: usize = 4;

/// Step size for the central differences behind the Christoffel assembly of
/// the Coriolis matrix.
pub const CHRISTOFFEL_FD_STEP: f64 = 1e-6;

/// Mass point or frame of the rigid chain selected for a task Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSelector {
    /// The end frame of the last segment.
    Tip,
    /// Frame `S_i`, `i` in `1..=n`.
    SegmentEnd(usize),
    /// The lumped mass of segment `i`, `i` in `1..=n`.
    MassPoint(usize),
}

/// The equivalent rigid chain of a PCC arm.
#[derive(Debug, Clone)]
pub struct AugmentedChain {
    lengths: Vec<f64>,
    masses: Vec<f64>,
    base: BaseKind,
    gravity: Vector2<f64>,
}

#[derive(Debug, Clone, Copy)]
enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, Copy)]
struct JointEval {
    kind: JointKind,
    /// Point the joint acts at (revolute) — a material point of the carrying
    /// body.
    anchor: Vector2<f64>,
    anchor_vel: Vector2<f64>,
    /// Axis direction (prismatic), unit.
    dir: Vector2<f64>,
    /// Angular rate of the body carrying the axis (prismatic).
    carrier_rate: f64,
}

/// A tracked point of the chain with its velocity.
#[derive(Debug, Clone, Copy)]
pub struct PointEval {
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
}

/// A tracked frame of the chain with its twist.
#[derive(Debug, Clone, Copy)]
pub struct FrameEval {
    pub pose: PlanarTransform,
    pub vel: Vector2<f64>,
    pub rot_rate: f64,
}

/// Result of one forward pass over the chain at `(ξ, ξ̇)`.
#[derive(Debug, Clone)]
pub struct ChainEval {
    dim: usize,
    floating: bool,
    base_origin: Vector2<f64>,
    base_vel: Vector2<f64>,
    joints: Vec<JointEval>,
    /// One entry per segment: the lumped mass point.
    pub mass_points: Vec<PointEval>,
    /// Frames `S_0..=S_n`.
    pub frames: Vec<FrameEval>,
}

fn rot90(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Configuration of the four joints equivalent to one segment.
pub fn segment_map(q: f64, length: f64) -> Result<[f64; 4]> {
    ensure_finite("segment_map", [&q, &length])?;
    if length <= 0.0 {
        return Err(Error::invalid("length", "must be > 0"));
    }
    let ext = length * series::half_chord(q);
    Ok([0.5 * q, ext, ext, 0.5 * q])
}

/// Per-segment column of the map Jacobian: `[1/2, L_c, L_c, 1/2]` with
/// `L_c = L (q cos(q/2) - 2 sin(q/2)) / (2 q²)`.
pub fn segment_map_jacobian(q: f64, length: f64) -> Result<[f64; 4]> {
    ensure_finite("segment_map_jacobian", [&q, &length])?;
    let lc = length * series::half_chord_deriv(q);
    Ok([0.5, lc, lc, 0.5])
}

impl AugmentedChain {
    pub fn new(description: &RobotDescription) -> Self {
        AugmentedChain {
            lengths: description.segments.iter().map(|s| s.length).collect(),
            masses: description.segments.iter().map(|s| s.mass).collect(),
            base: description.base,
            gravity: description.gravity,
        }
    }

    pub fn segment_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_floating(&self) -> bool {
        self.base.is_floating()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn gravity(&self) -> Vector2<f64> {
        self.gravity
    }

    fn base_offset(&self) -> usize {
        if self.is_floating() {
            3
        } else {
            0
        }
    }

    /// Dimension of the augmented configuration ξ.
    pub fn dim(&self) -> usize {
        JOINTS_PER_SEGMENT * self.segment_count() + self.base_offset()
    }

    /// Dimension of the curvature-space configuration (plus base coordinates
    /// when floating).
    pub fn gen_dim(&self) -> usize {
        self.segment_count() + self.base_offset()
    }

    fn check_gen_dim(&self, context: &'static str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.gen_dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.gen_dim(),
                actual: v.len(),
            });
        }
        ensure_finite(context, v.iter())
    }

    fn check_dim(&self, context: &'static str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                actual: v.len(),
            });
        }
        ensure_finite(context, v.iter())
    }

    /// The configuration map `ξ = m(q)`. Base coordinates (when floating)
    /// pass through unchanged.
    pub fn map(&self, q_gen: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_gen_dim("map", q_gen)?;
        let off = self.base_offset();
        let mut xi = DVector::zeros(self.dim());
        for k in 0..off {
            xi[k] = q_gen[k];
        }
        for (i, &l) in self.lengths.iter().enumerate() {
            let block = segment_map(q_gen[off + i], l)?;
            for (j, &v) in block.iter().enumerate() {
                xi[off + JOINTS_PER_SEGMENT * i + j] = v;
            }
        }
        Ok(xi)
    }

    /// The map Jacobian `J_m = ∂m/∂q`, block diagonal per segment (identity
    /// on the base block when floating).
    pub fn map_jacobian(&self, q_gen: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_gen_dim("map_jacobian", q_gen)?;
        let off = self.base_offset();
        let mut jm = DMatrix::zeros(self.dim(), self.gen_dim());
        for k in 0..off {
            jm[(k, k)] = 1.0;
        }
        for (i, &l) in self.lengths.iter().enumerate() {
            let col = segment_map_jacobian(q_gen[off + i], l)?;
            for (j, &v) in col.iter().enumerate() {
                jm[(off + JOINTS_PER_SEGMENT * i + j, off + i)] = v;
            }
        }
        Ok(jm)
    }

    /// Time derivative of the map Jacobian at `(q, q̇)`. Revolute rows are
    /// constant, so only the prismatic rows carry `dL_c/dq · q̇`.
    pub fn map_jacobian_dot(
        &self,
        q_gen: &DVector<f64>,
        qdot_gen: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check_gen_dim("map_jacobian_dot", q_gen)?;
        self.check_gen_dim("map_jacobian_dot", qdot_gen)?;
        let off = self.base_offset();
        let mut jdot = DMatrix::zeros(self.dim(), self.gen_dim());
        for (i, &l) in self.lengths.iter().enumerate() {
            let rate = l * series::half_chord_deriv2(q_gen[off + i]) * qdot_gen[off + i];
            jdot[(off + JOINTS_PER_SEGMENT * i + 1, off + i)] = rate;
            jdot[(off + JOINTS_PER_SEGMENT * i + 2, off + i)] = rate;
        }
        Ok(jdot)
    }

    /// Forward pass over the rigid chain at `(ξ, ξ̇)`, producing every joint
    /// anchor, mass point, and segment-end frame with velocities.
    pub fn eval(&self, xi: &DVector<f64>, xi_dot: &DVector<f64>) -> Result<ChainEval> {
        self.check_dim("eval", xi)?;
        self.check_dim("eval", xi_dot)?;

        let (mut pos, mut theta, mut vel, mut theta_dot) = match self.base {
            BaseKind::Fixed { pose } => (pose.translation, pose.rotation, Vector2::zeros(), 0.0),
            BaseKind::Floating { .. } => (
                Vector2::new(xi[0], xi[1]),
                xi[2],
                Vector2::new(xi_dot[0], xi_dot[1]),
                xi_dot[2],
            ),
        };
        let base_origin = pos;
        let base_vel = vel;

        let n = self.segment_count();
        let off = self.base_offset();
        let mut joints = Vec::with_capacity(JOINTS_PER_SEGMENT * n);
        let mut mass_points = Vec::with_capacity(n);
        let mut frames = Vec::with_capacity(n + 1);
        frames.push(FrameEval {
            pose: PlanarTransform::new(theta, pos),
            vel,
            rot_rate: theta_dot,
        });

        for seg in 0..n {
            let j0 = off + JOINTS_PER_SEGMENT * seg;

            // Revolute half bend.
            joints.push(JointEval {
                kind: JointKind::Revolute,
                anchor: pos,
                anchor_vel: vel,
                dir: Vector2::zeros(),
                carrier_rate: 0.0,
            });
            theta += xi[j0];
            theta_dot += xi_dot[j0];

            // Two prismatic extensions along the (now common) heading.
            let u = Vector2::new(theta.cos(), theta.sin());
            for k in 1..=2 {
                joints.push(JointEval {
                    kind: JointKind::Prismatic,
                    anchor: pos,
                    anchor_vel: vel,
                    dir: u,
                    carrier_rate: theta_dot,
                });
                vel += xi_dot[j0 + k] * u + xi[j0 + k] * theta_dot * rot90(&u);
                pos += xi[j0 + k] * u;
                if k == 1 {
                    mass_points.push(PointEval { pos, vel });
                }
            }

            // Closing revolute half bend.
            joints.push(JointEval {
                kind: JointKind::Revolute,
                anchor: pos,
                anchor_vel: vel,
                dir: Vector2::zeros(),
                carrier_rate: 0.0,
            });
            theta += xi[j0 + 3];
            theta_dot += xi_dot[j0 + 3];

            frames.push(FrameEval {
                pose: PlanarTransform::new(theta, pos),
                vel,
                rot_rate: theta_dot,
            });
        }

        Ok(ChainEval {
            dim: self.dim(),
            floating: self.is_floating(),
            base_origin,
            base_vel,
            joints,
            mass_points,
            frames,
        })
    }

    /// Inertia matrix of the rigid chain: point-mass contributions
    /// `Σ μ_i J_iᵀ J_i` plus base mass and rotational inertia when floating.
    ///
    /// Massless links leave this matrix only positive semi-definite; it is
    /// never inverted in augmented space.
    pub fn inertia(&self, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        let eval = self.eval(xi, &DVector::zeros(self.dim()))?;
        Ok(self.inertia_from_eval(&eval))
    }

    pub(crate) fn inertia_from_eval(&self, eval: &ChainEval) -> DMatrix<f64> {
        let dim = self.dim();
        let mut b = DMatrix::zeros(dim, dim);
        for (i, &mu) in self.masses.iter().enumerate() {
            let j = eval.mass_jacobian(i + 1);
            // b += mu * jᵀ j, accumulated in place.
            for (col_a, col_b) in (0..dim).flat_map(|a| (a..dim).map(move |c| (a, c))) {
                let dot =
                    j[(0, col_a)] * j[(0, col_b)] + j[(1, col_a)] * j[(1, col_b)];
                b[(col_a, col_b)] += mu * dot;
            }
        }
        // Mirror the upper triangle.
        for a in 0..dim {
            for c in (a + 1)..dim {
                b[(c, a)] = b[(a, c)];
            }
        }
        if let BaseKind::Floating { mass, inertia } = self.base {
            b[(0, 0)] += mass;
            b[(1, 1)] += mass;
            b[(2, 2)] += inertia;
        }
        b
    }

    /// Gravity torque vector `G_ξ = ∂U/∂ξ` with `U = -Σ μ_i g·p_i` (plus the
    /// base mass term when floating).
    pub fn gravity_torque(&self, eval: &ChainEval) -> DVector<f64> {
        let dim = self.dim();
        let mut g = DVector::zeros(dim);
        for (i, &mu) in self.masses.iter().enumerate() {
            let j = eval.mass_jacobian(i + 1);
            for c in 0..dim {
                g[c] -= mu * (j[(0, c)] * self.gravity.x + j[(1, c)] * self.gravity.y);
            }
        }
        if let BaseKind::Floating { mass, .. } = self.base {
            g[0] -= mass * self.gravity.x;
            g[1] -= mass * self.gravity.y;
        }
        g
    }

    /// Coriolis/centrifugal generalized force `C_ξ(ξ, ξ̇) ξ̇`, computed
    /// analytically from the mass-point Jacobian derivatives.
    pub fn coriolis_force(&self, eval: &ChainEval, xi_dot: &DVector<f64>) -> DVector<f64> {
        let dim = self.dim();
        let mut c = DVector::zeros(dim);
        for (i, &mu) in self.masses.iter().enumerate() {
            let point = &eval.mass_points[i];
            let accel = eval.point_coriolis_accel(point, eval.joints_before_mass(i + 1), xi_dot);
            let j = eval.mass_jacobian(i + 1);
            for col in 0..dim {
                c[col] += mu * (j[(0, col)] * accel.x + j[(1, col)] * accel.y);
            }
        }
        c
    }

    /// Potential energy (gravity only), J.
    pub fn potential_energy(&self, eval: &ChainEval) -> f64 {
        let mut u = 0.0;
        for (i, &mu) in self.masses.iter().enumerate() {
            u -= mu * self.gravity.dot(&eval.mass_points[i].pos);
        }
        if let BaseKind::Floating { mass, .. } = self.base {
            u -= mass * self.gravity.dot(&eval.base_origin);
        }
        u
    }

    /// Kinetic energy at the evaluated state, J.
    pub fn kinetic_energy(&self, eval: &ChainEval, xi_dot: &DVector<f64>) -> f64 {
        let mut t = 0.0;
        for (i, &mu) in self.masses.iter().enumerate() {
            t += 0.5 * mu * eval.mass_points[i].vel.norm_squared();
        }
        if let BaseKind::Floating { mass, inertia } = self.base {
            t += 0.5 * mass * eval.base_vel.norm_squared();
            t += 0.5 * inertia * xi_dot[2] * xi_dot[2];
        }
        t
    }

    /// Full augmented dynamics terms `(B_ξ, C_ξ, G_ξ)` at `(ξ, ξ̇)`.
    ///
    /// `C_ξ` is assembled from the Christoffel symbols of `B_ξ`, with the
    /// partial derivatives of `B_ξ` taken by central differences
    /// ([`CHRISTOFFEL_FD_STEP`]); this construction makes `Ḃ_ξ - 2 C_ξ`
    /// skew-symmetric, which the controllers rely on.
    pub fn augmented_dynamics(
        &self,
        xi: &DVector<f64>,
        xi_dot: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
        let eval = self.eval(xi, xi_dot)?;
        let b = self.inertia_from_eval(&eval);
        let g = self.gravity_torque(&eval);

        let dim = self.dim();
        let h = CHRISTOFFEL_FD_STEP;
        let mut db = Vec::with_capacity(dim);
        let mut xi_pert = xi.clone();
        for k in 0..dim {
            xi_pert[k] = xi[k] + h;
            let bp = self.inertia(&xi_pert)?;
            xi_pert[k] = xi[k] - h;
            let bm = self.inertia(&xi_pert)?;
            xi_pert[k] = xi[k];
            db.push((bp - bm) / (2.0 * h));
        }

        let mut c = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut sum = 0.0;
                for k in 0..dim {
                    sum += (db[k][(i, j)] + db[j][(i, k)] - db[i][(j, k)]) * xi_dot[k];
                }
                c[(i, j)] = 0.5 * sum;
            }
        }
        Ok((b, c, g))
    }

    /// Task Jacobian of a selected point: 2 rows (linear velocity) or, with
    /// `with_rotation`, 3 rows (linear velocity and angular rate; frames
    /// only).
    pub fn task_jacobian(
        &self,
        eval: &ChainEval,
        selector: PointSelector,
        with_rotation: bool,
    ) -> Result<DMatrix<f64>> {
        let n = self.segment_count();
        match selector {
            PointSelector::Tip => Ok(if with_rotation {
                eval.frame_jacobian(n)
            } else {
                eval.frame_jacobian(n).rows(0, 2).into_owned()
            }),
            PointSelector::SegmentEnd(i) => {
                if i == 0 || i > n {
                    return Err(Error::invalid(
                        "selector",
                        format!("segment end {i} out of range 1..={n}"),
                    ));
                }
                Ok(if with_rotation {
                    eval.frame_jacobian(i)
                } else {
                    eval.frame_jacobian(i).rows(0, 2).into_owned()
                })
            }
            PointSelector::MassPoint(i) => {
                if i == 0 || i > n {
                    return Err(Error::invalid(
                        "selector",
                        format!("mass point {i} out of range 1..={n}"),
                    ));
                }
                if with_rotation {
                    return Err(Error::invalid(
                        "selector",
                        "a mass point has no angular rate row",
                    ));
                }
                Ok(eval.mass_jacobian(i))
            }
        }
    }
}

impl ChainEval {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn base_cols(&self) -> usize {
        if self.floating {
            3
        } else {
            0
        }
    }

    /// Arm joints preceding the mass of segment `seg` (1-based): the bend and
    /// the first extension.
    fn joints_before_mass(&self, seg: usize) -> usize {
        JOINTS_PER_SEGMENT * (seg - 1) + 2
    }

    /// Linear Jacobian (2 × dim) of an arbitrary tracked point influenced by
    /// the first `n_joints` arm joints.
    fn point_jacobian(&self, point: &PointEval, n_joints: usize) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2, self.dim);
        let off = self.base_cols();
        if self.floating {
            j[(0, 0)] = 1.0;
            j[(1, 1)] = 1.0;
            let r = rot90(&(point.pos - self.base_origin));
            j[(0, 2)] = r.x;
            j[(1, 2)] = r.y;
        }
        for (k, joint) in self.joints.iter().take(n_joints).enumerate() {
            let col = match joint.kind {
                JointKind::Revolute => rot90(&(point.pos - joint.anchor)),
                JointKind::Prismatic => joint.dir,
            };
            j[(0, off + k)] = col.x;
            j[(1, off + k)] = col.y;
        }
        j
    }

    /// `J̇ ξ̇` for a tracked point: the acceleration it would have with
    /// `ξ̈ = 0`.
    fn point_coriolis_accel(
        &self,
        point: &PointEval,
        n_joints: usize,
        xi_dot: &DVector<f64>,
    ) -> Vector2<f64> {
        let off = self.base_cols();
        let mut a = Vector2::zeros();
        if self.floating {
            a += xi_dot[2] * rot90(&(point.vel - self.base_vel));
        }
        for (k, joint) in self.joints.iter().take(n_joints).enumerate() {
            let dcol = match joint.kind {
                JointKind::Revolute => rot90(&(point.vel - joint.anchor_vel)),
                JointKind::Prismatic => joint.carrier_rate * rot90(&joint.dir),
            };
            a += xi_dot[off + k] * dcol;
        }
        a
    }

    /// Linear Jacobian (2 × dim) of the mass point of segment `seg`
    /// (1-based).
    pub fn mass_jacobian(&self, seg: usize) -> DMatrix<f64> {
        self.point_jacobian(&self.mass_points[seg - 1], self.joints_before_mass(seg))
    }

    /// Frame Jacobian (3 × dim, rows `[vx, vy, ω]`) of frame `S_i`,
    /// `i` in `0..=n`.
    pub fn frame_jacobian(&self, i: usize) -> DMatrix<f64> {
        let frame = &self.frames[i];
        let point = PointEval {
            pos: frame.pose.translation,
            vel: frame.vel,
        };
        let n_joints = JOINTS_PER_SEGMENT * i;
        let mut j = DMatrix::zeros(3, self.dim);
        j.rows_mut(0, 2)
            .copy_from(&self.point_jacobian(&point, n_joints));
        let off = self.base_cols();
        if self.floating {
            j[(2, 2)] = 1.0;
        }
        for (k, joint) in self.joints.iter().take(n_joints).enumerate() {
            if matches!(joint.kind, JointKind::Revolute) {
                j[(2, off + k)] = 1.0;
            }
        }
        j
    }

    /// `J̇ ξ̇` of a frame's linear rows (the angular row is constant).
    pub fn frame_coriolis_accel(&self, i: usize, xi_dot: &DVector<f64>) -> Vector2<f64> {
        let frame = &self.frames[i];
        let point = PointEval {
            pos: frame.pose.translation,
            vel: frame.vel,
        };
        self.point_coriolis_accel(&point, JOINTS_PER_SEGMENT * i, xi_dot)
    }
}
