//! Closed-form constant-curvature segment transforms and PCC chain forward
//! kinematics.
//!
//! A planar constant-curvature segment of length `L` bent by the degree of
//! curvature `q` maps its base frame to its tip frame through a rotation by
//! `q` and a translation `[L sin(q)/q, L (1 - cos q)/q]`. Angles accumulate on
//! the real line; nothing is wrapped.

use nalgebra::Vector2;

use crate::error::{ensure_finite, Error, Result};
use crate::series;

/// Geometry of a single constant-curvature segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGeometry {
    /// Arc length of the segment centerline, m.
    pub length: f64,
    /// Radius of the segment cross-section, m.
    pub section_radius: f64,
}

impl SegmentGeometry {
    pub fn new(length: f64, section_radius: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid("length", "must be finite and > 0"));
        }
        if !(section_radius.is_finite() && section_radius > 0.0) {
            return Err(Error::invalid("section_radius", "must be finite and > 0"));
        }
        Ok(Self {
            length,
            section_radius,
        })
    }
}

/// A rigid transform of the plane, stored as an unwrapped rotation angle and
/// a translation (the 3×3 homogeneous matrix in compressed form).
///
/// Keeping the angle instead of a rotation matrix preserves winding, so the
/// accumulated orientation of a chain that bends by 2π reads 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarTransform {
    pub rotation: f64,
    pub translation: Vector2<f64>,
}

impl PlanarTransform {
    pub fn identity() -> Self {
        Self {
            rotation: 0.0,
            translation: Vector2::zeros(),
        }
    }

    pub fn new(rotation: f64, translation: Vector2<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// `self` followed by `other` (frames compose on the right).
    pub fn compose(&self, other: &PlanarTransform) -> PlanarTransform {
        PlanarTransform {
            rotation: self.rotation + other.rotation,
            translation: self.translation + self.rotate_vector(&other.translation),
        }
    }

    /// Applies the transform to a point.
    pub fn apply(&self, point: &Vector2<f64>) -> Vector2<f64> {
        self.translation + self.rotate_vector(point)
    }

    /// Rotates a vector by the transform's rotation (no translation).
    pub fn rotate_vector(&self, v: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.rotation.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    pub fn inverse(&self) -> PlanarTransform {
        let inv = PlanarTransform {
            rotation: -self.rotation,
            translation: Vector2::zeros(),
        };
        PlanarTransform {
            rotation: -self.rotation,
            translation: inv.rotate_vector(&(-self.translation)),
        }
    }

    /// Unit vector along the local x axis expressed in the parent frame.
    pub fn heading(&self) -> Vector2<f64> {
        let (s, c) = self.rotation.sin_cos();
        Vector2::new(c, s)
    }
}

/// Transform across one constant-curvature segment.
///
/// The straight-configuration singularity of the closed form is removable;
/// the scalar kernels in [`crate::series`] switch to Taylor branches below
/// 1e-4 rad.
pub fn segment_transform(q: f64, length: f64) -> Result<PlanarTransform> {
    ensure_finite("segment_transform", [&q, &length])?;
    if length <= 0.0 {
        return Err(Error::invalid("length", "must be > 0"));
    }
    Ok(PlanarTransform {
        rotation: q,
        translation: Vector2::new(length * series::sinc(q), length * series::cosc(q)),
    })
}

/// Poses of every segment-end frame of a PCC chain, base first.
///
/// Element `0` is `base`; element `i` is the pose of frame `{S_i}` for
/// `i = 1..=n`, i.e. the cumulative product `base · T_0^1 · … · T_{i-1}^i`.
pub fn chain_poses(
    q: &[f64],
    geometry: &[SegmentGeometry],
    base: &PlanarTransform,
) -> Result<Vec<PlanarTransform>> {
    if q.len() != geometry.len() {
        return Err(Error::DimensionMismatch {
            context: "chain_poses",
            expected: geometry.len(),
            actual: q.len(),
        });
    }
    ensure_finite("chain_poses", q.iter())?;
    let mut poses = Vec::with_capacity(q.len() + 1);
    poses.push(*base);
    let mut current = *base;
    for (&qi, geom) in q.iter().zip(geometry) {
        current = current.compose(&segment_transform(qi, geom.length)?);
        poses.push(current);
    }
    Ok(poses)
}

/// Position of the chain tip (translation of the last frame of [`chain_poses`]).
pub fn tip_position(
    q: &[f64],
    geometry: &[SegmentGeometry],
    base: &PlanarTransform,
) -> Result<Vector2<f64>> {
    let poses = chain_poses(q, geometry, base)?;
    Ok(poses.last().expect("chain_poses returns at least the base").translation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn geom(lengths: &[f64]) -> Vec<SegmentGeometry> {
        lengths
            .iter()
            .map(|&l| SegmentGeometry::new(l, 0.02).unwrap())
            .collect()
    }

    /// 3×3 homogeneous matrix product, used as an independent oracle.
    fn homogeneous(q: f64, l: f64) -> [[f64; 3]; 3] {
        let (s, c) = q.sin_cos();
        [
            [c, -s, l * q.sin() / q],
            [s, c, l * (1.0 - q.cos()) / q],
            [0.0, 0.0, 1.0],
        ]
    }

    fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    #[test]
    fn straight_segment() {
        let t = segment_transform(0.0, 1.0).unwrap();
        assert_eq!(t.rotation, 0.0);
        assert_abs_diff_eq!(t.translation.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.translation.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quarter_circle_segment() {
        let t = segment_transform(PI / 2.0, 1.0).unwrap();
        assert_eq!(t.rotation, PI / 2.0);
        assert_abs_diff_eq!(t.translation.x, 2.0 / PI, epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation.y, 2.0 / PI, epsilon = 1e-12);
        // Mirror symmetry: q -> -q flips the y translation.
        let m = segment_transform(-PI / 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.translation.x, 2.0 / PI, epsilon = 1e-12);
        assert_abs_diff_eq!(m.translation.y, -2.0 / PI, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(segment_transform(f64::NAN, 1.0).is_err());
        assert!(segment_transform(0.1, 0.0).is_err());
        assert!(chain_poses(&[0.0], &geom(&[1.0, 1.0]), &PlanarTransform::identity()).is_err());
        assert!(chain_poses(&[f64::INFINITY], &geom(&[1.0]), &PlanarTransform::identity()).is_err());
    }

    #[test]
    fn straight_chain_tips() {
        let poses = chain_poses(&[0.0, 0.0], &geom(&[1.0, 1.0]), &PlanarTransform::identity()).unwrap();
        assert_eq!(poses.len(), 3);
        assert_abs_diff_eq!(poses[1].translation.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(poses[2].translation.x, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(poses[2].translation.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rotations_accumulate_unwrapped() {
        let poses = chain_poses(&[PI, PI], &geom(&[1.0, 1.0]), &PlanarTransform::identity()).unwrap();
        assert_abs_diff_eq!(poses[1].rotation, PI, epsilon = 1e-15);
        assert_abs_diff_eq!(poses[2].rotation, 2.0 * PI, epsilon = 1e-15);
    }

    #[test]
    fn single_segment_chain_equals_segment_transform() {
        let poses = chain_poses(&[PI / 2.0], &geom(&[1.0]), &PlanarTransform::identity()).unwrap();
        let t = segment_transform(PI / 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(poses[1].translation.x, t.translation.x, epsilon = 1e-15);
        assert_abs_diff_eq!(poses[1].translation.y, t.translation.y, epsilon = 1e-15);
        assert_eq!(poses[1].rotation, t.rotation);
    }

    #[test]
    fn tip_of_straight_three_segment_chain() {
        let tip = tip_position(&[0.0; 3], &geom(&[1.0; 3]), &PlanarTransform::identity()).unwrap();
        assert_abs_diff_eq!(tip.x, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tip.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn tip_matches_homogeneous_product_oracle() {
        // Two half-circle segments; the oracle is the literal 3x3 product.
        let q = [PI, PI];
        let prod = matmul(&homogeneous(q[0], 1.0), &homogeneous(q[1], 1.0));
        let tip = tip_position(&q, &geom(&[1.0, 1.0]), &PlanarTransform::identity()).unwrap();
        assert_abs_diff_eq!(tip.x, prod[0][2], epsilon = 1e-12);
        assert_abs_diff_eq!(tip.y, prod[1][2], epsilon = 1e-12);
        // Geometrically the chain closes back onto the base.
        assert_abs_diff_eq!(tip.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tip.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn continuity_at_zero() {
        let t0 = segment_transform(0.0, 1.0).unwrap();
        for &eps in &[1e-3, 1e-5, 1e-7, 1e-9] {
            let t = segment_transform(eps, 1.0).unwrap();
            let d = (t.translation - t0.translation).norm() + (t.rotation - t0.rotation).abs();
            assert!(d < 3.0 * eps, "discontinuity at eps={eps}: {d}");
        }
    }

    #[test]
    fn tip_derivative_continuous_across_zero() {
        // Central difference of the tip position w.r.t. q_1, straddling q = 0.
        let g = geom(&[0.8, 0.6]);
        let h = 1e-6;
        let d_at = |q1: f64| {
            let p = tip_position(&[q1 + h, 0.3], &g, &PlanarTransform::identity()).unwrap();
            let m = tip_position(&[q1 - h, 0.3], &g, &PlanarTransform::identity()).unwrap();
            (p - m) / (2.0 * h)
        };
        let left = d_at(-1e-8);
        let right = d_at(1e-8);
        assert_abs_diff_eq!(left.x, right.x, epsilon = 1e-7);
        assert_abs_diff_eq!(left.y, right.y, epsilon = 1e-7);
    }

    proptest! {
        /// Composing sub-chain results equals evaluating the concatenated chain.
        #[test]
        fn chain_group_property(
            qa in proptest::collection::vec(-3.0f64..3.0, 1..4),
            qb in proptest::collection::vec(-3.0f64..3.0, 1..4),
        ) {
            let ga = geom(&vec![0.5; qa.len()]);
            let gb = geom(&vec![0.7; qb.len()]);
            let base = PlanarTransform::new(0.3, Vector2::new(0.1, -0.2));

            let pa = chain_poses(&qa, &ga, &base).unwrap();
            let pb = chain_poses(&qb, &gb, pa.last().unwrap()).unwrap();

            let mut q = qa.clone();
            q.extend_from_slice(&qb);
            let mut g = ga.clone();
            g.extend_from_slice(&gb);
            let pall = chain_poses(&q, &g, &base).unwrap();

            let tip_split = pb.last().unwrap();
            let tip_all = pall.last().unwrap();
            prop_assert!((tip_split.translation - tip_all.translation).norm() < 1e-12);
            prop_assert!((tip_split.rotation - tip_all.rotation).abs() < 1e-12);
        }

        /// Identity element and associativity of composition.
        #[test]
        fn transform_group_axioms(
            r1 in -3.0f64..3.0, x1 in -1.0f64..1.0, y1 in -1.0f64..1.0,
            r2 in -3.0f64..3.0, x2 in -1.0f64..1.0, y2 in -1.0f64..1.0,
            r3 in -3.0f64..3.0, x3 in -1.0f64..1.0, y3 in -1.0f64..1.0,
        ) {
            let a = PlanarTransform::new(r1, Vector2::new(x1, y1));
            let b = PlanarTransform::new(r2, Vector2::new(x2, y2));
            let c = PlanarTransform::new(r3, Vector2::new(x3, y3));
            let id = PlanarTransform::identity();

            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.translation - right.translation).norm() < 1e-12);
            prop_assert!((left.rotation - right.rotation).abs() < 1e-12);

            let ai = a.compose(&id);
            prop_assert!((ai.translation - a.translation).norm() < 1e-15);

            let inv = a.compose(&a.inverse());
            prop_assert!(inv.translation.norm() < 1e-12);
            prop_assert!(inv.rotation.abs() < 1e-12);
        }
    }
}
