//! Robot description: per-segment physical parameters, gravity, base kind,
//! and the strict on-disk schema with unit-suffixed field names.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::PlanarTransform;

/// Bending impedance of one segment: either the lumped diagonal values as
/// identified on hardware, or material constants from which the diagonal
/// entries follow as `(4/3) κ Δ³` and `(4/3) β Δ³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentImpedance {
    /// Lumped stiffness (N·m) and damping (N·m·s).
    Direct { stiffness: f64, damping: f64 },
    /// Elastic constant κ, friction constant β, section radius Δ (m).
    Material { kappa: f64, beta: f64, delta: f64 },
}

impl SegmentImpedance {
    /// Diagonal stiffness entry, N·m.
    pub fn stiffness(&self) -> f64 {
        match *self {
            SegmentImpedance::Direct { stiffness, .. } => stiffness,
            SegmentImpedance::Material { kappa, delta, .. } => {
                4.0 / 3.0 * kappa * delta * delta * delta
            }
        }
    }

    /// Diagonal damping entry, N·m·s.
    pub fn damping(&self) -> f64 {
        match *self {
            SegmentImpedance::Direct { damping, .. } => damping,
            SegmentImpedance::Material { beta, delta, .. } => {
                4.0 / 3.0 * beta * delta * delta * delta
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Centerline arc length, m.
    pub length: f64,
    /// Segment mass, kg (lumped at the chord midpoint).
    pub mass: f64,
    pub impedance: SegmentImpedance,
}

/// How the arm is mounted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseKind {
    /// Rigidly mounted at a fixed pose.
    Fixed { pose: PlanarTransform },
    /// Planar floating base (x, y, θ) with its own mass and rotational inertia.
    Floating { mass: f64, inertia: f64 },
}

impl BaseKind {
    pub fn fixed_at_origin() -> Self {
        BaseKind::Fixed {
            pose: PlanarTransform::identity(),
        }
    }

    pub fn is_floating(&self) -> bool {
        matches!(self, BaseKind::Floating { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotDescription {
    pub segments: Vec<SegmentParams>,
    /// Gravity acceleration, m/s². `[0, 0]` for an arm on a level plane.
    pub gravity: Vector2<f64>,
    pub base: BaseKind,
}

impl RobotDescription {
    /// The desk-scale planar arm: five segments of 0.063 m and 0.034 kg with
    /// the identified lumped stiffness 0.56 N·m and damping 0.1066 N·m·s,
    /// moving on a level plane (zero gravity), fixed base.
    pub fn planar_five_segment() -> Self {
        RobotDescription {
            segments: vec![
                SegmentParams {
                    length: 0.063,
                    mass: 0.034,
                    impedance: SegmentImpedance::Direct {
                        stiffness: 0.56,
                        damping: 0.1066,
                    },
                };
                5
            ],
            gravity: Vector2::zeros(),
            base: BaseKind::fixed_at_origin(),
        }
    }

    /// Same arm mounted on a planar floating base.
    pub fn floating_five_segment(base_mass: f64, base_inertia: f64) -> Self {
        let mut d = Self::planar_five_segment();
        d.base = BaseKind::Floating {
            mass: base_mass,
            inertia: base_inertia,
        };
        d
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Generalized-coordinate count: n, plus 3 when the base floats.
    pub fn dof(&self) -> usize {
        self.segments.len() + if self.base.is_floating() { 3 } else { 0 }
    }

    /// Copy with plant masses and stiffnesses scaled. Used to emulate model
    /// mismatch between the controller's model and the simulated plant.
    pub fn scaled(&self, mass_factor: f64, stiffness_factor: f64) -> Self {
        let mut out = self.clone();
        for seg in &mut out.segments {
            seg.mass *= mass_factor;
            seg.impedance = SegmentImpedance::Direct {
                stiffness: seg.impedance.stiffness() * stiffness_factor,
                damping: seg.impedance.damping(),
            };
        }
        if let BaseKind::Floating { mass, inertia } = &mut out.base {
            *mass *= mass_factor;
            *inertia *= mass_factor;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::invalid("segments", "at least one segment required"));
        }
        if !(self.gravity.x.is_finite() && self.gravity.y.is_finite()) {
            return Err(Error::invalid("gravity", "must be finite"));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            let field = |name: &str| format!("segments[{i}].{name}");
            if !(seg.length.is_finite() && seg.length > 0.0) {
                return Err(Error::invalid(field("length_m"), "must be > 0"));
            }
            if !(seg.mass.is_finite() && seg.mass > 0.0) {
                return Err(Error::invalid(field("mass_kg"), "must be > 0"));
            }
            match seg.impedance {
                SegmentImpedance::Direct { stiffness, damping } => {
                    if !(stiffness.is_finite() && stiffness > 0.0) {
                        return Err(Error::invalid(field("stiffness_Nm"), "must be > 0"));
                    }
                    if !(damping.is_finite() && damping > 0.0) {
                        return Err(Error::invalid(field("damping_Nms"), "must be > 0"));
                    }
                }
                SegmentImpedance::Material { kappa, beta, delta } => {
                    if !(kappa.is_finite() && kappa > 0.0) {
                        return Err(Error::invalid(field("material.kappa"), "must be > 0"));
                    }
                    if !(beta.is_finite() && beta > 0.0) {
                        return Err(Error::invalid(field("material.beta"), "must be > 0"));
                    }
                    if !(delta.is_finite() && delta > 0.0) {
                        return Err(Error::invalid(field("material.delta_m"), "must be > 0"));
                    }
                }
            }
        }
        if let BaseKind::Floating { mass, inertia } = self.base {
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::invalid("base.mass_kg", "must be > 0"));
            }
            if !(inertia.is_finite() && inertia > 0.0) {
                return Err(Error::invalid("base.inertia_kgm2", "must be > 0"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// On-disk schema. Field names carry units; unknown keys are rejected so a
// typo in a gain name fails loudly instead of being silently ignored.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RobotDescriptionFile {
    #[serde(default)]
    pub gravity: [f64; 2],
    #[serde(default = "BaseFile::fixed")]
    pub base: BaseFile,
    pub segments: Vec<SegmentFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseFile {
    Fixed {
        /// Optional base pose `[x_m, y_m, theta_rad]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pose: Option<[f64; 3]>,
    },
    Floating {
        mass_kg: f64,
        inertia_kgm2: f64,
    },
}

impl BaseFile {
    fn fixed() -> Self {
        BaseFile::Fixed { pose: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub length_m: f64,
    pub mass_kg: f64,
    #[serde(rename = "stiffness_Nm", default, skip_serializing_if = "Option::is_none")]
    pub stiffness_nm: Option<f64>,
    #[serde(rename = "damping_Nms", default, skip_serializing_if = "Option::is_none")]
    pub damping_nms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialFile {
    pub kappa: f64,
    pub beta: f64,
    pub delta_m: f64,
}

impl RobotDescriptionFile {
    pub fn to_description(&self) -> Result<RobotDescription> {
        let mut segments = Vec::with_capacity(self.segments.len());
        for (i, seg) in self.segments.iter().enumerate() {
            let impedance = match (seg.stiffness_nm, seg.damping_nms, &seg.material) {
                (Some(k), Some(d), None) => SegmentImpedance::Direct {
                    stiffness: k,
                    damping: d,
                },
                (None, None, Some(m)) => SegmentImpedance::Material {
                    kappa: m.kappa,
                    beta: m.beta,
                    delta: m.delta_m,
                },
                (None, None, None) => {
                    return Err(Error::Config(format!(
                        "segments[{i}]: either stiffness_Nm/damping_Nms or material must be given"
                    )))
                }
                _ => {
                    return Err(Error::Config(format!(
                        "segments[{i}]: stiffness_Nm/damping_Nms and material are mutually exclusive"
                    )))
                }
            };
            segments.push(SegmentParams {
                length: seg.length_m,
                mass: seg.mass_kg,
                impedance,
            });
        }
        let base = match self.base {
            BaseFile::Fixed { pose } => {
                let p = pose.unwrap_or([0.0; 3]);
                BaseKind::Fixed {
                    pose: PlanarTransform::new(p[2], Vector2::new(p[0], p[1])),
                }
            }
            BaseFile::Floating {
                mass_kg,
                inertia_kgm2,
            } => BaseKind::Floating {
                mass: mass_kg,
                inertia: inertia_kgm2,
            },
        };
        let description = RobotDescription {
            segments,
            gravity: Vector2::new(self.gravity[0], self.gravity[1]),
            base,
        };
        description.validate()?;
        Ok(description)
    }

    pub fn from_description(d: &RobotDescription) -> Self {
        RobotDescriptionFile {
            gravity: [d.gravity.x, d.gravity.y],
            base: match d.base {
                BaseKind::Fixed { pose } => BaseFile::Fixed {
                    pose: if pose == PlanarTransform::identity() {
                        None
                    } else {
                        Some([pose.translation.x, pose.translation.y, pose.rotation])
                    },
                },
                BaseKind::Floating { mass, inertia } => BaseFile::Floating {
                    mass_kg: mass,
                    inertia_kgm2: inertia,
                },
            },
            segments: d
                .segments
                .iter()
                .map(|s| {
                    let (stiffness_nm, damping_nms, material) = match s.impedance {
                        SegmentImpedance::Direct { stiffness, damping } => {
                            (Some(stiffness), Some(damping), None)
                        }
                        SegmentImpedance::Material { kappa, beta, delta } => (
                            None,
                            None,
                            Some(MaterialFile {
                                kappa,
                                beta,
                                delta_m: delta,
                            }),
                        ),
                    };
                    SegmentFile {
                        length_m: s.length,
                        mass_kg: s.mass,
                        stiffness_nm,
                        damping_nms,
                        material,
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_validates() {
        let d = RobotDescription::planar_five_segment();
        d.validate().unwrap();
        assert_eq!(d.dof(), 5);
        assert_eq!(d.segments[0].impedance.stiffness(), 0.56);
        assert_eq!(d.segments[0].impedance.damping(), 0.1066);
    }

    #[test]
    fn material_closed_forms() {
        let imp = SegmentImpedance::Material {
            kappa: 1.0,
            beta: 2.0,
            delta: 0.5,
        };
        approx::assert_abs_diff_eq!(imp.stiffness(), 1.0 / 6.0, epsilon = 1e-15);
        approx::assert_abs_diff_eq!(imp.damping(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_length_names_field() {
        let mut d = RobotDescription::planar_five_segment();
        d.segments[2].length = -1.0;
        let err = d.validate().unwrap_err();
        assert!(err.to_string().contains("segments[2].length_m"), "{err}");
    }

    #[test]
    fn single_segment_is_valid() {
        let mut d = RobotDescription::planar_five_segment();
        d.segments.truncate(1);
        d.validate().unwrap();
    }

    #[test]
    fn file_rejects_both_impedance_forms() {
        let file = RobotDescriptionFile {
            gravity: [0.0, 0.0],
            base: BaseFile::fixed(),
            segments: vec![SegmentFile {
                length_m: 0.1,
                mass_kg: 0.1,
                stiffness_nm: Some(1.0),
                damping_nms: Some(1.0),
                material: Some(MaterialFile {
                    kappa: 1.0,
                    beta: 1.0,
                    delta_m: 0.1,
                }),
            }],
        };
        assert!(file.to_description().is_err());
    }

    #[test]
    fn file_round_trip() {
        let d = RobotDescription::floating_five_segment(2.0, 0.02);
        let file = RobotDescriptionFile::from_description(&d);
        let back = file.to_description().unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn mismatch_scaling() {
        let d = RobotDescription::planar_five_segment().scaled(1.1, 1.1);
        approx::assert_relative_eq!(d.segments[0].mass, 0.034 * 1.1, epsilon = 1e-15);
        approx::assert_relative_eq!(
            d.segments[0].impedance.stiffness(),
            0.56 * 1.1,
            epsilon = 1e-12
        );
        approx::assert_relative_eq!(d.segments[0].impedance.damping(), 0.1066, epsilon = 1e-15);
    }
}
