//! Kernel centers and the monoid operations that compose them.
//!
//! A domain operation `∘` with identity `δ` turns the set of kernel centers
//! into a monoid. The convolution of two kernel sections is then
//! `k_a ∗ k_b = k_{a∘b}`, so everything the signal algebra needs from the
//! domain lives here.

use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for the rotation invariant `‖RᵀR − I‖_max` and `det R`.
pub const ROTATION_TOL: f64 = 1e-10;

/// Base point on the sphere that rotation centers act on.
pub const SPHERE_BASE: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// A point of the signal domain, i.e. the `v` in a kernel section `k_v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Center {
    Scalar(f64),
    Planar([f64; 2]),
    /// A point of `(0, 1]`. Build with [`Center::unit`].
    UnitInterval(f64),
    /// A rotation of `R³`. Build with [`Center::rotation`].
    Rotation3(Rotation3<f64>),
}

/// The shape of a center, used to match centers against kernels and operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterKind {
    Scalar,
    Planar,
    UnitInterval,
    Rotation3,
}

impl fmt::Display for CenterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CenterKind::Scalar => "scalar",
            CenterKind::Planar => "planar",
            CenterKind::UnitInterval => "unit-interval",
            CenterKind::Rotation3 => "rotation",
        };
        f.write_str(name)
    }
}

impl Center {
    pub fn unit(t: f64) -> Result<Self> {
        if t > 0.0 && t <= 1.0 {
            Ok(Center::UnitInterval(t))
        } else {
            Err(Error::Domain(format!("unit-interval center {t} outside (0, 1]")))
        }
    }

    /// Checks orthogonality and orientation before accepting the matrix.
    pub fn rotation(m: Matrix3<f64>) -> Result<Self> {
        let gram_err = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if !(gram_err <= ROTATION_TOL && (det - 1.0).abs() <= ROTATION_TOL) {
            return Err(Error::Domain(format!(
                "matrix is not a rotation (orthogonality error {gram_err:e}, det {det})"
            )));
        }
        Ok(Center::Rotation3(Rotation3::from_matrix_unchecked(m)))
    }

    /// Rotation by `angle` radians about the z axis.
    pub fn rotation_z(angle: f64) -> Self {
        Center::Rotation3(Rotation3::from_axis_angle(&Vector3::z_axis(), angle))
    }

    pub fn kind(&self) -> CenterKind {
        match self {
            Center::Scalar(_) => CenterKind::Scalar,
            Center::Planar(_) => CenterKind::Planar,
            Center::UnitInterval(_) => CenterKind::UnitInterval,
            Center::Rotation3(_) => CenterKind::Rotation3,
        }
    }

    /// Point on the unit sphere represented by a rotation center.
    pub fn sphere_point(&self) -> Option<Vector3<f64>> {
        match self {
            Center::Rotation3(r) => Some(r * SPHERE_BASE),
            _ => None,
        }
    }

    /// Serialized form: `[x]`, `[x, y]`, `[t]`, or the nine rotation entries row-major.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Center::Scalar(x) | Center::UnitInterval(x) => vec![*x],
            Center::Planar(p) => p.to_vec(),
            Center::Rotation3(r) => {
                let m = r.matrix();
                (0..3).flat_map(|i| (0..3).map(move |j| m[(i, j)])).collect()
            }
        }
    }

    pub fn from_slice(kind: CenterKind, xs: &[f64]) -> Result<Self> {
        let want = match kind {
            CenterKind::Scalar | CenterKind::UnitInterval => 1,
            CenterKind::Planar => 2,
            CenterKind::Rotation3 => 9,
        };
        if xs.len() != want {
            return Err(Error::Domain(format!(
                "{kind} center needs {want} coordinates, got {}",
                xs.len()
            )));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite center coordinate".into()));
        }
        match kind {
            CenterKind::Scalar => Ok(Center::Scalar(xs[0])),
            CenterKind::UnitInterval => Center::unit(xs[0]),
            CenterKind::Planar => Ok(Center::Planar([xs[0], xs[1]])),
            CenterKind::Rotation3 => Center::rotation(Matrix3::from_row_slice(xs)),
        }
    }

    /// Number of free coordinates used when the center is a trainable parameter.
    pub fn param_len(&self) -> usize {
        match self {
            Center::Scalar(_) | Center::UnitInterval(_) => 1,
            Center::Planar(_) => 2,
            Center::Rotation3(_) => 3,
        }
    }

    /// Trainable coordinates; rotations use their scaled rotation axis.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Center::Scalar(x) | Center::UnitInterval(x) => vec![*x],
            Center::Planar(p) => p.to_vec(),
            Center::Rotation3(r) => r.scaled_axis().as_slice().to_vec(),
        }
    }

    /// Inverse of [`Center::params`], keeping this center's kind.
    pub fn with_params(&self, xs: &[f64]) -> Result<Self> {
        if xs.len() != self.param_len() {
            return Err(Error::Invalid(format!(
                "expected {} center parameters, got {}",
                self.param_len(),
                xs.len()
            )));
        }
        match self {
            Center::Scalar(_) => Ok(Center::Scalar(xs[0])),
            Center::UnitInterval(_) => Center::unit(xs[0]),
            Center::Planar(_) => Ok(Center::Planar([xs[0], xs[1]])),
            Center::Rotation3(_) => Ok(Center::Rotation3(Rotation3::new(Vector3::new(
                xs[0], xs[1], xs[2],
            )))),
        }
    }

    /// Plain Euclidean (or Frobenius, for rotations) distance.
    pub fn euclidean(&self, other: &Center) -> f64 {
        match (self, other) {
            (Center::Scalar(a), Center::Scalar(b))
            | (Center::UnitInterval(a), Center::UnitInterval(b)) => (a - b).abs(),
            (Center::Planar(a), Center::Planar(b)) => (a[0] - b[0]).hypot(a[1] - b[1]),
            (Center::Rotation3(a), Center::Rotation3(b)) => (a.matrix() - b.matrix()).norm(),
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for Center {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Center::Scalar(x) => write!(f, "{x}"),
            Center::UnitInterval(t) => write!(f, "{t} ∈ (0,1]"),
            Center::Planar([x, y]) => write!(f, "({x}, {y})"),
            Center::Rotation3(r) => write!(f, "rotation{:?}", r.scaled_axis().as_slice()),
        }
    }
}

/// The composition `∘` on centers together with its identity element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DomainOp {
    /// `v ∘ u = v + u` on the real line.
    Translation1d,
    /// Addition on `[0, sup]` with one wrap-around subtraction.
    CyclicSum { sup: f64 },
    /// `(v_x u_x, v_y u_y)` on the plane.
    ComponentwiseProduct2d,
    /// Vector addition on the plane.
    Translation2d,
    /// Multiplication on `(0, 1]`.
    UnitIntervalProduct,
    /// Addition modulo one, represented on `(0, 1]` (so `0 ≡ 1`).
    ModularSum01,
    /// Matrix product of rotations.
    SphereRotation,
}

impl DomainOp {
    /// Every operation, with `sup = 10` for the cyclic sum.
    pub const ALL: [DomainOp; 7] = [
        DomainOp::Translation1d,
        DomainOp::CyclicSum { sup: 10.0 },
        DomainOp::ComponentwiseProduct2d,
        DomainOp::Translation2d,
        DomainOp::UnitIntervalProduct,
        DomainOp::ModularSum01,
        DomainOp::SphereRotation,
    ];

    pub fn center_kind(&self) -> CenterKind {
        match self {
            DomainOp::Translation1d | DomainOp::CyclicSum { .. } => CenterKind::Scalar,
            DomainOp::ComponentwiseProduct2d | DomainOp::Translation2d => CenterKind::Planar,
            DomainOp::UnitIntervalProduct | DomainOp::ModularSum01 => CenterKind::UnitInterval,
            DomainOp::SphereRotation => CenterKind::Rotation3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainOp::CyclicSum { sup } if !(*sup > 0.0 && sup.is_finite()) => {
                Err(Error::Invalid(format!("cyclic sum needs sup > 0, got {sup}")))
            }
            _ => Ok(()),
        }
    }

    /// Checks that `c` is a point this operation acts on.
    pub fn check(&self, c: &Center) -> Result<()> {
        if c.kind() != self.center_kind() {
            return Err(Error::Domain(format!(
                "{:?} composes {} centers, got {} center {c}",
                self,
                self.center_kind(),
                c.kind()
            )));
        }
        if let (DomainOp::CyclicSum { sup }, Center::Scalar(x)) = (self, c) {
            if !(0.0..=*sup).contains(x) {
                return Err(Error::Domain(format!("center {x} outside [0, {sup}]")));
            }
        }
        Ok(())
    }

    /// The identity element `δ`.
    pub fn identity(&self) -> Center {
        match self {
            DomainOp::Translation1d | DomainOp::CyclicSum { .. } => Center::Scalar(0.0),
            DomainOp::Translation2d => Center::Planar([0.0, 0.0]),
            DomainOp::ComponentwiseProduct2d => Center::Planar([1.0, 1.0]),
            DomainOp::UnitIntervalProduct => Center::UnitInterval(1.0),
            // 0 ≡ 1 under the mod-one map, and 1 is the representative in (0, 1].
            DomainOp::ModularSum01 => Center::UnitInterval(1.0),
            DomainOp::SphereRotation => Center::Rotation3(Rotation3::identity()),
        }
    }

    /// `a ∘ b`. For rotations this is the matrix product `R_a R_b`.
    pub fn compose(&self, a: &Center, b: &Center) -> Result<Center> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.compose_unchecked(a, b))
    }

    /// `a ∘ b` for centers already known to match this operation.
    pub(crate) fn compose_unchecked(&self, a: &Center, b: &Center) -> Center {
        match (self, a, b) {
            (DomainOp::Translation1d, Center::Scalar(x), Center::Scalar(y)) => {
                Center::Scalar(x + y)
            }
            (DomainOp::CyclicSum { sup }, Center::Scalar(x), Center::Scalar(y)) => {
                let s = x + y;
                Center::Scalar(if s > *sup { s - sup } else { s })
            }
            (DomainOp::Translation2d, Center::Planar(p), Center::Planar(q)) => {
                Center::Planar([p[0] + q[0], p[1] + q[1]])
            }
            (DomainOp::ComponentwiseProduct2d, Center::Planar(p), Center::Planar(q)) => {
                Center::Planar([p[0] * q[0], p[1] * q[1]])
            }
            (DomainOp::UnitIntervalProduct, Center::UnitInterval(x), Center::UnitInterval(y)) => {
                Center::UnitInterval(x * y)
            }
            (DomainOp::ModularSum01, Center::UnitInterval(x), Center::UnitInterval(y)) => {
                // 1 is the identity; short-circuit it so x∘1 = x exactly.
                let r = if *x == 1.0 {
                    *y
                } else if *y == 1.0 {
                    *x
                } else {
                    (x + y).rem_euclid(1.0)
                };
                Center::UnitInterval(if r == 0.0 { 1.0 } else { r })
            }
            (DomainOp::SphereRotation, Center::Rotation3(p), Center::Rotation3(q)) => {
                Center::Rotation3(p * q)
            }
            _ => unreachable!("compose_unchecked on mismatched centers"),
        }
    }

    /// Distance used for merging and for comparing composed centers.
    ///
    /// The cyclic and modular sums live on a circle, so their distance wraps.
    pub fn distance(&self, a: &Center, b: &Center) -> f64 {
        match (self, a, b) {
            (DomainOp::CyclicSum { sup }, Center::Scalar(x), Center::Scalar(y)) => {
                let d = (x - y).abs();
                d.min((sup - d).abs())
            }
            (DomainOp::ModularSum01, Center::UnitInterval(x), Center::UnitInterval(y)) => {
                let d = (x - y).abs();
                d.min((1.0 - d).abs())
            }
            _ => a.euclidean(b),
        }
    }

    /// Jacobians `(∂(a∘b)/∂a, ∂(a∘b)/∂b)` in parameter coordinates, when the
    /// operation is smooth in them. Rotations return `None`.
    /// Both are diagonal, stored as their diagonals.
    pub(crate) fn jacobians(&self, a: &Center, b: &Center) -> Option<([f64; 2], [f64; 2])> {
        match (self, a, b) {
            (DomainOp::Translation1d | DomainOp::CyclicSum { .. } | DomainOp::ModularSum01, _, _) => {
                Some(([1.0, 0.0], [1.0, 0.0]))
            }
            (DomainOp::Translation2d, _, _) => Some(([1.0, 1.0], [1.0, 1.0])),
            (DomainOp::ComponentwiseProduct2d, Center::Planar(p), Center::Planar(q)) => {
                Some((*q, *p))
            }
            (DomainOp::UnitIntervalProduct, Center::UnitInterval(x), Center::UnitInterval(y)) => {
                Some(([*y, 0.0], [*x, 0.0]))
            }
            _ => None,
        }
    }
}
