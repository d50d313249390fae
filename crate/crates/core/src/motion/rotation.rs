//! Rotation helpers on 3x3 matrices stored row-major as `[f64; 9]`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub type Mat3 = Matrix3<f64>;

pub const IDENTITY: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

/// Axis order of an intrinsic Euler triple: `XYZ` means `R = Rx(a) * Ry(b) * Rz(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EulerOrder {
    XYZ,
    XZY,
    YXZ,
    YZX,
    ZXY,
    ZYX,
}

impl EulerOrder {
    pub const ALL: [EulerOrder; 6] = [
        EulerOrder::XYZ,
        EulerOrder::XZY,
        EulerOrder::YXZ,
        EulerOrder::YZX,
        EulerOrder::ZXY,
        EulerOrder::ZYX,
    ];

    pub fn axes(self) -> [usize; 3] {
        match self {
            EulerOrder::XYZ => [0, 1, 2],
            EulerOrder::XZY => [0, 2, 1],
            EulerOrder::YXZ => [1, 0, 2],
            EulerOrder::YZX => [1, 2, 0],
            EulerOrder::ZXY => [2, 0, 1],
            EulerOrder::ZYX => [2, 1, 0],
        }
    }

    fn parity(self) -> f64 {
        match self {
            EulerOrder::XYZ | EulerOrder::YZX | EulerOrder::ZXY => 1.0,
            _ => -1.0,
        }
    }
}

impl fmt::Display for EulerOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EulerOrder::XYZ => "XYZ",
            EulerOrder::XZY => "XZY",
            EulerOrder::YXZ => "YXZ",
            EulerOrder::YZX => "YZX",
            EulerOrder::ZXY => "ZXY",
            EulerOrder::ZYX => "ZYX",
        };
        f.write_str(s)
    }
}

impl FromStr for EulerOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EulerOrder::ALL
            .into_iter()
            .find(|o| o.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown euler order {s:?}")))
    }
}

/// Rotation by `angle` radians about coordinate axis `axis` (0 = x, 1 = y, 2 = z).
pub fn axis_rotation(axis: usize, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    match axis {
        0 => Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        1 => Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        _ => Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

pub fn euler_to_matrix(angles: [f64; 3], order: EulerOrder) -> Mat3 {
    let [a0, a1, a2] = order.axes();
    axis_rotation(a0, angles[0]) * axis_rotation(a1, angles[1]) * axis_rotation(a2, angles[2])
}

/// Inverse of [`euler_to_matrix`]. At gimbal lock the third angle is set to 0.
pub fn matrix_to_euler(m: &Mat3, order: EulerOrder) -> [f64; 3] {
    let [i, j, k] = order.axes();
    let s = order.parity();
    let sb = (s * m[(i, k)]).clamp(-1.0, 1.0);
    let b = sb.asin();
    if sb.abs() > 1.0 - 1e-10 {
        let a = (s * m[(k, j)]).atan2(m[(j, j)]);
        return [a, b, 0.0];
    }
    let a = (-s * m[(j, k)]).atan2(m[(k, k)]);
    let c = (-s * m[(i, j)]).atan2(m[(i, i)]);
    [a, b, c]
}

pub fn from_flat(v: &[f64]) -> Mat3 {
    Mat3::from_row_slice(&v[..9])
}

pub fn to_flat(m: &Mat3) -> [f64; 9] {
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

/// Nearest proper rotation (orthonormal, det +1) in the Frobenius sense.
pub fn project_to_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Mat3::identity(),
    };
    let d = (u * v_t).determinant();
    let fix = Mat3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d.signum()));
    let r = u * fix * v_t;
    if r.iter().all(|x| x.is_finite()) {
        r
    } else {
        Mat3::identity()
    }
}

/// Largest deviation of `m` from being a proper rotation:
/// `max(max|M^T M - I|, |det M - 1|)`.
pub fn rotation_error(m: &Mat3) -> f64 {
    let gram = m.transpose() * m - Mat3::identity();
    let ortho = gram.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    ortho.max((m.determinant() - 1.0).abs())
}

/// Geodesic angle (radians) between two rotations.
pub fn geodesic_angle(a: &Mat3, b: &Mat3) -> f64 {
    let tr = (a.transpose() * b).trace();
    ((tr - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

pub fn to_quaternion(m: &Mat3) -> UnitQuaternion<f64> {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*m);
    UnitQuaternion::from_rotation_matrix(&rot)
}

/// Shortest-arc spherical interpolation between two rotations.
pub fn slerp(a: &Mat3, b: &Mat3, t: f64) -> Mat3 {
    let qa = to_quaternion(a);
    let mut qb = to_quaternion(b).into_inner();
    if qa.coords.dot(&qb.coords) < 0.0 {
        qb = -qb;
    }
    let qa = qa.into_inner();
    let dot = qa.coords.dot(&qb.coords).clamp(-1.0, 1.0);
    let q = if dot > 1.0 - 1e-12 {
        Quaternion::from(qa.coords * (1.0 - t) + qb.coords * t)
    } else {
        let theta = dot.acos();
        let s = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        Quaternion::from(qa.coords * wa + qb.coords * wb)
    };
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}
