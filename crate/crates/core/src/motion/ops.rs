use super::rotation::{self, EulerOrder};
use super::{MotionClip, Skeleton, ROT_DIM};
use crate::error::{Error, Result};

/// Converts per-joint Euler triples (`frames x joints`, row-major) into a clip.
pub fn euler_to_rotation_matrices(
    skeleton: Skeleton,
    fps: f64,
    angles: &[[f64; 3]],
    order: EulerOrder,
) -> Result<MotionClip> {
    let j = skeleton.joint_count();
    if angles.is_empty() || angles.len() % j != 0 {
        return Err(Error::shape(
            "euler angles",
            format!("a positive multiple of {j} triples"),
            angles.len(),
        ));
    }
    let mut data = Vec::with_capacity(angles.len() * ROT_DIM);
    for (idx, a) in angles.iter().enumerate() {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteAngle {
                frame: idx / j,
                joint: idx % j,
            });
        }
        data.extend_from_slice(&rotation::to_flat(&rotation::euler_to_matrix(*a, order)));
    }
    Ok(MotionClip::new(skeleton, fps, data)?.with_source_convention(Some(order)))
}

/// Changes the frame rate, interpolating each joint by quaternion slerp.
///
/// Output frame `k` sits at source position `k * fps / target_fps`; integer
/// positions are copied verbatim.
pub fn resample_fps(clip: &MotionClip, target_fps: f64) -> Result<MotionClip> {
    if !(target_fps.is_finite() && target_fps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target fps must be positive, got {target_fps}"
        )));
    }
    let out_len = (clip.len() as f64 * target_fps / clip.fps()).round() as usize;
    if out_len == 0 {
        return Err(Error::TooShort(format!(
            "resampling {} frames from {} to {} fps yields no frames",
            clip.len(),
            clip.fps(),
            target_fps
        )));
    }
    if target_fps == clip.fps() {
        return Ok(clip.clone());
    }
    let j = clip.joint_count();
    let w = clip.frame_width();
    let last = clip.len() - 1;
    let ratio = clip.fps() / target_fps;
    let mut data = Vec::with_capacity(out_len * w);
    for k in 0..out_len {
        let pos = (k as f64 * ratio).min(last as f64);
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        if frac == 0.0 || i0 == last {
            data.extend_from_slice(clip.frame(i0));
            continue;
        }
        for joint in 0..j {
            let a = clip.rotation(i0, joint);
            let b = clip.rotation(i0 + 1, joint);
            data.extend_from_slice(&rotation::to_flat(&rotation::slerp(&a, &b, frac)));
        }
    }
    Ok(MotionClip::new(clip.skeleton().clone(), target_fps, data)?
        .with_source_convention(clip.source_convention()))
}

/// Per-frame derivative of the flattened rotation entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSequence {
    pub order: usize,
    pub len: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl DerivativeSequence {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }
}

/// Central differences on interior frames, one-sided stencils at the ends.
/// Units are per frame.
pub fn finite_difference(clip: &MotionClip, order: usize) -> Result<DerivativeSequence> {
    let len = clip.len();
    let width = clip.frame_width();
    let values = match order {
        1 => {
            if len < 2 {
                return Err(Error::TooShort(format!("velocity needs 2 frames, got {len}")));
            }
            let mut v = vec![0.0; len * width];
            for i in 0..len {
                let (lo, hi, scale) = if i == 0 {
                    (0, 1, 1.0)
                } else if i == len - 1 {
                    (len - 2, len - 1, 1.0)
                } else {
                    (i - 1, i + 1, 0.5)
                };
                let (a, b) = (clip.frame(lo), clip.frame(hi));
                for e in 0..width {
                    v[i * width + e] = (b[e] - a[e]) * scale;
                }
            }
            v
        }
        2 => {
            if len < 3 {
                return Err(Error::TooShort(format!(
                    "acceleration needs 3 frames, got {len}"
                )));
            }
            let mut v = vec![0.0; len * width];
            for i in 0..len {
                let c = i.clamp(1, len - 2);
                let (a, m, b) = (clip.frame(c - 1), clip.frame(c), clip.frame(c + 1));
                for e in 0..width {
                    v[i * width + e] = a[e] - 2.0 * m[e] + b[e];
                }
            }
            v
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "derivative order must be 1 or 2, got {order}"
            )))
        }
    };
    Ok(DerivativeSequence {
        order,
        len,
        width,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationViolation {
    pub frame: usize,
    pub joint: usize,
    pub error: f64,
}

/// Every (frame, joint) whose matrix is not a proper rotation within `tol`.
pub fn validate_rotations(clip: &MotionClip, tol: f64) -> Vec<RotationViolation> {
    let j = clip.joint_count();
    clip.data()
        .chunks(ROT_DIM)
        .enumerate()
        .filter_map(|(idx, chunk)| {
            let err = rotation::rotation_error(&rotation::from_flat(chunk));
            (err > tol || !err.is_finite()).then_some(RotationViolation {
                frame: idx / j,
                joint: idx % j,
                error: err,
            })
        })
        .collect()
}

/// Mean geodesic angle across joints between consecutive frames
/// (`len - 1` values, radians per frame).
pub fn frame_speeds(clip: &MotionClip) -> Vec<f64> {
    let j = clip.joint_count();
    (1..clip.len())
        .map(|i| {
            (0..j)
                .map(|joint| {
                    rotation::geodesic_angle(&clip.rotation(i - 1, joint), &clip.rotation(i, joint))
                })
                .sum::<f64>()
                / j as f64
        })
        .collect()
}
