use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::rotation::{euler_to_matrix, slerp, to_flat, Mat3};
use crate::motion::{EulerOrder, MotionClip, Skeleton, TRAINING_FPS};

/// Joint indices of [`Skeleton::upper_body`].
pub mod joint {
    pub const PELVIS: usize = 0;
    pub const SPINE: usize = 1;
    pub const SPINE1: usize = 2;
    pub const CHEST: usize = 3;
    pub const NECK: usize = 4;
    pub const HEAD: usize = 5;
    pub const L_SHOULDER: usize = 6;
    pub const L_ELBOW: usize = 7;
    pub const L_WRIST: usize = 8;
    pub const R_SHOULDER: usize = 9;
    pub const R_ELBOW: usize = 10;
    pub const R_WRIST: usize = 11;
    pub const COUNT: usize = 12;
}

/// XYZ Euler angles per joint.
pub type Pose = [[f64; 3]; joint::COUNT];

/// Rest pose with the arms hanging at the sides.
pub fn idle_pose() -> Pose {
    let mut p = [[0.0; 3]; joint::COUNT];
    p[joint::L_SHOULDER] = [0.0, 0.0, 2.7];
    p[joint::R_SHOULDER] = [0.0, 0.0, -2.7];
    p[joint::L_ELBOW] = [0.3, 0.0, 0.0];
    p[joint::R_ELBOW] = [0.3, 0.0, 0.0];
    p
}

pub fn pose_matrices(p: &Pose) -> Vec<Mat3> {
    p.iter().map(|a| euler_to_matrix(*a, EulerOrder::XYZ)).collect()
}

/// A keyframed gesture. Keyframes are `(fraction of duration, pose)`; the
/// first and last keyframes are the idle pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureTemplate {
    pub id: String,
    pub label: String,
    pub category: String,
    pub keywords: Vec<String>,
    pub duration: f64,
    pub keyframes: Vec<(f64, Pose)>,
}

fn with(base: Pose, edits: &[(usize, [f64; 3])]) -> Pose {
    let mut p = base;
    for &(j, a) in edits {
        p[j] = a;
    }
    p
}

fn held(peak: Pose) -> Vec<(f64, Pose)> {
    vec![(0.0, idle_pose()), (0.3, peak), (0.7, peak), (1.0, idle_pose())]
}

/// The built-in gestures: point-left, point-right, open-arms, thumbs-up, nod.
pub fn template_library() -> Vec<GestureTemplate> {
    use joint::*;
    let idle = idle_pose();
    let t = |id: &str, label: &str, category: &str, keywords: &[&str], keyframes| GestureTemplate {
        id: id.into(),
        label: label.into(),
        category: category.into(),
        keywords: keywords.iter().map(|s| s.to_string()).collect(),
        duration: 1.6,
        keyframes,
    };
    let nod_down = with(idle, &[(NECK, [0.35, 0.0, 0.0]), (HEAD, [0.2, 0.0, 0.0])]);
    vec![
        t(
            "point-left",
            "point left",
            "deictic",
            &["left", "over there"],
            held(with(idle, &[(L_SHOULDER, [0.0, 0.0, 1.5]), (L_ELBOW, [0.05, 0.0, 0.0]), (HEAD, [0.0, 0.5, 0.0])])),
        ),
        t(
            "point-right",
            "point right",
            "deictic",
            &["right", "this side"],
            held(with(idle, &[(R_SHOULDER, [0.0, 0.0, -1.5]), (R_ELBOW, [0.05, 0.0, 0.0]), (HEAD, [0.0, -0.5, 0.0])])),
        ),
        t(
            "open-arms",
            "open arms",
            "metaphoric",
            &["everyone", "welcome", "wonderful"],
            held(with(
                idle,
                &[
                    (L_SHOULDER, [-0.7, 0.0, 1.9]),
                    (R_SHOULDER, [-0.7, 0.0, -1.9]),
                    (L_ELBOW, [0.2, 0.0, 0.0]),
                    (R_ELBOW, [0.2, 0.0, 0.0]),
                    (CHEST, [-0.15, 0.0, 0.0]),
                ],
            )),
        ),
        t(
            "thumbs-up",
            "thumbs up",
            "emblematic",
            &["great", "thumbs up", "good job"],
            held(with(idle, &[(R_SHOULDER, [-1.0, 0.0, -2.2]), (R_ELBOW, [1.6, 0.0, 0.0]), (R_WRIST, [0.0, 1.2, 0.0])])),
        ),
        t(
            "nod",
            "nod",
            "emblematic",
            &["yes", "agree"],
            vec![(0.0, idle), (0.25, nod_down), (0.5, idle), (0.75, nod_down), (1.0, idle)],
        ),
    ]
}

impl GestureTemplate {
    pub fn frames(&self) -> usize {
        (self.duration * TRAINING_FPS).round() as usize
    }

    /// Joint rotations at fraction `u` of the gesture.
    pub fn pose_at(&self, u: f64) -> Vec<Mat3> {
        let u = u.clamp(0.0, 1.0);
        let k = self
            .keyframes
            .windows(2)
            .position(|w| u <= w[1].0)
            .unwrap_or(self.keyframes.len() - 2);
        let (u0, p0) = &self.keyframes[k];
        let (u1, p1) = &self.keyframes[k + 1];
        let s = if u1 > u0 { (u - u0) / (u1 - u0) } else { 1.0 };
        let s = s * s * (3.0 - 2.0 * s);
        pose_matrices(p0)
            .iter()
            .zip(pose_matrices(p1))
            .map(|(a, b)| slerp(a, &b, s))
            .collect()
    }

    /// The gesture on its own, starting and ending at the idle pose.
    pub fn render(&self, skeleton: &Skeleton) -> Result<MotionClip> {
        if skeleton.joint_count() != joint::COUNT {
            return Err(Error::InvalidArgument(format!(
                "templates need the {}-joint upper-body skeleton",
                joint::COUNT
            )));
        }
        let n = self.frames();
        let mut data = Vec::with_capacity(n * joint::COUNT * 9);
        for f in 0..n {
            for m in self.pose_at(f as f64 / (n - 1) as f64) {
                data.extend(to_flat(&m));
            }
        }
        MotionClip::new(skeleton.clone(), TRAINING_FPS, data)
    }
}
