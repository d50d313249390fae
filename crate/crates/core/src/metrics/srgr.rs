use std::ops::Range;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::motion::MotionClip;

/// Joint positions per frame with unit bones along each parent's local `+y`.
pub fn forward_kinematics(clip: &MotionClip) -> Vec<Vec<Vector3<f64>>> {
    let sk = clip.skeleton();
    let order = sk.topological_order();
    let parents = sk.parents();
    let j = sk.joint_count();
    (0..clip.len())
        .map(|f| {
            let mut global = vec![nalgebra::Matrix3::identity(); j];
            let mut pos = vec![Vector3::zeros(); j];
            for &k in &order {
                let local = clip.rotation(f, k);
                let p = parents[k];
                if p < 0 {
                    global[k] = local;
                } else {
                    let p = p as usize;
                    pos[k] = pos[p] + global[p] * Vector3::y();
                    global[k] = global[p] * local;
                }
            }
            pos
        })
        .collect()
}

/// Weighted fraction of non-root joint positions within `threshold` of the
/// ground truth. Frames inside `spans` weigh `weight`, others 1.
pub fn srgr(gen: &MotionClip, gt: &MotionClip, spans: &[Range<usize>], weight: f64, threshold: f64) -> Result<f64> {
    if gen.skeleton() != gt.skeleton() || gen.len() != gt.len() {
        return Err(Error::shape(
            "srgr clips",
            format!("{} frames", gt.len()),
            format!("{} frames (skeletons equal: {})", gen.len(), gen.skeleton() == gt.skeleton()),
        ));
    }
    if !(weight >= 0.0 && threshold > 0.0) {
        return Err(Error::InvalidArgument("weight must be >= 0 and threshold > 0".into()));
    }
    if let Some(s) = spans.iter().find(|s| s.end > gen.len()) {
        return Err(Error::InvalidArgument(format!("span {}..{} outside clip", s.start, s.end)));
    }
    let joints: Vec<usize> = (0..gen.joint_count()).filter(|&k| gen.skeleton().parents()[k] >= 0).collect();
    if joints.is_empty() {
        return Err(Error::InvalidArgument("srgr needs at least one non-root joint".into()));
    }
    let pg = forward_kinematics(gen);
    let pt = forward_kinematics(gt);
    let (mut num, mut den) = (0.0, 0.0);
    for f in 0..gen.len() {
        let w = if spans.iter().any(|s| s.contains(&f)) { weight } else { 1.0 };
        let correct = joints.iter().filter(|&&k| (pg[f][k] - pt[f][k]).norm() < threshold).count();
        num += w * correct as f64 / joints.len() as f64;
        den += w;
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("all frame weights are zero".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::rotation::{axis_rotation, to_flat};
    use crate::motion::Skeleton;

    #[test]
    fn fk_of_t_pose_is_a_column() {
        let c = MotionClip::identity(Skeleton::chain(3).unwrap(), 30.0, 1).unwrap();
        let p = forward_kinematics(&c);
        assert_eq!(p[0][2], Vector3::new(0.0, 2.0, 0.0));
    }

    #[test]
    fn constructed_cases() {
        let s = Skeleton::chain(3).unwrap();
        let gt = MotionClip::identity(s.clone(), 30.0, 4).unwrap();
        assert_eq!(srgr(&gt, &gt, &[], 2.0, 0.1).unwrap(), 1.0);
        // Root turned by 90 degrees moves every child joint by at least 1.
        let turned: Vec<f64> = (0..4 * 3)
            .flat_map(|i| if i % 3 == 0 { to_flat(&axis_rotation(2, 1.5707963267948966)) } else { to_flat(&nalgebra::Matrix3::identity()) })
            .collect();
        let far = MotionClip::new(s.clone(), 30.0, turned.clone()).unwrap();
        assert_eq!(srgr(&far, &gt, &[], 1.0, 0.1).unwrap(), 0.0);
        let mut half = turned;
        half[..2 * 27].copy_from_slice(gt.slice(0, 2).unwrap().data());
        let half = MotionClip::new(s, 30.0, half).unwrap();
        assert_eq!(srgr(&half, &gt, &[], 1.0, 0.1).unwrap(), 0.5);
        // Weighting the correct frames three times: (3 + 3) / (3 + 3 + 1 + 1).
        assert_eq!(srgr(&half, &gt, &[0..2], 3.0, 0.1).unwrap(), 0.75);
        assert!(srgr(&half, &gt.slice(0, 3).unwrap(), &[], 1.0, 0.1).is_err());
    }
}
