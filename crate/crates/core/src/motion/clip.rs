use super::rotation::{self, Mat3, EulerOrder};
use super::{Skeleton, ROT_DIM};
use crate::error::{Error, Result};

/// A sequence of per-joint rotation matrices sampled at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    skeleton: Skeleton,
    fps: f64,
    len: usize,
    data: Vec<f64>,
    source_convention: Option<EulerOrder>,
}

impl MotionClip {
    /// `data` is `len * J * 9` row-major rotation entries.
    pub fn new(skeleton: Skeleton, fps: f64, data: Vec<f64>) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidClip(format!("fps must be positive, got {fps}")));
        }
        let stride = skeleton.joint_count() * ROT_DIM;
        if data.is_empty() || data.len() % stride != 0 {
            return Err(Error::InvalidClip(format!(
                "data length {} is not a positive multiple of J*9 = {stride}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "rotation entry at frame {}, joint {}",
                i / stride,
                (i % stride) / ROT_DIM
            )));
        }
        Ok(Self {
            len: data.len() / stride,
            skeleton,
            fps,
            data,
            source_convention: None,
        })
    }

    /// A clip holding the reference pose at every frame.
    pub fn identity(skeleton: Skeleton, fps: f64, len: usize) -> Result<Self> {
        let j = skeleton.joint_count();
        let data = rotation::IDENTITY
            .iter()
            .copied()
            .cycle()
            .take(len * j * ROT_DIM)
            .collect();
        Self::new(skeleton, fps, data)
    }

    pub fn with_source_convention(mut self, order: Option<EulerOrder>) -> Self {
        self.source_convention = order;
        self
    }

    pub fn source_convention(&self) -> Option<EulerOrder> {
        self.source_convention
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn joint_count(&self) -> usize {
        self.skeleton.joint_count()
    }

    /// Values per frame, `J * 9`.
    pub fn frame_width(&self) -> usize {
        self.joint_count() * ROT_DIM
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len as f64 / self.fps
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let w = self.frame_width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rotation(&self, frame: usize, joint: usize) -> Mat3 {
        let off = (frame * self.joint_count() + joint) * ROT_DIM;
        rotation::from_flat(&self.data[off..off + ROT_DIM])
    }

    pub fn set_rotation(&mut self, frame: usize, joint: usize, m: &Mat3) {
        let off = (frame * self.joint_count() + joint) * ROT_DIM;
        self.data[off..off + ROT_DIM].copy_from_slice(&rotation::to_flat(m));
    }

    /// Frames `[start, end)` as a new clip.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} out of range for clip of {} frames",
                self.len
            )));
        }
        let w = self.frame_width();
        Ok(Self {
            skeleton: self.skeleton.clone(),
            fps: self.fps,
            len: end - start,
            data: self.data[start * w..end * w].to_vec(),
            source_convention: self.source_convention,
        })
    }

    /// Appends `other` after `self`. Skeletons and frame rates must agree.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.skeleton != other.skeleton || self.fps != other.fps {
            return Err(Error::InvalidArgument(
                "cannot concatenate clips with different skeletons or fps".into(),
            ));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            skeleton: self.skeleton.clone(),
            fps: self.fps,
            len: self.len + other.len,
            data,
            source_convention: self.source_convention,
        })
    }

    /// Frames in reverse order.
    pub fn reversed(&self) -> Self {
        let w = self.frame_width();
        let data = self.data.chunks(w).rev().flatten().copied().collect();
        Self {
            skeleton: self.skeleton.clone(),
            fps: self.fps,
            len: self.len,
            data,
            source_convention: self.source_convention,
        }
    }

    /// Replaces every matrix by its nearest proper rotation.
    pub fn project_rotations(&mut self) {
        for chunk in self.data.chunks_mut(ROT_DIM) {
            let m = rotation::from_flat(chunk);
            chunk.copy_from_slice(&rotation::to_flat(&rotation::project_to_rotation(&m)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        let s = Skeleton::chain(2).unwrap();
        assert!(MotionClip::new(s.clone(), 30.0, vec![0.0; 17]).is_err());
        assert!(MotionClip::new(s.clone(), 0.0, vec![0.0; 18]).is_err());
        assert!(MotionClip::new(s, 30.0, vec![]).is_err());
    }

    #[test]
    fn reports_non_finite_location() {
        let s = Skeleton::chain(2).unwrap();
        let mut data = vec![0.0; 36];
        data[18 + 9 + 2] = f64::NAN;
        let err = MotionClip::new(s, 30.0, data).unwrap_err().to_string();
        assert!(err.contains("frame 1, joint 1"), "{err}");
    }

    #[test]
    fn slice_concat_reverse() {
        let s = Skeleton::chain(1).unwrap();
        let data: Vec<f64> = (0..45).map(|x| x as f64).collect();
        let c = MotionClip::new(s, 30.0, data).unwrap();
        let a = c.slice(0, 2).unwrap();
        let b = c.slice(2, 5).unwrap();
        assert_eq!(a.concat(&b).unwrap(), c);
        assert_eq!(c.reversed().reversed(), c);
        assert_eq!(c.reversed().frame(0), c.frame(4));
    }
}
