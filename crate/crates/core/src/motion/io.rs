//! JSON motion files: `{format, version, fps, euler_convention, joint_names,
//! parents, frames}` with `frames` nested as `L x J x 9` row-major floats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rotation::EulerOrder;
use super::{MotionClip, Skeleton, ROT_DIM};
use crate::error::{Error, Result};

pub const MOTION_FORMAT: &str = "gesture-motion";
pub const MOTION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionFile {
    pub format: String,
    pub version: u32,
    pub fps: f64,
    /// Euler convention of the source data, if it came from Euler angles.
    pub euler_convention: Option<EulerOrder>,
    pub joint_names: Vec<String>,
    pub parents: Vec<i32>,
    pub frames: Vec<Vec<[f64; ROT_DIM]>>,
}

impl From<&MotionClip> for MotionFile {
    fn from(clip: &MotionClip) -> Self {
        let j = clip.joint_count();
        let frames = (0..clip.len())
            .map(|i| {
                clip.frame(i)
                    .chunks(ROT_DIM)
                    .map(|c| c.try_into().expect("chunk of 9"))
                    .collect::<Vec<[f64; ROT_DIM]>>()
            })
            .inspect(|f| debug_assert_eq!(f.len(), j))
            .collect();
        Self {
            format: MOTION_FORMAT.to_string(),
            version: MOTION_VERSION,
            fps: clip.fps(),
            euler_convention: clip.source_convention(),
            joint_names: clip.skeleton().joint_names().to_vec(),
            parents: clip.skeleton().parents().to_vec(),
            frames,
        }
    }
}

impl TryFrom<MotionFile> for MotionClip {
    type Error = Error;

    fn try_from(file: MotionFile) -> Result<Self> {
        if file.format != MOTION_FORMAT {
            return Err(Error::InvalidClip(format!("unknown format {:?}", file.format)));
        }
        if file.version != MOTION_VERSION {
            return Err(Error::InvalidClip(format!(
                "unsupported motion file version {}",
                file.version
            )));
        }
        let skeleton = Skeleton::new(file.joint_names, file.parents)?;
        let j = skeleton.joint_count();
        let mut data = Vec::with_capacity(file.frames.len() * j * ROT_DIM);
        for (i, frame) in file.frames.iter().enumerate() {
            if frame.len() != j {
                return Err(Error::shape("motion frame joints", j, format!("{} at frame {i}", frame.len())));
            }
            for m in frame {
                data.extend_from_slice(m);
            }
        }
        Ok(MotionClip::new(skeleton, file.fps, data)?.with_source_convention(file.euler_convention))
    }
}

pub fn write_motion_file(path: impl AsRef<Path>, clip: &MotionClip) -> Result<()> {
    let file = MotionFile::from(clip);
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn read_motion_file(path: impl AsRef<Path>) -> Result<MotionClip> {
    let text = fs::read_to_string(path)?;
    let file: MotionFile = serde_json::from_str(&text)?;
    MotionClip::try_from(file)
}
