use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{frame_speeds, MotionClip};

/// Strictly increasing beat times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BeatTrack(Vec<f64>);

impl BeatTrack {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("beat time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("beat times must be strictly increasing".into()));
        }
        Ok(Self(times))
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for BeatTrack {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BeatTrack> for Vec<f64> {
    fn from(b: BeatTrack) -> Self {
        b.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeatConfig {
    /// Gaussian smoothing width of the speed curve, in frames.
    pub smoothing_frames: f64,
    /// A minimum counts as a beat when below this fraction of the mean speed.
    pub threshold_fraction: f64,
}

impl Default for BeatConfig {
    fn default() -> Self {
        Self {
            smoothing_frames: 1.0,
            threshold_fraction: 0.5,
        }
    }
}

fn per_frame_speed(clip: &MotionClip) -> Vec<f64> {
    let s = frame_speeds(clip);
    let n = clip.len();
    (0..n)
        .map(|i| match (i, n) {
            (0, _) => s[0],
            (i, n) if i == n - 1 => s[n - 2],
            (i, _) => 0.5 * (s[i - 1] + s[i]),
        })
        .collect()
}

fn smooth(v: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return v.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let n = v.len() as isize;
    let reflect = |i: isize| -> usize {
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i - 1 } else { 2 * n - i - 1 };
        }
        i as usize
    };
    (0..n)
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            // Symmetric pairing keeps the result mirror-exact under reversal.
            for k in 0..=r {
                let w = kernel[(k + r) as usize];
                if k == 0 {
                    num += w * v[reflect(i)];
                    den += w;
                } else {
                    num += w * (v[reflect(i - k)] + v[reflect(i + k)]);
                    den += 2.0 * w;
                }
            }
            num / den
        })
        .collect()
}

/// Strict interior minima of the smoothed mean angular speed that lie below
/// `threshold_fraction` of its mean. Clips shorter than 5 frames and
/// motionless clips give an empty track.
pub fn detect_motion_beats(clip: &MotionClip, config: &BeatConfig) -> BeatTrack {
    if clip.len() < 5 {
        return BeatTrack(Vec::new());
    }
    let v = smooth(&per_frame_speed(clip), config.smoothing_frames);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let threshold = config.threshold_fraction * mean;
    let beats = (1..v.len() - 1)
        .filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1] && v[i] < threshold)
        .map(|i| i as f64 / clip.fps())
        .collect();
    BeatTrack(beats)
}

/// Mean over audio beats of `exp(-d^2 / (2 sigma^2))`, `d` the distance to
/// the nearest motion beat; 0 when there are no motion beats.
pub fn beat_consistency_tracks(audio: &BeatTrack, motion: &BeatTrack, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if audio.is_empty() {
        return Err(Error::InvalidArgument("no audio beats".into()));
    }
    if motion.is_empty() {
        return Ok(0.0);
    }
    let m = motion.times();
    let total: f64 = audio
        .times()
        .iter()
        .map(|&b| {
            let k = m.partition_point(|&x| x < b);
            let mut d = f64::INFINITY;
            if k < m.len() {
                d = d.min(m[k] - b);
            }
            if k > 0 {
                d = d.min(b - m[k - 1]);
            }
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok(total / audio.len() as f64)
}

/// [`beat_consistency_tracks`] against beats detected in `motion`.
pub fn beat_consistency(audio: &BeatTrack, motion: &MotionClip, sigma: f64, config: &BeatConfig) -> Result<f64> {
    beat_consistency_tracks(audio, &detect_motion_beats(motion, config), sigma)
}
