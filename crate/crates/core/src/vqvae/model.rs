use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::{latent_len, Codebook, LatentSequence, DOWNSAMPLE};
use crate::error::{Error, Result};
use crate::motion::{rotation, MotionClip, Skeleton, ROT_DIM, TRAINING_FPS};
use crate::nn::{Init, Linear, ParamStore};
use crate::rng::{seeded, stream};

/// Shape of the codec. `hidden == 0` gives a single affine layer on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqvaeArch {
    pub joints: usize,
    pub latent_dim: usize,
    pub codebook_size: usize,
    pub hidden: usize,
    pub depth: usize,
    /// Latent frames on each side that the decoder sees for every patch.
    pub context: usize,
}

impl VqvaeArch {
    pub fn new(joints: usize) -> Self {
        Self {
            joints,
            latent_dim: 64,
            codebook_size: 512,
            hidden: 0,
            depth: 2,
            context: 1,
        }
    }

    /// Values per latent block: `4 * J * 9`.
    pub fn patch_dim(&self) -> usize {
        DOWNSAMPLE * self.joints * ROT_DIM
    }
}

#[derive(Debug, Clone)]
struct Mlp {
    input: Linear,
    blocks: Vec<(Linear, Linear)>,
    output: Option<Linear>,
}

impl Mlp {
    fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        depth: usize,
        out_dim: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        if hidden == 0 {
            return Ok(Self {
                input: Linear::new(store, &format!("{name}.in"), in_dim, out_dim, rng)?,
                blocks: Vec::new(),
                output: None,
            });
        }
        let input = Linear::new(store, &format!("{name}.in"), in_dim, hidden, rng)?;
        let blocks = (0..depth)
            .map(|i| {
                Ok((
                    Linear::new(store, &format!("{name}.block{i}.a"), hidden, hidden, rng)?,
                    Linear::with_init(
                        store,
                        &format!("{name}.block{i}.b"),
                        hidden,
                        hidden,
                        Init::FanIn(hidden * 4),
                        rng,
                    )?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let output = Linear::new(store, &format!("{name}.out"), hidden, out_dim, rng)?;
        Ok(Self {
            input,
            blocks,
            output: Some(output),
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let Some(output) = &self.output else {
            return self.input.forward(x);
        };
        let mut h = self.input.forward(x)?.silu()?;
        for (a, b) in &self.blocks {
            h = (&h + b.forward(&a.forward(&h)?.silu()?)?)?;
        }
        output.forward(&h)
    }
}

/// Encoder, decoder and codebook.
#[derive(Debug, Clone)]
pub struct VqvaeModel {
    arch: VqvaeArch,
    skeleton: Skeleton,
    store: ParamStore,
    encoder: Mlp,
    decoder: Mlp,
    codebook: Tensor,
    identity_patch: Tensor,
}

impl VqvaeModel {
    pub fn new(arch: VqvaeArch, skeleton: Skeleton, seed: u64) -> Result<Self> {
        Self::from_store(arch, skeleton, ParamStore::new(DType::F32), seed)
    }

    /// Builds the model around `store`, initializing any missing parameter.
    pub fn from_store(arch: VqvaeArch, skeleton: Skeleton, mut store: ParamStore, seed: u64) -> Result<Self> {
        if skeleton.joint_count() != arch.joints {
            return Err(Error::shape("skeleton joints", arch.joints, skeleton.joint_count()));
        }
        if arch.latent_dim == 0 || arch.codebook_size < 2 {
            return Err(Error::InvalidArgument(
                "latent_dim must be positive and codebook_size at least 2".into(),
            ));
        }
        let mut rng = seeded(seed, stream::INIT);
        let p = arch.patch_dim();
        let encoder = Mlp::new(&mut store, "encoder", p, arch.hidden, arch.depth, arch.latent_dim, &mut rng)?;
        let decoder_in = (2 * arch.context + 1) * arch.latent_dim;
        let decoder = Mlp::new(&mut store, "decoder", decoder_in, arch.hidden, arch.depth, p, &mut rng)?;
        let codebook = store.get_or_init(
            "codebook",
            &[arch.codebook_size, arch.latent_dim],
            Init::Normal(0.1),
            &mut rng,
        )?;
        let identity: Vec<f32> = rotation::IDENTITY
            .iter()
            .map(|&x| x as f32)
            .cycle()
            .take(p)
            .collect();
        let identity_patch = Tensor::from_vec(identity, p, &Device::Cpu)?.to_dtype(store.dtype())?;
        Ok(Self {
            arch,
            skeleton,
            store,
            encoder,
            decoder,
            codebook,
            identity_patch,
        })
    }

    pub fn arch(&self) -> &VqvaeArch {
        &self.arch
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub(crate) fn codebook_tensor(&self) -> &Tensor {
        &self.codebook
    }

    pub fn codebook(&self) -> Result<Codebook> {
        let entries = self.codebook.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
        Codebook::new(self.arch.codebook_size, self.arch.latent_dim, entries)
    }

    /// `(B, Lz, 4*J*9)` patches -> `(B, Lz, D)` latents.
    pub fn encode_tensor(&self, patches: &Tensor) -> Result<Tensor> {
        self.encoder.forward(patches)
    }

    /// `(B, Lz, D)` latents -> `(B, Lz, 4*J*9)` raw rotation entries. Patch
    /// `i` is decoded from latents `i - context ..= i + context`, repeating
    /// the edge latents past either end.
    pub fn decode_tensor(&self, latents: &Tensor) -> Result<Tensor> {
        let c = self.arch.context as isize;
        let input = if c == 0 {
            latents.clone()
        } else {
            let l = latents.dim(1)? as isize;
            let shifted = (-c..=c)
                .map(|o| {
                    let idx: Vec<u32> = (0..l).map(|i| (i + o).clamp(0, l - 1) as u32).collect();
                    Ok(latents.index_select(&Tensor::from_vec(idx, l as usize, &Device::Cpu)?, 1)?)
                })
                .collect::<Result<Vec<_>>>()?;
            Tensor::cat(&shifted, 2)?
        };
        Ok(self.decoder.forward(&input)?.broadcast_add(&self.identity_patch)?)
    }

    fn check_clip(&self, clip: &MotionClip) -> Result<()> {
        if clip.joint_count() != self.arch.joints {
            return Err(Error::shape("clip joints", self.arch.joints, clip.joint_count()));
        }
        if clip.len() < DOWNSAMPLE {
            return Err(Error::TooShort(format!(
                "encoding needs at least {DOWNSAMPLE} frames, got {}",
                clip.len()
            )));
        }
        if (clip.fps() - TRAINING_FPS).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "clip is {} fps; resample to {TRAINING_FPS} fps before encoding",
                clip.fps()
            )));
        }
        Ok(())
    }

    /// Clip frames as f32 patches, padding the tail by repeating the last frame.
    pub fn patches(&self, clip: &MotionClip) -> Result<Vec<f32>> {
        self.check_clip(clip)?;
        let lz = latent_len(clip.len());
        let w = clip.frame_width();
        let mut out: Vec<f32> = clip.data().iter().map(|&x| x as f32).collect();
        let last = clip.frame(clip.len() - 1);
        for _ in clip.len()..lz * DOWNSAMPLE {
            out.extend(last.iter().map(|&x| x as f32));
        }
        debug_assert_eq!(out.len(), lz * DOWNSAMPLE * w);
        Ok(out)
    }

    pub fn encode(&self, clip: &MotionClip) -> Result<LatentSequence> {
        Ok(self.encode_many(&[clip])?.pop().expect("one clip"))
    }

    /// Encodes clips of equal length in one batch.
    pub fn encode_many(&self, clips: &[&MotionClip]) -> Result<Vec<LatentSequence>> {
        let Some(first) = clips.first() else {
            return Ok(Vec::new());
        };
        let lz = latent_len(first.len());
        let mut data = Vec::new();
        for c in clips {
            if c.len() != first.len() {
                return Err(Error::shape("batched clip length", first.len(), c.len()));
            }
            data.extend(self.patches(c)?);
        }
        let x = Tensor::from_vec(data, (clips.len(), lz, self.arch.patch_dim()), &Device::Cpu)?
            .to_dtype(self.store.dtype())?;
        let z = self
            .encode_tensor(&x)?
            .to_dtype(DType::F32)?
            .flatten_all()?
            .to_vec1::<f32>()?;
        let d = self.arch.latent_dim;
        z.chunks(lz * d)
            .map(|c| LatentSequence::new(lz, d, c.to_vec()))
            .collect()
    }

    /// Raw decoder output (`4 * Lz` frames of `J * 9` values), before projection.
    pub fn decode_raw(&self, latents: &LatentSequence) -> Result<Vec<f32>> {
        if latents.dim() != self.arch.latent_dim {
            return Err(Error::shape("latent dim", self.arch.latent_dim, latents.dim()));
        }
        if latents.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latents passed to decode".into()));
        }
        let z = Tensor::from_vec(
            latents.values().to_vec(),
            (1, latents.len(), latents.dim()),
            &Device::Cpu,
        )?
        .to_dtype(self.store.dtype())?;
        Ok(self
            .decode_tensor(&z)?
            .to_dtype(DType::F32)?
            .flatten_all()?
            .to_vec1::<f32>()?)
    }

    /// Decodes to `4 * Lz` frames of proper rotation matrices at 30 fps.
    pub fn decode(&self, latents: &LatentSequence) -> Result<MotionClip> {
        let raw = self.decode_raw(latents)?;
        let mut clip = MotionClip::new(
            self.skeleton.clone(),
            TRAINING_FPS,
            raw.into_iter().map(f64::from).collect(),
        )?;
        clip.project_rotations();
        Ok(clip)
    }

    /// Per-entry mean squared error of `decode(encode(clip))` against `clip`
    /// over the clip's own frames.
    pub fn reconstruction_mse(&self, clip: &MotionClip) -> Result<f64> {
        let recon = self.decode(&self.encode(clip)?)?;
        let n = clip.data().len();
        let sum: f64 = clip
            .data()
            .iter()
            .zip(&recon.data()[..n])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / n as f64)
    }

    pub(crate) fn set_codebook_rows(&mut self, rows: &[(usize, Vec<f32>)]) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let mut cb = self.codebook.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
        let d = self.arch.latent_dim;
        for (i, v) in rows {
            cb[i * d..(i + 1) * d].copy_from_slice(v);
        }
        let t = Tensor::from_vec(cb, (self.arch.codebook_size, d), &Device::Cpu)?
            .to_dtype(self.store.dtype())?;
        self.store
            .get("codebook")
            .expect("codebook parameter exists")
            .set(&t)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{euler_to_rotation_matrices, validate_rotations, EulerOrder};
    use crate::rng::normal_f32;

    fn tiny_arch(hidden: usize) -> VqvaeArch {
        VqvaeArch {
            joints: 2,
            latent_dim: 3,
            codebook_size: 4,
            hidden,
            depth: 1,
            context: 0,
        }
    }

    fn wavy_clip(len: usize, joints: usize, phase: f64) -> MotionClip {
        let s = Skeleton::chain(joints).unwrap();
        let angles: Vec<[f64; 3]> = (0..len * joints)
            .map(|i| {
                let t = (i / joints) as f64 / 30.0;
                [0.5 * (t * 3.0 + phase).sin(), 0.2 * (t * 2.0).cos(), 0.1]
            })
            .collect();
        euler_to_rotation_matrices(s, 30.0, &angles, EulerOrder::XYZ).unwrap()
    }

    #[test]
    fn latent_length_is_quarter_rounded_up() {
        let m = VqvaeModel::new(tiny_arch(8), Skeleton::chain(2).unwrap(), 0).unwrap();
        assert_eq!(m.encode(&wavy_clip(64, 2, 0.0)).unwrap().len(), 16);
        assert_eq!(m.encode(&wavy_clip(65, 2, 0.0)).unwrap().len(), 17);
        let z = LatentSequence::zeros(16, 3);
        assert_eq!(m.decode(&z).unwrap().len(), 64);
    }

    #[test]
    fn encode_is_deterministic() {
        let m = VqvaeModel::new(tiny_arch(8), Skeleton::chain(2).unwrap(), 0).unwrap();
        let c = wavy_clip(20, 2, 0.3);
        assert_eq!(m.encode(&c).unwrap(), m.encode(&c).unwrap());
    }

    #[test]
    fn rejects_wrong_joint_count_and_fps() {
        let m = VqvaeModel::new(tiny_arch(8), Skeleton::chain(2).unwrap(), 0).unwrap();
        let err = m.encode(&wavy_clip(8, 3, 0.0)).unwrap_err().to_string();
        assert!(err.contains("expected 2") && err.contains("got 3"), "{err}");
        let c = wavy_clip(8, 2, 0.0);
        let c60 = MotionClip::new(c.skeleton().clone(), 60.0, c.data().to_vec()).unwrap();
        assert!(m.encode(&c60).is_err());
        assert!(m.encode(&wavy_clip(3, 2, 0.0)).is_err());
    }

    #[test]
    fn zero_input_single_layer_matches_hand_forward() {
        let m = VqvaeModel::new(tiny_arch(0), Skeleton::chain(2).unwrap(), 5).unwrap();
        let skel = Skeleton::chain(2).unwrap();
        let zero = MotionClip::new(skel.clone(), 30.0, vec![0.0; 8 * 18]).unwrap();
        let z = m.encode(&zero).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));

        // hand-evaluated affine map on a non-trivial clip
        let c = wavy_clip(4, 2, 0.7);
        let w = m.store().get("encoder.in.weight").unwrap().to_vec2::<f32>().unwrap();
        let b = m.store().get("encoder.in.bias").unwrap().to_vec1::<f32>().unwrap();
        let x: Vec<f64> = c.data().to_vec();
        let z = m.encode(&c).unwrap();
        for d in 0..3 {
            let mut acc = b[d] as f64;
            for (i, xi) in x.iter().enumerate() {
                acc += (*xi as f32) as f64 * w[i][d] as f64;
            }
            assert!((acc - z.values()[d] as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn decode_always_yields_rotations() {
        let m = VqvaeModel::new(tiny_arch(8), Skeleton::chain(2).unwrap(), 1).unwrap();
        let mut rng = seeded(3, 0);
        let z = LatentSequence::new(10, 3, normal_f32(&mut rng, 30).iter().map(|v| v * 50.0).collect()).unwrap();
        let clip = m.decode(&z).unwrap();
        assert!(validate_rotations(&clip, 1e-4).is_empty());
    }

    #[test]
    fn decoder_context_is_local() {
        let arch = VqvaeArch {
            context: 1,
            ..tiny_arch(8)
        };
        let m = VqvaeModel::new(arch, Skeleton::chain(2).unwrap(), 4).unwrap();
        let mut rng = seeded(9, 0);
        let base = normal_f32(&mut rng, 30);
        let mut bumped = base.clone();
        bumped[5 * 3 + 1] += 1.0;
        let a = m.decode_raw(&LatentSequence::new(10, 3, base).unwrap()).unwrap();
        let b = m.decode_raw(&LatentSequence::new(10, 3, bumped).unwrap()).unwrap();
        let per_patch = 4 * 2 * 9;
        for p in 0..10 {
            let changed = (p * per_patch..(p + 1) * per_patch).any(|i| a[i] != b[i]);
            assert_eq!(changed, (4..=6).contains(&p), "patch {p}");
        }
    }

    #[test]
    fn codec_is_length_equivariant_on_block_multiples() {
        let m = VqvaeModel::new(tiny_arch(16), Skeleton::chain(2).unwrap(), 2).unwrap();
        let a = wavy_clip(12, 2, 0.0);
        let b = wavy_clip(8, 2, 1.0);
        let joint = m.encode(&a.concat(&b).unwrap()).unwrap();
        let parts = m.encode(&a).unwrap().concat(&m.encode(&b).unwrap()).unwrap();
        for (x, y) in joint.values().iter().zip(parts.values()) {
            assert!((x - y).abs() < 1e-6);
        }
        let dj = m.decode_raw(&joint).unwrap();
        let mut dp = m.decode_raw(&m.encode(&a).unwrap()).unwrap();
        dp.extend(m.decode_raw(&m.encode(&b).unwrap()).unwrap());
        for (x, y) in dj.iter().zip(&dp) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
