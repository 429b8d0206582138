//! Pixel/latent codec stand-ins.
//!
//! `Passthrough` treats pixels as latents (factor 1). `Box8` downsamples
//! 8× with a box average and upsamples with nearest-neighbour, exercising
//! the factor-8 coordinate bookkeeping of a real spatial compressor.
//! Channel count passes through unchanged in both directions.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::{LatentVolume, VolumeShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Codec {
    Passthrough,
    Box8,
}

impl Codec {
    /// Pixels per latent cell along each spatial axis.
    pub fn factor(&self) -> i64 {
        match self {
            Codec::Passthrough => 1,
            Codec::Box8 => 8,
        }
    }

    /// Downsample by the codec factor with a box average.
    pub fn encode(&self, vol: &LatentVolume) -> Result<LatentVolume> {
        let f = self.factor() as usize;
        if f == 1 {
            return Ok(vol.clone());
        }
        let shape = vol.shape();
        if shape.height % f != 0 || shape.width % f != 0 {
            return Err(Error::Shape(format!(
                "spatial dims {}x{} are not divisible by the codec factor {f}",
                shape.height, shape.width
            )));
        }
        let out_shape = VolumeShape::new(
            shape.frames,
            shape.channels,
            shape.height / f,
            shape.width / f,
        );
        let mut out = LatentVolume::zeros(out_shape)?;
        let inv = 1.0 / (f * f) as f64;
        for fr in 0..shape.frames {
            for c in 0..shape.channels {
                for oi in 0..out_shape.height {
                    for oj in 0..out_shape.width {
                        let mut acc = 0.0f64;
                        for di in 0..f {
                            for dj in 0..f {
                                acc += vol.at(fr, c, oi * f + di, oj * f + dj) as f64;
                            }
                        }
                        *out.at_mut(fr, c, oi, oj) = (acc * inv) as f32;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Upsample by the codec factor with nearest-neighbour replication.
    pub fn decode(&self, vol: &LatentVolume) -> Result<LatentVolume> {
        let f = self.factor() as usize;
        if f == 1 {
            return Ok(vol.clone());
        }
        let shape = vol.shape();
        let out_shape = VolumeShape::new(
            shape.frames,
            shape.channels,
            shape.height * f,
            shape.width * f,
        );
        let mut out = LatentVolume::zeros(out_shape)?;
        for fr in 0..shape.frames {
            for c in 0..shape.channels {
                for i in 0..out_shape.height {
                    for j in 0..out_shape.width {
                        *out.at_mut(fr, c, i, j) = vol.at(fr, c, i / f, j / f);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl FromStr for Codec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passthrough" => Ok(Codec::Passthrough),
            "box8" => Ok(Codec::Box8),
            other => Err(Error::InvalidConfig(format!(
                "unknown codec {other:?}, expected \"passthrough\" or \"box8\""
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    #[test]
    fn passthrough_is_the_identity() {
        let shape = VolumeShape::new(1, 2, 4, 4);
        let values = (0..shape.len()).map(|i| i as f32 * 0.01).collect();
        let vol = LatentVolume::from_values(shape, values).unwrap();
        assert_eq!(Codec::Passthrough.encode(&vol).unwrap().values(), vol.values());
        assert_eq!(Codec::Passthrough.decode(&vol).unwrap().values(), vol.values());
    }

    #[test]
    fn box8_averages_each_block() {
        let shape = VolumeShape::new(1, 1, 8, 16);
        let mut vol = LatentVolume::zeros(shape).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                *vol.at_mut(0, 0, i, j) = (i * 8 + j) as f32; // left block: 0..64
                *vol.at_mut(0, 0, i, j + 8) = 3.0; // right block: constant
            }
        }
        let enc = Codec::Box8.encode(&vol).unwrap();
        assert_eq!(enc.shape(), VolumeShape::new(1, 1, 1, 2));
        assert_eq!(enc.at(0, 0, 0, 0), 31.5);
        assert_eq!(enc.at(0, 0, 0, 1), 3.0);
    }

    #[test]
    fn box8_round_trips_block_constant_volumes() {
        let shape = VolumeShape::new(2, 3, 16, 24);
        let mut vol = LatentVolume::zeros(shape).unwrap();
        for f in 0..2 {
            for c in 0..3 {
                for i in 0..16 {
                    for j in 0..24 {
                        *vol.at_mut(f, c, i, j) =
                            ((i / 8) * 31 + (j / 8) * 7 + f * 3 + c) as f32 * 0.125;
                    }
                }
            }
        }
        let back = Codec::Box8.decode(&Codec::Box8.encode(&vol).unwrap()).unwrap();
        assert_eq!(back.values(), vol.values());
    }

    #[test]
    fn box8_rejects_misaligned_dims() {
        let vol = LatentVolume::zeros(VolumeShape::new(1, 1, 12, 16)).unwrap();
        assert!(matches!(Codec::Box8.encode(&vol), Err(Error::Shape(_))));
    }

    #[test]
    fn box8_keeps_smooth_gradients_above_the_sanity_floor() {
        let shape = VolumeShape::new(1, 1, 64, 64);
        let mut vol = LatentVolume::zeros(shape).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                *vol.at_mut(0, 0, i, j) = (i as f32 + j as f32) / 128.0;
            }
        }
        let back = Codec::Box8.decode(&Codec::Box8.encode(&vol).unwrap()).unwrap();
        let db = psnr(&vol, &back, 1.0).unwrap();
        assert!(db.is_finite() && db > 20.0, "psnr {db}");
    }

    #[test]
    fn codec_names_parse() {
        assert_eq!("passthrough".parse::<Codec>().unwrap(), Codec::Passthrough);
        assert_eq!("box8".parse::<Codec>().unwrap(), Codec::Box8);
        assert!("vae".parse::<Codec>().is_err());
    }
}
