//! Reference quality metrics over latent volumes.
//!
//! PSNR is computed per frame and averaged; a zero per-frame MSE yields the
//! +infinity sentinel (and so an infinite average — identical volumes report
//! infinity rather than an arbitrary cap). SSIM uses the standard 11×11
//! Gaussian window (sigma 1.5, K1=0.01, K2=0.03, unit peak), scans valid
//! positions only, and averages over frames and channels.

use crate::error::{Error, Result};
use crate::volume::LatentVolume;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_same_shape(a: &LatentVolume, b: &LatentVolume) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "volumes differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB. Returns `f64::INFINITY` when every
/// frame matches exactly.
pub fn psnr(a: &LatentVolume, b: &LatentVolume, peak: f64) -> Result<f64> {
    check_same_shape(a, b)?;
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::InvalidInput(format!(
            "peak must be positive and finite, got {peak}"
        )));
    }
    let shape = a.shape();
    let per_frame = shape.channels * shape.height * shape.width;
    if per_frame == 0 || shape.frames == 0 {
        return Err(Error::InvalidInput("volumes must be non-empty".into()));
    }
    let mut total = 0.0f64;
    for f in 0..shape.frames {
        let lo = f * per_frame;
        let hi = lo + per_frame;
        let mse = a.values()[lo..hi]
            .iter()
            .zip(&b.values()[lo..hi])
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            / per_frame as f64;
        total += if mse == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (peak * peak / mse).log10()
        };
    }
    Ok(total / shape.frames as f64)
}

/// Mean structural similarity over all frames and channels.
pub fn ssim(a: &LatentVolume, b: &LatentVolume) -> Result<f64> {
    check_same_shape(a, b)?;
    let shape = a.shape();
    if shape.height < SSIM_WINDOW || shape.width < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "frames must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for the similarity window, got {}x{}",
            shape.height, shape.width
        )));
    }
    if shape.frames == 0 || shape.channels == 0 {
        return Err(Error::InvalidInput("volumes must be non-empty".into()));
    }
    let kernel = gaussian_kernel();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (h, w) = (shape.height, shape.width);
    let mut total = 0.0f64;
    for f in 0..shape.frames {
        for c in 0..shape.channels {
            let pa: Vec<f64> = a.plane(f, c).iter().map(|&v| v as f64).collect();
            let pb: Vec<f64> = b.plane(f, c).iter().map(|&v| v as f64).collect();
            let sq_a: Vec<f64> = pa.iter().map(|v| v * v).collect();
            let sq_b: Vec<f64> = pb.iter().map(|v| v * v).collect();
            let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();

            let mu_a = blur(&pa, h, w, &kernel);
            let mu_b = blur(&pb, h, w, &kernel);
            let m_aa = blur(&sq_a, h, w, &kernel);
            let m_bb = blur(&sq_b, h, w, &kernel);
            let m_ab = blur(&ab, h, w, &kernel);

            let mut sum = 0.0f64;
            for idx in 0..mu_a.len() {
                let (ma, mb) = (mu_a[idx], mu_b[idx]);
                let var_a = m_aa[idx] - ma * ma;
                let var_b = m_bb[idx] - mb * mb;
                let cov = m_ab[idx] - ma * mb;
                let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
                sum += num / den;
            }
            total += sum / mu_a.len() as f64;
        }
    }
    Ok(total / (shape.frames * shape.channels) as f64)
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0f64; SSIM_WINDOW];
    let mid = (SSIM_WINDOW - 1) as f64 / 2.0;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode convolution with a symmetric kernel; output is
/// (h-10) x (w-10) in row-major order.
fn blur(plane: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let out_w = w - SSIM_WINDOW + 1;
    let out_h = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0f64; h * out_w];
    for i in 0..h {
        let row = &plane[i * w..(i + 1) * w];
        for j in 0..out_w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[j + k];
            }
            horiz[i * out_w + j] = acc;
        }
    }
    let mut out = vec![0.0f64; out_h * out_w];
    for i in 0..out_h {
        for j in 0..out_w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * horiz[(i + k) * out_w + j];
            }
            out[i * out_w + j] = acc;
        }
    }
    out
}
