use super::Tensor;
use crate::error::{Error, Result};

/// Unnormalized Gaussian taps `exp(-d^2 / 2 sigma^2)` for `d` in
/// `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel_1d(sigma: f32) -> Result<Vec<f32>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Param(format!("blur sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    Ok((-radius..=radius)
        .map(|d| (-((d * d) as f32) / denom).exp())
        .collect())
}

/// Separable Gaussian blur of a 2-D image.
///
/// Taps that fall outside the image are dropped and the remaining weights
/// renormalized, so a constant image stays constant up to the border.
pub fn gaussian_blur(image: &Tensor, sigma: f32) -> Result<Tensor> {
    let (h, w) = image.dims2()?;
    let kernel = gaussian_kernel_1d(sigma)?;
    let radius = (kernel.len() / 2) as isize;

    let pass = |src: &[f32], len: usize, stride: usize, lines: usize, line_stride: usize| {
        let mut dst = vec![0f32; src.len()];
        for line in 0..lines {
            let base = line * line_stride;
            for p in 0..len as isize {
                let mut acc = 0f32;
                let mut norm = 0f32;
                for (k, &kv) in kernel.iter().enumerate() {
                    let q = p + k as isize - radius;
                    if q >= 0 && (q as usize) < len {
                        acc += kv * src[base + q as usize * stride];
                        norm += kv;
                    }
                }
                dst[base + p as usize * stride] = acc / norm;
            }
        }
        dst
    };

    let horizontal = pass(image.data(), w, 1, h, w);
    let vertical = pass(&horizontal, h, w, w, 1);
    Tensor::new([h, w], vertical)
}

/// Peak-normalized 2-D Gaussian centered at `(i, j)`:
/// `M[p, q] = exp(-((p - i)^2 + (q - j)^2) / (2 variance))`.
pub fn gaussian_mask(center: (usize, usize), variance: f32, dims: (usize, usize)) -> Result<Tensor> {
    let (i, j) = center;
    let (h, w) = dims;
    if i >= h || j >= w {
        return Err(Error::Param(format!(
            "mask center ({i}, {j}) outside {h}x{w} image"
        )));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Param(format!("mask variance must be positive, got {variance}")));
    }
    let denom = 2.0 * variance;
    Ok(Tensor::from_fn([h, w], |idx| {
        let dp = (idx / w) as f32 - i as f32;
        let dq = (idx % w) as f32 - j as f32;
        (-(dp * dp + dq * dq) / denom).exp()
    }))
}

/// Bilinear resize with the align-corners convention: the corner samples of
/// input and output coincide.
pub fn bilinear_upsample(map: &Tensor, target: (usize, usize)) -> Result<Tensor> {
    let (h, w) = map.dims2()?;
    let (th, tw) = target;
    if h == 0 || w == 0 || th == 0 || tw == 0 {
        return Err(Error::Param(format!(
            "cannot resample {h}x{w} to {th}x{tw}"
        )));
    }
    let axis = |src_len: usize, dst_len: usize| -> Vec<(usize, usize, f32)> {
        (0..dst_len)
            .map(|d| {
                // integer numerator first: grid-aligned samples land exactly
                let pos = if dst_len > 1 {
                    (d * (src_len - 1)) as f32 / (dst_len - 1) as f32
                } else {
                    0.0
                };
                let lo = (pos.floor() as usize).min(src_len - 1);
                let hi = (lo + 1).min(src_len - 1);
                (lo, hi, pos - lo as f32)
            })
            .collect()
    };
    let rows = axis(h, th);
    let cols = axis(w, tw);
    let src = map.data();
    let mut out = Vec::with_capacity(th * tw);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bottom = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    Tensor::new([th, tw], out)
}
