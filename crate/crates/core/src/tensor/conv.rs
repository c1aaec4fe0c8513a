use super::Tensor;
use crate::error::{Error, Result};

/// Weights and geometry of a 2-D convolution layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2dParams {
    /// `out_channels x in_channels x kh x kw`
    pub weight: Tensor,
    /// `out_channels`
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dParams {
    pub fn new(weight: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self> {
        let p = Conv2dParams {
            weight,
            bias,
            stride,
            padding,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.shape()[2], self.weight.shape()[3])
    }

    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel();
        let (ph, pw) = (height + 2 * self.padding, width + 2 * self.padding);
        if ph < kh || pw < kw {
            return Err(Error::Shape(format!(
                "conv2d: padded input {ph}x{pw} smaller than kernel {kh}x{kw}"
            )));
        }
        Ok(((ph - kh) / self.stride + 1, (pw - kw) / self.stride + 1))
    }

    fn validate(&self) -> Result<()> {
        if self.weight.shape().len() != 4 {
            return Err(Error::Shape(format!(
                "conv2d weight must be 4-D, got {:?}",
                self.weight.shape()
            )));
        }
        if self.bias.shape() != [self.out_channels()] {
            return Err(Error::Shape(format!(
                "conv2d bias must be [{}], got {:?}",
                self.out_channels(),
                self.bias.shape()
            )));
        }
        if self.stride == 0 {
            return Err(Error::Param("conv2d stride must be positive".into()));
        }
        Ok(())
    }
}

/// Cross-correlation of a `C x H x W` input with zero padding.
///
/// Each output element is `bias + sum(w * x)` with the sum taken over
/// `(in_channel, ky, kx)` in row-major order; taps landing in the padding are
/// skipped.
pub fn conv2d(input: &Tensor, params: &Conv2dParams) -> Result<Tensor> {
    params.validate()?;
    let (c, h, w) = match input.shape()[..] {
        [c, h, w] => (c, h, w),
        _ => {
            return Err(Error::Shape(format!(
                "conv2d input must be C x H x W, got {:?}",
                input.shape()
            )))
        }
    };
    if c != params.in_channels() {
        return Err(Error::Shape(format!(
            "conv2d expects {} input channels, got {c}",
            params.in_channels()
        )));
    }
    let (oh, ow) = params.output_dims(h, w)?;
    let (kh, kw) = params.kernel();
    let (stride, pad) = (params.stride, params.padding);
    let oc_count = params.out_channels();
    let x = input.data();
    let weights = params.weight.data();

    // taps laid out [ic][ky][kx][oc] so one input value updates every output
    // channel's accumulator with a contiguous run of weights
    let taps = c * kh * kw;
    let mut wt = vec![0f32; taps * oc_count];
    for oc in 0..oc_count {
        for tap in 0..taps {
            wt[tap * oc_count + oc] = weights[oc * taps + tap];
        }
    }

    let plane = oh * ow;
    let mut out = vec![0f32; oc_count * plane];
    let mut acc = vec![0f32; oc_count];
    for oy in 0..oh {
        for ox in 0..ow {
            acc.copy_from_slice(params.bias.data());
            for ic in 0..c {
                let src = &x[ic * h * w..(ic + 1) * h * w];
                for ky in 0..kh {
                    let iy = (oy * stride + ky).wrapping_sub(pad);
                    if iy >= h {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx).wrapping_sub(pad);
                        if ix >= w {
                            continue;
                        }
                        let v = src[iy * w + ix];
                        let tap = (ic * kh + ky) * kw + kx;
                        for (a, wv) in acc.iter_mut().zip(&wt[tap * oc_count..(tap + 1) * oc_count]) {
                            *a += wv * v;
                        }
                    }
                }
            }
            for (oc, a) in acc.iter().enumerate() {
                out[oc * plane + oy * ow + ox] = *a;
            }
        }
    }
    Tensor::new([oc_count, oh, ow], out)
}
