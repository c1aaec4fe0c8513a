//! Independent reference implementations used as oracles.
//!
//! Everything here is written as plain nested loops over slices, generic over
//! the float type. The `f32` instantiation follows the library's
//! accumulation order (bias first, then terms in index order) so results can
//! be compared bit for bit; the `f64` instantiation is the straight-line
//! high-precision oracle.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Mutex;

use atari_saliency::net::{Activation, ActorCritic, FRAME_SIDE};
use atari_saliency::Episode;

pub trait Real:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn of(v: f32) -> Self;
    fn exp(self) -> Self;
    fn exp_m1(self) -> Self;
    fn tanh(self) -> Self;
    fn to_f64(self) -> f64;
}

macro_rules! real {
    ($t:ty) => {
        impl Real for $t {
            fn of(v: f32) -> Self {
                v as $t
            }
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            fn exp_m1(self) -> Self {
                <$t>::exp_m1(self)
            }
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}
real!(f32);
real!(f64);

fn zero<R: Real>() -> R {
    R::of(0.0)
}

/// `x`: C x H x W, `w`: OC x C x K x K. Pre-activation output.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_naive<R: Real>(
    x: &[R],
    (c, h, w): (usize, usize, usize),
    weight: &[R],
    bias: &[R],
    k: usize,
    stride: usize,
    pad: usize,
) -> (Vec<R>, usize, usize) {
    let oc_n = bias.len();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![zero::<R>(); oc_n * oh * ow];
    for oc in 0..oc_n {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[oc];
                for ic in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let wv = weight[((oc * c + ic) * k + ky) * k + kx];
                            acc = acc + wv * x[(ic * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    (out, oh, ow)
}

pub fn affine_naive<R: Real>(x: &[R], weight: &[R], bias: &[R]) -> Vec<R> {
    let cols = x.len();
    (0..bias.len())
        .map(|r| {
            let mut acc = bias[r];
            for d in 0..cols {
                acc = acc + weight[r * cols + d] * x[d];
            }
            acc
        })
        .collect()
}

pub fn sigmoid_naive<R: Real>(x: R) -> R {
    R::of(1.0) / (R::of(1.0) + (-x).exp())
}

/// Gate order: input, forget, candidate, output.
pub fn lstm_naive<R: Real>(x: &[R], h: &[R], c: &[R], wih: &[R], whh: &[R], b: &[R]) -> (Vec<R>, Vec<R>) {
    let hidden = h.len();
    let (din, n_gates) = (x.len(), 4 * hidden);
    let mut pre = vec![zero::<R>(); n_gates];
    for r in 0..n_gates {
        let mut acc = b[r];
        for d in 0..din {
            acc = acc + wih[r * din + d] * x[d];
        }
        for k in 0..hidden {
            acc = acc + whh[r * hidden + k] * h[k];
        }
        pre[r] = acc;
    }
    let mut h2 = Vec::with_capacity(hidden);
    let mut c2 = Vec::with_capacity(hidden);
    for u in 0..hidden {
        let i = sigmoid_naive(pre[u]);
        let f = sigmoid_naive(pre[hidden + u]);
        let g = pre[2 * hidden + u].tanh();
        let o = sigmoid_naive(pre[3 * hidden + u]);
        let cn = f * c[u] + i * g;
        c2.push(cn);
        h2.push(o * cn.tanh());
    }
    (h2, c2)
}

pub fn activate<R: Real>(act: Activation, x: R) -> R {
    match act {
        Activation::Elu => {
            if x > zero() {
                x
            } else {
                x.exp_m1()
            }
        }
        Activation::Relu => {
            if x > zero() {
                x
            } else {
                zero()
            }
        }
        Activation::Tanh => x.tanh(),
    }
}

fn cast<R: Real>(v: &[f32]) -> Vec<R> {
    v.iter().map(|&x| R::of(x)).collect()
}

/// Step output: logits, value, new hidden and cell state.
pub struct Step<R> {
    pub logits: Vec<R>,
    pub value: R,
    pub h: Vec<R>,
    pub c: Vec<R>,
}

/// The whole network as naive loops.
pub struct OracleNet<R> {
    conv: Vec<(Vec<R>, Vec<R>, usize)>,
    wih: Vec<R>,
    whh: Vec<R>,
    bias: Vec<R>,
    head_w: Vec<R>,
    head_b: Vec<R>,
    n_actions: usize,
    act: Activation,
    pub hidden: usize,
}

impl<R: Real> OracleNet<R> {
    pub fn from_net(net: &ActorCritic) -> Self {
        let p = net.params();
        OracleNet {
            conv: p
                .conv
                .iter()
                .map(|l| (cast(l.weight.data()), cast(l.bias.data()), l.weight.shape()[1]))
                .collect(),
            wih: cast(p.lstm.weight_ih.data()),
            whh: cast(p.lstm.weight_hh.data()),
            bias: cast(p.lstm.bias.data()),
            head_w: cast(p.head_weight.data()),
            head_b: cast(p.head_bias.data()),
            n_actions: net.n_actions(),
            act: net.config().activation,
            hidden: p.lstm.weight_hh.shape()[1],
        }
    }

    pub fn zero_state(&self) -> (Vec<R>, Vec<R>) {
        (vec![zero(); self.hidden], vec![zero(); self.hidden])
    }

    pub fn step(&self, frame: &[R], h: &[R], c: &[R]) -> Step<R> {
        let (mut x, mut dims) = (frame.to_vec(), (1, FRAME_SIDE, FRAME_SIDE));
        for (w, b, ic) in &self.conv {
            assert_eq!(*ic, dims.0);
            let (out, oh, ow) = conv2d_naive(&x, dims, w, b, 3, 2, 1);
            x = out.into_iter().map(|v| activate(self.act, v)).collect();
            dims = (b.len(), oh, ow);
        }
        let (h2, c2) = lstm_naive(&x, h, c, &self.wih, &self.whh, &self.bias);
        let head = affine_naive(&h2, &self.head_w, &self.head_b);
        Step {
            logits: head[..self.n_actions].to_vec(),
            value: head[self.n_actions],
            h: h2,
            c: c2,
        }
    }

    /// State entering step `t` after running `frames[..t]` from zero.
    pub fn prefix_state(&self, frames: &[Vec<R>], t: usize) -> (Vec<R>, Vec<R>) {
        let (mut h, mut c) = self.zero_state();
        for f in &frames[..t] {
            let s = self.step(f, &h, &c);
            h = s.h;
            c = s.c;
        }
        (h, c)
    }
}

pub fn episode_frames<R: Real>(ep: &Episode) -> Vec<Vec<R>> {
    ep.frames().iter().map(|f| cast(f.tensor().data())).collect()
}

/// Renormalized separable blur, written directly in `f64`.
pub fn blur_f64(img: &[f64], sigma: f64) -> Vec<f64> {
    let n = FRAME_SIDE as isize;
    let r = (3.0 * sigma).ceil() as isize;
    let g = |d: isize| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp();
    let pass = |src: &[f64], horizontal: bool| {
        let mut out = vec![0.0; src.len()];
        for y in 0..n {
            for x in 0..n {
                let (mut acc, mut norm) = (0.0, 0.0);
                for d in -r..=r {
                    let (yy, xx) = if horizontal { (y, x + d) } else { (y + d, x) };
                    if (0..n).contains(&yy) && (0..n).contains(&xx) {
                        acc += g(d) * src[(yy * n + xx) as usize];
                        norm += g(d);
                    }
                }
                out[(y * n + x) as usize] = acc / norm;
            }
        }
        out
    };
    pass(&pass(img, true), false)
}

pub fn mask_f64(i: usize, j: usize, variance: f64) -> Vec<f64> {
    (0..FRAME_SIDE * FRAME_SIDE)
        .map(|p| {
            let dy = (p / FRAME_SIDE) as f64 - i as f64;
            let dx = (p % FRAME_SIDE) as f64 - j as f64;
            (-(dy * dy + dx * dx) / (2.0 * variance)).exp()
        })
        .collect()
}

pub fn perturb_f64(img: &[f64], blurred: &[f64], i: usize, j: usize, variance: f64) -> Vec<f64> {
    let m = mask_f64(i, j, variance);
    img.iter()
        .zip(blurred)
        .zip(&m)
        .map(|((x, a), m)| x * (1.0 - m) + a * m)
        .collect()
}

/// Straight-line `f64` saliency of `(i, j)` at step `t` for both heads:
/// unperturbed pass and perturbed pass from the same prefix state.
pub struct F64Saliency<'a> {
    pub net: &'a OracleNet<f64>,
    pub frame: Vec<f64>,
    pub blurred: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub reference: Step<f64>,
}

impl<'a> F64Saliency<'a> {
    pub fn new(net: &'a OracleNet<f64>, frames: &[Vec<f64>], t: usize, sigma: f64) -> Self {
        let (h, c) = net.prefix_state(frames, t);
        let reference = net.step(&frames[t], &h, &c);
        F64Saliency {
            net,
            frame: frames[t].clone(),
            blurred: blur_f64(&frames[t], sigma),
            h,
            c,
            reference,
        }
    }

    pub fn at(&self, i: usize, j: usize, variance: f64) -> (f64, f64) {
        let p = perturb_f64(&self.frame, &self.blurred, i, j, variance);
        let s = self.net.step(&p, &self.h, &self.c);
        let actor = 0.5
            * s.logits
                .iter()
                .zip(&self.reference.logits)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        let dv = s.value - self.reference.value;
        (actor, 0.5 * dv * dv)
    }

    /// Grid of actor (or critic) scores at stride `k`.
    pub fn grid(&self, k: usize, variance: f64, critic: bool) -> Vec<f64> {
        let side = FRAME_SIDE.div_ceil(k);
        (0..side * side)
            .map(|cell| {
                let (a, c) = self.at((cell / side) * k, (cell % side) * k, variance);
                if critic {
                    c
                } else {
                    a
                }
            })
            .collect()
    }
}

/// Align-corners bilinear resize in `f64`.
pub fn upsample_f64(grid: &[f64], side: usize, target: usize) -> Vec<f64> {
    let coord = |d: usize| {
        let pos = if target > 1 {
            (d * (side - 1)) as f64 / (target - 1) as f64
        } else {
            0.0
        };
        let lo = (pos.floor() as usize).min(side - 1);
        (lo, (lo + 1).min(side - 1), pos - lo as f64)
    };
    let mut out = Vec::with_capacity(target * target);
    for y in 0..target {
        let (r0, r1, fr) = coord(y);
        for x in 0..target {
            let (c0, c1, fc) = coord(x);
            let top = grid[r0 * side + c0] * (1.0 - fc) + grid[r0 * side + c1] * fc;
            let bottom = grid[r1 * side + c0] * (1.0 - fc) + grid[r1 * side + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

/// Fraction of `map` (80x80) inside rows `r0..r1`.
pub fn row_mass_f64(map: &[f64], r0: usize, r1: usize) -> f64 {
    let total: f64 = map.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    map[r0 * FRAME_SIDE..r1 * FRAME_SIDE].iter().sum::<f64>() / total
}

/// Serializes timing-sensitive tests within one test binary.
pub static SERIAL: Mutex<()> = Mutex::new(());

pub fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}
