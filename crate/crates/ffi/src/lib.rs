//! C ABI over `atari_saliency`.
//!
//! Objects are opaque heap handles created by `as_*_new`/`as_*_load` style
//! functions and released with the matching `as_*_free`. Every fallible call
//! returns an [`AsStatus`]; on failure a description is available from
//! [`as_last_error_message`] on the same thread. Panics never cross the
//! boundary and are reported as [`AsStatus::Panic`].
//!
//! Frames and maps are row-major `float` buffers of
//! `AS_FRAME_SIDE * AS_FRAME_SIDE` values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use atari_saliency::episode::synth_weights;
use atari_saliency::net::{load_weights, Activation, NetworkConfig, FRAME_SIDE as SIDE};
use atari_saliency::{
    ActorCritic, Episode, Error, Explainer, Frame, Head, RolloutCache, SaliencyConfig, Tensor, Workers,
};

/// Side length of network inputs and saliency maps.
pub const AS_FRAME_SIDE: usize = 80;
const _: () = assert!(AS_FRAME_SIDE == SIDE);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsStatus {
    Ok = 0,
    /// A required pointer was null.
    Null = 1,
    /// Out-of-range index, bad parameter or configuration.
    InvalidArgument = 2,
    /// Weights or episode could not be loaded.
    Load = 3,
    Io = 4,
    /// Tensor shapes do not fit together.
    Shape = 5,
    /// The library panicked; the handle involved should be freed.
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsHead {
    Actor = 0,
    Critic = 1,
}

impl From<AsHead> for Head {
    fn from(h: AsHead) -> Head {
        match h {
            AsHead::Actor => Head::Actor,
            AsHead::Critic => Head::Critic,
        }
    }
}

/// Perturbation settings. `workers == 0` means one per available core.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsSaliencyParams {
    pub stride: usize,
    pub blur_sigma: f32,
    pub mask_variance: f32,
    pub workers: usize,
}

pub struct AsNetwork {
    net: Arc<ActorCritic>,
}

pub struct AsEpisode {
    episode: Arc<Episode>,
}

/// A network, an episode and the cached states of running one on the other.
pub struct AsRollout {
    net: Arc<ActorCritic>,
    episode: Arc<Episode>,
    cache: RolloutCache,
}

impl AsRollout {
    fn explainer(&self) -> Result<Explainer<'_>, Failure> {
        Ok(Explainer::new(&self.net, &self.episode, &self.cache)?)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(AsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Shape(_) => AsStatus::Shape,
            Error::Param(_) | Error::Config(_) => AsStatus::InvalidArgument,
            Error::Load { .. } => AsStatus::Load,
            Error::Io { .. } => AsStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AsStatus::Null, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(AsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            AsStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn out_slice<'a>(p: *mut f32, len: usize, what: &str) -> Result<&'a mut [f32], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn workers(n: usize) -> Result<Workers, Failure> {
    Ok(if n == 0 { Workers::available() } else { Workers::new(n)? })
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn as_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn as_saliency_params_default() -> AsSaliencyParams {
    let c = SaliencyConfig::default();
    AsSaliencyParams {
        stride: c.stride,
        blur_sigma: c.blur_sigma,
        mask_variance: c.mask_variance,
        workers: 0,
    }
}

/// Loads a weights directory (or its manifest file).
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn as_network_load(path: *const c_char, out: *mut *mut AsNetwork) -> AsStatus {
    guard(|| {
        let net = load_weights(path_arg(path)?)?;
        store(out, AsNetwork { net: Arc::new(net) })
    })
}

/// Seeded random weights, uniform in `[-scale, scale]`, ELU activations.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn as_network_synth(
    seed: u64,
    n_actions: usize,
    scale: f32,
    out: *mut *mut AsNetwork,
) -> AsStatus {
    guard(|| {
        let config = NetworkConfig::new(n_actions, Activation::Elu)?;
        let net = synth_weights(seed, config, scale)?;
        store(out, AsNetwork { net: Arc::new(net) })
    })
}

/// Number of actions, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn as_network_n_actions(net: *const AsNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.n_actions())
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_network_free(net: *mut AsNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Loads a preprocessed episode directory.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn as_episode_load(path: *const c_char, out: *mut *mut AsEpisode) -> AsStatus {
    guard(|| {
        let episode = atari_saliency::episode::load_episode(path_arg(path)?)?;
        store(out, AsEpisode { episode: Arc::new(episode) })
    })
}

/// Builds an episode from `n_frames` consecutive 80x80 frames with values
/// in `[0, 1]`.
///
/// # Safety
/// `data` must point to `n_frames * AS_FRAME_SIDE * AS_FRAME_SIDE` floats.
#[no_mangle]
pub unsafe extern "C" fn as_episode_from_frames(
    data: *const f32,
    n_frames: usize,
    out: *mut *mut AsEpisode,
) -> AsStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let px = AS_FRAME_SIDE * AS_FRAME_SIDE;
        let len = n_frames.checked_mul(px).ok_or_else(|| invalid("frame count overflows"))?;
        let all = std::slice::from_raw_parts(data, len);
        let frames = all
            .chunks_exact(px)
            .map(|f| Frame::new(Tensor::new([AS_FRAME_SIDE, AS_FRAME_SIDE], f.to_vec())?))
            .collect::<Result<Vec<_>, _>>()?;
        let episode = Episode::new(frames, "ffi")?;
        store(out, AsEpisode { episode: Arc::new(episode) })
    })
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `episode` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn as_episode_len(episode: *const AsEpisode) -> usize {
    episode.as_ref().map_or(0, |e| e.episode.len())
}

/// # Safety
/// `episode` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_episode_free(episode: *mut AsEpisode) {
    if !episode.is_null() {
        drop(Box::from_raw(episode));
    }
}

/// Runs `net` over `episode` and caches every recurrent state. The rollout
/// shares both objects, so they may be freed independently afterwards.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn as_rollout_new(
    net: *const AsNetwork,
    episode: *const AsEpisode,
    out: *mut *mut AsRollout,
) -> AsStatus {
    guard(|| {
        let net = handle(net, "net")?.net.clone();
        let episode = handle(episode, "episode")?.episode.clone();
        let cache = net.rollout(&episode)?;
        store(out, AsRollout { net, episode, cache })
    })
}

/// Copies the logits (`logits_len` must equal the action count) and value
/// of step `t`. Either output may be null to skip it.
///
/// # Safety
/// `rollout` must be live; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn as_rollout_output(
    rollout: *const AsRollout,
    t: usize,
    logits: *mut f32,
    logits_len: usize,
    value: *mut f32,
) -> AsStatus {
    guard(|| {
        let r = handle(rollout, "rollout")?;
        let out = r
            .cache
            .outputs
            .get(t)
            .ok_or_else(|| invalid(format!("timestep {t} outside rollout of length {}", r.cache.len())))?;
        if !logits.is_null() {
            if logits_len != out.logits.len() {
                return Err(invalid(format!("logits_len {logits_len}, network has {}", out.logits.len())));
            }
            out_slice(logits, logits_len, "logits")?.copy_from_slice(out.logits.data());
        }
        if let Some(v) = value.as_mut() {
            *v = out.value;
        }
        Ok(())
    })
}

/// # Safety
/// `rollout` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_rollout_free(rollout: *mut AsRollout) {
    if !rollout.is_null() {
        drop(Box::from_raw(rollout));
    }
}

/// Perturbation saliency of `head` at step `t`, upsampled to 80x80 into
/// `out` (`AS_FRAME_SIDE * AS_FRAME_SIDE` floats). `params` may be null for
/// the defaults.
///
/// # Safety
/// `rollout` must be live, `params` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn as_saliency_map(
    rollout: *const AsRollout,
    t: usize,
    head: AsHead,
    params: *const AsSaliencyParams,
    out: *mut f32,
) -> AsStatus {
    guard(|| {
        let r = handle(rollout, "rollout")?;
        let p = params.as_ref().copied().unwrap_or_else(|| as_saliency_params_default());
        let cfg = SaliencyConfig {
            stride: p.stride,
            blur_sigma: p.blur_sigma,
            mask_variance: p.mask_variance,
            head: head.into(),
        };
        let map = r.explainer()?.saliency_map(t, &cfg, &workers(p.workers)?)?;
        out_slice(out, AS_FRAME_SIDE * AS_FRAME_SIDE, "out")?.copy_from_slice(map.scores.data());
        Ok(())
    })
}

/// Change of the policy output when the memory entering step `t` is scaled
/// by `factor`.
///
/// # Safety
/// `rollout` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn as_memory_saliency(
    rollout: *const AsRollout,
    t: usize,
    factor: f32,
    perturb_hidden: bool,
    out: *mut f32,
) -> AsStatus {
    guard(|| {
        let r = handle(rollout, "rollout")?;
        let score = r.explainer()?.memory_saliency(t, factor, perturb_hidden)?;
        *out.as_mut().ok_or_else(|| null("out"))? = score;
        Ok(())
    })
}

/// Central-difference gradient magnitude map of `head` at step `t`.
///
/// # Safety
/// `rollout` must be live and `out` writable for 6400 floats.
#[no_mangle]
pub unsafe extern "C" fn as_jacobian_map(
    rollout: *const AsRollout,
    t: usize,
    head: AsHead,
    epsilon: f32,
    n_workers: usize,
    out: *mut f32,
) -> AsStatus {
    guard(|| {
        let r = handle(rollout, "rollout")?;
        let map = r.explainer()?.jacobian_saliency(t, head.into(), epsilon, &workers(n_workers)?)?;
        out_slice(out, AS_FRAME_SIDE * AS_FRAME_SIDE, "out")?.copy_from_slice(map.scores.data());
        Ok(())
    })
}
