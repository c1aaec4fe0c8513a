use serde::Serialize;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use super::{
    Command, Fixture, InputArgs, JacobianArgs, MemoryArgs, PreprocessArgs, RangeArgs,
    SaliencyArgs, StatsArgs, SynthEpisodeArgs, SynthWeightsArgs, EXIT_OK, EXIT_ORACLE_MISMATCH,
};
use crate::episode::{
    load_episode, load_raw_frame, preprocess, random_actions, save_episode, synth_episode,
    synth_weights, Episode, PreprocessConfig,
};
use crate::error::{Error, Result};
use crate::fixtures::{memoryless, HintReader, Integrator, LinearReader};
use crate::net::{load_weights, save_weights, ActorCritic, NetworkConfig, RecurrentState};
use crate::parallel::Workers;
use crate::render::{overlay_scaled, region_mass, write_frames, write_series, OverlayConfig, Series};
use crate::saliency::{read_map, write_map, Explainer, Head, SaliencyConfig, SaliencyMap};

pub fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Saliency(a) => saliency(a),
        Command::Memory(a) => memory(a),
        Command::Jacobian(a) => jacobian(a),
        Command::Preprocess(a) => preprocess_cmd(a),
        Command::SynthEpisode(a) => synth_episode_cmd(a),
        Command::SynthWeights(a) => synth_weights_cmd(a),
        Command::Stats(a) => stats(a),
    }
}

fn load_inputs(input: &InputArgs) -> Result<(ActorCritic, Episode)> {
    Ok((load_weights(&input.weights)?, load_episode(&input.episode)?))
}

fn timesteps(range: &RangeArgs, len: usize) -> Result<Range<usize>> {
    let end = range.t_end.unwrap_or(len);
    if range.t_start >= end || end > len {
        return Err(Error::Config(format!(
            "timestep range {}..{end} is empty or exceeds episode length {len}",
            range.t_start
        )));
    }
    Ok(range.t_start..end)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_run_json(out: &Path, command: &str, args: &impl Serialize) -> Result<()> {
    let doc = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": args,
    });
    let path = out.join("run.json");
    let text = serde_json::to_string_pretty(&doc).expect("config serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn map_stem(t: usize, head: Head) -> String {
    format!("t{t:06}_{head}")
}

/// Per-timestep maps for each selected head, in head order.
struct HeadMaps {
    heads: Vec<Head>,
    /// `maps[h][k]` is head `heads[h]` at timestep `first_t + k`.
    maps: Vec<Vec<SaliencyMap>>,
    first_t: usize,
}

impl HeadMaps {
    fn get(&self, head: Head) -> Option<&[SaliencyMap]> {
        self.heads
            .iter()
            .position(|h| *h == head)
            .map(|k| self.maps[k].as_slice())
    }

    fn len(&self) -> usize {
        self.maps.first().map_or(0, Vec::len)
    }

    /// Writes `maps/`, `overlays/` and `series.csv` under `out`.
    fn write(&self, out: &Path, episode: &Episode, overlay: &OverlayConfig) -> Result<()> {
        let maps_dir = out.join("maps");
        create_dir(&maps_dir)?;
        for maps in &self.maps {
            for m in maps {
                write_map(m, &maps_dir, &map_stem(m.t, m.head))?;
            }
        }

        let actor = self.get(Head::Actor);
        let critic = self.get(Head::Critic);
        let actor_scale = actor.map_or(0.0, |m| overlay.scale_for(m));
        let critic_scale = critic.map_or(0.0, |m| overlay.scale_for(m));
        let frames = (0..self.len())
            .map(|k| {
                let img = overlay_scaled(
                    episode.frame(self.first_t + k)?,
                    actor.map(|m| (&m[k], actor_scale)),
                    critic.map(|m| (&m[k], critic_scale)),
                    overlay.gain,
                )?;
                Ok(if overlay.upscale > 1 { img.upscale(overlay.upscale) } else { img })
            })
            .collect::<Result<Vec<_>>>()?;
        write_frames(&frames, self.first_t, out.join("overlays"))?;

        let mut series = Series::new((self.first_t..self.first_t + self.len()).collect());
        for (head, maps) in self.heads.iter().zip(&self.maps) {
            series.push(format!("{head}_max"), maps.iter().map(|m| m.scores.max()).collect())?;
            series.push(format!("{head}_total"), maps.iter().map(|m| m.scores.sum()).collect())?;
        }
        write_series(&series, out.join("series.csv"))
    }
}

/// Recomputes every grid point independently of the rollout cache and the
/// grid evaluation: the state entering `t` comes from a fresh replay, each
/// location is a separate perturbed pass. Returns the number of mismatches.
fn oracle_check(ex: &Explainer, t: usize, cfg: &SaliencyConfig, maps: &[&SaliencyMap], workers: &Workers) -> Result<usize> {
    let net = ex.net();
    let mut state = RecurrentState::zeros();
    for frame in &ex.episode().frames()[..t] {
        state = net.forward_step(frame, &state)?.1;
    }
    let (reference, _) = net.forward_step(ex.episode().frame(t)?, &state)?;
    let perturber = crate::saliency::Perturber::new(ex.episode().frame(t)?, cfg)?;
    let side = cfg.grid_side();
    let scores = workers.map(side * side, |cell| {
        let (i, j) = ((cell / side) * cfg.stride, (cell % side) * cfg.stride);
        let (out, _) = net.forward_input(&perturber.perturb(i, j)?, &state)?;
        let dv = reference.value - out.value;
        Ok((
            crate::saliency::half_sq_dist(reference.logits.data(), out.logits.data()),
            0.5 * dv * dv,
        ))
    })?;
    let mut mismatches = 0;
    for map in maps {
        for (cell, &(actor, critic)) in scores.iter().enumerate() {
            let expected = match map.head {
                Head::Actor => actor,
                Head::Critic => critic,
            };
            let got = map.grid_scores.data()[cell];
            if got.to_bits() != expected.to_bits() {
                if mismatches < 10 {
                    eprintln!(
                        "oracle mismatch: t={t} head={} at ({}, {}): grid {got:e}, oracle {expected:e}",
                        map.head,
                        (cell / side) * cfg.stride,
                        (cell % side) * cfg.stride
                    );
                }
                mismatches += 1;
            }
        }
        if cfg.stride == 1 && map.scores != map.grid_scores {
            eprintln!("oracle mismatch: t={t} head={} upsampled map differs from grid", map.head);
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

fn saliency(a: &SaliencyArgs) -> Result<i32> {
    let cfg = a.perturb.config();
    cfg.validate()?;
    let overlay = a.overlay.config();
    overlay.validate()?;
    let workers = Workers::new(a.range.workers)?;
    let (net, episode) = load_inputs(&a.input)?;
    let range = timesteps(&a.range, episode.len())?;
    let cache = net.rollout(&episode)?;
    let ex = Explainer::new(&net, &episode, &cache)?;

    let heads = a.head.heads();
    let mut maps = vec![Vec::new(); heads.len()];
    let mut mismatches = 0;
    for t in range.clone() {
        let (actor, critic) = ex.saliency_maps(t, &cfg, &workers)?;
        let pair = [actor, critic];
        let selected: Vec<&SaliencyMap> = pair.iter().filter(|m| heads.contains(&m.head)).collect();
        if a.oracle_check {
            mismatches += oracle_check(&ex, t, &cfg, &selected, &workers)?;
        }
        for (k, m) in selected.into_iter().enumerate() {
            maps[k].push(m.clone());
        }
    }

    create_dir(&a.out)?;
    let hm = HeadMaps {
        heads,
        maps,
        first_t: range.start,
    };
    hm.write(&a.out, &episode, &overlay)?;
    write_run_json(&a.out, "saliency", a)?;
    if mismatches > 0 {
        eprintln!("oracle check failed: {mismatches} mismatching values");
        return Ok(EXIT_ORACLE_MISMATCH);
    }
    if a.oracle_check {
        eprintln!("oracle check passed");
    }
    Ok(EXIT_OK)
}

fn memory(a: &MemoryArgs) -> Result<i32> {
    if !(a.factor > 0.0 && a.factor <= 1.0) {
        return Err(Error::Config(format!("factor must be in (0, 1], got {}", a.factor)));
    }
    let workers = Workers::new(a.range.workers)?;
    let (net, episode) = load_inputs(&a.input)?;
    let range = timesteps(&a.range, episode.len())?;
    let cache = net.rollout(&episode)?;
    let ex = Explainer::new(&net, &episode, &cache)?;
    let scores = workers.map(range.len(), |k| {
        ex.memory_saliency(range.start + k, a.factor, a.perturb_hidden)
    })?;

    create_dir(&a.out)?;
    let mut series = Series::new(range.collect());
    series.push("memory_saliency", scores)?;
    write_series(&series, a.out.join("series.csv"))?;
    write_run_json(&a.out, "memory", a)?;
    Ok(EXIT_OK)
}

fn jacobian(a: &JacobianArgs) -> Result<i32> {
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {}", a.epsilon)));
    }
    let overlay = a.overlay.config();
    overlay.validate()?;
    let workers = Workers::new(a.range.workers)?;
    let (net, episode) = load_inputs(&a.input)?;
    let range = timesteps(&a.range, episode.len())?;
    let cache = net.rollout(&episode)?;
    let ex = Explainer::new(&net, &episode, &cache)?;

    let heads = a.head.heads();
    let maps = heads
        .iter()
        .map(|&h| {
            range
                .clone()
                .map(|t| ex.jacobian_saliency(t, h, a.epsilon, &workers))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    create_dir(&a.out)?;
    HeadMaps {
        heads,
        maps,
        first_t: range.start,
    }
    .write(&a.out, &episode, &overlay)?;
    write_run_json(&a.out, "jacobian", a)?;
    Ok(EXIT_OK)
}

fn preprocess_cmd(a: &PreprocessArgs) -> Result<i32> {
    let cfg = PreprocessConfig {
        crop_top: a.crop_top,
        crop_left: a.crop_left,
        ..PreprocessConfig::default()
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.input)
        .map_err(|e| Error::load(&a.input, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::load(&a.input, "no PNG frames found"));
    }
    let frames = paths
        .iter()
        .map(|p| {
            let raw = load_raw_frame(p)?;
            // geometry problems are properties of the input, not of the flags
            preprocess(&raw, &cfg).map_err(|e| match e {
                Error::Shape(msg) => Error::load(p, msg),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let episode = Episode::new(frames, format!("preprocess:{}", a.input.display()))?;
    save_episode(&episode, &a.out)?;
    Ok(EXIT_OK)
}

fn synth_episode_cmd(a: &SynthEpisodeArgs) -> Result<i32> {
    let mut episode = synth_episode(a.seed, a.timesteps, a.pattern)?;
    if let Some(rows) = a.hint_rows {
        let actions = random_actions(a.seed, a.timesteps, a.n_actions)?;
        episode = episode.with_hints(&actions, a.n_actions, rows)?;
    }
    save_episode(&episode, &a.out)?;
    Ok(EXIT_OK)
}

fn synth_weights_cmd(a: &SynthWeightsArgs) -> Result<i32> {
    let config = NetworkConfig::new(a.n_actions, a.activation)?;
    let net = match a.fixture {
        Fixture::Random => synth_weights(a.seed, config, a.scale)?,
        Fixture::Zero => synth_weights(a.seed, config, 0.0)?,
        Fixture::LinearReader => LinearReader::new(a.n_actions)?.net,
        Fixture::HintReader => {
            if a.n_actions != HintReader::N_ACTIONS {
                return Err(Error::Config(format!(
                    "the hint-reader fixture has {} actions, got --n-actions {}",
                    HintReader::N_ACTIONS,
                    a.n_actions
                )));
            }
            HintReader::new(a.hint_gain)?.net
        }
        Fixture::Integrator => Integrator::new(a.n_actions)?.net,
        Fixture::Memoryless => memoryless(a.seed, a.n_actions, a.scale)?,
    };
    save_weights(&net, &a.out)?;
    Ok(EXIT_OK)
}

fn read_maps_dir(dir: &Path, heads: &[Head]) -> Result<Vec<Vec<SaliencyMap>>> {
    let mut sidecars: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::load(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    sidecars.sort();
    let mut maps = vec![Vec::new(); heads.len()];
    for path in sidecars {
        let m = read_map(&path)?;
        if let Some(k) = heads.iter().position(|h| *h == m.head) {
            maps[k].push(m);
        }
    }
    for (head, list) in heads.iter().zip(&mut maps) {
        if list.is_empty() {
            return Err(Error::load(dir, format!("no {head} maps found")));
        }
        list.sort_by_key(|m| m.t);
    }
    Ok(maps)
}

fn stats(a: &StatsArgs) -> Result<i32> {
    let heads = a.head.heads();
    let maps = match (&a.maps, &a.weights, &a.episode) {
        (Some(dir), _, _) => read_maps_dir(dir, &heads)?,
        (None, Some(weights), Some(episode)) => {
            let cfg = a.perturb.config();
            cfg.validate()?;
            let workers = Workers::new(a.range.workers)?;
            let net = load_weights(weights)?;
            let episode = load_episode(episode)?;
            let range = timesteps(&a.range, episode.len())?;
            let cache = net.rollout(&episode)?;
            let ex = Explainer::new(&net, &episode, &cache)?;
            let mut maps = vec![Vec::new(); heads.len()];
            for t in range {
                let (actor, critic) = ex.saliency_maps(t, &cfg, &workers)?;
                for m in [actor, critic] {
                    if let Some(k) = heads.iter().position(|h| *h == m.head) {
                        maps[k].push(m);
                    }
                }
            }
            maps
        }
        _ => {
            return Err(Error::Config(
                "stats needs either --maps or both --weights and --episode".into(),
            ))
        }
    };
    let ts: Vec<usize> = maps[0].iter().map(|m| m.t).collect();
    if maps.iter().any(|list| list.iter().map(|m| m.t).ne(ts.iter().copied())) {
        return Err(Error::Config("actor and critic maps cover different timesteps".into()));
    }

    let mut series = Series::new(ts);
    for (head, list) in heads.iter().zip(&maps) {
        series.push(format!("{head}_mass"), list.iter().map(|m| region_mass(m, &a.region)).collect())?;
    }
    create_dir(&a.out)?;
    write_series(&series, a.out.join("region_mass.csv"))?;
    write_run_json(&a.out, "stats", a)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::HeadChoice;

    #[test]
    fn timestep_ranges() {
        let r = |s, e| RangeArgs {
            t_start: s,
            t_end: e,
            workers: 1,
        };
        assert_eq!(timesteps(&r(0, None), 5).unwrap(), 0..5);
        assert_eq!(timesteps(&r(2, Some(4)), 5).unwrap(), 2..4);
        assert!(timesteps(&r(3, Some(3)), 5).is_err());
        assert!(timesteps(&r(0, Some(6)), 5).is_err());
        assert!(timesteps(&r(5, None), 5).is_err());
    }

    #[test]
    fn head_choice_order() {
        assert_eq!(HeadChoice::Both.heads(), vec![Head::Actor, Head::Critic]);
    }
}
