use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use atari_saliency::fixtures::LinearReader;
use atari_saliency::saliency::read_map;

const BIN: &str = env!("CARGO_BIN_EXE_atari-saliency");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn ok(args: &[&str]) {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
}

/// Column `name` of a CSV file as floats.
fn column(file: impl AsRef<Path>, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(file).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).expect("column present");
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn fixture(dir: &Path, fixture: &str, timesteps: usize) -> (String, String) {
    let (w, e) = (path(dir, "w"), path(dir, "e"));
    ok(&["synth-weights", "--fixture", fixture, "--seed", "3", "--out", &w]);
    ok(&["synth-episode", "--seed", "5", "--timesteps", &timesteps.to_string(), "--out", &e]);
    (w, e)
}

#[test]
fn missing_weights_is_a_load_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, e) = fixture(tmp.path(), "random", 2);
    let missing = path(tmp.path(), "no-such-weights");
    let out = path(tmp.path(), "out");
    let o = run(&["saliency", "--weights", &missing, "--episode", &e, "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no-such-weights"), "{}", stderr(&o));
    assert!(!Path::new(&out).exists());
}

#[test]
fn config_errors_exit_2_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, e) = fixture(tmp.path(), "random", 2);
    let out = path(tmp.path(), "out");
    for bad in [
        vec!["--stride", "0"],
        vec!["--mask-var", "-1"],
        vec!["--t-start", "5"],
        vec!["--norm", "loudest"],
    ] {
        let mut args = vec!["saliency", "--weights", &w, "--episode", &e, "--out", &out];
        args.extend(bad.iter());
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{bad:?}: {}", stderr(&o));
        assert!(!Path::new(&out).exists(), "{bad:?} left output behind");
    }
}

#[test]
fn help_lists_flags_with_defaults() {
    let o = run(&["saliency", "--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in [
        "--stride",
        "[default: 5]",
        "--blur-sigma",
        "[default: 3]",
        "--mask-var",
        "[default: 25]",
        "--head",
        "--oracle-check",
        "--norm",
        "--workers",
    ] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
    let o = run(&["memory", "--help"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[default: 0.99]"));
    let o = run(&["jacobian", "--help"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[default: 0.001]"));
}

#[test]
fn memoryless_fixture_gives_all_zero_memory_series() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, e) = fixture(tmp.path(), "memoryless", 5);
    let out = path(tmp.path(), "out");
    ok(&["memory", "--weights", &w, "--episode", &e, "--out", &out, "--perturb-hidden"]);
    let scores = column(Path::new(&out).join("series.csv"), "memory_saliency");
    assert_eq!(scores.len(), 5);
    assert!(scores.iter().all(|&s| s == 0.0));
    assert!(Path::new(&out).join("run.json").exists());
}

#[test]
fn full_region_holds_all_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, e) = fixture(tmp.path(), "random", 3);
    let out = path(tmp.path(), "stats");
    ok(&["stats", "--weights", &w, "--episode", &e, "--stride", "10", "--out", &out]);
    for head in ["actor", "critic"] {
        let mass = column(Path::new(&out).join("region_mass.csv"), &format!("{head}_mass"));
        assert_eq!(mass.len(), 3);
        assert!(mass.iter().all(|&m| (m - 1.0).abs() < 1e-6), "{head}: {mass:?}");
    }
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, e) = fixture(tmp.path(), "random", 2);
    let cfg = tmp.path().join("run.conf");
    std::fs::write(&cfg, "# coarse grid\nstride = 20\nhead = actor\nmask-var = 16\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let a = path(tmp.path(), "a");
    ok(&["saliency", "--config", cfg, "--weights", &w, "--episode", &e, "--out", &a]);
    let b = path(tmp.path(), "b");
    ok(&["saliency", "--config", cfg, "--weights", &w, "--episode", &e, "--out", &b, "--stride", "40"]);

    let run_json = |dir: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(Path::new(dir).join("run.json")).unwrap()).unwrap()
    };
    let (ra, rb) = (run_json(&a), run_json(&b));
    assert_eq!(ra["config"]["perturb"]["stride"], 20);
    assert_eq!(rb["config"]["perturb"]["stride"], 40);
    assert_eq!(rb["config"]["perturb"]["mask_var"], 16.0);
    // defaults fill whatever neither source sets
    assert_eq!(rb["config"]["perturb"]["blur_sigma"], 3.0);
    let map = read_map(Path::new(&b).join("maps").join("t000001_actor.json")).unwrap();
    assert_eq!(map.grid_scores.shape(), &[2, 2]);
    assert!(!Path::new(&b).join("maps").join("t000001_critic.json").exists());

    let bad = tmp.path().join("bad.conf");
    std::fs::write(&bad, "strid = 3\n").unwrap();
    let c = path(tmp.path(), "c");
    let o = run(&["saliency", "--config", bad.to_str().unwrap(), "--weights", &w, "--episode", &e, "--out", &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.conf:1"), "{}", stderr(&o));
    assert!(!Path::new(&c).exists());
}

#[test]
fn saliency_run_writes_documented_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, e) = fixture(tmp.path(), "random", 4);
    let out = PathBuf::from(path(tmp.path(), "out"));
    let o = out.to_str().unwrap();
    ok(&["saliency", "--weights", &w, "--episode", &e, "--out", o, "--stride", "10", "--t-start", "1", "--t-end", "3", "--upscale", "2"]);
    for t in 1..3 {
        for head in ["actor", "critic"] {
            let m = read_map(out.join("maps").join(format!("t{t:06}_{head}.json"))).unwrap();
            assert_eq!((m.t, m.scores.shape()), (t, &[80usize, 80][..]));
        }
        let img = image::open(out.join("overlays").join(format!("overlay_{t:06}.png"))).unwrap();
        assert_eq!((img.width(), img.height()), (160, 160));
    }
    assert!(!out.join("overlays").join("overlay_000000.png").exists());
    assert_eq!(column(out.join("series.csv"), "t"), vec![1.0, 2.0]);
    assert_eq!(column(out.join("series.csv"), "critic_max").len(), 2);
    assert!(out.join("run.json").exists());
}

#[test]
fn stride_one_oracle_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, e) = fixture(tmp.path(), "random", 2);
    let out = path(tmp.path(), "out");
    let o = run(&[
        "saliency", "--weights", &w, "--episode", &e, "--out", &out, "--stride", "1", "--oracle-check", "--t-start", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn jacobian_of_linear_reader_matches_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, e) = fixture(tmp.path(), "linear-reader", 1);
    let out = path(tmp.path(), "out");
    ok(&["jacobian", "--weights", &w, "--episode", &e, "--out", &out, "--head", "critic"]);
    let map = read_map(Path::new(&out).join("maps").join("t000000_critic.json")).unwrap();
    let want = LinearReader::new(4).unwrap().pixel_weights();
    for (g, w) in map.scores.data().iter().zip(want.data()) {
        assert!((g - w.abs()).abs() <= 1e-4, "{g} vs {}", w.abs());
    }
}

#[test]
fn preprocess_turns_pngs_into_an_episode() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    for k in 0..3u8 {
        let img = image::RgbImage::from_fn(160, 210, |x, _| image::Rgb([k * 60, (x % 256) as u8, 0]));
        img.save(raw.join(format!("frame_{k:03}.png"))).unwrap();
    }
    let out = path(tmp.path(), "ep");
    ok(&["preprocess", "--input", raw.to_str().unwrap(), "--out", &out]);
    let ep = atari_saliency::episode::load_episode(&out).unwrap();
    assert_eq!(ep.len(), 3);

    let o = run(&["preprocess", "--input", &path(tmp.path(), "nothing"), "--out", &path(tmp.path(), "x")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub").to_str().unwrap().to_string();
    let o = run(&["synth-episode", "--timesteps", "2", "--out", &out]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
