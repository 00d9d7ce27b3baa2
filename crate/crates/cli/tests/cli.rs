//! Behaviour of the `nsteer` binary: exit codes, error lines and the files
//! each subcommand writes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsteer_core::data::load_dataset;
use sha2::{Digest, Sha256};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// A config for a small scene with a quick training schedule.
    fn write_config(&self, name: &str, extra: &str) -> PathBuf {
        let text = format!(
            "# small scene\n\
             dataset = {data}\n\
             output_dir = {out}\n\
             checkpoint = {out}/model.ckpt\n\
             scene.num_azimuths = 8\n\
             scene.num_elevations = 5\n\
             scene.num_bins = 17\n\
             scene.num_mics = 2\n\
             scene.tau = 5e-4\n\
             model.hidden_main = 16, 16\n\
             model.hidden_phase = 16\n\
             model.omega0 = 3\n\
             train.epochs_max = 4\n\
             train.batch_size = 4\n\
             {extra}\n",
            data = self.path("grid.nsv").display(),
            out = self.path("out").display(),
        );
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }
}

fn nsteer(args: &[&str], config: &Path) -> Output {
    nsteer_threads(args, config, 0)
}

fn nsteer_threads(args: &[&str], config: &Path, threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsteer"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("NSTEER_THREADS", threads.to_string())
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Failures exit non-zero with exactly one `error: <kind>: <message>` line.
fn failure(out: &Output) -> String {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with("error: "), "stderr: {err}");
    err
}

fn sha256(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn synth_default_scene_has_desk_dimensions() {
    let ws = Workspace::new();
    let cfg = ws.path("default.cfg");
    std::fs::write(&cfg, format!("dataset = {}\n", ws.path("grid.nsv").display())).unwrap();
    ok(&nsteer(&["synth"], &cfg));
    let set = load_dataset(ws.path("grid.nsv")).unwrap();
    assert_eq!(
        (
            set.num_azimuths(),
            set.num_elevations(),
            set.num_channels(),
            set.axis.num_bins
        ),
        (24, 9, 4, 65)
    );
}

#[test]
fn synth_is_reproducible_and_seed_sensitive() {
    let ws = Workspace::new();
    let cfg = ws.write_config("run.cfg", "scene.noise_std = 0.01");
    ok(&nsteer(&["synth"], &cfg));
    let first = sha256(&ws.path("grid.nsv"));
    ok(&nsteer(&["synth"], &cfg));
    assert_eq!(sha256(&ws.path("grid.nsv")), first);
    ok(&nsteer(&["synth", "--set", "scene.seed=9"], &cfg));
    assert_ne!(sha256(&ws.path("grid.nsv")), first);
}

#[test]
fn unknown_key_is_reported_with_line_number() {
    let ws = Workspace::new();
    let cfg = ws.write_config("bad.cfg", "train.epochs = 3");
    let line = std::fs::read_to_string(&cfg)
        .unwrap()
        .lines()
        .position(|l| l.starts_with("train.epochs ="))
        .unwrap()
        + 1;
    let err = failure(&nsteer(&["synth"], &cfg));
    assert!(err.starts_with("error: config: "), "{err}");
    assert!(err.contains(&format!("bad.cfg:{line}")), "{err}");
    assert!(err.contains("train.epochs"), "{err}");
    let err = failure(&nsteer(
        &["synth", "--set", "scene.nope=1"],
        &ws.write_config("ok.cfg", ""),
    ));
    assert!(err.contains("--set scene.nope"), "{err}");
}

#[test]
fn missing_dataset_is_an_io_error() {
    let ws = Workspace::new();
    let cfg = ws.write_config("run.cfg", "");
    let err = failure(&nsteer(&["train"], &cfg));
    assert!(err.starts_with("error: io: "), "{err}");
}

#[test]
fn train_writes_checkpoint_and_log_in_both_modes() {
    for mode in ["df", "cf"] {
        let ws = Workspace::new();
        let cfg = ws.write_config("run.cfg", &format!("model.freq_mode = {mode}"));
        ok(&nsteer(&["synth"], &cfg));
        ok(&nsteer(&["train"], &cfg));
        assert!(ws.path("out/model.ckpt").exists());
        let log = std::fs::read_to_string(ws.path("out/train_log.csv")).unwrap();
        let mut lines = log.lines();
        assert!(lines.next().unwrap().starts_with("epoch,lr,"));
        assert_eq!(lines.count(), 4);
    }
}

#[test]
fn resume_reproduces_uninterrupted_training() {
    let ws = Workspace::new();
    let cfg = ws.write_config("run.cfg", "");
    ok(&nsteer(&["synth"], &cfg));
    let full = format!("checkpoint={}", ws.path("full.ckpt").display());
    let part = format!("checkpoint={}", ws.path("part.ckpt").display());
    ok(&nsteer(&["train", "--set", &full], &cfg));
    ok(&nsteer(&["train", "--set", "train.epochs_max=2", "--set", &part], &cfg));
    ok(&nsteer(&["train", "--set", "resume=true", "--set", &part], &cfg));
    assert_eq!(sha256(&ws.path("full.ckpt")), sha256(&ws.path("part.ckpt")));
}

#[test]
fn thread_count_does_not_change_the_checkpoint() {
    let ws = Workspace::new();
    let cfg = ws.write_config("run.cfg", "model.freq_mode = cf\ntrain.batch_size = 20");
    ok(&nsteer(&["synth"], &cfg));
    let mut digests = Vec::new();
    for threads in [0, 3] {
        let ckpt = format!("checkpoint={}", ws.path(&format!("t{threads}.ckpt")).display());
        ok(&nsteer_threads(&["train", "--set", &ckpt], &cfg, threads));
        digests.push(sha256(&ws.path(&format!("t{threads}.ckpt"))));
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn eval_oracle_matches_dataset_and_baselines_need_no_checkpoint() {
    let ws = Workspace::new();
    let cfg = ws.write_config("run.cfg", "eval.models = oracle, scf, nearest");
    ok(&nsteer(&["synth"], &cfg));
    let stdout = ok(&nsteer(&["eval"], &cfg));
    assert!(stdout.contains("oracle"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/metrics.json")).unwrap()).unwrap();
    let reports = json.as_array().unwrap();
    assert_eq!(reports.len(), 6);
    for r in reports {
        let (model, rmse) = (r["model"].as_str().unwrap(), r["rmse_time"].as_f64().unwrap());
        if model == "oracle" {
            assert!(rmse < 1e-6, "oracle rmse {rmse}");
        } else if model == "nearest" && r["split"] == "held_out" {
            assert!(rmse > 0.0);
        }
    }
    let csv = std::fs::read_to_string(ws.path("out/metrics.csv")).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn eval_rejects_mismatched_protocol_and_model() {
    let ws = Workspace::new();
    let cfg = ws.write_config("run.cfg", "");
    ok(&nsteer(&["synth"], &cfg));
    // random-fraction protocol on a regular split
    let err = failure(&nsteer(
        &[
            "eval",
            "--set",
            "eval.protocol=random_fraction",
            "--set",
            "eval.models=scf",
        ],
        &cfg,
    ));
    assert!(err.contains("random"), "{err}");
    // checkpoint requested but none exists yet
    let err = failure(&nsteer(&["eval", "--set", "eval.models=checkpoint"], &cfg));
    assert!(err.starts_with("error: io: "), "{err}");
    // super-resolution needs a continuous-frequency model
    ok(&nsteer(&["train"], &cfg));
    let err = failure(&nsteer(
        &[
            "eval",
            "--set",
            "eval.protocol=freq_superres",
            "--set",
            "eval.models=checkpoint",
        ],
        &cfg,
    ));
    assert!(err.contains("continuous"), "{err}");
}

#[test]
fn interp_queries_grid_nodes_fine_axes_and_writes_wavs() {
    let ws = Workspace::new();
    let cfg = ws.write_config("run.cfg", "model.freq_mode = cf");
    ok(&nsteer(&["synth"], &cfg));
    ok(&nsteer(&["train"], &cfg));

    let stdout = ok(&nsteer(&["interp", "--set", "interp.grid=8x5"], &cfg));
    assert!(stdout.contains("residual"), "{stdout}");

    ok(&nsteer(
        &[
            "interp",
            "--set",
            "interp.doas=10,5;200,-30",
            "--set",
            "interp.num_bins=33",
            "--set",
            "interp.wav=true",
        ],
        &cfg,
    ));
    let csv = std::fs::read_to_string(ws.path("out/interp.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "doa,azimuth_deg,elevation_deg,channel,f_hz,re,im"
    );
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 33);
    for doa in 0..2 {
        for ch in 0..2 {
            let r = hound::WavReader::open(ws.path(&format!("out/wav/doa{doa:04}_ch{ch}.wav"))).unwrap();
            let spec = r.spec();
            assert_eq!(spec.sample_rate, 16000);
            assert_eq!(spec.sample_format, hound::SampleFormat::Float);
            assert_eq!(spec.bits_per_sample, 32);
            assert_eq!(r.len(), 64);
        }
    }
}

#[test]
fn export_sweep_rows_are_deterministic() {
    let ws = Workspace::new();
    let cfg = ws.write_config(
        "run.cfg",
        "export.fractions = 0.25, 0.5\nexport.seeds = 0\ntrain.epochs_max = 2\ncheckpoint =",
    );
    ok(&nsteer(&["synth"], &cfg));
    ok(&nsteer(&["export"], &cfg));
    let first = std::fs::read_to_string(ws.path("out/fraction_sweep.csv")).unwrap();
    let rows: Vec<&str> = first.lines().skip(1).collect();
    // 2 fractions × 1 seed × 2 models × 3 metrics
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.split(',').count() == 5));
    ok(&nsteer(&["export"], &cfg));
    assert_eq!(
        std::fs::read_to_string(ws.path("out/fraction_sweep.csv")).unwrap(),
        first
    );
    assert!(!ws.path("out/superres_lsd.csv").exists());

    let err = failure(&nsteer(&["export", "--set", "export.fractions="], &cfg));
    assert!(err.contains("empty"), "{err}");
}

#[test]
fn export_reports_super_resolution_for_continuous_checkpoints() {
    let ws = Workspace::new();
    let cfg = ws.write_config(
        "run.cfg",
        "model.freq_mode = cf\nexport.fractions = 0.5\nexport.seeds = 0\nexport.superres_bins = 17, 33",
    );
    ok(&nsteer(&["synth"], &cfg));
    ok(&nsteer(&["train"], &cfg));
    ok(&nsteer(&["export"], &cfg));
    let csv = std::fs::read_to_string(ws.path("out/superres_lsd.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "num_bins,split,lsd_db,lsd_edge_db,rmse_time");
    let bins: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert!(bins.contains(&"17") && bins.contains(&"33"), "{csv}");
}
