use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spokenet::io;
use spokenet::ExperimentConfig;

const TINY: &str = "\
seed = 5

[phantom]
fov = 64.0
cardiac_period = 0.05
blob = 1.0, 0.0 | 0.0 | 0.0 | 12.0
blob = 0.8, 0.0 | -8.0, 2.0, 0.0 | 4.0, 0.0, 1.0 | 8.0, 1.5, 0.0

[grid]
size = 16

[trajectory]
spokes = 40
samples = 16

[coils]
count = 2

[grasp]
iterations = 3
spokes_per_bin = 10
lowres_fraction = 0.5

[recon]
rank = 2
init_steps = 5
finetune_iters = 3
freeze_temporal_iters = 1
frame_spokes_per_bin = 10
spatial_log2_table_size = 12
temporal_log2_table_size = 10

[metrics]
patch_size = 3
noise_center = 20.0, -24.0
profile_angles_deg = 0.0, 90.0
profile_length = 12.0
profile_samples = 13
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spokenet"));
    c.env_remove("SPOKENET_CONFIG");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().expect("spawn spokenet");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.ini");
    std::fs::write(&cfg, format!("{TINY}{extra}")).unwrap();
    (dir, cfg)
}

fn ok(args: &[&str], dir: &Path) {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn default_config_simulates_800_spokes_of_6_coils() {
    let cfg = ExperimentConfig::default();
    cfg.validate().unwrap();
    let sim = spokenet::pipeline::simulate(&cfg).unwrap();
    assert_eq!((sim.spokes.n_spokes(), sim.spokes.n_coils, sim.spokes.n_samples()), (800, 6, 64));
    assert_eq!(sim.spokes.samples.len(), 800 * 6 * 64);
    assert_eq!(sim.truth.n_frames(), 40);
    assert!(sim.noise_sigma > 0.0);
}

#[test]
fn noiseless_simulation_is_reproducible_and_noise_keeps_geometry() {
    let (dir, cfg) = setup("\n[noise]\nsigma = 0.0\n");
    let c = cfg.to_str().unwrap();
    ok(&["simulate", "--config", c, "--out", "a"], dir.path());
    ok(&["simulate", "--config", c, "--out", "b"], dir.path());
    for f in ["spokes.spkt", "truth.spkt"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let (dir2, noisy) = setup("\n[noise]\nsigma = 0.01\n");
    ok(&["simulate", "--config", noisy.to_str().unwrap(), "--out", "n"], dir2.path());
    let clean = io::read_spokes(&dir.path().join("a/spokes.spkt")).unwrap();
    let noisy = io::read_spokes(&dir2.path().join("n/spokes.spkt")).unwrap();
    assert_eq!(clean.geometry, noisy.geometry);
    assert_ne!(clean.samples, noisy.samples);
    let written = ExperimentConfig::load(&dir.path().join("a/config.ini")).unwrap();
    assert_eq!(written.phantom.blobs.len(), 2);
    assert_eq!(written.n_spokes, 40);
}

#[test]
fn reconstruct_is_deterministic_and_writes_every_output() {
    let (dir, cfg) = setup("");
    let c = cfg.to_str().unwrap();
    ok(&["simulate", "--config", c, "--out", "run"], dir.path());
    ok(&["reconstruct", "--config", c, "--out", "run", "--dump-stages"], dir.path());
    let first = std::fs::read(dir.path().join("run/checkpoint.spkt")).unwrap();
    let image = io::read_dynamic(&dir.path().join("run/recon.spkt")).unwrap();
    assert_eq!(image.n_frames(), 4);
    for f in ["stage_grasp_lowres.spkt", "stage_svd.spkt", "stage_targets.spkt", "train_log.csv"] {
        assert!(dir.path().join("run").join(f).exists(), "{f} missing");
    }
    let log = std::fs::read_to_string(dir.path().join("run/train_log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "iteration,phase,loss,elapsed_s");
    assert_eq!(lines.len(), 1 + 5 + 5 + 3);
    assert!(lines[11].contains("finetune_frozen") && lines[12].contains(",finetune,"));

    ok(&["reconstruct", "--config", c, "--out", "again", "--spokes", "run/spokes.spkt", "--threads", "1"], dir.path());
    assert_eq!(std::fs::read(dir.path().join("again/checkpoint.spkt")).unwrap(), first);
    let (s, t, window) = io::read_checkpoint(&dir.path().join("again/checkpoint.spkt")).unwrap();
    assert_eq!((s.rank, t.rank), (2, 2));
    assert!((window - 40.0 * 2.3e-3).abs() < 1e-15);

    ok(&["reconstruct", "--config", c, "--out", "ablation", "--spokes", "run/spokes.spkt", "--skip-init", "--dump-stages"], dir.path());
    assert!(!dir.path().join("ablation/stage_svd.spkt").exists());
    let log = std::fs::read_to_string(dir.path().join("ablation/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 3);
    assert_ne!(std::fs::read(dir.path().join("ablation/checkpoint.spkt")).unwrap(), first);
}

#[test]
fn baselines_follow_the_binning() {
    let (dir, cfg) = setup("");
    let c = cfg.to_str().unwrap();
    ok(&["simulate", "--config", c, "--out", "."], dir.path());
    ok(&["baseline", "--config", c, "--out", ".", "--method", "nufft", "--spokes-per-bin", "10"], dir.path());
    ok(&["baseline", "--config", c, "--out", ".", "--method", "grasp", "--spokes-per-bin", "20"], dir.path());
    assert_eq!(io::read_dynamic(&dir.path().join("baseline_nufft_10.spkt")).unwrap().n_frames(), 4);
    assert_eq!(io::read_dynamic(&dir.path().join("baseline_grasp_20.spkt")).unwrap().n_frames(), 2);
    let out = run(&["baseline", "--config", c, "--method", "fft"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_reports_zero_error_for_the_truth_itself() {
    let (dir, cfg) = setup("");
    let c = cfg.to_str().unwrap();
    ok(&["simulate", "--config", c, "--out", "."], dir.path());
    ok(&["evaluate", "--config", c, "--recon", "truth.spkt", "--truth", "truth.spkt", "--output", "m.csv"], dir.path());
    let rows = io::read_metrics(&dir.path().join("m.csv")).unwrap();
    let nrmse = rows.iter().find(|r| r.metric == "nrmse").expect("nrmse row");
    assert_eq!(nrmse.value, 0.0);
    assert!(rows.iter().any(|r| r.metric == "snr_db" && r.phase == "systole"));
    let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("metric,phase,profile,value"));

    ok(&["evaluate", "--config", c, "--recon", "truth.spkt", "--output", "free.csv"], dir.path());
    let rows = io::read_metrics(&dir.path().join("free.csv")).unwrap();
    assert!(rows.iter().all(|r| r.metric != "nrmse" && r.metric != "xt_rmse"));
    assert!(!rows.is_empty());
    io::write_metrics(&dir.path().join("again.csv"), &rows).unwrap();
    assert_eq!(std::fs::read(dir.path().join("again.csv")).unwrap(), std::fs::read(dir.path().join("free.csv")).unwrap());

    ok(&["baseline", "--config", c, "--out", ".", "--method", "nufft", "--spokes-per-bin", "20"], dir.path());
    ok(&["evaluate", "--config", c, "--recon", "baseline_nufft_20.spkt", "--truth", "truth.spkt", "--output", "b.csv"], dir.path());
    let rows = io::read_metrics(&dir.path().join("b.csv")).unwrap();
    assert!(rows.iter().any(|r| r.metric == "nrmse" && r.value > 0.0));
}

#[test]
fn export_writes_viewable_files() {
    let (dir, cfg) = setup("");
    let c = cfg.to_str().unwrap();
    ok(&["simulate", "--config", c, "--out", "."], dir.path());
    ok(&["export", "--image", "truth.spkt", "--frame", "1", "--out", "img"], dir.path());
    let pgm = std::fs::read(dir.path().join("img/truth_frame001.pgm")).unwrap();
    assert_eq!(pgm.len(), "P5\n16 16\n255\n".len() + 16 * 16);
    assert_eq!(*pgm.iter().skip(13).max().unwrap(), 255);
    ok(&["export", "--image", "truth.spkt", "--format", "png", "--window", "0,0.5", "--out", "img"], dir.path());
    for f in 0..4 {
        assert!(dir.path().join(format!("img/truth_frame{f:03}.png")).exists());
    }
    ok(&["export", "--image", "truth.spkt", "--format", "csv", "--xt-row", "8", "--out", "img"], dir.path());
    let csv = std::fs::read_to_string(dir.path().join("img/truth_xt_row8.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 16);
    let out = run(&["export", "--image", "truth.spkt", "--frame", "9", "--out", "img"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_separate_config_and_numeric_failures() {
    let (dir, cfg) = setup("\n[grid]\nsize = 3\n");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let (dir, _) = setup("");
    std::fs::write(dir.path().join("bad.ini"), "[recon]\nrank = two\n").unwrap();
    let out = run(&["simulate", "--config", "bad.ini"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2") && msg.contains("rank"), "{msg}");
    assert_eq!(run(&["simulate", "--config", "missing.ini"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));

    let (dir, cfg) = setup("\n[recon]\nfinetune_lr = 1e300\n");
    let c = cfg.to_str().unwrap();
    ok(&["simulate", "--config", c, "--out", "."], dir.path());
    let out = run(&["reconstruct", "--config", c, "--out", ".", "--skip-init"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fine_tune"));
}

#[test]
fn environment_variable_names_the_config() {
    let (dir, cfg) = setup("");
    let out = bin()
        .args(["simulate", "--out", "env"])
        .env("SPOKENET_CONFIG", &cfg)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let spokes = io::read_spokes(&dir.path().join("env/spokes.spkt")).unwrap();
    assert_eq!(spokes.n_spokes(), 40);
    let out = bin()
        .args(["simulate", "--out", "flag", "--config", cfg.to_str().unwrap()])
        .env("SPOKENET_CONFIG", dir.path().join("nonexistent.ini"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "--config must take precedence over the environment");
}
