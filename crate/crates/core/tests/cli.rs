use std::path::{Path, PathBuf};

use clap::Parser;
use pinnbasis::cli::{run, sha256_hex, Cli, Command, RunArgs};
use pinnbasis::network::FeatureNetwork;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn args(config: PathBuf, out: &Path) -> RunArgs {
    RunArgs {
        config,
        network: None,
        out: Some(out.to_path_buf()),
        seed: None,
        oracle_legendre: None,
        r_list: None,
    }
}

const SMALL_TRAIN: &str = "problem = \"poisson_1d\"\n\
    [network]\ndims = [1, 8, 8, 1]\n\
    [train]\nepochs = 20\nn_collocation = 64\nseed = 5\n\
    [quadrature]\nbuild_order = 40\nfine_order = 80\n";

#[test]
fn zero_epochs_save_the_initial_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &SMALL_TRAIN.replace("epochs = 20", "epochs = 0"));
    let report = run(&Cli { command: Command::Train(args(cfg, dir.path())) }).unwrap();
    let saved = FeatureNetwork::load(&dir.path().join("network_poisson_1d_1-8-8-1.json")).unwrap();
    assert_eq!(saved.to_json(), FeatureNetwork::new(&[1, 8, 8, 1], 5).unwrap().to_json());
    assert_eq!(report.manifest.seed, 5);
    assert_eq!(report.manifest.network_sha256.as_deref(), Some(saved.fingerprint().as_str()));
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let cfg = write_config(dir.path(), "c.toml", SMALL_TRAIN);
        run(&Cli { command: Command::Train(args(cfg, dir.path())) }).unwrap();
    }
    for name in ["network_poisson_1d_1-8-8-1.json", "train_poisson_1d_1-8-8-1.csv"] {
        let x = std::fs::read_to_string(a.path().join(name)).unwrap();
        let y = std::fs::read_to_string(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    // the manifests differ only in the recorded output directory
    let manifest = |dir: &Path| {
        let text = std::fs::read_to_string(dir.join("manifest_train_poisson_1d_1-8-8-1.json")).unwrap();
        let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
        let obj = json.as_object_mut().unwrap();
        obj.remove("config");
        obj.remove("config_sha256");
        json
    };
    assert_eq!(manifest(a.path()), manifest(b.path()));
}

#[test]
fn manifest_records_the_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_TRAIN);
    let mut a = args(cfg, dir.path());
    a.seed = Some(9);
    let report = run(&Cli { command: Command::Train(a) }).unwrap();
    let m = &report.manifest;
    assert_eq!(m.seed, 9);
    assert!(m.config.contains("seed = 9"));
    assert_eq!(m.config_sha256, sha256_hex(m.config.as_bytes()));
    let text = std::fs::read_to_string(&report.manifest_path).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["command"], "train");
    assert_eq!(json["problem"], "poisson_1d");
    // the recorded config reproduces the run on its own
    let replay = write_config(dir.path(), "replay.toml", &m.config);
    let out2 = dir.path().join("replay");
    let again = run(&Cli { command: Command::Train(args(replay, &out2)) }).unwrap();
    assert_eq!(again.manifest.network_sha256, m.network_sha256);
}

#[test]
fn train_then_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_TRAIN);
    run(&Cli { command: Command::Train(args(cfg.clone(), dir.path())) }).unwrap();
    let mut a = args(cfg, dir.path());
    a.network = Some(dir.path().join("network_poisson_1d_1-8-8-1.json"));
    a.r_list = Some("0:4:2".into());
    let report = run(&Cli { command: Command::Sweep(a) }).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("sweep_poisson_1d_1-8-8-1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(report.manifest.outputs.iter().any(|o| o.starts_with("basis_")));
    assert!(report.lines.iter().any(|l| l.contains("selected r*")));
}

#[test]
fn oracle_runs_every_problem_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("poisson_1d", "", "oracle_poisson_1d_legendre16.csv"),
        ("heat_1d", "[time]\ndt = 0.05\nt_final = 0.5\n", "oracle_heat_1d_legendre10.csv"),
        ("burgers_steady", "[time]\ndt = 0.05\nt_final = 5.0\n", "oracle_burgers_steady_legendre10.csv"),
    ];
    for (i, (problem, extra, expected)) in cases.iter().enumerate() {
        let text = format!("problem = \"{problem}\"\n[quadrature]\nbuild_order = 40\nfine_order = 80\n{extra}");
        let cfg = write_config(dir.path(), &format!("c{i}.toml"), &text);
        let mut a = args(cfg, dir.path());
        if *problem != "poisson_1d" {
            a.oracle_legendre = Some(10);
            a.r_list = Some("10:10".into());
        }
        let report = run(&Cli { command: Command::Oracle(a) }).unwrap();
        assert!(dir.path().join(expected).exists(), "{expected} missing; outputs {:?}", report.manifest.outputs);
    }
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "problem = \"poisson_1d\"\nunknown = 1\n");
    assert!(run(&Cli { command: Command::Train(args(bad, dir.path())) }).is_err());
    let cfg = write_config(dir.path(), "c.toml", SMALL_TRAIN);
    assert!(run(&Cli { command: Command::Sweep(args(cfg.clone(), dir.path())) }).is_err());
    let heat = write_config(dir.path(), "h.toml", "problem = \"heat_1d\"\n");
    assert!(run(&Cli { command: Command::Train(args(heat, dir.path())) }).is_err());
    assert!(run(&Cli { command: Command::Train(args(dir.path().join("missing.toml"), dir.path())) }).is_err());
}

#[test]
fn command_line_parsing() {
    let cli = Cli::try_parse_from([
        "pinnbasis", "sweep", "--config", "c.toml", "--network", "n.json", "--r-list", "0:10:2", "--seed", "3",
    ])
    .unwrap();
    let Command::Sweep(a) = &cli.command else { panic!("wrong subcommand") };
    assert_eq!(a.r_list.as_deref(), Some("0:10:2"));
    assert_eq!(a.seed, Some(3));
    assert!(Cli::try_parse_from(["pinnbasis", "sweep"]).is_err());
    assert!(Cli::try_parse_from(["pinnbasis", "fly", "--config", "c.toml"]).is_err());
}

#[test]
fn binary_prints_the_manifest_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &SMALL_TRAIN.replace("epochs = 20", "epochs = 2"));
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_pinnbasis"))
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("manifest_train_poisson_1d_1-8-8-1.json"));
    let fail = std::process::Command::new(env!("CARGO_BIN_EXE_pinnbasis"))
        .args(["train", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));
}
