use std::path::Path;
use std::process::{Command, Output};

fn ojrs(dir: &Path, config: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ojrs"))
        .args(["--quiet", "--config"])
        .arg(config)
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
seed = 3
[scenario]
n_ues = 5
n_mecs = 2
[sae]
dims = [8, 6]
t_sae = 30
pretrain_samples = 60
[drl]
dims = [16]
t_drl = 60
[bench]
eval_channels = 5
replications = [1]
sae_test_channels = 20
[bench.pso]
particles = 8
iterations = 10
"#,
    )
    .unwrap();
    path
}

#[test]
fn train_then_bench_with_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("run");
    ojrs(&out, &cfg, &["train", "--checkpoint-every", "20"]);
    for f in [
        "epochs.csv",
        "policy.json",
        "sae.json",
        "policy_20.json",
        "policy_60.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let lines = std::fs::read_to_string(out.join("epochs.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(lines, 61);

    let policy = out.join("policy.json");
    let sae = out.join("sae.json");
    let b = ojrs(
        &out,
        &cfg,
        &[
            "bench",
            "--no-timing",
            "--policy",
            policy.to_str().unwrap(),
            "--sae",
            sae.to_str().unwrap(),
        ],
    );
    let table = String::from_utf8(b.stdout).unwrap();
    for s in ["ojrs", "asa", "greedy", "random"] {
        assert!(table.contains(s), "{table}");
    }
    assert!(out.join("bench.csv").exists());
}

#[test]
fn epochs_override_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ojrs(&a, &cfg, &["--seed", "9", "train", "--epochs", "15"]);
    ojrs(&b, &cfg, &["train", "--epochs", "15"]);
    let ea = std::fs::read_to_string(a.join("epochs.csv")).unwrap();
    let eb = std::fs::read_to_string(b.join("epochs.csv")).unwrap();
    assert_eq!(ea.lines().count(), 16);
    assert_ne!(ea, eb);
}

#[test]
fn gen_scenario_pins_positions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    ojrs(tmp.path(), &cfg, &["gen-scenario"]);
    let text = std::fs::read_to_string(tmp.path().join("scenario.toml")).unwrap();
    assert!(text.contains("ue_positions"));
    let again = tmp.path().join("again");
    ojrs(&again, &tmp.path().join("scenario.toml"), &["gen-scenario"]);
    assert_eq!(
        std::fs::read_to_string(again.join("scenario.toml")).unwrap(),
        text
    );
}

#[test]
fn train_sae_and_inspect() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = ojrs(tmp.path(), &cfg, &["train-sae"]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("compression ratio 0.40"));
    let sae = tmp.path().join("sae.json");
    let info = ojrs(
        tmp.path(),
        &cfg,
        &["inspect-checkpoint", sae.to_str().unwrap()],
    );
    let text = String::from_utf8(info.stdout).unwrap();
    assert!(
        text.starts_with("SAE checkpoint, 5 UEs x 2 servers, code 6"),
        "{text}"
    );
}

#[test]
fn rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[scenario]\nn_mecs = 0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ojrs"))
        .arg("--config")
        .arg(&cfg)
        .arg("train")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_ojrs"))
        .args(["inspect-checkpoint", "/nonexistent/policy.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
