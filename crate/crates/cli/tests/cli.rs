use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gardner::net::{Checkpoint, Phase};

const TINY: &str = r#"
seed = 5

[network]
channels = 4
hidden = 8

[ppo]
iteration_steps = 200
train_batch = 100
minibatch = 50
epochs_per_batch = 1
learning_rate = 0.01

[selfplay]
iterations = 1

[arena]
games = 20

[pretrain]
games = 20
epochs = 2
batch = 32
"#;

fn workdir(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), format!("{TINY}{extra}")).unwrap();
    dir
}

fn gardner(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_gardner"))
        .current_dir(dir)
        .arg("--config")
        .arg(dir.join("tiny.toml"))
        .arg("--workdir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "gardner {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: impl AsRef<Path>) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn perft_prints_node_counts() {
    let dir = workdir("");
    assert_eq!(gardner(dir.path(), &["perft", "4"]), "7\n53\n510\n5000\n");
}

#[test]
fn train_single_with_zero_learning_rate_keeps_parameters() {
    let dir = workdir("");
    let text = fs::read_to_string(dir.path().join("tiny.toml"))
        .unwrap()
        .replace("learning_rate = 0.01", "learning_rate = 0.0");
    fs::write(dir.path().join("tiny.toml"), text).unwrap();
    gardner(dir.path(), &["train-single", "--iterations", "2"]);
    let init = Checkpoint::load(dir.path().join("checkpoints/single_white_init.ckpt"), None).unwrap();
    let fin = Checkpoint::load(dir.path().join("checkpoints/single_white.ckpt"), None).unwrap();
    assert_eq!(init.net.params, fin.net.params);
    assert_eq!(fin.meta.step, 400);
    assert_eq!(fin.meta.phase, Phase::Rl);
    let rows = lines(dir.path().join("metrics.csv"));
    assert_eq!(rows.len(), 1 + 2 * 200 / 100);
    assert!(rows[1].starts_with("rl,white,1,100,"));
}

#[test]
fn train_single_black_learns_its_own_color() {
    let dir = workdir("");
    gardner(dir.path(), &["train-single", "--color", "black"]);
    let ck = Checkpoint::load(dir.path().join("checkpoints/single_black.ckpt"), None).unwrap();
    assert_eq!(ck.meta.color, Some(gardner::engine::Color::Black));
    assert!(lines(dir.path().join("metrics.csv"))[1].starts_with("rl,black,1,"));
}

#[test]
fn selfplay_with_zero_iterations_writes_the_baseline() {
    let dir = workdir("");
    let text = fs::read_to_string(dir.path().join("tiny.toml"))
        .unwrap()
        .replace("iterations = 1", "iterations = 0");
    fs::write(dir.path().join("tiny.toml"), text).unwrap();
    gardner(dir.path(), &["selfplay"]);
    let manifest = lines(dir.path().join("league.manifest"));
    assert_eq!(manifest.len(), 2);
    assert!(manifest[1].starts_with("0,white,checkpoints/white_0.ckpt,random,"));
    assert!(!dir.path().join("checkpoints/champion_white.ckpt").exists());
}

#[test]
fn selfplay_saves_champions() {
    let dir = workdir("");
    let out = gardner(dir.path(), &["selfplay"]);
    assert!(out.contains("champion white 1 black 1"), "{out}");
    assert_eq!(lines(dir.path().join("league.manifest")).len(), 1 + 3);
    let w = Checkpoint::load(dir.path().join("checkpoints/champion_white.ckpt"), None).unwrap();
    assert_eq!(w.meta.opponent, "checkpoints/black_0.ckpt");
}

#[test]
fn evaluate_appends_one_row_per_match() {
    let dir = workdir("");
    let start = Instant::now();
    let out = gardner(dir.path(), &["evaluate", "--white", "random", "--black", "random", "-n", "1000"]);
    assert!(start.elapsed() < Duration::from_secs(60));
    let winrate: f64 = out.trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&winrate));
    assert_eq!(lines(dir.path().join("results.csv")).len(), 2);
    gardner(dir.path(), &["evaluate", "--white", "random", "--black", "random", "-n", "10"]);
    let rows = lines(dir.path().join("results.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("random,random,10,"));
}

#[test]
fn evaluate_rejects_a_checkpoint_of_another_shape() {
    let dir = workdir("");
    gardner(dir.path(), &["train-single", "--iterations", "0"]);
    let wide = tempfile::tempdir().unwrap();
    fs::write(wide.path().join("tiny.toml"), TINY.replace("hidden = 8", "hidden = 9")).unwrap();
    let ck = dir.path().join("checkpoints/single_white_init.ckpt");
    let out = Command::new(env!("CARGO_BIN_EXE_gardner"))
        .arg("--config")
        .arg(wide.path().join("tiny.toml"))
        .arg("--workdir")
        .arg(wide.path())
        .args(["evaluate", "--white", ck.to_str().unwrap(), "--black", "random", "-n", "5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn collect_then_pretrain() {
    let dir = workdir("");
    gardner(dir.path(), &["collect", "--games", "100"]);
    assert!(lines(dir.path().join("dataset.jsonl")).len() >= 100);
    assert_eq!(lines(dir.path().join("logs/games.jsonl")).len(), 100);
    gardner(dir.path(), &["pretrain"]);
    let ck = Checkpoint::load(dir.path().join("checkpoints/pretrained.ckpt"), None).unwrap();
    assert_eq!(ck.meta.phase, Phase::Pretrain);
    let rows = lines(dir.path().join("metrics.csv"));
    assert_eq!(rows.len(), 1 + 2);
    assert!(rows[1..].iter().all(|r| r.starts_with("pretrain,")));

    gardner(dir.path(), &["train-single", "--init", "checkpoints/pretrained.ckpt"]);
}

#[test]
fn subcommands_are_reproducible() {
    let dir = workdir("");
    let p = dir.path();
    let run = || {
        for e in fs::read_dir(p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                fs::remove_dir_all(e).unwrap();
            } else if e.file_name().unwrap() != "tiny.toml" {
                fs::remove_file(e).unwrap();
            }
        }
        gardner(p, &["train-single"]);
        gardner(p, &["selfplay"]);
        gardner(p, &["collect"]);
        gardner(p, &["pretrain"]);
        gardner(p, &["evaluate", "--white", "checkpoints/champion_white.ckpt", "--black", "random"]);
        files(p)
    };
    let a = run();
    let b = run();
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{name} differs");
    }
    assert!(a.contains_key("config.toml"));
}
