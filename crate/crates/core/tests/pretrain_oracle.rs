mod common;

use common::{minimax, random_playout, Grid};
use gardner::arena::Player;
use gardner::engine::{Board, Color};
use gardner::net::{NetConfig, Network, POLICY_B, POLICY_W};
use gardner::pretrain::*;
use gardner::rng::stream;

fn sample_positions(n: usize, seed: u64) -> Vec<Board> {
    (0..n as u64)
        .map(|i| {
            let seen = random_playout(&mut stream(seed, i));
            // skip the final, finished position
            seen[(i as usize * 7) % (seen.len() - 1)]
        })
        .collect()
}

#[test]
fn negamax_equals_exhaustive_minimax() {
    for b in sample_positions(100, 51) {
        let g = Grid::from_board(&b);
        for d in 0..=2 {
            assert_eq!(negamax(&b, d), minimax(&g, d), "depth {d}\n{b}");
        }
    }
}

#[test]
fn negamax_is_antisymmetric_under_mirroring() {
    for b in sample_positions(100, 52) {
        for d in 0..=2 {
            assert_eq!(white_eval(&b, d), -white_eval(&b.mirrored(), d));
            assert_eq!(negamax(&b, d), negamax(&b.mirrored(), d));
        }
    }
}

#[test]
fn collected_games_finish_and_repeat() {
    let a = collect_games(50, &Player::Random, &Player::Random, 5);
    let b = collect_games(50, &Player::Random, &Player::Random, 5);
    assert_eq!(a, b);
    assert!(a.iter().all(|g| g.status != "ongoing" && !g.actions.is_empty()));
    let pos = label_positions(&a, 1);
    assert_eq!(pos.len(), a.iter().map(|g| g.actions.len()).sum::<usize>());
    assert!(pos.iter().all(|p| p.eval.is_finite() && p.eval.abs() <= 61.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    write_positions(&path, &pos).unwrap();
    assert_eq!(read_positions(&path).unwrap(), pos);
}

fn small(dropout: f64) -> NetConfig {
    NetConfig {
        channels: 16,
        hidden: 64,
        actions: 664,
        dropout,
    }
}

#[test]
fn zero_labels_train_loss_decreases() {
    let games = collect_games(30, &Player::Random, &Player::Random, 6);
    let mut pos = label_positions(&games, 0);
    pos.iter_mut().for_each(|p| p.eval = 0.0);
    let ds = PositionDataset::split(pos, 0.9, 1);
    let net = Network::init(small(0.3), &mut stream(6, 0));
    let cfg = PretrainConfig {
        epochs: 4,
        batch: 64,
        ..PretrainConfig::default()
    };
    let (_, curve) = pretrain_value(&net, &ds, &cfg, &mut stream(6, 1)).unwrap();
    for w in curve.windows(2) {
        assert!(w[1].train < w[0].train, "{curve:?}");
    }
}

#[test]
fn memorizes_one_hundred_positions() {
    let games = collect_games(20, &Player::Random, &Player::Random, 7);
    let mut pos = label_positions(&games, 2);
    pos.retain(|p| p.target(Color::White).is_some());
    pos.truncate(100);
    assert_eq!(pos.len(), 100);
    let ds = PositionDataset {
        train: pos,
        validation: Vec::new(),
        split: 1.0,
        seed: 0,
    };
    let net = Network::init(small(0.0), &mut stream(7, 0));
    let cfg = PretrainConfig {
        epochs: 3000,
        batch: 100,
        learning_rate: 1e-2,
        ..PretrainConfig::default()
    };
    let (trained, curve) = pretrain_value(&net, &ds, &cfg, &mut stream(7, 1)).unwrap();
    let best = curve.iter().map(|e| e.train).fold(f64::INFINITY, f64::min);
    assert!(best < 1e-3, "train MSE {best}");
    assert_eq!(trained.params.tensors[POLICY_W], net.params.tensors[POLICY_W]);
    assert_eq!(trained.params.tensors[POLICY_B], net.params.tensors[POLICY_B]);
}
