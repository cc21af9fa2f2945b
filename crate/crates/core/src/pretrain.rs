//! Value-head pretraining on positions labelled by a shallow search.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::Player;
use crate::encoding::{board_plane, POINTS_PER_UNIT};
use crate::engine::{legal_moves, make_move_unchecked, Board, Color, GameResult, GameStatus, MOVE_CAP};
use crate::env::{play_episode_multi, EpisodeLog};
use crate::error::TrainError;
use crate::metrics::MetricsRow;
use crate::net::optim::{Optimizer, OptimizerKind};
use crate::net::{Mode, Network, Phase, POLICY_B, POLICY_W};
use crate::rng::stream;

/// Score of a won terminal node, in reward units.
pub const WIN_SCORE: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub games: u64,
    pub depth: u32,
    pub epochs: usize,
    /// Fraction of games in the training split.
    pub split: f64,
    pub learning_rate: f64,
    pub batch: usize,
    pub optimizer: OptimizerKind,
    /// Keep the policy head fixed.
    pub freeze_policy: bool,
    /// Color whose network is trained. Only positions with this side to move
    /// are used, scored from its point of view.
    pub role: Color,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            games: 12_000,
            depth: 2,
            epochs: 10,
            split: 0.9,
            learning_rate: 1e-3,
            batch: 256,
            optimizer: OptimizerKind::Adam,
            freeze_policy: true,
            role: Color::White,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.games == 0 {
            return bad("pretrain.games must be at least 1");
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad("pretrain.split must lie strictly between 0 and 1");
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad("pretrain.learning_rate must be finite and non-negative");
        }
        if self.batch == 0 {
            return bad("pretrain.batch must be at least 1");
        }
        Ok(())
    }
}

/// Plays `count` games; game `i` uses random stream `i` of `seed`.
pub fn collect_games(count: u64, white: &Player, black: &Player, seed: u64) -> Vec<EpisodeLog> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            play_episode_multi(white.actor(), black.actor(), &mut rng).to_log()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPosition {
    pub board: Board,
    /// White-perspective score in reward units.
    pub eval: f64,
    pub game: u32,
    pub ply: u32,
}

fn terminal_score(status: GameStatus, mover: Color) -> f64 {
    match status.result() {
        Some(GameResult::Draw) | None => 0.0,
        Some(GameResult::WhiteWin) if mover == Color::White => WIN_SCORE,
        Some(GameResult::BlackWin) if mover == Color::Black => WIN_SCORE,
        Some(_) => -WIN_SCORE,
    }
}

/// Fixed-depth alpha-beta negamax, from the side to move.
///
/// Leaves score material / 1000; a king capture scores +-60; stalemate and
/// the move cap score 0.
pub fn negamax(board: &Board, depth: u32) -> f64 {
    search(board, depth, f64::NEG_INFINITY, f64::INFINITY)
}

fn search(board: &Board, depth: u32, mut alpha: f64, beta: f64) -> f64 {
    let mover = board.side_to_move();
    if board.half_moves() >= MOVE_CAP {
        return 0.0;
    }
    let moves = legal_moves(board);
    if moves.is_empty() {
        return 0.0;
    }
    if depth == 0 {
        return board.material_score(mover) as f64 / POINTS_PER_UNIT;
    }
    let mut best = f64::NEG_INFINITY;
    for mv in moves {
        let out = make_move_unchecked(board, mv);
        let score = if out.status.is_over() {
            terminal_score(out.status, mover)
        } else {
            -search(&out.board, depth - 1, -beta, -alpha)
        };
        best = best.max(score);
        alpha = alpha.max(score);
        if alpha >= beta {
            break;
        }
    }
    best
}

/// Negamax score from white's point of view, clamped to [-60, 60].
pub fn white_eval(board: &Board, depth: u32) -> f64 {
    let s = negamax(board, depth);
    let s = if board.side_to_move() == Color::White { s } else { -s };
    s.clamp(-WIN_SCORE, WIN_SCORE)
}

/// Every pre-move position of every game, labelled at `depth`.
pub fn label_positions(games: &[EpisodeLog], depth: u32) -> Vec<LabeledPosition> {
    let boards: Vec<(u32, u32, Board)> = games
        .iter()
        .enumerate()
        .flat_map(|(g, log)| {
            log.replay()
                .expect("logged game replays")
                .into_iter()
                .enumerate()
                .map(move |(ply, b)| (g as u32, ply as u32, b))
        })
        .collect();
    boards
        .into_par_iter()
        .map(|(game, ply, board)| LabeledPosition {
            eval: white_eval(&board, depth),
            board,
            game,
            ply,
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Record {
    board: String,
    eval: f64,
    game: u32,
    ply: u32,
}

pub fn write_positions(path: impl AsRef<Path>, positions: &[LabeledPosition]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in positions {
        let rec = Record {
            board: p.board.to_string(),
            eval: p.eval,
            game: p.game,
            ply: p.ply,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_positions(path: impl AsRef<Path>) -> io::Result<Vec<LabeledPosition>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)?;
        let board = rec
            .board
            .parse()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}")))?;
        out.push(LabeledPosition {
            board,
            eval: rec.eval,
            game: rec.game,
            ply: rec.ply,
        });
    }
    Ok(out)
}

/// Train/validation split with no game on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionDataset {
    pub train: Vec<LabeledPosition>,
    pub validation: Vec<LabeledPosition>,
    pub split: f64,
    pub seed: u64,
}

impl PositionDataset {
    /// Shuffles the game ids under `seed` and puts the first `split` fraction in training.
    pub fn split(positions: Vec<LabeledPosition>, split: f64, seed: u64) -> Self {
        let ids: BTreeSet<u32> = positions.iter().map(|p| p.game).collect();
        let mut ids: Vec<u32> = ids.into_iter().collect();
        ids.shuffle(&mut stream(seed, 0));
        let n_train = ((ids.len() as f64) * split).round() as usize;
        let n_train = n_train.clamp(1.min(ids.len()), ids.len().saturating_sub(1).max(1));
        let train_ids: BTreeSet<u32> = ids[..n_train.min(ids.len())].iter().copied().collect();
        let (train, validation) = positions.into_iter().partition(|p| train_ids.contains(&p.game));
        PositionDataset {
            train,
            validation,
            split,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean train-mode minibatch MSE during the epoch.
    pub train: f64,
    /// Eval-mode MSE on the validation split after the epoch.
    pub validation: f64,
}

impl EpochLoss {
    pub fn to_metrics(&self, steps: u64) -> MetricsRow {
        MetricsRow {
            phase: Phase::Pretrain,
            iteration: self.epoch as u32,
            steps,
            value_loss: self.train,
            validation_loss: Some(self.validation),
            ..Default::default()
        }
    }
}

impl LabeledPosition {
    /// Value target for `role`'s network, if `role` is to move here.
    pub fn target(&self, role: Color) -> Option<f64> {
        (self.board.side_to_move() == role).then(|| self.eval * role.sign() as f64)
    }
}

fn samples(positions: &[LabeledPosition], role: Color) -> (Vec<[f32; 25]>, Vec<f64>) {
    positions
        .iter()
        .filter_map(|p| p.target(role).map(|t| (board_plane(&p.board), t)))
        .unzip()
}

/// Eval-mode value MSE of `role`'s network over the positions it would see.
pub fn value_mse(net: &Network<f32>, positions: &[LabeledPosition], role: Color) -> f64 {
    let (planes, targets) = samples(positions, role);
    if planes.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (chunk, t) in planes.chunks(512).zip(targets.chunks(512)) {
        let out = net.forward_eval(chunk);
        for (v, t) in out.values.iter().zip(t) {
            let d = *v as f64 - t;
            total += d * d;
        }
    }
    total / planes.len() as f64
}

/// Minimizes value-head MSE on the training split.
///
/// Returns the parameters with the lowest validation loss (the final ones if
/// there is no validation split) and the per-epoch losses.
pub fn pretrain_value(
    net: &Network<f32>,
    dataset: &PositionDataset,
    config: &PretrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Network<f32>, Vec<EpochLoss>), TrainError> {
    config.validate()?;
    let (planes, targets) = samples(&dataset.train, config.role);
    if planes.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut net = net.clone();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate);
    if config.freeze_policy {
        opt.freeze(POLICY_W);
        opt.freeze(POLICY_B);
    }
    let mut order: Vec<usize> = (0..planes.len()).collect();
    let a_dim = net.config.actions;
    let mut curve = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Network<f32>)> = None;
    let has_validation = dataset.validation.iter().any(|p| p.target(config.role).is_some());
    let mut updates = 0u64;
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        let (mut sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(config.batch) {
            // batch statistics need two samples
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<_> = chunk.iter().map(|&i| planes[i]).collect();
            let out = net.forward(&batch, Mode::Train, rng);
            let n = chunk.len() as f64;
            let mut mse = 0.0;
            let dvalues: Vec<f32> = chunk
                .iter()
                .zip(&out.values)
                .map(|(&i, &v)| {
                    let d = v as f64 - targets[i];
                    mse += d * d / n;
                    (2.0 * d / n) as f32
                })
                .collect();
            if !mse.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    update: updates,
                    policy_loss: 0.0,
                    value_loss: mse,
                    entropy: 0.0,
                });
            }
            let dlogits = vec![0f32; chunk.len() * a_dim];
            let grads = net.backward(&out.cache, &dlogits, &dvalues);
            opt.step(&mut net.params, &grads);
            updates += 1;
            sum += mse;
            batches += 1;
        }
        let train = sum / batches.max(1) as f64;
        let validation = value_mse(&net, &dataset.validation, config.role);
        curve.push(EpochLoss {
            epoch,
            train,
            validation,
        });
        if has_validation && best.as_ref().is_none_or(|(b, _)| validation < *b) {
            best = Some((validation, net.clone()));
        }
    }
    let out = best.map(|(_, n)| n).unwrap_or(net);
    Ok((out, curve))
}
