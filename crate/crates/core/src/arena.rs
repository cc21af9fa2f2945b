//! Head-to-head matches and win-rate statistics.

use std::fs::OpenOptions;
use std::io;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::engine::{Color, GameResult};
use crate::env::{play_silent, Actor};
use crate::net::Network;
use crate::rng::stream;

/// How one side plays in a match.
#[derive(Debug, Clone)]
pub enum Player {
    Random,
    /// Masked argmax.
    Greedy(Arc<Network<f32>>),
    /// Samples from the masked policy.
    Sample(Arc<Network<f32>>),
}

impl Player {
    pub fn actor(&self) -> Actor<'_> {
        match self {
            Player::Random => Actor::Random,
            Player::Greedy(net) => Actor::Greedy { net, epsilon: 0.0 },
            Player::Sample(net) => Actor::Sample(net),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArenaResult {
    pub games: u64,
    pub white_wins: u64,
    pub black_wins: u64,
    pub draws: u64,
    pub white_win_rate: f64,
    /// Mean final material difference for white, in reward units.
    pub mean_reward: f64,
    /// Mean plies per game.
    pub mean_length: f64,
    /// Normal-approximation 95% half-width of `white_win_rate`.
    pub ci95: f64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    white: u64,
    black: u64,
    draws: u64,
    points: i64,
    plies: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            white: self.white + o.white,
            black: self.black + o.black,
            draws: self.draws + o.draws,
            points: self.points + o.points,
            plies: self.plies + o.plies,
        }
    }
}

/// Plays `n` games; game `i` uses random stream `i` of `seed`.
///
/// Runs on the current rayon pool; results do not depend on its size.
pub fn run_match(white: &Player, black: &Player, n: u64, seed: u64) -> ArenaResult {
    assert!(n >= 1, "a match needs at least one game");
    let t = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let (status, board) = play_silent(white.actor(), black.actor(), &mut rng);
            let mut t = Tally {
                points: board.material_score(Color::White) as i64,
                plies: board.half_moves() as u64,
                ..Tally::default()
            };
            match status.result() {
                Some(GameResult::WhiteWin) => t.white = 1,
                Some(GameResult::BlackWin) => t.black = 1,
                _ => t.draws = 1,
            }
            t
        })
        .reduce(Tally::default, Tally::merge);
    let p = t.white as f64 / n as f64;
    ArenaResult {
        games: n,
        white_wins: t.white,
        black_wins: t.black,
        draws: t.draws,
        white_win_rate: p,
        mean_reward: t.points as f64 / 1000.0 / n as f64,
        mean_length: t.plies as f64 / n as f64,
        ci95: 1.96 * (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// [`run_match`] on a dedicated pool of `workers` threads.
pub fn run_match_with_workers(white: &Player, black: &Player, n: u64, seed: u64, workers: usize) -> ArenaResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| run_match(white, black, n, seed))
}

/// Win-rate implied by a mean reward on the [-60, 60] scale.
pub fn winrate_from_reward(mean_reward: f64) -> f64 {
    ((mean_reward + 60.0) / 120.0).clamp(0.0, 1.0)
}

pub const RESULTS_HEADER: &str = "white,black,n,wins,draws,losses,winrate,ci95,mean_reward,mean_length,seed";

/// Appends one report row, writing the header to a new file.
pub fn append_result(
    path: impl AsRef<Path>,
    white_id: &str,
    black_id: &str,
    seed: u64,
    r: &ArenaResult,
) -> io::Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(f);
    if fresh {
        w.write_record(RESULTS_HEADER.split(','))?;
    }
    w.write_record([
        white_id.to_string(),
        black_id.to_string(),
        r.games.to_string(),
        r.white_wins.to_string(),
        r.draws.to_string(),
        r.black_wins.to_string(),
        r.white_win_rate.to_string(),
        r.ci95.to_string(),
        r.mean_reward.to_string(),
        r.mean_length.to_string(),
        seed.to_string(),
    ])?;
    w.flush()
}
