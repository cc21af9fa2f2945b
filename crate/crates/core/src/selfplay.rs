//! Iterative improvement league: each color trains against the previous,
//! epsilon-randomized checkpoint of the other.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arena::{run_match_with_workers, Player};
use crate::engine::Color;
use crate::env::OpponentSpec;
use crate::error::TrainError;
use crate::metrics;
use crate::net::{Checkpoint, CheckpointMeta, NetConfig, Network, Phase};
use crate::ppo::{train_iteration, EnvSource, Learner, PpoConfig};
use crate::rng::{derive_seed, stream};

pub const MANIFEST: &str = "league.manifest";
pub const MANIFEST_HEADER: &str = "iteration,color,checkpoint,opponent,epsilon,winrate,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfPlayConfig {
    pub iterations: u32,
    pub epsilon: f64,
    /// Start iteration k from the same color's checkpoint k-1 instead of fresh weights.
    pub warm_start: bool,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        SelfPlayConfig {
            iterations: 12,
            epsilon: 0.5,
            warm_start: true,
        }
    }
}

impl SelfPlayConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(TrainError::Config("selfplay.epsilon must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything the league loop needs besides the workdir.
#[derive(Debug, Clone)]
pub struct LeagueSettings {
    pub net: NetConfig,
    pub ppo: PpoConfig,
    pub selfplay: SelfPlayConfig,
    pub arena_games: u64,
    pub arena_seed: u64,
    pub seed: u64,
    pub workers: usize,
    /// Workdir-relative checkpoint directory.
    pub checkpoints: String,
}

/// One manifest line. Paths are relative to the workdir; the random
/// opponent is written as `random`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub iteration: u32,
    pub color: Color,
    pub checkpoint: String,
    pub opponent: String,
    pub epsilon: f64,
    /// Win-rate of this checkpoint against Random, playing its own color.
    pub winrate: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    iteration: u32,
    color: String,
    checkpoint: String,
    opponent: String,
    epsilon: f64,
    winrate: f64,
    seed: u64,
}

impl From<&ManifestRecord> for Row {
    fn from(r: &ManifestRecord) -> Row {
        Row {
            iteration: r.iteration,
            color: r.color.as_str().to_string(),
            checkpoint: r.checkpoint.clone(),
            opponent: r.opponent.clone(),
            epsilon: r.epsilon,
            winrate: r.winrate,
            seed: r.seed,
        }
    }
}

impl TryFrom<Row> for ManifestRecord {
    type Error = TrainError;

    fn try_from(r: Row) -> Result<Self, TrainError> {
        let color = match r.color.as_str() {
            "white" => Color::White,
            "black" => Color::Black,
            other => return Err(TrainError::Config(format!("bad manifest color {other}"))),
        };
        Ok(ManifestRecord {
            iteration: r.iteration,
            color,
            checkpoint: r.checkpoint,
            opponent: r.opponent,
            epsilon: r.epsilon,
            winrate: r.winrate,
            seed: r.seed,
        })
    }
}

fn manifest_error(e: csv::Error) -> TrainError {
    TrainError::Config(format!("bad manifest: {e}"))
}

/// Manifest text, header included.
pub fn manifest_to_string(records: &[ManifestRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(Row::from(r)).expect("in-memory csv write");
    }
    if records.is_empty() {
        w.write_record(MANIFEST_HEADER.split(',')).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>, TrainError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize::<Row>()
        .map(|row| row.map_err(manifest_error).and_then(ManifestRecord::try_from))
        .collect()
}

/// Workdir-relative path of a league checkpoint.
pub fn checkpoint_path(dir: &str, color: Color, k: u32) -> String {
    format!("{dir}/{}_{k}.ckpt", color.as_str())
}

/// League state as persisted in the workdir.
#[derive(Debug, Clone, PartialEq)]
pub struct LeagueState {
    pub dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl LeagueState {
    /// Loads the manifest in `dir`, or creates random-weight `white_0` and
    /// `black_0`, evaluates the baseline and writes a fresh manifest.
    pub fn open_or_init(dir: impl AsRef<Path>, s: &LeagueSettings) -> Result<Self, TrainError> {
        let dir = dir.as_ref().to_path_buf();
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            let records = parse_manifest(&fs::read_to_string(&manifest)?)?;
            return Ok(LeagueState { dir, records });
        }
        let mut white0 = None;
        for (ci, color) in [Color::White, Color::Black].into_iter().enumerate() {
            let seed = derive_seed(s.seed, &[0, ci as u64]);
            let net = Network::init(s.net, &mut stream(seed, 0));
            let ck = Checkpoint::new(
                net,
                CheckpointMeta {
                    seed,
                    color: Some(color),
                    ..Default::default()
                },
            );
            ck.save(dir.join(checkpoint_path(&s.checkpoints, color, 0)))?;
            if color == Color::White {
                white0 = Some((ck.net, seed));
            }
        }
        let (net, seed) = white0.unwrap();
        let winrate = evaluate_vs_random(net, Color::White, s);
        let league = LeagueState {
            dir,
            records: vec![ManifestRecord {
                iteration: 0,
                color: Color::White,
                checkpoint: checkpoint_path(&s.checkpoints, Color::White, 0),
                opponent: "random".into(),
                epsilon: 1.0,
                winrate,
                seed,
            }],
        };
        league.save()?;
        Ok(league)
    }

    pub fn save(&self) -> Result<(), TrainError> {
        let text = manifest_to_string(&self.records);
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        fs::write(&tmp, text)?;
        fs::rename(tmp, self.dir.join(MANIFEST))?;
        Ok(())
    }

    /// Highest iteration with both colors recorded.
    pub fn completed_iterations(&self) -> u32 {
        self.records
            .iter()
            .filter(|r| r.color == Color::Black)
            .map(|r| r.iteration)
            .max()
            .unwrap_or(0)
    }

    /// Win-rate series of one color over iterations 1.., in order.
    pub fn winrates(&self, color: Color) -> Vec<(u32, f64)> {
        self.records
            .iter()
            .filter(|r| r.color == color && r.iteration > 0)
            .map(|r| (r.iteration, r.winrate))
            .collect()
    }

    fn load(&self, rel: &str, expected: &NetConfig) -> Result<Checkpoint, TrainError> {
        Ok(Checkpoint::load(self.dir.join(rel), Some(expected))?)
    }
}

/// Win-rate of `net` against Random with `net` playing `color`.
pub fn evaluate_vs_random(net: Network<f32>, color: Color, s: &LeagueSettings) -> f64 {
    let me = Player::Greedy(Arc::new(net));
    match color {
        Color::White => run_match_with_workers(&me, &Player::Random, s.arena_games, s.arena_seed, s.workers).white_win_rate,
        Color::Black => {
            let r = run_match_with_workers(&Player::Random, &me, s.arena_games, s.arena_seed, s.workers);
            r.black_wins as f64 / r.games as f64
        }
    }
}

/// Runs iterations `completed + 1 ..= selfplay.iterations`, persisting the
/// manifest and metrics after each one.
pub fn improve(league: &mut LeagueState, s: &LeagueSettings) -> Result<(), TrainError> {
    s.ppo.validate()?;
    s.selfplay.validate()?;
    let metrics_path = league.dir.join("metrics.csv");
    let done = league.completed_iterations();
    metrics::truncate_rl_rows(&metrics_path, done)?;
    league.records.retain(|r| r.iteration <= done);
    let eps = s.selfplay.epsilon;
    for k in done + 1..=s.selfplay.iterations {
        let mut rows = Vec::new();
        let mut new_records = Vec::new();
        for (ci, color) in [Color::White, Color::Black].into_iter().enumerate() {
            let seed = derive_seed(s.seed, &[k as u64, ci as u64]);
            let opp_path = checkpoint_path(&s.checkpoints, color.opponent(), k - 1);
            let opponent = league.load(&opp_path, &s.net)?;
            let start = if s.selfplay.warm_start {
                league.load(&checkpoint_path(&s.checkpoints, color, k - 1), &s.net)?.net
            } else {
                Network::init(s.net, &mut stream(seed, 0))
            };
            let mut learner = Learner::new(start, &s.ppo);
            let source = EnvSource {
                opponent: OpponentSpec::frozen(Arc::new(opponent.net), eps),
                color,
            };
            rows.extend(train_iteration(&mut learner, &source, &s.ppo, k, &mut stream(seed, 1))?);
            let ck = Checkpoint::new(
                learner.net,
                CheckpointMeta {
                    step: learner.steps,
                    iteration: k,
                    seed,
                    color: Some(color),
                    phase: Phase::Rl,
                    epsilon: eps,
                    opponent: opp_path.clone(),
                },
            );
            let path = checkpoint_path(&s.checkpoints, color, k);
            ck.save(league.dir.join(&path))?;
            let winrate = evaluate_vs_random(ck.net, color, s);
            new_records.push(ManifestRecord {
                iteration: k,
                color,
                checkpoint: path,
                opponent: opp_path,
                epsilon: eps,
                winrate,
                seed,
            });
        }
        metrics::append_rows(&metrics_path, &rows)?;
        league.records.extend(new_records);
        league.save()?;
    }
    Ok(())
}

/// Iteration with the highest win-rate; ties go to the later iteration.
pub fn select_iteration(series: &[(u32, f64)]) -> Option<u32> {
    series
        .iter()
        .copied()
        .fold(None, |best: Option<(u32, f64)>, (k, w)| match best {
            Some((_, bw)) if bw > w => best,
            _ => Some((k, w)),
        })
        .map(|(k, _)| k)
}

/// Champion checkpoints (white, black) by arena win-rate.
pub fn select_champion(league: &LeagueState, expected: &NetConfig) -> Result<(Checkpoint, Checkpoint), TrainError> {
    let pick = |color: Color| -> Result<Checkpoint, TrainError> {
        let k = select_iteration(&league.winrates(color))
            .ok_or_else(|| TrainError::Config("no completed self-play iteration".into()))?;
        let rec = league
            .records
            .iter()
            .find(|r| r.color == color && r.iteration == k)
            .expect("selected iteration is recorded");
        league.load(&rec.checkpoint, expected)
    };
    Ok((pick(Color::White)?, pick(Color::Black)?))
}
