//! Episode mechanics with material-swing reward shaping.
//!
//! An agent's transition reward is the material swing of its own move plus
//! the swing of the opponent's reply, credited when the agent next observes
//! (or at game end). Summed over an episode this telescopes to the agent's
//! final material difference.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{
    masked_log_softmax, observe, ActionId, ActionTable, Observation, POINTS_PER_UNIT,
};
use crate::engine::{make_move_unchecked, Board, Color, GameStatus, TerminationCause};
use crate::error::EngineError;
use crate::net::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: ActionId,
    pub log_prob: f64,
    pub value_est: f64,
    /// Material units (points / 1000).
    pub reward: f64,
    pub done: bool,
}

/// Frozen opponent: a network or uniform random, with epsilon mixing.
#[derive(Debug, Clone)]
pub struct OpponentSpec {
    pub policy: Option<Arc<Network<f32>>>,
    pub epsilon: f64,
}

impl OpponentSpec {
    pub fn random() -> Self {
        OpponentSpec {
            policy: None,
            epsilon: 0.0,
        }
    }

    pub fn frozen(net: Arc<Network<f32>>, epsilon: f64) -> Self {
        assert!((0.0..=1.0).contains(&epsilon), "epsilon out of range");
        OpponentSpec {
            policy: Some(net),
            epsilon,
        }
    }

    pub fn actor(&self) -> Actor<'_> {
        match &self.policy {
            None => Actor::Random,
            Some(net) => Actor::Greedy {
                net,
                epsilon: self.epsilon,
            },
        }
    }
}

/// How a side picks its moves.
#[derive(Debug, Clone, Copy)]
pub enum Actor<'a> {
    /// Uniform over legal moves.
    Random,
    /// Sample from the masked policy.
    Sample(&'a Network<f32>),
    /// Masked argmax, replaced by a uniform legal move with probability `epsilon`.
    Greedy { net: &'a Network<f32>, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    /// Log-probability of `action` under the acting distribution's masked policy
    /// (uniform for [`Actor::Random`]).
    pub log_prob: f64,
    pub value: f64,
}

impl Actor<'_> {
    pub fn act<R: Rng>(&self, obs: &Observation, rng: &mut R) -> Decision {
        let legal = &obs.legal;
        assert!(!legal.is_empty(), "asked to act with no legal moves");
        match *self {
            Actor::Random => {
                let i = rng.gen_range(0..legal.len());
                Decision {
                    action: legal[i],
                    log_prob: -(legal.len() as f64).ln(),
                    value: 0.0,
                }
            }
            Actor::Sample(net) => {
                let (logits, value) = net.evaluate(&obs.plane);
                let logp = masked_log_softmax(&logits, legal);
                let i = sample_index(&logp, rng);
                Decision {
                    action: legal[i],
                    log_prob: logp[i],
                    value,
                }
            }
            Actor::Greedy { net, epsilon } => {
                let (logits, value) = net.evaluate(&obs.plane);
                let action = epsilon_mix_action(&logits, legal, epsilon, rng);
                let logp = masked_log_softmax(&logits, legal);
                let i = legal.binary_search(&action).unwrap();
                Decision {
                    action,
                    log_prob: logp[i],
                    value,
                }
            }
        }
    }
}

fn sample_index<R: Rng>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Index into `legal` of the highest logit; ties go to the lower action id.
pub fn argmax_action(logits: &[f64], legal: &[ActionId]) -> ActionId {
    let mut best = legal[0];
    for &a in &legal[1..] {
        if logits[a.index()] > logits[best.index()] {
            best = a;
        }
    }
    best
}

/// With probability `epsilon` a uniform legal action, otherwise the masked argmax.
pub fn epsilon_mix_action<R: Rng>(
    logits: &[f64],
    legal: &[ActionId],
    epsilon: f64,
    rng: &mut R,
) -> ActionId {
    assert!(!legal.is_empty(), "empty legal set");
    if rng.gen::<f64>() < epsilon {
        legal[rng.gen_range(0..legal.len())]
    } else {
        argmax_action(logits, legal)
    }
}

/// Change in `mover`'s material difference, in material units.
pub fn shaped_reward(prev: &Board, next: &Board, mover: Color) -> f64 {
    (next.material_score(mover) - prev.material_score(mover)) as f64 / POINTS_PER_UNIT
}

fn swing_points(prev: &Board, next: &Board, mover: Color) -> i32 {
    next.material_score(mover) - prev.material_score(mover)
}

/// Completed game with per-color transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub white: Vec<Transition>,
    pub black: Vec<Transition>,
    pub status: GameStatus,
    pub length: u32,
    /// Every half-move as played.
    pub actions: Vec<ActionId>,
    /// Mover's shaped reward for each half-move.
    pub step_rewards: Vec<f64>,
    pub final_board: Board,
}

impl EpisodeRecord {
    pub fn transitions(&self, color: Color) -> &[Transition] {
        match color {
            Color::White => &self.white,
            Color::Black => &self.black,
        }
    }

    pub fn total_reward(&self, color: Color) -> f64 {
        self.transitions(color).iter().map(|t| t.reward).sum()
    }

    pub fn to_log(&self) -> EpisodeLog {
        EpisodeLog {
            actions: self.actions.iter().map(|a| a.0).collect(),
            rewards: self.step_rewards.clone(),
            status: self.status.label().to_string(),
            cause: cause_label(self.status).to_string(),
            length: self.length,
        }
    }
}

fn cause_label(status: GameStatus) -> &'static str {
    match status.cause() {
        None => "none",
        Some(TerminationCause::KingCaptured) => "king_captured",
        Some(TerminationCause::Stalemate) => "stalemate",
        Some(TerminationCause::MoveCapReached) => "move_cap",
    }
}

/// One line of an episode log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub actions: Vec<u16>,
    pub rewards: Vec<f64>,
    pub status: String,
    pub cause: String,
    pub length: u32,
}

impl EpisodeLog {
    /// Replays the game, returning every position before each half-move.
    pub fn replay(&self) -> Result<Vec<Board>, EngineError> {
        let table = ActionTable::global();
        let mut board = Board::initial();
        let mut out = Vec::with_capacity(self.actions.len());
        for &a in &self.actions {
            let mv = table
                .decode(ActionId(a), &board)
                .map_err(|e| EngineError::Parse(e.to_string()))?;
            out.push(board);
            board = crate::engine::apply_move(&board, mv)?.board;
        }
        Ok(out)
    }
}

pub fn write_episode_logs<W: Write>(mut w: W, logs: &[EpisodeLog]) -> io::Result<()> {
    for log in logs {
        serde_json::to_writer(&mut w, log)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_episode_logs<R: BufRead>(r: R) -> io::Result<Vec<EpisodeLog>> {
    r.lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| {
            let l = l?;
            serde_json::from_str(&l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        })
        .collect()
}

/// Game driver shared by the single- and two-learner loops.
struct Game {
    board: Board,
    status: GameStatus,
    record: [bool; 2],
    transitions: [Vec<Transition>; 2],
    actions: Vec<ActionId>,
    step_rewards: Vec<f64>,
}

fn side(c: Color) -> usize {
    match c {
        Color::White => 0,
        Color::Black => 1,
    }
}

impl Game {
    fn new(record: [bool; 2]) -> Self {
        Game {
            board: Board::initial(),
            status: GameStatus::Ongoing,
            record,
            transitions: [Vec::new(), Vec::new()],
            actions: Vec::new(),
            step_rewards: Vec::new(),
        }
    }

    fn observe(&self) -> Observation {
        observe(&self.board, self.board.side_to_move())
    }

    /// Plays one decision; returns the mover's swing in points.
    fn play(&mut self, obs: Observation, d: Decision) -> i32 {
        debug_assert!(!self.status.is_over());
        let mover = self.board.side_to_move();
        let mv = ActionTable::global()
            .decode(d.action, &self.board)
            .expect("legal action decodes");
        let out = make_move_unchecked(&self.board, mv);
        let swing = swing_points(&self.board, &out.board, mover);
        let reward = swing as f64 / POINTS_PER_UNIT;
        self.actions.push(d.action);
        self.step_rewards.push(reward);
        let me = side(mover);
        let them = 1 - me;
        if self.record[me] {
            self.transitions[me].push(Transition {
                obs,
                action: d.action,
                log_prob: d.log_prob,
                value_est: d.value,
                reward,
                done: false,
            });
        }
        if self.record[them] {
            if let Some(last) = self.transitions[them].last_mut() {
                last.reward -= reward;
            }
        }
        self.board = out.board;
        self.status = out.status;
        if self.status.is_over() {
            for t in &mut self.transitions {
                if let Some(last) = t.last_mut() {
                    last.done = true;
                }
            }
        }
        swing
    }

    fn finish(self) -> EpisodeRecord {
        let [white, black] = self.transitions;
        EpisodeRecord {
            white,
            black,
            status: self.status,
            length: self.board.half_moves(),
            actions: self.actions,
            step_rewards: self.step_rewards,
            final_board: self.board,
        }
    }
}

/// Learner (recording) vs frozen opponent, to the end of the game.
pub fn play_episode_single(
    learner: Actor<'_>,
    opponent: &OpponentSpec,
    learner_color: Color,
    rng: &mut ChaCha8Rng,
) -> EpisodeRecord {
    let mut record = [false; 2];
    record[side(learner_color)] = true;
    let opp = opponent.actor();
    let mut game = Game::new(record);
    while !game.status.is_over() {
        let obs = game.observe();
        let actor = if game.board.side_to_move() == learner_color {
            learner
        } else {
            opp
        };
        let d = actor.act(&obs, rng);
        game.play(obs, d);
    }
    game.finish()
}

/// Both sides record and act with their own actors.
pub fn play_episode_multi(
    white: Actor<'_>,
    black: Actor<'_>,
    rng: &mut ChaCha8Rng,
) -> EpisodeRecord {
    let mut game = Game::new([true, true]);
    while !game.status.is_over() {
        let obs = game.observe();
        let actor = match game.board.side_to_move() {
            Color::White => white,
            Color::Black => black,
        };
        let d = actor.act(&obs, rng);
        game.play(obs, d);
    }
    game.finish()
}

/// Plays a game without recording transitions; returns (status, final board).
pub fn play_silent(white: Actor<'_>, black: Actor<'_>, rng: &mut ChaCha8Rng) -> (GameStatus, Board) {
    let mut board = Board::initial();
    let table = ActionTable::global();
    loop {
        let obs = observe(&board, board.side_to_move());
        let actor = match board.side_to_move() {
            Color::White => white,
            Color::Black => black,
        };
        let d = actor.act(&obs, rng);
        let mv = table.decode(d.action, &board).expect("legal action decodes");
        let out = make_move_unchecked(&board, mv);
        board = out.board;
        if out.status.is_over() {
            return (out.status, board);
        }
    }
}

/// Outcome of one learner step in [`SingleAgentEnv`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub status: GameStatus,
}

/// Step-wise single-agent environment: the opponent replies inside `step`.
pub struct SingleAgentEnv {
    opponent: OpponentSpec,
    learner: Color,
    board: Board,
    status: GameStatus,
}

impl SingleAgentEnv {
    /// New game; if the learner plays black the opponent moves first.
    pub fn new(opponent: OpponentSpec, learner: Color, rng: &mut ChaCha8Rng) -> Self {
        let mut env = SingleAgentEnv {
            opponent,
            learner,
            board: Board::initial(),
            status: GameStatus::Ongoing,
        };
        if learner == Color::Black {
            env.opponent_reply(rng);
        }
        env
    }

    pub fn board(&self) -> &Board {
        &self.board
    }

    pub fn status(&self) -> GameStatus {
        self.status
    }

    pub fn learner(&self) -> Color {
        self.learner
    }

    pub fn observe(&self) -> Observation {
        observe(&self.board, self.learner)
    }

    fn opponent_reply(&mut self, rng: &mut ChaCha8Rng) -> i32 {
        let obs = observe(&self.board, self.learner.opponent());
        let d = self.opponent.actor().act(&obs, rng);
        let mv = ActionTable::global()
            .decode(d.action, &self.board)
            .expect("legal action decodes");
        let out = make_move_unchecked(&self.board, mv);
        let swing = swing_points(&self.board, &out.board, self.learner);
        self.board = out.board;
        self.status = out.status;
        swing
    }

    /// Plays the learner's `action` and the opponent's reply.
    pub fn step(&mut self, action: ActionId, rng: &mut ChaCha8Rng) -> Result<StepOutcome, EngineError> {
        assert!(!self.status.is_over(), "step on a finished game");
        let mv = ActionTable::global()
            .decode(action, &self.board)
            .map_err(|e| EngineError::Parse(e.to_string()))?;
        let out = crate::engine::apply_move(&self.board, mv)?;
        let mut points = swing_points(&self.board, &out.board, self.learner);
        self.board = out.board;
        self.status = out.status;
        if !self.status.is_over() {
            points += self.opponent_reply(rng);
        }
        Ok(StepOutcome {
            reward: points as f64 / POINTS_PER_UNIT,
            done: self.status.is_over(),
            status: self.status,
        })
    }
}
