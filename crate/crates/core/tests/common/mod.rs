//! Test-only reference implementations, written from the rules without
//! touching engine internals. Boards cross over through their text form.

#![allow(dead_code)]

use gardner::engine::{apply_move, legal_moves, Board};
use gardner::net::{Mode, NetConfig, Network};
use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const CAP: u32 = 150;

/// 5x5 char grid, row 0 = rank 1; uppercase white, lowercase black, '.' empty.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Grid {
    pub cells: [[char; 5]; 5],
    pub white_to_move: bool,
    pub plies: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum End {
    /// The side that just moved captured the king.
    KingTaken,
    Draw,
}

fn value(c: char) -> i64 {
    match c.to_ascii_lowercase() {
        'p' => 100,
        'n' | 'b' => 300,
        'r' => 500,
        'q' => 900,
        'k' => 60_000,
        _ => 0,
    }
}

fn sq(file: i32, rank: i32) -> String {
    format!("{}{}", (b'a' + file as u8) as char, rank + 1)
}

impl Grid {
    pub fn parse(text: &str) -> Grid {
        let lines: Vec<&str> = text.lines().collect();
        let mut cells = [['.'; 5]; 5];
        for row in 0..5 {
            for (f, c) in lines[row].chars().enumerate() {
                cells[4 - row][f] = c;
            }
        }
        let mut tail = lines[5].split_whitespace();
        let white_to_move = tail.next() == Some("w");
        let plies = tail.next().unwrap().parse().unwrap();
        Grid {
            cells,
            white_to_move,
            plies,
        }
    }

    pub fn from_board(b: &Board) -> Grid {
        Grid::parse(&b.to_string())
    }

    fn at(&self, f: i32, r: i32) -> Option<char> {
        if (0..5).contains(&f) && (0..5).contains(&r) {
            Some(self.cells[r as usize][f as usize])
        } else {
            None
        }
    }

    fn mine(&self, c: char) -> bool {
        c != '.' && c.is_ascii_uppercase() == self.white_to_move
    }

    /// Pseudo-legal moves as "a2a3" / "a4a5q" strings, sorted.
    pub fn moves(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in 0..5 {
            for f in 0..5 {
                let c = self.cells[r as usize][f as usize];
                if !self.mine(c) {
                    continue;
                }
                let mut targets = Vec::new();
                let free_or_enemy = |g: &Grid, t: char| t == '.' || !g.mine(t);
                match c.to_ascii_lowercase() {
                    'p' => {
                        let dir = if self.white_to_move { 1 } else { -1 };
                        if self.at(f, r + dir) == Some('.') {
                            targets.push((f, r + dir));
                        }
                        for df in [-1, 1] {
                            if let Some(t) = self.at(f + df, r + dir) {
                                if t != '.' && !self.mine(t) {
                                    targets.push((f + df, r + dir));
                                }
                            }
                        }
                        let last = if self.white_to_move { 4 } else { 0 };
                        for (tf, tr) in targets.drain(..).collect::<Vec<_>>() {
                            if tr == last {
                                for p in ['q', 'r', 'b', 'n'] {
                                    out.push(format!("{}{}{p}", sq(f, r), sq(tf, tr)));
                                }
                            } else {
                                out.push(format!("{}{}", sq(f, r), sq(tf, tr)));
                            }
                        }
                        continue;
                    }
                    'n' => {
                        for (df, dr) in [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)] {
                            if let Some(t) = self.at(f + df, r + dr) {
                                if free_or_enemy(self, t) {
                                    targets.push((f + df, r + dr));
                                }
                            }
                        }
                    }
                    'k' => {
                        for df in -1..=1 {
                            for dr in -1..=1 {
                                if (df, dr) == (0, 0) {
                                    continue;
                                }
                                if let Some(t) = self.at(f + df, r + dr) {
                                    if free_or_enemy(self, t) {
                                        targets.push((f + df, r + dr));
                                    }
                                }
                            }
                        }
                    }
                    kind => {
                        let mut dirs = Vec::new();
                        if kind == 'r' || kind == 'q' {
                            dirs.extend([(1, 0), (-1, 0), (0, 1), (0, -1)]);
                        }
                        if kind == 'b' || kind == 'q' {
                            dirs.extend([(1, 1), (1, -1), (-1, 1), (-1, -1)]);
                        }
                        for (df, dr) in dirs {
                            let (mut tf, mut tr) = (f + df, r + dr);
                            while let Some(t) = self.at(tf, tr) {
                                if t == '.' {
                                    targets.push((tf, tr));
                                } else {
                                    if !self.mine(t) {
                                        targets.push((tf, tr));
                                    }
                                    break;
                                }
                                tf += df;
                                tr += dr;
                            }
                        }
                    }
                }
                for (tf, tr) in targets {
                    out.push(format!("{}{}", sq(f, r), sq(tf, tr)));
                }
            }
        }
        out.sort();
        out
    }

    /// Plays `mv` (assumed pseudo-legal) and reports whether the game ended.
    pub fn play(&self, mv: &str) -> (Grid, Option<End>) {
        let b = mv.as_bytes();
        let (ff, fr) = ((b[0] - b'a') as usize, (b[1] - b'1') as usize);
        let (tf, tr) = ((b[2] - b'a') as usize, (b[3] - b'1') as usize);
        let mut g = self.clone();
        let piece = g.cells[fr][ff];
        let taken = g.cells[tr][tf];
        g.cells[fr][ff] = '.';
        g.cells[tr][tf] = match b.get(4) {
            Some(&p) if self.white_to_move => (p as char).to_ascii_uppercase(),
            Some(&p) => p as char,
            None => piece,
        };
        g.white_to_move = !g.white_to_move;
        g.plies += 1;
        let end = if taken.to_ascii_lowercase() == 'k' {
            Some(End::KingTaken)
        } else if g.plies >= CAP || g.moves().is_empty() {
            Some(End::Draw)
        } else {
            None
        };
        (g, end)
    }

    /// Material of the side to move minus the opponent's.
    pub fn material_to_move(&self) -> i64 {
        let mut s = 0;
        for row in &self.cells {
            for &c in row {
                if c != '.' {
                    s += if self.mine(c) { value(c) } else { -value(c) };
                }
            }
        }
        s
    }
}

/// Perft with the same convention as the engine: finished games have no children.
pub fn perft(g: &Grid, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = g.moves();
    if depth == 1 {
        return moves.len() as u64;
    }
    moves
        .iter()
        .map(|m| match g.play(m) {
            (_, Some(_)) => 0,
            (child, None) => perft(&child, depth - 1),
        })
        .sum()
}

/// Exhaustive minimax (no pruning) from the side to move, in reward units.
pub fn minimax(g: &Grid, depth: u32) -> f64 {
    if g.plies >= CAP {
        return 0.0;
    }
    let moves = g.moves();
    if moves.is_empty() {
        return 0.0;
    }
    if depth == 0 {
        return g.material_to_move() as f64 / 1000.0;
    }
    moves
        .iter()
        .map(|m| match g.play(m) {
            (_, Some(End::KingTaken)) => 60.0,
            (_, Some(End::Draw)) => 0.0,
            (child, None) => -minimax(&child, depth - 1),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A_t = sum_l (gamma lambda)^l delta_{t+l}, summed directly within each episode.
pub fn gae_double_loop(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
    bootstrap: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if dones[t] {
                0.0
            } else if t + 1 == n {
                bootstrap
            } else {
                values[t + 1]
            };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for l in t..n {
                sum += w * delta[l];
                if dones[l] {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Boards visited by a uniformly random game, including the last one.
pub fn random_playout(rng: &mut ChaCha8Rng) -> Vec<Board> {
    let mut board = Board::initial();
    let mut seen = vec![board];
    loop {
        let moves = legal_moves(&board);
        if moves.is_empty() {
            return seen;
        }
        let mv = moves[rng.gen_range(0..moves.len())];
        let out = apply_move(&board, mv).unwrap();
        board = out.board;
        seen.push(board);
        if out.status.is_over() {
            return seen;
        }
    }
}

const FD_STEP: f64 = 1e-6;

fn gradcheck_config(actions: usize) -> NetConfig {
    NetConfig {
        channels: 3,
        hidden: 5,
        actions,
        dropout: 0.0,
    }
}

fn random_planes(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f32; 25]> {
    (0..n)
        .map(|_| {
            let mut p = [0f32; 25];
            for v in &mut p {
                *v = rng.gen_range(-1.0..1.0);
            }
            p
        })
        .collect()
}

fn perturbed(rng: &mut ChaCha8Rng, actions: usize) -> Network<f64> {
    let mut net = Network::<f64>::init(gradcheck_config(actions), rng);
    for t in &mut net.params.tensors {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    for (i, b) in net.buffers.iter_mut().enumerate() {
        for v in b.iter_mut() {
            *v = if i % 2 == 0 {
                rng.gen_range(-0.5..0.5)
            } else {
                rng.gen_range(0.5..2.0)
            };
        }
    }
    net
}

/// Scalar probe loss `sum(cl * logits) + sum(cv * values)`.
fn probe_loss(net: &mut Network<f64>, planes: &[[f32; 25]], mode: Mode, cl: &[f64], cv: &[f64]) -> f64 {
    let saved = net.buffers.clone();
    let out = net.forward(planes, mode, &mut ChaCha8Rng::seed_from_u64(0));
    net.buffers = saved;
    out.logits.iter().zip(cl).map(|(a, b)| a * b).sum::<f64>()
        + out.values.iter().zip(cv).map(|(a, b)| a * b).sum::<f64>()
}

/// Largest relative error between backward and central differences over every
/// parameter, for one random draw of parameters, buffers and inputs.
pub fn gradcheck(seed: u64, mode: Mode, batch: usize, actions: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = perturbed(&mut rng, actions);
    let planes = random_planes(&mut rng, batch);
    let cl: Vec<f64> = (0..batch * actions).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cv: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let saved = net.buffers.clone();
    let out = net.forward(&planes, mode, &mut ChaCha8Rng::seed_from_u64(0));
    net.buffers = saved;
    let grads = net.backward(&out.cache, &cl, &cv);

    let mut worst = 0.0f64;
    for ti in 0..net.params.tensors.len() {
        for j in 0..net.params.tensors[ti].len() {
            let orig = net.params.tensors[ti][j];
            net.params.tensors[ti][j] = orig + FD_STEP;
            let up = probe_loss(&mut net, &planes, mode, &cl, &cv);
            net.params.tensors[ti][j] = orig - FD_STEP;
            let down = probe_loss(&mut net, &planes, mode, &cl, &cv);
            net.params.tensors[ti][j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.tensors[ti][j];
            let scale = numeric.abs().max(analytic.abs()).max(1e-3);
            worst = worst.max((numeric - analytic).abs() / scale);
        }
    }
    worst
}
