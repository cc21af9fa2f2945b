//! Dense action indices, legal-action masks and network observations.
//!
//! Ordinary moves and queen promotions use `from * 25 + to`. Under-promotions
//! get 39 extra slots: the 13 promotion (from, to) pairs expressed in white's
//! orientation, times {knight, bishop, rook}. Black under-promotions reuse the
//! same slots with ranks reflected, so decoding needs the side to move.

use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

use crate::engine::{legal_moves, Board, Color, Move, PieceKind, Square, NUM_SQUARES};

pub const BASE_ACTIONS: usize = NUM_SQUARES * NUM_SQUARES;
pub const UNDERPROMOTIONS: [PieceKind; 3] = [PieceKind::Knight, PieceKind::Bishop, PieceKind::Rook];
pub const NUM_PROMOTION_PAIRS: usize = 13;
/// Size of the policy output.
pub const NUM_ACTIONS: usize = BASE_ACTIONS + NUM_PROMOTION_PAIRS * UNDERPROMOTIONS.len();

/// Scale from material points to plane / reward units.
pub const POINTS_PER_UNIT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u16);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// What an action index denotes, independent of the position.
///
/// For under-promotion slots the squares are in white's orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionDescriptor {
    pub from: Square,
    pub to: Square,
    pub underpromotion: Option<PieceKind>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodingError {
    #[error("action mask has no legal entries")]
    EmptyMask,
    #[error("logits length {found} does not match mask length {expected}")]
    LengthMismatch { found: usize, expected: usize },
    #[error("action {0} does not decode to a move in this position")]
    Undecodable(u16),
}

pub struct ActionTable {
    backward: Vec<ActionDescriptor>,
    // white-oriented (from, to) -> promotion pair slot
    pair_slot: [[Option<u8>; NUM_SQUARES]; NUM_SQUARES],
}

impl ActionTable {
    pub fn build() -> ActionTable {
        let mut backward = Vec::with_capacity(NUM_ACTIONS);
        for from in Square::all() {
            for to in Square::all() {
                backward.push(ActionDescriptor {
                    from,
                    to,
                    underpromotion: None,
                });
            }
        }
        let mut pairs = Vec::new();
        for from in Square::all().filter(|s| s.rank() == 3) {
            for df in -1..=1 {
                if let Some(to) = from.offset(df, 1) {
                    pairs.push((from, to));
                }
            }
        }
        pairs.sort();
        assert_eq!(pairs.len(), NUM_PROMOTION_PAIRS);
        let mut pair_slot = [[None; NUM_SQUARES]; NUM_SQUARES];
        for (slot, &(from, to)) in pairs.iter().enumerate() {
            pair_slot[from.index()][to.index()] = Some(slot as u8);
            for piece in UNDERPROMOTIONS {
                backward.push(ActionDescriptor {
                    from,
                    to,
                    underpromotion: Some(piece),
                });
            }
        }
        debug_assert_eq!(backward.len(), NUM_ACTIONS);
        ActionTable {
            backward,
            pair_slot,
        }
    }

    /// Process-wide shared table.
    pub fn global() -> &'static ActionTable {
        static TABLE: OnceLock<ActionTable> = OnceLock::new();
        TABLE.get_or_init(ActionTable::build)
    }

    pub fn len(&self) -> usize {
        self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backward.is_empty()
    }

    pub fn descriptor(&self, id: ActionId) -> ActionDescriptor {
        self.backward[id.index()]
    }

    /// Index of `mv` played by `mover`.
    ///
    /// Panics if `mv` is an under-promotion on a non-promotion (from, to) pair,
    /// which the move generator never produces.
    pub fn encode(&self, mv: Move, mover: Color) -> ActionId {
        match mv.promotion {
            None | Some(PieceKind::Queen) => {
                ActionId((mv.from.index() * NUM_SQUARES + mv.to.index()) as u16)
            }
            Some(piece) => {
                let (from, to) = match mover {
                    Color::White => (mv.from, mv.to),
                    Color::Black => (mv.from.flip_rank(), mv.to.flip_rank()),
                };
                let slot = self.pair_slot[from.index()][to.index()]
                    .unwrap_or_else(|| panic!("{mv} is not a promotion move"));
                let piece_idx = UNDERPROMOTIONS
                    .iter()
                    .position(|&p| p == piece)
                    .expect("under-promotion piece");
                ActionId((BASE_ACTIONS + slot as usize * 3 + piece_idx) as u16)
            }
        }
    }

    /// Move denoted by `id` for the side to move of `board`.
    ///
    /// Does not check legality; a pawn reaching its last rank through a base
    /// slot is read as a queen promotion.
    pub fn decode(&self, id: ActionId, board: &Board) -> Result<Move, EncodingError> {
        let desc = *self
            .backward
            .get(id.index())
            .ok_or(EncodingError::Undecodable(id.0))?;
        let mover = board.side_to_move();
        match desc.underpromotion {
            None => {
                let piece = board.get(desc.from).ok_or(EncodingError::Undecodable(id.0))?;
                let promotion = (piece.kind == PieceKind::Pawn
                    && desc.to.rank() == mover.promotion_rank())
                .then_some(PieceKind::Queen);
                Ok(Move {
                    from: desc.from,
                    to: desc.to,
                    promotion,
                })
            }
            Some(piece) => {
                let (from, to) = match mover {
                    Color::White => (desc.from, desc.to),
                    Color::Black => (desc.from.flip_rank(), desc.to.flip_rank()),
                };
                Ok(Move::with_promotion(from, to, piece))
            }
        }
    }

    /// Legal action ids for the side to move, ascending.
    pub fn legal_actions(&self, board: &Board) -> Vec<ActionId> {
        let mover = board.side_to_move();
        let mut ids: Vec<ActionId> = legal_moves(board)
            .into_iter()
            .map(|m| self.encode(m, mover))
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Audit dump: one `index from to promo` line per action.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, d) in self.backward.iter().enumerate() {
            let promo = d.underpromotion.map_or('-', |p| p.letter());
            writeln!(out, "{i} {} {} {promo}", d.from, d.to).unwrap();
        }
        out
    }
}

/// Network input: signed piece values in white's orientation plus legal mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub plane: [f32; NUM_SQUARES],
    /// Legal action ids for the observing side, ascending.
    pub legal: Vec<ActionId>,
}

impl Observation {
    /// Dense 0/1 mask of length [`NUM_ACTIONS`].
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; NUM_ACTIONS];
        for a in &self.legal {
            mask[a.index()] = true;
        }
        mask
    }

    pub fn is_legal(&self, a: ActionId) -> bool {
        self.legal.binary_search(&a).is_ok()
    }
}

/// Piece plane scaled by 1/1000, white positive, never flipped.
pub fn board_plane(board: &Board) -> [f32; NUM_SQUARES] {
    let mut plane = [0.0f32; NUM_SQUARES];
    for (sq, p) in board.pieces() {
        plane[sq.index()] = (p.signed_value() as f64 / POINTS_PER_UNIT) as f32;
    }
    plane
}

/// Observation of `board` for `for_color`.
///
/// The mask is computed for `for_color` moving; it only describes real
/// options when `for_color` is the side to move.
pub fn observe(board: &Board, for_color: Color) -> Observation {
    let mut view = *board;
    view.set_side_to_move(for_color);
    Observation {
        plane: board_plane(board),
        legal: ActionTable::global().legal_actions(&view),
    }
}

/// Softmax over the legal entries, exactly zero elsewhere.
pub fn mask_policy(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, EncodingError> {
    if logits.len() != mask.len() {
        return Err(EncodingError::LengthMismatch {
            found: logits.len(),
            expected: mask.len(),
        });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(EncodingError::EmptyMask);
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Log-probabilities of the legal actions (same order as `legal`).
pub fn masked_log_softmax(logits: &[f64], legal: &[ActionId]) -> Vec<f64> {
    assert!(!legal.is_empty(), "masked softmax over an empty action set");
    let max = legal
        .iter()
        .map(|a| logits[a.index()])
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + legal
            .iter()
            .map(|a| (logits[a.index()] - max).exp())
            .sum::<f64>()
            .ln();
    legal.iter().map(|a| logits[a.index()] - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::initial_board;

    fn sq(s: &str) -> Square {
        s.parse().unwrap()
    }

    #[test]
    fn table_size() {
        let t = ActionTable::global();
        assert_eq!(t.len(), 664);
        assert_eq!(NUM_ACTIONS, 664);
    }

    #[test]
    fn base_formula() {
        let t = ActionTable::global();
        let id = t.encode(Move::new(sq("a1"), sq("a2")), Color::White);
        assert_eq!(id, ActionId(5));
    }

    #[test]
    fn underpromotion_slots_mirror_for_black() {
        let t = ActionTable::global();
        let w = t.encode(Move::with_promotion(sq("b4"), sq("c5"), PieceKind::Rook), Color::White);
        let b = t.encode(Move::with_promotion(sq("b2"), sq("c1"), PieceKind::Rook), Color::Black);
        assert_eq!(w, b);
        assert!(w.index() >= BASE_ACTIONS);
        let board: Board = "....k\n.....\n.....\n.p...\nK.N..\nb 5".parse().unwrap();
        assert_eq!(
            t.decode(b, &board).unwrap(),
            Move::with_promotion(sq("b2"), sq("c1"), PieceKind::Rook)
        );
    }

    #[test]
    fn queen_promotion_uses_base_slot() {
        let t = ActionTable::global();
        let board: Board = "....k\nP....\n.....\n.....\nK....\nw 9".parse().unwrap();
        let mv = Move::with_promotion(sq("a4"), sq("a5"), PieceKind::Queen);
        let id = t.encode(mv, Color::White);
        assert_eq!(id.index(), sq("a4").index() * 25 + sq("a5").index());
        assert_eq!(t.decode(id, &board).unwrap(), mv);
    }

    #[test]
    fn initial_observation() {
        let b = initial_board();
        let obs = observe(&b, Color::White);
        assert_eq!(obs.legal.len(), 7);
        for file in 0..5 {
            assert_eq!(obs.plane[5 + file], 0.1);
            assert_eq!(obs.plane[15 + file], -0.1);
        }
        assert_eq!(obs.plane[sq("e1").index()], 60.0);
        assert_eq!(obs.plane[sq("e5").index()], -60.0);
        assert_eq!(obs.plane, observe(&b, Color::Black).plane);
        assert_eq!(obs.mask().iter().filter(|&&m| m).count(), 7);
    }

    #[test]
    fn mask_policy_cases() {
        let mask = vec![true; 4];
        let p = mask_policy(&[0.3; 4], &mask).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));

        let p = mask_policy(&[5.0, -2.0, 9.0], &[false, true, false]).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);

        let p = mask_policy(&[0.0, 3f64.ln()], &[true, true]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);

        assert_eq!(mask_policy(&[1.0, 2.0], &[false, false]), Err(EncodingError::EmptyMask));
        assert!(matches!(
            mask_policy(&[1.0], &[true, false]),
            Err(EncodingError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn log_softmax_agrees_with_mask_policy() {
        let logits: Vec<f64> = (0..NUM_ACTIONS).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let legal = vec![ActionId(3), ActionId(40), ActionId(600)];
        let mut mask = vec![false; NUM_ACTIONS];
        for a in &legal {
            mask[a.index()] = true;
        }
        let p = mask_policy(&logits, &mask).unwrap();
        let lp = masked_log_softmax(&logits, &legal);
        for (a, l) in legal.iter().zip(lp) {
            assert!((p[a.index()] - l.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn dump_lines() {
        let dump = ActionTable::global().dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), NUM_ACTIONS);
        assert_eq!(lines[5], "5 a1 a2 -");
        assert_eq!(lines[625], "625 a4 a5 n");
    }
}
