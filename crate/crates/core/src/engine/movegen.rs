use super::board::*;
use crate::error::EngineError;

const KNIGHT_STEPS: [(i8, i8); 8] = [
    (1, 2),
    (2, 1),
    (2, -1),
    (1, -2),
    (-1, -2),
    (-2, -1),
    (-2, 1),
    (-1, 2),
];
const KING_STEPS: [(i8, i8); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];
const ROOK_DIRS: [(i8, i8); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];
const BISHOP_DIRS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, -1), (-1, 1)];

/// Result of playing one half-move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveOutcome {
    pub board: Board,
    pub status: GameStatus,
    pub captured: Option<PieceKind>,
}

/// Every move available to the side to move under king-capture rules.
///
/// Moving into attack is allowed; there is no check. Pawns step one square,
/// capture diagonally and promote on the last rank to any of Q, R, B, N.
pub fn legal_moves(board: &Board) -> Vec<Move> {
    let mut out = Vec::with_capacity(32);
    generate_into(board, &mut out);
    out
}

pub(crate) fn generate_into(board: &Board, out: &mut Vec<Move>) {
    let us = board.side_to_move();
    for (from, piece) in board.pieces() {
        if piece.color != us {
            continue;
        }
        match piece.kind {
            PieceKind::Pawn => pawn_moves(board, from, us, out),
            PieceKind::Knight => step_moves(board, from, us, &KNIGHT_STEPS, out),
            PieceKind::King => step_moves(board, from, us, &KING_STEPS, out),
            PieceKind::Bishop => slide_moves(board, from, us, &BISHOP_DIRS, out),
            PieceKind::Rook => slide_moves(board, from, us, &ROOK_DIRS, out),
            PieceKind::Queen => {
                slide_moves(board, from, us, &ROOK_DIRS, out);
                slide_moves(board, from, us, &BISHOP_DIRS, out);
            }
        }
    }
}

fn push_pawn_move(from: Square, to: Square, us: Color, out: &mut Vec<Move>) {
    if to.rank() == us.promotion_rank() {
        for p in PieceKind::PROMOTIONS {
            out.push(Move::with_promotion(from, to, p));
        }
    } else {
        out.push(Move::new(from, to));
    }
}

fn pawn_moves(board: &Board, from: Square, us: Color, out: &mut Vec<Move>) {
    let dr = us.forward();
    if let Some(to) = from.offset(0, dr) {
        if board.get(to).is_none() {
            push_pawn_move(from, to, us, out);
        }
    }
    for df in [-1, 1] {
        if let Some(to) = from.offset(df, dr) {
            if matches!(board.get(to), Some(p) if p.color != us) {
                push_pawn_move(from, to, us, out);
            }
        }
    }
}

fn step_moves(board: &Board, from: Square, us: Color, steps: &[(i8, i8)], out: &mut Vec<Move>) {
    for &(df, dr) in steps {
        if let Some(to) = from.offset(df, dr) {
            if board.get(to).is_none_or(|p| p.color != us) {
                out.push(Move::new(from, to));
            }
        }
    }
}

fn slide_moves(board: &Board, from: Square, us: Color, dirs: &[(i8, i8)], out: &mut Vec<Move>) {
    for &(df, dr) in dirs {
        let mut cur = from;
        while let Some(to) = cur.offset(df, dr) {
            match board.get(to) {
                None => out.push(Move::new(from, to)),
                Some(p) => {
                    if p.color != us {
                        out.push(Move::new(from, to));
                    }
                    break;
                }
            }
            cur = to;
        }
    }
}

pub fn has_legal_move(board: &Board) -> bool {
    let mut buf = Vec::with_capacity(32);
    generate_into(board, &mut buf);
    !buf.is_empty()
}

/// Plays `mv` without checking it against the move list.
///
/// The caller guarantees `mv` was produced by [`legal_moves`] for `board`.
pub(crate) fn make_move_unchecked(board: &Board, mv: Move) -> MoveOutcome {
    let mover = board.side_to_move();
    let mut next = *board;
    let piece = next.get(mv.from).expect("move from an empty square");
    let captured = next.get(mv.to).map(|p| p.kind);
    let placed = match mv.promotion {
        Some(kind) => Piece::new(mover, kind),
        None => piece,
    };
    next.set(mv.from, None);
    next.set(mv.to, Some(placed));
    next.set_side_to_move(mover.opponent());
    next.set_half_moves(board.half_moves() + 1);

    let status = if captured == Some(PieceKind::King) {
        GameStatus::Over {
            result: GameResult::win_for(mover),
            cause: TerminationCause::KingCaptured,
        }
    } else if next.half_moves() >= MOVE_CAP {
        GameStatus::Over {
            result: GameResult::Draw,
            cause: TerminationCause::MoveCapReached,
        }
    } else if !has_legal_move(&next) {
        GameStatus::Over {
            result: GameResult::Draw,
            cause: TerminationCause::Stalemate,
        }
    } else {
        GameStatus::Ongoing
    };
    MoveOutcome {
        board: next,
        status,
        captured,
    }
}

/// Plays `mv`, rejecting anything not in `legal_moves(board)`.
pub fn apply_move(board: &Board, mv: Move) -> Result<MoveOutcome, EngineError> {
    if !legal_moves(board).contains(&mv) {
        return Err(EngineError::IllegalMove {
            mv: mv.to_string(),
            board: board.to_string(),
        });
    }
    Ok(make_move_unchecked(board, mv))
}

/// Material of `color` minus material of its opponent, in points.
pub fn material_score(board: &Board, color: Color) -> i32 {
    board.material_score(color)
}

/// Leaf positions reachable in exactly `depth` half-moves.
///
/// Games that end before `depth` contribute nothing; a game ending exactly
/// at `depth` counts as one leaf.
pub fn perft(board: &Board, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let mut moves = Vec::with_capacity(32);
    generate_into(board, &mut moves);
    if depth == 1 {
        return moves.len() as u64;
    }
    moves
        .into_iter()
        .map(|mv| {
            let out = make_move_unchecked(board, mv);
            if out.status.is_over() {
                0
            } else {
                perft(&out.board, depth - 1)
            }
        })
        .sum()
}

/// Per-move perft breakdown, sorted by move text.
pub fn divide(board: &Board, depth: u32) -> Vec<(Move, u64)> {
    assert!(depth >= 1);
    let mut rows: Vec<(Move, u64)> = legal_moves(board)
        .into_iter()
        .map(|mv| {
            let out = make_move_unchecked(board, mv);
            let n = if depth == 1 {
                1
            } else if out.status.is_over() {
                0
            } else {
                perft(&out.board, depth - 1)
            };
            (mv, n)
        })
        .collect();
    rows.sort_by_key(|(m, _)| m.to_string());
    rows
}
