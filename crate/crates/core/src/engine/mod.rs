//! Gardner minichess rules under king-capture termination.

mod board;
mod movegen;

pub use board::{
    Board, Color, GameResult, GameStatus, Move, Piece, PieceKind, Square, TerminationCause,
    BOARD_SIZE, MOVE_CAP, NUM_SQUARES,
};
pub use movegen::{apply_move, divide, has_legal_move, legal_moves, material_score, perft, MoveOutcome};

pub(crate) use movegen::make_move_unchecked;

pub fn initial_board() -> Board {
    Board::initial()
}
