use std::fmt;
use std::str::FromStr;

use crate::error::EngineError;

pub const BOARD_SIZE: usize = 5;
pub const NUM_SQUARES: usize = BOARD_SIZE * BOARD_SIZE;

/// Half-move count at which an unfinished game is declared drawn.
pub const MOVE_CAP: u32 = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square(u8);

impl Square {
    pub fn new(file: u8, rank: u8) -> Option<Square> {
        (file < BOARD_SIZE as u8 && rank < BOARD_SIZE as u8).then(|| Square(rank * 5 + file))
    }

    pub fn from_index(index: usize) -> Option<Square> {
        (index < NUM_SQUARES).then_some(Square(index as u8))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn file(self) -> u8 {
        self.0 % 5
    }

    #[inline]
    pub fn rank(self) -> u8 {
        self.0 / 5
    }

    /// Square shifted by (`df`, `dr`), or `None` when it leaves the board.
    #[inline]
    pub fn offset(self, df: i8, dr: i8) -> Option<Square> {
        let f = self.file() as i8 + df;
        let r = self.rank() as i8 + dr;
        if (0..5).contains(&f) && (0..5).contains(&r) {
            Some(Square((r * 5 + f) as u8))
        } else {
            None
        }
    }

    /// Same file, rank reflected (a1 <-> a5).
    pub fn flip_rank(self) -> Square {
        Square((4 - self.rank()) * 5 + self.file())
    }

    pub fn all() -> impl Iterator<Item = Square> {
        (0..NUM_SQUARES as u8).map(Square)
    }
}

impl fmt::Display for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", (b'a' + self.file()) as char, self.rank() + 1)
    }
}

impl FromStr for Square {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != 2 {
            return Err(EngineError::Parse(format!("bad square {s:?}")));
        }
        let file = bytes[0].wrapping_sub(b'a');
        let rank = bytes[1].wrapping_sub(b'1');
        Square::new(file, rank).ok_or_else(|| EngineError::Parse(format!("bad square {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Black,
}

impl Color {
    #[inline]
    pub fn opponent(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    /// +1 for white, -1 for black.
    #[inline]
    pub fn sign(self) -> i32 {
        match self {
            Color::White => 1,
            Color::Black => -1,
        }
    }

    /// Direction pawns of this color advance in.
    #[inline]
    pub fn forward(self) -> i8 {
        match self {
            Color::White => 1,
            Color::Black => -1,
        }
    }

    /// Rank on which this color's pawns promote.
    #[inline]
    pub fn promotion_rank(self) -> u8 {
        match self {
            Color::White => 4,
            Color::Black => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Color::White => "white",
            Color::Black => "black",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Color {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "white" | "w" => Ok(Color::White),
            "black" | "b" => Ok(Color::Black),
            _ => Err(EngineError::Parse(format!("bad color {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PieceKind {
    Pawn,
    Knight,
    Bishop,
    Rook,
    Queen,
    King,
}

impl PieceKind {
    pub const ALL: [PieceKind; 6] = [
        PieceKind::Pawn,
        PieceKind::Knight,
        PieceKind::Bishop,
        PieceKind::Rook,
        PieceKind::Queen,
        PieceKind::King,
    ];

    /// Pieces a pawn may promote to, queen first.
    pub const PROMOTIONS: [PieceKind; 4] = [
        PieceKind::Queen,
        PieceKind::Rook,
        PieceKind::Bishop,
        PieceKind::Knight,
    ];

    /// Material value in points.
    #[inline]
    pub fn value(self) -> i32 {
        match self {
            PieceKind::Pawn => 100,
            PieceKind::Knight => 300,
            PieceKind::Bishop => 300,
            PieceKind::Rook => 500,
            PieceKind::Queen => 900,
            PieceKind::King => 60_000,
        }
    }

    pub fn letter(self) -> char {
        match self {
            PieceKind::Pawn => 'p',
            PieceKind::Knight => 'n',
            PieceKind::Bishop => 'b',
            PieceKind::Rook => 'r',
            PieceKind::Queen => 'q',
            PieceKind::King => 'k',
        }
    }

    pub fn from_letter(c: char) -> Option<PieceKind> {
        Some(match c.to_ascii_lowercase() {
            'p' => PieceKind::Pawn,
            'n' => PieceKind::Knight,
            'b' => PieceKind::Bishop,
            'r' => PieceKind::Rook,
            'q' => PieceKind::Queen,
            'k' => PieceKind::King,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Piece {
    pub color: Color,
    pub kind: PieceKind,
}

impl Piece {
    pub const fn new(color: Color, kind: PieceKind) -> Piece {
        Piece { color, kind }
    }

    /// Piece value signed by color (white positive).
    #[inline]
    pub fn signed_value(self) -> i32 {
        self.color.sign() * self.kind.value()
    }

    pub fn to_char(self) -> char {
        let c = self.kind.letter();
        match self.color {
            Color::White => c.to_ascii_uppercase(),
            Color::Black => c,
        }
    }

    pub fn from_char(c: char) -> Option<Piece> {
        let kind = PieceKind::from_letter(c)?;
        let color = if c.is_ascii_uppercase() {
            Color::White
        } else {
            Color::Black
        };
        Some(Piece { color, kind })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    pub from: Square,
    pub to: Square,
    pub promotion: Option<PieceKind>,
}

impl Move {
    pub fn new(from: Square, to: Square) -> Move {
        Move {
            from,
            to,
            promotion: None,
        }
    }

    pub fn with_promotion(from: Square, to: Square, piece: PieceKind) -> Move {
        Move {
            from,
            to,
            promotion: Some(piece),
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.from, self.to)?;
        if let Some(p) = self.promotion {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameResult {
    WhiteWin,
    BlackWin,
    Draw,
}

impl GameResult {
    pub fn winner(self) -> Option<Color> {
        match self {
            GameResult::WhiteWin => Some(Color::White),
            GameResult::BlackWin => Some(Color::Black),
            GameResult::Draw => None,
        }
    }

    pub fn win_for(color: Color) -> GameResult {
        match color {
            Color::White => GameResult::WhiteWin,
            Color::Black => GameResult::BlackWin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationCause {
    KingCaptured,
    Stalemate,
    MoveCapReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameStatus {
    Ongoing,
    Over {
        result: GameResult,
        cause: TerminationCause,
    },
}

impl GameStatus {
    #[inline]
    pub fn is_over(self) -> bool {
        !matches!(self, GameStatus::Ongoing)
    }

    pub fn result(self) -> Option<GameResult> {
        match self {
            GameStatus::Ongoing => None,
            GameStatus::Over { result, .. } => Some(result),
        }
    }

    pub fn cause(self) -> Option<TerminationCause> {
        match self {
            GameStatus::Ongoing => None,
            GameStatus::Over { cause, .. } => Some(cause),
        }
    }

    /// Short label used in logs: `ongoing`, `white_win`, `black_win`, `draw`.
    pub fn label(self) -> &'static str {
        match self.result() {
            None => "ongoing",
            Some(GameResult::WhiteWin) => "white_win",
            Some(GameResult::BlackWin) => "black_win",
            Some(GameResult::Draw) => "draw",
        }
    }
}

/// Gardner position: 5x5 mailbox, side to move and half-move counter.
///
/// Square index is `rank * 5 + file`, rank 0 being white's back rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Board {
    squares: [Option<Piece>; NUM_SQUARES],
    side_to_move: Color,
    half_moves: u32,
}

impl Board {
    pub fn empty(side_to_move: Color) -> Board {
        Board {
            squares: [None; NUM_SQUARES],
            side_to_move,
            half_moves: 0,
        }
    }

    /// Standard Gardner setup: RNBQK on white's back rank, mirrored for black.
    pub fn initial() -> Board {
        use PieceKind::*;
        let back = [Rook, Knight, Bishop, Queen, King];
        let mut b = Board::empty(Color::White);
        for (file, kind) in back.iter().enumerate() {
            let f = file as u8;
            b.set(Square::new(f, 0).unwrap(), Some(Piece::new(Color::White, *kind)));
            b.set(Square::new(f, 1).unwrap(), Some(Piece::new(Color::White, Pawn)));
            b.set(Square::new(f, 3).unwrap(), Some(Piece::new(Color::Black, Pawn)));
            b.set(Square::new(f, 4).unwrap(), Some(Piece::new(Color::Black, *kind)));
        }
        b
    }

    #[inline]
    pub fn get(&self, sq: Square) -> Option<Piece> {
        self.squares[sq.index()]
    }

    #[inline]
    pub fn set(&mut self, sq: Square, piece: Option<Piece>) {
        self.squares[sq.index()] = piece;
    }

    #[inline]
    pub fn side_to_move(&self) -> Color {
        self.side_to_move
    }

    pub fn set_side_to_move(&mut self, color: Color) {
        self.side_to_move = color;
    }

    #[inline]
    pub fn half_moves(&self) -> u32 {
        self.half_moves
    }

    pub fn set_half_moves(&mut self, n: u32) {
        self.half_moves = n;
    }

    pub fn squares(&self) -> &[Option<Piece>; NUM_SQUARES] {
        &self.squares
    }

    pub fn pieces(&self) -> impl Iterator<Item = (Square, Piece)> + '_ {
        self.squares
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (Square(i as u8), p)))
    }

    pub fn piece_count(&self) -> usize {
        self.squares.iter().filter(|p| p.is_some()).count()
    }

    pub fn king_square(&self, color: Color) -> Option<Square> {
        self.pieces()
            .find(|(_, p)| p.color == color && p.kind == PieceKind::King)
            .map(|(sq, _)| sq)
    }

    /// Material of `color` minus material of its opponent, in points.
    pub fn material_score(&self, color: Color) -> i32 {
        color.sign() * self.squares.iter().flatten().map(|p| p.signed_value()).sum::<i32>()
    }

    /// Color-swapped, rank-reflected copy with the same half-move count.
    pub fn mirrored(&self) -> Board {
        let mut out = Board::empty(self.side_to_move.opponent());
        out.half_moves = self.half_moves;
        for (sq, p) in self.pieces() {
            out.set(
                sq.flip_rank(),
                Some(Piece::new(p.color.opponent(), p.kind)),
            );
        }
        out
    }
}

impl Default for Board {
    fn default() -> Self {
        Board::initial()
    }
}

/// Five rank lines (rank 5 first), then `<w|b> <half-moves>`.
impl fmt::Display for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rank in (0..5u8).rev() {
            for file in 0..5u8 {
                let c = self
                    .get(Square::new(file, rank).unwrap())
                    .map_or('.', Piece::to_char);
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        let stm = match self.side_to_move {
            Color::White => 'w',
            Color::Black => 'b',
        };
        write!(f, "{stm} {}", self.half_moves)
    }
}

impl FromStr for Board {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lines: Vec<&str> = s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if lines.len() != 6 {
            return Err(EngineError::Parse(format!(
                "expected 6 non-empty lines, got {}",
                lines.len()
            )));
        }
        let mut b = Board::empty(Color::White);
        for (row, line) in lines[..5].iter().enumerate() {
            let rank = 4 - row as u8;
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != 5 {
                return Err(EngineError::Parse(format!("rank line {line:?} is not 5 wide")));
            }
            for (file, c) in chars.into_iter().enumerate() {
                let sq = Square::new(file as u8, rank).unwrap();
                match c {
                    '.' => {}
                    c => {
                        let p = Piece::from_char(c)
                            .ok_or_else(|| EngineError::Parse(format!("bad piece {c:?}")))?;
                        b.set(sq, Some(p));
                    }
                }
            }
        }
        let mut parts = lines[5].split_whitespace();
        b.side_to_move = match parts.next() {
            Some("w") => Color::White,
            Some("b") => Color::Black,
            other => return Err(EngineError::Parse(format!("bad side to move {other:?}"))),
        };
        b.half_moves = parts
            .next()
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| EngineError::Parse("missing half-move count".into()))?;
        if parts.next().is_some() {
            return Err(EngineError::Parse("trailing tokens after half-move count".into()));
        }
        Ok(b)
    }
}
