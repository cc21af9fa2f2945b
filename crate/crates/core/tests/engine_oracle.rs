mod common;

use common::{perft as oracle_perft, random_playout, Grid};
use gardner::engine::{apply_move, initial_board, legal_moves, perft, Board, Color, GameStatus, TerminationCause};
use gardner::rng::stream;
use proptest::prelude::*;

#[test]
fn perft_matches_oracle_and_frozen_counts() {
    let b = initial_board();
    let g = Grid::from_board(&b);
    let frozen = [1, 7, 53, 510, 5000];
    for (d, &want) in frozen.iter().enumerate() {
        let d = d as u32;
        assert_eq!(oracle_perft(&g, d), want, "oracle depth {d}");
        assert_eq!(perft(&b, d), want, "engine depth {d}");
    }
}

fn engine_moves(b: &Board) -> Vec<String> {
    let mut v: Vec<String> = legal_moves(b).iter().map(|m| m.to_string()).collect();
    v.sort();
    v
}

#[test]
fn random_positions_revalidate_against_oracle() {
    let mut checked = 0;
    let mut i = 0;
    while checked < 20_000 {
        for b in random_playout(&mut stream(11, i)) {
            if b.half_moves() >= 150 {
                continue;
            }
            assert_eq!(engine_moves(&b), Grid::from_board(&b).moves(), "\n{b}");
            checked += 1;
        }
        i += 1;
    }
}

#[test]
fn stalemate_position_is_a_draw() {
    let b: Board = "..bq.\nppKpn\nqrbpq\npqqpq\nqbbkn\nw 40".parse().unwrap();
    let mv = legal_moves(&b).into_iter().find(|m| m.to_string() == "c4d5").unwrap();
    let out = apply_move(&b, mv).unwrap();
    assert!(legal_moves(&out.board).is_empty());
    assert!(Grid::from_board(&out.board).moves().is_empty());
    assert_eq!(
        out.status,
        GameStatus::Over {
            result: gardner::engine::GameResult::Draw,
            cause: TerminationCause::Stalemate
        }
    );
}

fn arb_position() -> impl Strategy<Value = Board> {
    (0u64..10_000, 0usize..200).prop_map(|(seed, k)| {
        let seen = random_playout(&mut stream(77, seed));
        seen[k % seen.len()]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mirrored_position_has_mirrored_moves(b in arb_position()) {
        prop_assume!(b.half_moves() < 150);
        let m = b.mirrored();
        prop_assert_eq!(legal_moves(&b).len(), legal_moves(&m).len());
        prop_assert_eq!(perft(&b, 2), perft(&m, 2));
        prop_assert_eq!(b.material_score(Color::White), m.material_score(Color::Black));
    }

    #[test]
    fn material_is_antisymmetric(b in arb_position()) {
        prop_assert_eq!(b.material_score(Color::White), -b.material_score(Color::Black));
    }

    #[test]
    fn every_generated_move_applies(b in arb_position()) {
        prop_assume!(b.half_moves() < 150);
        for mv in legal_moves(&b) {
            let out = apply_move(&b, mv).unwrap();
            prop_assert_eq!(out.board.half_moves(), b.half_moves() + 1);
            prop_assert_eq!(out.board.side_to_move(), b.side_to_move().opponent());
            prop_assert_eq!(mv.promotion.is_some(), {
                let p = b.get(mv.from).unwrap();
                p.kind == gardner::engine::PieceKind::Pawn && mv.to.rank() == b.side_to_move().promotion_rank()
            });
        }
    }
}
