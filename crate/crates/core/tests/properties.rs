use bottleneck_core::equilibria::{
    best_response_dynamics, enumerate_nash, price_of_anarchy, rosenthal_potential, StateSpace,
    DEFAULT_STATE_CAP,
};
use bottleneck_core::transform::{check_partition, cover_cost, eq_cost, pms_partition};
use bottleneck_core::{Game, Profile};
use proptest::prelude::*;

/// Games with up to four players, up to five resources and one to three
/// strategies each, plus a profile of that game.
fn game_and_profile() -> impl Strategy<Value = (Game, Profile)> {
    (1usize..=5, 1u32..=3)
        .prop_flat_map(|(z, m)| {
            let strategy = (1u32..(1 << z))
                .prop_map(move |mask| (0..z).filter(|r| mask >> r & 1 == 1).collect::<Vec<_>>());
            let player = prop::collection::vec(strategy, 1..=3);
            (Just(z), Just(m), prop::collection::vec(player, 1..=4))
        })
        .prop_flat_map(|(z, m, players)| {
            let choices: Vec<_> = players.iter().map(|p| 0..p.len()).collect();
            (
                Just(Game::new(z, m, players).unwrap()),
                choices.prop_map(Profile::new),
            )
        })
}

fn partition_input() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<u32>, u32)> {
    (1usize..=8, 1usize..=8, 1u32..=3)
        .prop_flat_map(|(k, l, m)| (Just(k), Just(l), Just(m), prop::collection::vec(1u32..=25, k + l)))
        .prop_map(|(k, l, m, congestion)| {
            (
                (0..k).collect::<Vec<_>>(),
                (k..k + l).collect::<Vec<_>>(),
                congestion,
                m,
            )
        })
        .prop_filter(
            "optimal side must cover the equilibrium cost",
            |(eq, opt, c, m)| cover_cost(opt, c, *m).unwrap() >= eq_cost(eq, c, *m).unwrap(),
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn congestion_counts_every_chosen_resource((game, profile) in game_and_profile()) {
        let cv = game.congestion_of(&profile).unwrap();
        let chosen: usize = (0..game.num_players()).map(|i| game.chosen(&profile, i).len()).sum();
        prop_assert_eq!(cv.total(), chosen as u64);
        prop_assert_eq!(u64::from(cv.bottleneck()), cv.as_slice().iter().copied().max().unwrap() as u64);
    }

    #[test]
    fn potential_tracks_unilateral_changes((game, profile) in game_and_profile(), who in any::<prop::sample::Index>(), to in any::<prop::sample::Index>()) {
        let i = who.index(game.num_players());
        let mut moved = profile.clone();
        moved.set_choice(i, to.index(game.strategies(i).len()));
        let dphi = rosenthal_potential(&game, &moved).unwrap() as i128 - rosenthal_potential(&game, &profile).unwrap() as i128;
        let dcost = game.player_cost(&moved, i).unwrap() as i128 - game.player_cost(&profile, i).unwrap() as i128;
        prop_assert_eq!(dphi, dcost);
    }

    #[test]
    fn dynamics_stop_at_a_nash_state_within_the_potential((game, profile) in game_and_profile()) {
        let phi = rosenthal_potential(&game, &profile).unwrap();
        let report = best_response_dynamics(&game, &profile, phi as u64).unwrap();
        prop_assert!(report.is_nash);
        prop_assert!(report.moves.len() as u128 <= phi);
        prop_assert!(report.moves.iter().all(|m| m.cost_after < m.cost_before));
    }

    #[test]
    fn pure_equilibria_always_exist((game, _) in game_and_profile()) {
        let poa = price_of_anarchy(&game, DEFAULT_STATE_CAP).unwrap();
        prop_assert!(poa.nash_count > 0);
        prop_assert!(poa.c >= poa.c_star);
    }

    #[test]
    fn equilibria_do_not_depend_on_player_order((game, _) in game_and_profile()) {
        let n = game.num_players();
        let reversed: Vec<_> = game.players().iter().rev().map(|p| {
            p.strategies().iter().map(|s| s.resources().to_vec()).collect::<Vec<_>>()
        }).collect();
        let flipped = Game::new(game.num_resources(), game.degree(), reversed).unwrap();
        let mut a: Vec<Vec<usize>> = enumerate_nash(&game, DEFAULT_STATE_CAP).unwrap()
            .into_iter().map(|p| p.choices().to_vec()).collect();
        let mut b: Vec<Vec<usize>> = enumerate_nash(&flipped, DEFAULT_STATE_CAP).unwrap()
            .into_iter().map(|p| p.choices().iter().rev().copied().collect()).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        prop_assert_eq!(
            price_of_anarchy(&game, DEFAULT_STATE_CAP).unwrap().c,
            price_of_anarchy(&flipped, DEFAULT_STATE_CAP).unwrap().c
        );
        prop_assert_eq!(flipped.num_players(), n);
    }

    #[test]
    fn state_decoding_matches_iteration((game, _) in game_and_profile()) {
        let space = StateSpace::new(&game, DEFAULT_STATE_CAP).unwrap();
        for (k, p) in space.iter().enumerate() {
            prop_assert_eq!(space.decode(k as u64), p);
        }
    }

    #[test]
    fn game_json_round_trips((game, _) in game_and_profile()) {
        let back = Game::from_json(&game.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, game);
    }

    #[test]
    fn partitions_satisfy_their_guarantees((eq, opt, congestion, m) in partition_input()) {
        let pairs = pms_partition(&eq, &opt, &congestion, m).unwrap();
        prop_assert!(check_partition(&eq, &opt, &congestion, m, &pairs).is_ok(), "{:?}", pairs);
        if opt.len() >= 2 && eq.len() >= 2 {
            prop_assert!(pairs.len() >= 2);
        }
    }
}
