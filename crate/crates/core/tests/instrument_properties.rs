//! Property tests for legs, payoffs and the position token.

use panopt_core::instrument::{decode, encode, geometric_grid, lp_value, payoff, Leg, Position, TokenPair};
use proptest::prelude::*;

fn pair() -> TokenPair {
    TokenPair::new("DAI", "ETH").unwrap()
}

fn leg_on_grid() -> impl Strategy<Value = Leg> {
    (-300_000i32..300_000, 0u16..20_000, any::<bool>(), any::<bool>(), 1u8..=15)
        .prop_map(|(tick, width, put, long, ratio)| Leg::from_ticks(tick, width, put, long, ratio).unwrap())
}

fn position_on_grid() -> impl Strategy<Value = Position> {
    prop::collection::vec(leg_on_grid(), 1..=4).prop_map(|legs| Position::new(pair(), legs).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn token_round_trip(position in position_on_grid(), pool_id in any::<u64>()) {
        let token = encode(&position, pool_id).unwrap();
        let (back, id) = decode(&token, pair()).unwrap();
        prop_assert_eq!(id, pool_id);
        prop_assert_eq!(&back, &position);
        prop_assert_eq!(encode(&back, pool_id).unwrap(), token);
    }

    #[test]
    fn token_hex_round_trip(position in position_on_grid(), pool_id in any::<u64>()) {
        let token = encode(&position, pool_id).unwrap();
        let hex = token.to_hex();
        prop_assert_eq!(hex.len(), 64);
        prop_assert_eq!(panopt_core::instrument::PositionToken::from_hex(&hex).unwrap(), token);
    }

    #[test]
    fn scaled_positions_split_into_ratio_and_amount(
        legs in prop::collection::vec(leg_on_grid(), 1..=4),
        amount in 0.01f64..100.0,
    ) {
        // the smallest leg defines one token unit
        let mut legs = legs;
        legs[0].size = 1.0;
        let scaled: Vec<Leg> = legs.iter().map(|l| Leg { size: l.size * amount, ..*l }).collect();
        let position = Position::new(pair(), scaled.clone()).unwrap();
        let (token, got) = position.to_token(7).unwrap();
        prop_assert!((got - amount).abs() <= 1e-12 * amount);
        let (unit, _) = decode(&token, pair()).unwrap();
        for (u, s) in unit.legs.iter().zip(&scaled) {
            prop_assert!((u.size * got - s.size).abs() <= 1e-9 * s.size);
        }
    }
}

#[test]
fn duality_on_dense_grids() {
    let strikes = [0.01, 0.5, 1.0, 7.0, 1500.0, 2000.0, 35_000.0];
    let factors = [1.0, 1.001, 1.05, 1.3, 2.0];
    let spots = geometric_grid(1e-3, 1e5, 400).unwrap();
    let mut checked = 0;
    for &k in &strikes {
        for &r in &factors {
            for is_put in [true, false] {
                for is_long in [true, false] {
                    let leg = Leg::new(k, r, is_put, is_long, 1.7).unwrap();
                    let dual = leg.dual();
                    let p = Position::single(pair(), leg).unwrap();
                    let d = p.dual();
                    assert_eq!(d.pair, pair().inverted());
                    assert_eq!(d.legs[0], dual);
                    for &entry in &[k / 1.2, k, k * 1.2] {
                        for &s in &spots {
                            // numeraire value seen from the other side is divided by the spot
                            let v = lp_value(&leg, s).unwrap();
                            let vd = lp_value(&dual, 1.0 / s).unwrap();
                            assert!((vd - v / s).abs() <= 1e-9 * (v / s).abs().max(1e-12), "{leg:?} {s}");
                            let a = payoff(&p, s, entry).unwrap() / s;
                            let b = payoff(&d, 1.0 / s, 1.0 / entry).unwrap();
                            let scale = (leg.notional() / s).max(leg.size);
                            assert!((a - b).abs() <= 1e-9 * scale, "{leg:?} s={s} entry={entry}: {a} vs {b}");
                            checked += 1;
                        }
                    }
                    assert_eq!(dual.dual().strike, leg.strike);
                }
            }
        }
    }
    assert_eq!(checked, strikes.len() * factors.len() * 4 * 3 * 400);
}

#[test]
fn short_and_long_payoffs_cancel() {
    let spots = geometric_grid(100.0, 10_000.0, 500).unwrap();
    for &k in &[500.0, 2000.0, 4000.0] {
        for is_put in [true, false] {
            let short = Position::single(pair(), Leg::new(k, 1.1, is_put, false, 3.0).unwrap()).unwrap();
            let long = Position::single(pair(), Leg::new(k, 1.1, is_put, true, 3.0).unwrap()).unwrap();
            for &s in &spots {
                assert_eq!(payoff(&short, s, 2000.0).unwrap(), -payoff(&long, s, 2000.0).unwrap());
            }
        }
    }
}

#[test]
fn short_payoff_is_bounded_by_notional_loss() {
    // the chunk never loses more than the relocated amount against its entry tokens
    let leg = Leg::put(2000.0, 1.05, false, 1.0).unwrap();
    let p = Position::single(pair(), leg).unwrap();
    for &s in &geometric_grid(1.0, 1e6, 2000).unwrap() {
        let v = payoff(&p, s, 2500.0).unwrap();
        assert!(v <= 1e-9, "short put above range gains nothing: {v} at {s}");
        assert!(v >= -leg.notional() - 1e-9);
    }
}
