//! Randomized operation sequences against a double-entry oracle, plus
//! replay equivalence and purchase merging at the pool level.

use std::collections::BTreeMap;

use panopt_core::instrument::{Leg, Position, TokenPair};
use panopt_core::pool::{
    merge_purchase, premium_owed, replay_str, Event, Journal, Outcome, PoolConfig, PoolState, RangeKey,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACCOUNTS: [&str; 5] = ["lp0", "lp1", "t0", "t1", "t2"];
const TICK_LN: f64 = 9.99950003333083e-5; // ln(1.0001)

/// Double-entry books: every posting moves value between two of the
/// wallets (one per account), the pool and the market. Balances sum to
/// zero by construction, so the ledger must match them account by account.
#[derive(Default)]
struct Books {
    wallets: BTreeMap<String, f64>,
    pool: f64,
    market: f64,
}

impl Books {
    fn wallet_to_pool(&mut self, account: &str, v: f64) {
        *self.wallets.entry(account.to_string()).or_default() -= v;
        self.pool += v;
    }

    fn market_to_pool(&mut self, v: f64) {
        self.market -= v;
        self.pool += v;
    }

    fn total(&self) -> f64 {
        self.wallets.values().sum::<f64>() + self.pool + self.market
    }
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

fn pair() -> TokenPair {
    TokenPair::default()
}

fn random_short(rng: &mut ChaCha8Rng, spot: f64) -> Position {
    let width = [0u16, 100, 1000][rng.random_range(0..3)];
    let mut legs = Vec::new();
    let strangle = rng.random_bool(0.2);
    for is_put in [true, false] {
        if !strangle && rng.random_bool(0.5) == is_put {
            continue;
        }
        let offset = rng.random_range(1..=6) * 500;
        let spot_tick = (spot.ln() / TICK_LN).floor() as i32;
        let tick = if is_put { spot_tick - offset } else { spot_tick + offset };
        let mut leg = Leg::from_ticks(tick, width, is_put, false, 1).unwrap();
        leg.size = rng.random_range(500.0..6000.0) / leg.strike;
        legs.push(leg);
    }
    if legs.is_empty() {
        return random_short(rng, spot);
    }
    Position::new(pair(), legs).unwrap()
}

fn random_long(rng: &mut ChaCha8Rng, state: &PoolState) -> Option<Position> {
    let open: Vec<(&RangeKey, f64)> = state
        .ranges()
        .iter()
        .map(|(k, r)| (k, r.sold - r.bought))
        .filter(|&(_, free)| free > 0.0)
        .collect();
    if open.is_empty() {
        return None;
    }
    let (key, free) = open[rng.random_range(0..open.len())];
    let mut leg = Leg::from_ticks(key.tick, key.width, rng.random_bool(0.5), true, 1).unwrap();
    leg.size = free * rng.random_range(0.05..0.8) / leg.strike;
    Some(Position::single(pair(), leg).unwrap())
}

fn random_event(rng: &mut ChaCha8Rng, state: &PoolState, spot: f64) -> Event {
    let account = ACCOUNTS[rng.random_range(0..ACCOUNTS.len())].to_string();
    match rng.random_range(0..100) {
        0..15 => Event::Deposit {
            account,
            amount: rng.random_range(1000.0..20_000.0),
        },
        15..25 => {
            let shares = state.account(&account).map_or(1.0, |a| a.shares) * rng.random_range(0.05..1.0);
            Event::Withdraw {
                account,
                shares: shares.max(1e-6),
                spot: Some(spot),
            }
        }
        25..50 => Event::Mint {
            account,
            position: random_short(rng, spot),
            spot,
        },
        50..65 => match random_long(rng, state) {
            Some(position) => Event::MintLong { account, position, spot },
            None => Event::MintShort {
                account,
                position: random_short(rng, spot),
                spot,
            },
        },
        65..85 => {
            let ids: Vec<(u64, String)> = state.positions().iter().map(|(&id, p)| (id, p.owner.clone())).collect();
            if ids.is_empty() {
                return Event::Deposit { account, amount: 500.0 };
            }
            let (id, owner) = ids[rng.random_range(0..ids.len())].clone();
            let forced = rng.random_bool(0.1);
            Event::Close {
                caller: if forced { account } else { owner },
                position_id: id,
                spot,
                force: forced,
            }
        }
        _ => {
            let keys: Vec<(RangeKey, f64, f64)> = state
                .ranges()
                .iter()
                .map(|(k, r)| (*k, r.fg_upper, r.fg_lower))
                .collect();
            if keys.is_empty() {
                return Event::Deposit { account, amount: 500.0 };
            }
            let (range, upper, lower) = keys[rng.random_range(0..keys.len())];
            Event::FeeGrowth {
                range,
                upper: upper + rng.random_range(0.0..0.02),
                lower: lower + rng.random_range(0.0..0.005),
            }
        }
    }
}

fn post(books: &mut Books, event: &Event, outcome: &Outcome) {
    match (event, outcome) {
        (Event::Deposit { account, amount }, Outcome::Deposit { .. }) => books.wallet_to_pool(account, *amount),
        (Event::Withdraw { account, .. }, Outcome::Withdraw { value }) => books.wallet_to_pool(account, -value),
        (Event::Close { .. }, Outcome::Close(s)) => {
            books.market_to_pool(s.spread_to_pool + s.premium_received);
            if s.exercise_pnl > 0.0 {
                books.market_to_pool(s.exercise_pnl);
            } else {
                books.market_to_pool(s.exercise_pnl + s.unpaid_exercise);
            }
        }
        _ => {}
    }
}

fn check_invariants(state: &PoolState, books: &Books, scale: f64) {
    assert!(close(state.total_liquidity(), books.pool, scale), "{} vs {}", state.total_liquidity(), books.pool);
    assert!(close(state.market_balance(), books.market, scale));
    assert!(books.total().abs() <= 1e-9 * scale);
    assert!(state.conservation_residual().abs() <= 1e-9 * scale);
    for (id, acct) in state.accounts() {
        let wallet = books.wallets.get(id).copied().unwrap_or(0.0);
        assert!(close(acct.deposited, -wallet, scale), "{id}: {} vs {}", acct.deposited, -wallet);
        assert!(acct.shares >= 0.0);
    }
    let shares: f64 = state.accounts().values().map(|a| a.shares).sum();
    assert!(close(shares, state.total_shares(), scale));

    // aggregates rebuilt from the open positions
    let mut sold: BTreeMap<RangeKey, f64> = BTreeMap::new();
    let mut bought: BTreeMap<RangeKey, f64> = BTreeMap::new();
    for p in state.positions().values() {
        assert!(state.account(&p.owner).unwrap().positions.len() > 0);
        for (leg, e) in p.position.legs.iter().zip(&p.legs) {
            assert_eq!(e.notional, leg.notional());
            let side = if leg.is_long { &mut bought } else { &mut sold };
            *side.entry(e.range).or_default() += e.notional;
        }
    }
    let notional: f64 = sold.values().sum();
    let locked: f64 = bought.values().sum();
    assert!(close(state.total_notional_value(), notional, scale));
    assert!(close(state.total_locked_liquidity(), locked, scale));
    for (key, r) in state.ranges() {
        assert!(close(r.sold, sold.get(key).copied().unwrap_or(0.0), scale));
        assert!(close(r.bought, bought.get(key).copied().unwrap_or(0.0), scale));
        assert!(r.bought <= r.sold);
        assert_eq!(r.base_liquidity, r.sold);
    }
    assert!(state.total_locked_liquidity() <= state.total_notional_value());
}

fn fuzz(seed: u64, ops: usize) -> (Journal, BTreeMap<&'static str, usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = PoolConfig {
        pool_id: seed,
        ..PoolConfig::default()
    };
    let mut journal = Journal::new(config).unwrap();
    let mut books = Books::default();
    let mut spot: f64 = 2000.0;
    let mut accepted = BTreeMap::new();
    for _ in 0..ops {
        spot = (spot * (0.03 * rng.random_range(-1.0..1.0f64)).exp()).clamp(1200.0, 3300.0);
        let event = random_event(&mut rng, &journal.state, spot);
        let before = journal.state.clone();
        match journal.apply(event.clone()) {
            Ok(outcome) => {
                post(&mut books, &event, &outcome);
                *accepted.entry(event.op()).or_default() += 1;
            }
            Err(_) => assert_eq!(journal.state, before, "rejected {} changed the state", event.op()),
        }
        let scale = books.wallets.values().map(|w| w.abs()).sum::<f64>();
        check_invariants(&journal.state, &books, scale);
        for &id in journal.state.positions().keys() {
            premium_owed(&journal.state, id).unwrap();
        }
    }
    (journal, accepted)
}

#[test]
fn ledger_matches_double_entry_books() {
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for seed in 0..10 {
        let (_, accepted) = fuzz(seed, 1000);
        for (op, n) in accepted {
            *totals.entry(op).or_default() += n;
        }
    }
    for op in ["deposit", "withdraw", "mint", "mint_long", "close", "fee_growth"] {
        assert!(totals.get(op).copied().unwrap_or(0) >= 50, "too few accepted {op}: {totals:?}");
    }
}

#[test]
fn replay_reproduces_fuzzed_runs() {
    for seed in 100..105 {
        let (journal, _) = fuzz(seed, 1000);
        let log = journal.log_string();
        let (state, steps) = replay_str(&log).unwrap();
        assert_eq!(state, journal.state);
        assert_eq!(steps.len(), journal.events.len());
        assert_eq!(
            serde_json::to_string(&state).unwrap(),
            serde_json::to_string(&journal.state).unwrap()
        );
    }
}

#[test]
fn ten_small_purchases_equal_one_large() {
    let mut base = PoolState::new(PoolConfig {
        commission_rate: 0.0,
        ..PoolConfig::default()
    })
    .unwrap();
    base.deposit("lp", 1_000_000.0).unwrap();
    base.deposit("buyer", 100_000.0).unwrap();
    let short = Leg::from_ticks(70_000, 200, true, false, 1).unwrap();
    let k = short.strike;
    base.mint_short("lp", &Position::single(pair(), Leg { size: 40.0, ..short }).unwrap(), k * 1.5)
        .unwrap();
    let key = RangeKey::of(&short).unwrap();

    let long = |size: f64| Position::single(pair(), Leg::from_ticks(70_000, 200, true, true, 1).map(|l| Leg { size, ..l }).unwrap()).unwrap();
    let mut split = base.clone();
    for _ in 0..10 {
        split.mint_long("buyer", &long(1.0), k * 1.5).unwrap();
    }
    let mut whole = base.clone();
    whole.mint_long("buyer", &long(10.0), k * 1.5).unwrap();

    let book_split = split.account("buyer").unwrap().long_books[&key].clone();
    let book_whole = whole.account("buyer").unwrap().long_books[&key].clone();
    assert_eq!(book_split.base, book_whole.base);
    assert!((book_split.open - book_whole.open).abs() <= 1e-12 * book_whole.open);

    for s in [&mut split, &mut whole] {
        s.set_fee_growth(key, 0.4, 0.1).unwrap();
    }
    // the effective-liquidity part is path independent; the spread is
    // charged per order and grows with the order size
    let quotes = |s: &PoolState| -> (f64, f64) {
        s.account("buyer")
            .unwrap()
            .positions
            .iter()
            .map(|&id| premium_owed(s, id).unwrap().legs[0])
            .fold((0.0, 0.0), |(g, n), p| (g + p.gross, n + p.net))
    };
    let ((gross_split, net_split), (gross_whole, net_whole)) = (quotes(&split), quotes(&whole));
    assert!((gross_split - gross_whole).abs() <= 1e-12 * gross_whole, "{gross_split} vs {gross_whole}");
    let l1 = 40.0 * k;
    assert!((net_split - gross_whole * (1.0 + k / l1)).abs() <= 1e-12 * net_split);
    assert!((net_whole - gross_whole * (1.0 + 10.0 * k / l1)).abs() <= 1e-12 * net_whole);

    // the same through the pure merge rule
    let mut n = 0.0;
    for _ in 0..10 {
        n += k;
    }
    assert_eq!(merge_purchase(0.0, l1, n).unwrap(), merge_purchase(9.0 * k, l1, k).unwrap());
    assert!((merge_purchase(0.0, l1, n).unwrap() - 10.0 * k / (l1 - 10.0 * k)).abs() < 1e-15);
}
