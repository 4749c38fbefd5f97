//! Margin, utilization and curve properties.

use panopt_core::instrument::{Leg, Position, TokenPair};
use panopt_core::pool::{PoolConfig, PoolState};
use panopt_core::risk::{
    account_solvent, cboe_margin, seller_requirement, utilization, utilization_target, PiecewiseLinear,
    UtilizationCurves,
};
use panopt_core::Error;
use proptest::prelude::*;

/// Knots on `[0, 1]` whose values move in one direction.
fn monotone_knots(lo: f64, hi: f64, rising: bool) -> impl Strategy<Value = Vec<(f64, f64)>> {
    (prop::collection::btree_set(1u32..999, 0..6), prop::collection::vec(0.0f64..1.0, 8)).prop_map(
        move |(inner, steps)| {
            let mut us: Vec<f64> = vec![0.0];
            us.extend(inner.iter().map(|&i| i as f64 / 1000.0));
            us.push(1.0);
            let mut cum = Vec::with_capacity(us.len());
            let mut acc = 0.0;
            for i in 0..us.len() {
                acc += steps[i % steps.len()] + 1e-3;
                cum.push(acc);
            }
            let (first, last) = (cum[0], cum[cum.len() - 1]);
            us.iter()
                .zip(&cum)
                .map(|(&u, &c)| {
                    let x = if last > first { (c - first) / (last - first) } else { 0.0 };
                    let v = if rising { lo + (hi - lo) * x } else { hi - (hi - lo) * x };
                    (u, v)
                })
                .collect()
        },
    )
}

fn normalized(curve: &PiecewiseLinear, u: f64) -> f64 {
    let vals: Vec<f64> = curve.knots().iter().map(|k| k.1).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (curve.eval(u).unwrap() - lo) / (hi - lo)
}

/// Bisection on the normalized difference.
fn bisect_target(c: &UtilizationCurves) -> f64 {
    let f = |u: f64| normalized(&c.collateral, u) - normalized(&c.commission, u);
    let (mut a, mut b) = (0.0, 1.0);
    assert!(f(a) <= 0.0 && f(b) >= 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn curves_are_monotone_everywhere(
        c in monotone_knots(0.1, 1.0, true),
        m in monotone_knots(0.0, 0.003, false),
    ) {
        let curves = UtilizationCurves::new(PiecewiseLinear::new(c).unwrap(), PiecewiseLinear::new(m).unwrap()).unwrap();
        let mut prev = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..=1000 {
            let (ratio, fee) = curves.eval(i as f64 / 1000.0).unwrap();
            prop_assert!(ratio >= prev.0 && fee <= prev.1);
            prev = (ratio, fee);
        }
    }

    #[test]
    fn target_matches_bisection(
        c in monotone_knots(0.1, 1.0, true),
        m in monotone_knots(0.0, 0.003, false),
    ) {
        let curves = UtilizationCurves::new(PiecewiseLinear::new(c).unwrap(), PiecewiseLinear::new(m).unwrap()).unwrap();
        let t = utilization_target(&curves).unwrap();
        prop_assert!((t - bisect_target(&curves)).abs() < 1e-9);
    }

    #[test]
    fn target_ignores_affine_rescaling(
        c in monotone_knots(0.1, 1.0, true),
        m in monotone_knots(0.0, 0.003, false),
        a in 0.1f64..0.9,
        b in 0.0f64..0.1,
        s in 0.1f64..10.0,
    ) {
        let base = UtilizationCurves::new(PiecewiseLinear::new(c.clone()).unwrap(), PiecewiseLinear::new(m.clone()).unwrap()).unwrap();
        let c2 = c.iter().map(|&(u, v)| (u, a * v + b)).collect();
        let m2 = m.iter().map(|&(u, v)| (u, s * v)).collect();
        let scaled = UtilizationCurves::new(PiecewiseLinear::new(c2).unwrap(), PiecewiseLinear::new(m2).unwrap()).unwrap();
        prop_assert!((base.target().unwrap() - scaled.target().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn utilization_is_scale_free(total in 1.0f64..1e9, nf in 0.0f64..0.99, lf in 0.0f64..1.0, k in 1e-3f64..1e3) {
        let notional = total * nf;
        let locked = notional * lf;
        let u = utilization(total, notional, locked).unwrap();
        let v = utilization(k * total, k * notional, k * locked).unwrap();
        prop_assert!(u >= 0.0);
        prop_assert!((u - v).abs() <= 1e-12 * u.max(1e-300));
    }
}

#[test]
fn symmetric_perturbation_keeps_target_at_half() {
    for d in [-0.3, -0.1, 0.05, 0.2, 0.4] {
        let x = 0.5 + d;
        let c = PiecewiseLinear::new(vec![(0.0, 0.2), (0.5, 0.2 + 0.8 * x), (1.0, 1.0)]).unwrap();
        let m = PiecewiseLinear::new(vec![(0.0, 0.002), (0.5, 0.002 * x), (1.0, 0.0)]).unwrap();
        let curves = UtilizationCurves::new(c, m).unwrap();
        assert!((curves.target().unwrap() - 0.5).abs() < 1e-15, "{d}");
    }
}

#[test]
fn steeper_collateral_curve_moves_target_down() {
    let c = PiecewiseLinear::new(vec![(0.0, 0.2), (0.3, 0.8), (1.0, 1.0)]).unwrap();
    let curves = UtilizationCurves::new(c, PiecewiseLinear::linear(0.002, 0.0).unwrap()).unwrap();
    let t = curves.target().unwrap();
    assert!(t < 0.5);
    assert!((t - bisect_target(&curves)).abs() < 1e-12, "{t}");
}

#[test]
fn flat_curve_has_no_target() {
    let c = UtilizationCurves::new(
        PiecewiseLinear::linear(0.5, 0.5).unwrap(),
        PiecewiseLinear::linear(0.002, 0.0).unwrap(),
    )
    .unwrap();
    assert_eq!(c.target(), Err(Error::NoTarget));
}

#[test]
fn seller_requirement_grows_with_itm() {
    for &premium in &[0.0, 50.0, 700.0] {
        let mut prev = 0.0;
        for i in 0..1000 {
            let r = seller_requirement(2000.0, i as f64, premium, 0.2).unwrap().requirement;
            assert!(r >= 0.0 && r >= prev);
            prev = r;
        }
    }
}

#[test]
fn cboe_floor_crossover_by_brute_force() {
    // put, premium 0.1, spot 50: main term overtakes the floor at K = 400/9
    let (p, s) = (0.1, 50.0);
    let strikes: Vec<f64> = (0..=20_000).map(|i| 30.0 + i as f64 * 0.001).collect();
    let mut crossover = None;
    for &k in &strikes {
        let main = p + 0.2 * s - (s - k).max(0.0);
        let floor = p + 0.1 * k;
        let m = cboe_margin(p, s, k, true, 1.0).unwrap();
        assert_eq!(m, main.max(floor));
        if crossover.is_none() && main >= floor {
            crossover = Some(k);
        }
    }
    let k = crossover.unwrap();
    assert!((k - 400.0 / 9.0).abs() <= 0.001, "{k}");
    assert_eq!(cboe_margin(p, s, 35.0, true, 1.0).unwrap(), p + 3.5);
}

#[test]
fn seller_with_exact_collateral_then_spot_drop() {
    let mut pool = PoolState::new(PoolConfig {
        commission_rate: 0.0,
        ..PoolConfig::default()
    })
    .unwrap();
    pool.deposit("lp", 10_000.0).unwrap();
    pool.deposit("seller", 400.0).unwrap();
    assert!(account_solvent(&pool, "seller", 2100.0).unwrap().solvent);

    let put = Position::single(TokenPair::default(), Leg::put(2000.0, 1.0, false, 1.0).unwrap()).unwrap();
    pool.mint_short("seller", &put, 2100.0).unwrap();
    let ok = account_solvent(&pool, "seller", 2100.0).unwrap();
    assert!(ok.solvent);
    assert_eq!((ok.collateral, ok.requirement, ok.shortfall), (400.0, 400.0, 0.0));

    let hit = account_solvent(&pool, "seller", 1900.0).unwrap();
    assert!(!hit.solvent);
    assert_eq!(hit.shortfall, 100.0);

    assert!(matches!(account_solvent(&pool, "nobody", 2000.0), Err(Error::NotFound(_))));
}

#[test]
fn multi_leg_requirement_is_the_sum_of_legs() {
    let mut pool = PoolState::new(PoolConfig {
        commission_rate: 0.0,
        ..PoolConfig::default()
    })
    .unwrap();
    pool.deposit("lp", 100_000.0).unwrap();
    pool.deposit("trader", 5_000.0).unwrap();
    let legs = vec![
        Leg::put(1800.0, 1.05, false, 1.0).unwrap(),
        Leg::put(1600.0, 1.05, false, 1.0).unwrap(),
        Leg::call(2200.0, 1.05, false, 1.0).unwrap(),
        Leg::call(2400.0, 1.05, false, 2.0).unwrap(),
    ];
    let position = Position::new(TokenPair::default(), legs.clone()).unwrap();
    pool.mint("trader", &position, 2000.0).unwrap();
    let ratio = pool.seller_ratio().unwrap();
    let spot = 1700.0;
    let s = account_solvent(&pool, "trader", spot).unwrap();
    let expected: f64 = legs
        .iter()
        .map(|l| {
            let itm = panopt_core::risk::itm_amount(l, spot).unwrap();
            seller_requirement(l.notional(), itm, 0.0, ratio).unwrap().requirement
        })
        .sum();
    assert_eq!(s.legs.len(), 4);
    assert!((s.requirement - expected).abs() <= 1e-9 * expected);
}
