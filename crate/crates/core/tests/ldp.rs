mod common;

use std::f64::consts::PI;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xylab_core::ldp::*;
use xylab_core::*;

fn subaction(pot: &Potential, n: usize) -> Subaction {
    solve_maxplus(pot, &FiberGrid::uniform(n).unwrap(), &MaxPlusOptions::default()).unwrap()
}

fn pi_arc() -> ArcSet {
    ArcSet::single(0, Arc::centered(PI, 0.5).unwrap())
}

fn random_point(rng: &mut ChaCha8Rng) -> BasePoint {
    let h = rng.random_range(0..5);
    let p = rng.random_range(1..4);
    let mut angle = || rng.random_range(0.0..2.0 * PI);
    let head: Vec<f64> = (0..h).map(|_| angle()).collect();
    let tail: Vec<f64> = (0..p).map(|_| angle()).collect();
    BasePoint::new(head, tail).unwrap()
}

fn random_arc_set(rng: &mut ChaCha8Rng) -> ArcSet {
    let depth = rng.random_range(1..4);
    let mut set = ArcSet::full();
    for coord in 0..depth {
        if rng.random_bool(0.7) {
            let arc = Arc::new(rng.random_range(0.0..2.0 * PI), rng.random_range(0.2..4.0)).unwrap();
            set = set.with(coord, vec![arc]).unwrap();
        }
    }
    set
}

#[test]
fn partial_sum_examples() {
    let sub = subaction(&Potential::cosine(), 128);
    let r = rate_partial(&BasePoint::fixed(0.0), &sub, 20);
    assert!(r.partial_sums.iter().all(|&s| s.abs() < 1e-12));
    assert_eq!(r.value, RateValue::Finite { value: 0.0, exact: true });

    let r = rate_partial(&BasePoint::new(vec![PI], vec![0.0]).unwrap(), &sub, 20);
    assert!(r.partial_sums.iter().all(|&s| (s - 2.0).abs() < 1e-12));
    match r.value {
        RateValue::Finite { value, exact } => assert!(exact && (value - 2.0).abs() < 1e-12),
        v => panic!("{v:?}"),
    }

    let alt = BasePoint::periodic(vec![0.0, PI]).unwrap();
    let r = rate_partial(&alt, &sub, 10);
    for (j, s) in r.partial_sums.iter().enumerate() {
        assert!((s - 2.0 * j.div_ceil(2) as f64).abs() < 1e-9);
    }
    assert_eq!(r.value, RateValue::DivergentAbove { bound: DEFAULT_CAP });
}

#[test]
fn partial_sums_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for pot in [Potential::cosine(), Potential::xy_pinned(0.5), Potential::xy_pair()] {
        let sub = subaction(&pot, 64);
        for _ in 0..100 {
            let r = rate_partial(&random_point(&mut rng), &sub, 30);
            assert!(r.partial_sums.windows(2).all(|w| w[1] >= w[0]));
            assert!(r.partial_sums[0] >= 0.0);
            // interpolating V between nodes costs at most a small fraction
            assert!(r.interpolation_defect > -0.05, "{}: {}", pot.name(), r.interpolation_defect);
        }
    }
}

#[test]
fn r_plus_nonnegative_on_grid() {
    for pot in [Potential::cosine(), Potential::xy_pinned(0.5), Potential::xy_pair(), Potential::zero()] {
        assert!(subaction(&pot, 64).min_r_plus() >= -1e-9);
    }
}

#[test]
fn set_rate_examples() {
    let sub = subaction(&Potential::cosine(), 128);
    let nodes = uniform_nodes(128);
    let full = set_rate_inf(&ArcSet::full(), &sub, 0).unwrap();
    assert_eq!(full.value, 0.0);
    assert!(full.exact);

    let r = set_rate_inf(&pi_arc(), &sub, 1).unwrap();
    let oracle = nodes.iter().filter(|&&a| in_arc(a, PI, 0.5)).map(|a| 1.0 - a.cos()).fold(f64::INFINITY, f64::min);
    assert!((r.value - oracle).abs() < 1e-9);
    let analytic = 1.0 + 0.5f64.cos();
    assert!(r.value >= analytic - 1e-12 && r.value - analytic < 0.5f64.sin() * 2.0 * PI / 128.0);
    assert!(r.exact);
    assert!(in_arc(r.witness[0], PI, 0.5));
    // completing by 0^∞ costs nothing
    assert!(r.completion.iter().all(|&a| a == 0.0));

    let (a, b) = (Arc::centered(2.0, 0.3).unwrap(), Arc::centered(-1.0, 0.4).unwrap());
    let set = ArcSet::single(0, a).with(1, vec![b]).unwrap();
    let r = set_rate_inf(&set, &sub, 2).unwrap();
    let best = |c: f64, rad: f64| {
        nodes.iter().filter(|&&x| in_arc(x, c, rad)).map(|x| 1.0 - x.cos()).fold(f64::INFINITY, f64::min)
    };
    assert!((r.value - (best(2.0, 0.3) + best(-1.0, 0.4))).abs() < 1e-9);
    assert!(set_rate_inf(&set, &sub, 1).is_err());
}

/// Exhaustive search over words with a completion of bounded length that
/// ends on a critical state.
fn brute_force_rate(sub: &Subaction, set: &ArcSet, depth: usize, crit: &[usize]) -> f64 {
    let n = sub.grid().len();
    let nodes = sub.grid().nodes().to_vec();
    let states = sub.states();
    assert_eq!(states.window(), 1);
    let mut best = f64::INFINITY;
    for extra in 0..n {
        let len = depth + extra + 1;
        for flat in 0..n.pow(len as u32) {
            let word: Vec<usize> = (0..len).map(|j| flat / n.pow(j as u32) % n).collect();
            if !(0..depth).all(|j| set.allows(j, nodes[word[j]])) || !crit.contains(&word[len - 1]) {
                continue;
            }
            let cost: f64 = (0..len - 1).map(|j| sub.r_plus(word[j + 1], word[j]).max(0.0)).sum();
            best = best.min(cost);
        }
    }
    best
}

#[test]
fn set_rate_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 6;
    for pot in [Potential::xy_pinned(0.5), Potential::cosine()] {
        let sub = subaction(&pot, n);
        let crit = sub.uniqueness_probe(1e-9).critical_states;
        for _ in 0..8 {
            let set = random_arc_set(&mut rng);
            let depth = set.depth().max(1);
            let fast = set_rate_inf(&set, &sub, depth).unwrap().value;
            let slow = brute_force_rate(&sub, &set, depth, &crit);
            assert!((fast - slow).abs() < 1e-9 || (fast.is_infinite() && slow.is_infinite()), "{fast} vs {slow}");
        }
    }
}

#[test]
fn set_rate_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sub = subaction(&Potential::xy_pinned(0.5), 32);
    for _ in 0..20 {
        let set = random_arc_set(&mut rng);
        let d0 = set.depth().max(1);
        let rates: Vec<SetRate> = (d0..d0 + 4).map(|d| set_rate_inf(&set, &sub, d).unwrap()).collect();
        for w in rates.windows(2) {
            assert!(w[1].lower_bound >= w[0].lower_bound - 1e-12);
            assert_eq!(w[1].value, w[0].value);
        }
        assert!(rates.iter().all(|r| r.lower_bound <= r.value + 1e-12));
        // dropping a constraint enlarges the set
        let rest: Vec<_> = set.constraints().iter().skip(1).cloned().collect();
        let bigger = ArcSet::new(rest, set.is_open()).unwrap();
        let small = set_rate_inf(&set, &sub, d0).unwrap();
        let large = set_rate_inf(&bigger, &sub, d0).unwrap();
        assert!(large.value <= small.value + 1e-12);
        assert!(large.lower_bound <= small.lower_bound + 1e-12);
    }
}

#[test]
fn cosine_mu_rate() {
    let grid = FiberGrid::uniform(256).unwrap();
    let schedule = [25.0, 37.5, 50.0, 62.5, 75.0, 87.5, 100.0];
    let opts = LdpOptions { fit_min_c: Some(25.0), ..Default::default() };
    let rep = empirical_mu_rate(&Potential::cosine(), &grid, &pi_arc(), &schedule, &opts).unwrap();
    let target = -(1.0 + 0.5f64.cos());
    let fit = rep.fit.unwrap();
    assert!((fit - target).abs() / target.abs() < 0.1, "{fit}");
    assert!(rep.agreement.unwrap() < 0.1);
    assert!(rep.slopes.iter().all(|p| p.value <= 0.0));
    // μ_c(F) is the discrete von Mises arc mass
    for p in &rep.slopes {
        let oracle = discrete_von_mises_mass(p.c, 256, |a| in_arc(a, PI, 0.5));
        assert!((p.value * p.c - oracle.ln()).abs() < 1e-8);
    }

    let full = empirical_mu_rate(&Potential::cosine(), &grid, &ArcSet::full(), &schedule, &opts).unwrap();
    assert_eq!(full.fit.unwrap(), 0.0);
    assert_eq!(full.rate_lower_bound, 0.0);

    let a = Arc::centered(PI, 0.5).unwrap();
    let product = ArcSet::single(0, a).with(1, vec![a]).unwrap();
    let prod = empirical_mu_rate(&Potential::cosine(), &grid, &product, &schedule, &opts).unwrap();
    assert!((prod.fit.unwrap() / fit - 2.0).abs() < 1e-6);
}

#[test]
fn degenerate_potentials_are_refused() {
    let grid = FiberGrid::uniform(32).unwrap();
    for pot in [Potential::xy_pair(), Potential::zero()] {
        let err = empirical_mu_rate(&pot, &grid, &pi_arc(), &[1.0, 2.0], &LdpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolated));
        let x = BasePoint::fixed(0.0);
        let err =
            empirical_operator_rate(&pot, &grid, &pi_arc(), &x, &[1.0, 2.0], &[1], &LdpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolated));
    }
}

#[test]
fn operator_rate_cosine() {
    let grid = FiberGrid::uniform(256).unwrap();
    let schedule = [25.0, 37.5, 50.0, 62.5, 75.0, 87.5, 100.0];
    let opts = LdpOptions { fit_min_c: Some(25.0), ..Default::default() };
    let mu = empirical_mu_rate(&Potential::cosine(), &grid, &pi_arc(), &schedule, &opts).unwrap();
    let probes = [0.0, 1.0, 2.5, PI, 5.0];
    let mut fits = Vec::new();
    for &x0 in &probes {
        let x = BasePoint::new(vec![x0], vec![0.3]).unwrap();
        let op =
            empirical_operator_rate(&Potential::cosine(), &grid, &pi_arc(), &x, &schedule, &[1, 3, 8], &opts).unwrap();
        // arity one: the iterate does not depend on n
        for c in schedule {
            let vals: Vec<f64> = op.grid_values.iter().filter(|p| p.c == c).map(|p| p.value).collect();
            assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-10));
        }
        let fit = op.report.fit.unwrap();
        assert!((fit - mu.fit.unwrap()).abs() / mu.fit.unwrap().abs() < 0.05);
        fits.push(fit);
        assert!(op.to_csv().starts_with("c,n,value\n"));
    }
    let spread =
        fits.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - fits.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 0.02);

    let x = BasePoint::fixed(1.0);
    let op =
        empirical_operator_rate(&Potential::cosine(), &grid, &ArcSet::full(), &x, &schedule, &[1, 4], &opts).unwrap();
    assert!(op.grid_values.iter().all(|p| p.value.abs() < 1e-12));
}

#[test]
fn operator_rate_pinned_diagonal() {
    let grid = FiberGrid::uniform(64).unwrap();
    let schedule = [10.0, 20.0, 40.0, 60.0, 80.0];
    let set = ArcSet::single(0, Arc::centered(PI, 0.6).unwrap());
    let opts = LdpOptions::default();
    let mu = empirical_mu_rate(&Potential::xy_pinned(0.5), &grid, &set, &schedule, &opts).unwrap();
    let op =
        empirical_operator_rate(&Potential::xy_pinned(0.5), &grid, &set, &BasePoint::fixed(0.0), &schedule, &[], &opts)
            .unwrap();
    assert_eq!(op.report.slopes.len(), schedule.len());
    for (p, c) in op.report.slopes.iter().zip(schedule) {
        assert_eq!(p.n, Some((c / 5.0f64).ceil() as usize));
    }
    // both estimates approach the same rate from the same side
    let rate = mu.rate_lower_bound;
    assert!(rate > 0.0);
    assert!(mu.agreement.unwrap() < 0.25, "{:?}", mu.agreement);
    assert!(op.report.agreement.unwrap() < 0.25, "{:?}", op.report.agreement);
}

#[test]
fn lsc_families() {
    let sub = subaction(&Potential::cosine(), 128);
    let metric = ShiftMetric::default();
    let z = BasePoint::new(vec![PI], vec![0.0]).unwrap();
    let same = vec![z.clone(); 5];
    let rep = lsc_probe(&sub, &z, &same, 10, &metric).unwrap();
    assert!(rep.passed);
    assert!(rep.values.iter().all(|&v| v == rep.base_value));

    let seq: Vec<BasePoint> = (1..=40).map(|j| BasePoint::new(vec![PI - 1.0 / j as f64], vec![0.0]).unwrap()).collect();
    let rep = lsc_probe(&sub, &z, &seq, 10, &metric).unwrap();
    assert!(rep.passed);
    assert!(rep.values.windows(2).all(|w| w[1] > w[0]));
    assert!(rep.values.iter().all(|&v| v < 2.0));
    assert!((rep.values.last().unwrap() - 2.0).abs() < 1e-3);

    // divergent z = (0π)^∞ approached by agreeing on j coordinates then 0^∞
    let z = BasePoint::periodic(vec![0.0, PI]).unwrap();
    let seq: Vec<BasePoint> = (1..=60)
        .map(|j| BasePoint::new((0..j).map(|i| if i % 2 == 0 { 0.0 } else { PI }).collect(), vec![0.0]).unwrap())
        .collect();
    let rep = lsc_probe(&sub, &z, &seq, 60, &metric).unwrap();
    assert!(rep.passed);
    assert!(rep.base_value > DEFAULT_CAP);
    assert!(rep.values.windows(2).all(|w| w[1] >= w[0]));
    assert!(rep.values[59] > DEFAULT_CAP);
}

#[test]
fn beta_cancellation() {
    let probes = [BasePoint::fixed(0.0), BasePoint::new(vec![2.0], vec![1.0]).unwrap(), BasePoint::fixed(4.0)];
    let eigen = EigenOptions::default();
    let zero =
        beta_cancellation_check(&subaction(&Potential::zero(), 32), &[1.0, 10.0], &[5], &probes, 1, &eigen).unwrap();
    assert!(zero.entries.iter().all(|e| e.value.abs() < 1e-12 && e.offset < 1e-12));

    let cos = beta_cancellation_check(
        &subaction(&Potential::cosine(), 128),
        &[10.0, 50.0, 100.0],
        &[10, 20],
        &probes,
        1,
        &eigen,
    )
    .unwrap();
    assert!(cos.max_abs_at(50.0, 10).unwrap() < 0.05);
    assert!(cos.max_abs_at(100.0, 20).unwrap() < 0.05);

    // pinned field: the value decays along the diagonal, at two resolutions
    for n_nodes in [64, 128] {
        let sub = subaction(&Potential::xy_pinned(0.5), n_nodes);
        let rep = beta_cancellation_check(&sub, &[10.0, 50.0, 100.0], &[2, 10, 20], &probes, 1, &eigen).unwrap();
        let d: Vec<f64> =
            [(10.0, 2), (50.0, 10), (100.0, 20)].iter().map(|&(c, n)| rep.max_abs_at(c, n).unwrap()).collect();
        assert!(d[2] < d[0] && d[2] < 0.05, "{d:?}");
        // fixed k offset shrinks like ε_c / c
        let off = |c: f64| rep.entries.iter().filter(|e| e.c == c && e.n == 20).map(|e| e.offset).fold(0.0, f64::max);
        assert!(off(100.0) < off(10.0));
    }
}

#[test]
fn additive_shift_leaves_rates_unchanged() {
    let grid = FiberGrid::uniform(128).unwrap();
    let pot = Potential::xy_pinned(0.5);
    let shifted = pot.shifted(0.7);
    let (a, b) = (subaction(&pot, 128), subaction(&shifted, 128));
    let n = grid.len();
    for i in (0..a.states().len()).step_by(7) {
        for j in (0..n).step_by(5) {
            assert!((a.r_plus(i, j) - b.r_plus(i, j)).abs() < 1e-9);
        }
    }
    let set = ArcSet::single(0, Arc::centered(PI, 0.6).unwrap());
    assert!((set_rate_inf(&set, &a, 2).unwrap().value - set_rate_inf(&set, &b, 2).unwrap().value).abs() < 1e-9);
    let schedule = [10.0, 20.0, 40.0];
    let opts = LdpOptions::default();
    let ra = empirical_mu_rate(&pot, &grid, &set, &schedule, &opts).unwrap();
    let rb = empirical_mu_rate(&shifted, &grid, &set, &schedule, &opts).unwrap();
    assert!((ra.fit.unwrap() - rb.fit.unwrap()).abs() < 1e-9);
    for (p, q) in ra.slopes.iter().zip(&rb.slopes) {
        assert!((p.value - q.value).abs() < 1e-9);
    }
}
