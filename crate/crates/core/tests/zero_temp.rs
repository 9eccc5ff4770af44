mod common;

use std::f64::consts::PI;

use common::*;
use xylab_core::transfer::gibbs_cylinder;
use xylab_core::zero_temp::*;
use xylab_core::*;

fn scan(pot: &Potential, n: usize, schedule: &[f64]) -> Scan {
    let grid = FiberGrid::uniform(n).unwrap();
    run_scan(pot, &grid, schedule, &ScanOptions::default()).unwrap()
}

fn span(v: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi - lo
}

fn probes() -> Vec<BasePoint> {
    [(0.0, 0.0), (0.9, 2.0), (2.1, 5.5), (3.0, 1.2), (4.6, 3.3)]
        .iter()
        .map(|&(a, b)| BasePoint::new(vec![a, b], vec![0.4]).unwrap())
        .collect()
}

#[test]
fn zero_potential_is_flat() {
    let s = scan(&Potential::zero(), 32, &DEFAULT_SCHEDULE);
    for r in &s.records {
        assert!(r.beta_estimate.abs() < 1e-13);
        assert!(r.f_mean.abs() < 1e-13);
        assert!(r.eps_c.abs() < 1e-11);
        assert!(r.v_c.iter().all(|v| v.abs() < 1e-13));
    }
    let rep = selection_report(&s, 0.01).unwrap();
    assert!(rep.degenerate);
    assert!(!rep.passed());
    let w0 = rep.w1_trend[0].1;
    assert!(rep.w1_trend.iter().all(|&(_, w)| (w - w0).abs() < 1e-12));
}

#[test]
fn cosine_scan_matches_bessel_ratio() {
    let s = scan(&Potential::cosine(), 256, &DEFAULT_SCHEDULE);
    for r in &s.records {
        let oracle = bessel_ratio(r.c);
        assert!((r.f_mean - oracle).abs() / oracle < 1e-6, "c={} {} vs {}", r.c, r.f_mean, oracle);
        assert!(r.eps_c.is_finite());
        assert!(r.f_mean <= s.subaction.beta_f() + r.residual + 1e-12);
    }
    let at = |c: f64| s.records.iter().find(|r| r.c == c).unwrap();
    assert!((at(10.0).f_mean - 0.9486).abs() < 1e-4);
    assert!(at(100.0).f_mean > 0.99);
    // Laplace: |(1/c) log β_c − 1| ≈ log(2πc)/(2c)
    assert!((at(100.0).beta_estimate - 1.0).abs() < 0.05);
    let laplace = (2.0 * PI * 100.0f64).ln() / 200.0;
    assert!(((at(100.0).beta_estimate - 1.0).abs() - laplace).abs() < 2e-3);
}

#[test]
fn cosine_corrections_vanish() {
    let s = scan(&Potential::cosine(), 128, &DEFAULT_SCHEDULE);
    let tail = &s.records[s.records.len() / 2..];
    assert!(tail.windows(2).all(|w| w[1].eps_c_over_c.abs() < w[0].eps_c_over_c.abs()));
    let r100 = s.records.iter().find(|r| r.c == 100.0).unwrap();
    assert!(r100.eps_c_over_c.abs() < 0.05);
    assert!(s.records.last().unwrap().delta_sup_over_c < 0.05);
}

#[test]
fn log_beta_derivative_is_mean_energy() {
    let pot = Potential::cosine();
    let grid = FiberGrid::uniform(128).unwrap();
    let opts = EigenOptions::default();
    let lb = |c: f64| leading_eigensystem(&build_kernel(&pot, c, &grid).unwrap(), &opts).unwrap();
    for c in [2.0, 10.0, 50.0] {
        let fd = (lb(c + 0.05).log_beta() - lb(c - 0.05).log_beta()) / 0.1;
        assert!((fd - lb(c).mean_of(&pot)).abs() <= 0.01);
        // forward difference at Δc = 0.1 as well
        let fwd = (lb(c + 0.1).log_beta() - lb(c).log_beta()) / 0.1;
        assert!((fwd - lb(c).mean_of(&pot)).abs() <= 0.01);
    }
}

#[test]
fn cosine_selects_point_mass() {
    let s = scan(&Potential::cosine(), 128, &DEFAULT_SCHEDULE);
    let rep = selection_report(&s, 0.01).unwrap();
    assert!(rep.passed(), "{:?}", rep.findings);
    assert_eq!(rep.limit_support, vec![0]);
    assert!(rep.w1_nonincreasing);
    // W1 to δ₀ is the mean absolute angle under the discrete von Mises law
    let nodes = uniform_nodes(128);
    for r in &s.records {
        let w: Vec<f64> = nodes.iter().map(|a| (r.c * (a.cos() - 1.0)).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean_abs: f64 = nodes.iter().zip(&w).map(|(a, w)| w * a.min(2.0 * PI - a)).sum::<f64>() / z;
        assert!((r.w1_to_limit - mean_abs).abs() < 1e-10);
    }
    let w100 = s.records.iter().find(|r| r.c == 100.0).unwrap().w1_to_limit;
    assert!(w100 < 0.15);
    // spread of the circular deviation scales like c^{-1/2}
    let w25 = scan(&Potential::cosine(), 128, &[25.0, 100.0]).records[0].w1_to_limit;
    assert!((w25 / w100 - 2.0).abs() < 0.1);
}

#[test]
fn pinned_marginal_concentrates() {
    let grid = FiberGrid::uniform(128).unwrap();
    let es =
        leading_eigensystem(&build_kernel(&Potential::xy_pinned(0.5), 50.0, &grid).unwrap(), &EigenOptions::default())
            .unwrap();
    let set = ArcSet::single(0, Arc::centered(0.0, 0.3).unwrap());
    let mass = gibbs_cylinder(&es, &set).unwrap();
    assert!(mass > 0.9, "{mass}");
    // same value from the first marginal directly
    let direct: f64 =
        es.first_marginal().iter().zip(grid.nodes()).filter(|(_, a)| in_arc(**a, 0.0, 0.3)).map(|(m, _)| m).sum();
    assert!((mass - direct).abs() < 1e-12);
}

#[test]
fn scaled_log_eigenfunction_approaches_subaction() {
    for pot in [Potential::cosine(), Potential::xy_pinned(0.5)] {
        let s = scan(&pot, 128, &[20.0, 50.0, 200.0]);
        let spans: Vec<f64> =
            s.records.iter().map(|r| span(r.v_c.iter().zip(s.subaction.v()).map(|(a, b)| a - b))).collect();
        assert!(spans[2] < 0.05, "{}: {spans:?}", pot.name());
        assert!(spans[2] <= spans[0] + 1e-12);
    }
}

#[test]
fn cosine_fiber_mass_is_arc_length() {
    let s = scan(&Potential::cosine(), 256, &DEFAULT_SCHEDULE);
    let eps = [0.05, 0.1, 0.2];
    let rep = fiber_mass_check(&s.systems, &s.subaction, &eps, &probes()).unwrap();
    assert!(rep.passed());
    for e in &rep.entries {
        let exact = (1.0 - e.eps).acos() / PI;
        assert!(e.masses.iter().all(|m| (m - exact).abs() / exact < 0.02), "{e:?}");
        assert!(e.min_node_mass >= e.psi.unwrap());
        // node counting sees the same set up to one cell on each side
        assert!((e.min_node_mass - exact).abs() <= 2.0 / 256.0);
    }
    let e01 = &rep.entries[1];
    assert!((e01.min_mass - 0.1435).abs() < 1e-3);
}

#[test]
fn whole_fiber_for_large_eps() {
    let s = scan(&Potential::xy_pinned(0.5), 64, &DEFAULT_SCHEDULE);
    let eps = 1.0 + 2.0 * 1.5 + 1.0;
    let rep = fiber_mass_check(&s.systems, &s.subaction, &[eps], &probes()).unwrap();
    let e = &rep.entries[0];
    assert!(e.masses.iter().chain(&e.node_masses).all(|&m| (m - 1.0).abs() < 1e-14));
    assert_eq!(e.c0, Some(1.0));
}

#[test]
fn pinned_fiber_mass_positive_and_resolved() {
    let eps = [0.05, 0.1, 0.2];
    let coarse = {
        let s = scan(&Potential::xy_pinned(0.5), 128, &DEFAULT_SCHEDULE);
        fiber_mass_check(&s.systems, &s.subaction, &eps, &probes()).unwrap()
    };
    let fine = {
        let s = scan(&Potential::xy_pinned(0.5), 256, &DEFAULT_SCHEDULE);
        fiber_mass_check(&s.systems, &s.subaction, &eps, &probes()).unwrap()
    };
    for (c, f) in coarse.entries.iter().zip(&fine.entries) {
        assert!(f.min_mass > 0.0 && f.min_node_mass > 0.0);
        assert!(f.violations.is_empty());
        for (a, b) in c.masses.iter().zip(&f.masses) {
            assert!((a - b).abs() / b < 0.1, "eps={} {a} vs {b}", f.eps);
        }
    }
}

#[test]
fn fiber_constant_uses_first_admissible_c() {
    let s = scan(&Potential::cosine(), 128, &DEFAULT_SCHEDULE);
    let rep = fiber_mass_check(&s.systems, &s.subaction, &[0.1], &probes()).unwrap();
    let e = &rep.entries[0];
    let c0 = e.c0.unwrap();
    for es in &s.systems {
        let d = normalized_defect(es, &s.subaction);
        let ok = -es.c() * 0.1 + d <= 0.5f64.ln();
        if es.c() < c0 {
            assert!(!ok);
        } else if es.c() == c0 {
            assert!(ok);
            assert!((e.psi.unwrap() - 1.0 / (3.0 * d.exp())).abs() < 1e-15);
        }
    }
    // no admissible c on a short schedule leaves ψ undetermined
    let short = scan(&Potential::cosine(), 128, &[1.0, 2.0]);
    let rep = fiber_mass_check(&short.systems, &short.subaction, &[0.1], &probes()).unwrap();
    assert!(rep.entries[0].psi.is_none() && !rep.passed());
}

#[test]
fn scan_csv_layout() {
    let s = scan(&Potential::cosine(), 32, &[1.0, 2.0, 5.0]);
    let csv = s.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "c,log_beta_c,beta_estimate,eps_c,eps_c_over_c,delta_sup_over_c,f_mean,W1");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 8));
    assert!(selection_report(&scan(&Potential::cosine(), 16, &[1.0, 2.0]), 0.1).is_err());
}
