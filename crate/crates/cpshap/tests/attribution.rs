use cpshap::attribution::{
    attribute, attribute_exact, attribute_mc, Allocations, AttributionConfig, CoalitionModelCache,
    Problem, Sampling, TestPoints,
};
use cpshap::bench::sized_split;
use cpshap_core::conformal::CpMethod;
use cpshap_core::rng::stream;
use cpshap_core::value::IntervalValue;
use cpshap_core::{AllocationKind, Coalition, Estimator, Matrix};
use rand::Rng;

/// `y = sum_j coef_j x_j + heteroskedastic noise`, features uniform on [0, 1].
fn linear_data(coef: &[f64], n: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = stream(seed, 0);
    let d = coef.len();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        // Irwin-Hall approximation to a standard normal.
        let e: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
        let signal: f64 = coef.iter().zip(&x).map(|(c, v)| c * v).sum();
        y.push(signal + (0.2 + x[0]) * e);
        rows.push(x);
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

/// Problem plus the first `k` test rows (all of them when `k` is `None`).
fn problem(coef: &[f64], n: usize, seed: u64, k: Option<usize>) -> (Problem, Matrix, Vec<usize>) {
    let (x, y) = linear_data(coef, n, seed);
    let sp = sized_split(n * 3 / 5, n / 5, n - n * 3 / 5 - n / 5, seed + 1).unwrap();
    let ids: Vec<usize> = sp.test.iter().copied().take(k.unwrap_or(usize::MAX)).collect();
    (Problem::from_split(&x, &y, &sp), x.select_rows(&ids), ids)
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn single_feature_gets_full_minus_empty() {
    let (p, tx, ids) = problem(&[2.0], 200, 3, Some(5));
    let cfg = AttributionConfig::new(CpMethod::Lacp, 0.1);
    let res = attribute_exact(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    assert_eq!(res.diagnostics.trained_count, 2);
    for pt in &res.points {
        let r = pt.record(IntervalValue::Width, AllocationKind::Shapley).unwrap();
        assert!((r.allocation.values[0] - (r.v_full - r.v_empty)).abs() < 1e-12);
        assert!((r.v_full - pt.interval.width()).abs() < 1e-12);
    }
}

#[test]
fn three_features_match_ordering_average() {
    let (p, tx, ids) = problem(&[3.0, 1.0, 0.5], 300, 5, Some(4));
    let mut cfg = AttributionConfig::new(CpMethod::Cqr, 0.1);
    cfg.value_fns = IntervalValue::ALL.to_vec();
    let res = attribute_exact(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    let cache = CoalitionModelCache::new(&p, cfg.cp_settings());
    let perms = permutations(3);
    for (i, pt) in res.points.iter().enumerate() {
        for vf in IntervalValue::ALL {
            let v = |a: Coalition| vf.of(&cache.interval(a, tx.row(i)).unwrap());
            let mut phi = [0.0; 3];
            for perm in &perms {
                let mut a = Coalition::EMPTY;
                for &j in perm {
                    phi[j] += v(a.with(j)) - v(a);
                    a = a.with(j);
                }
            }
            let got = &pt.record(vf, AllocationKind::Shapley).unwrap().allocation.values;
            for j in 0..3 {
                let want = phi[j] / perms.len() as f64;
                assert!((got[j] - want).abs() < 1e-10, "{vf:?} j={j}: {} vs {want}", got[j]);
            }
        }
    }
}

#[test]
fn noise_feature_gets_little_width() {
    let (p, tx, ids) = problem(&[4.0, 3.0, 0.0], 1500, 11, None);
    let cfg = AttributionConfig::new(CpMethod::Lacp, 0.1);
    let res = attribute_exact(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    let mut mean_abs = [0.0; 3];
    for pt in &res.points {
        let v = &pt.record(IntervalValue::Width, AllocationKind::Shapley).unwrap().allocation.values;
        for j in 0..3 {
            mean_abs[j] += v[j].abs() / res.points.len() as f64;
        }
    }
    assert!(mean_abs[2] < 0.1 * mean_abs[0].max(mean_abs[1]), "{mean_abs:?}");
}

#[test]
fn sampled_run_trains_only_visited_coalitions() {
    let (p, tx, ids) = problem(&[1.0, 1.0, 1.0, 0.5, 0.5, 0.2], 300, 7, Some(3));
    let mut cfg = AttributionConfig::new(CpMethod::Smr, 0.1);
    cfg.sampling = Sampling::MonteCarlo;
    cfg.allocations = Allocations::Both;
    cfg.m = 20;
    let res = attribute_mc(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    let d = 6;
    assert!(res.diagnostics.trained_count <= cfg.m * (d - 1) + d + 2);
    assert!(res.diagnostics.trained_count < 1 << d);
}

#[test]
fn reruns_are_identical() {
    let (p, tx, ids) = problem(&[1.0, 2.0, 0.5, 0.1], 300, 13, Some(6));
    let mut cfg = AttributionConfig::new(CpMethod::Lacp, 0.1);
    cfg.sampling = Sampling::MonteCarlo;
    cfg.allocations = Allocations::Both;
    cfg.value_fns = IntervalValue::ALL.to_vec();
    cfg.m = 30;
    cfg.sampling_seed = 99;
    let a = attribute(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    let b = attribute(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    assert_eq!(a.points, b.points);
}

#[test]
fn constant_width_gives_identical_allocations() {
    let (p, tx, ids) = problem(&[1.0, 2.0, 0.5], 300, 17, Some(8));
    let cfg = AttributionConfig::new(CpMethod::Smr, 0.1);
    let res = attribute_exact(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    let first = &res.points[0].records[0].allocation.values;
    // Width is upper minus lower around a point-dependent center, so only
    // rounding differs between points.
    for pt in &res.points[1..] {
        for (a, b) in pt.records[0].allocation.values.iter().zip(first) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn normalized_allocations_sum_to_one() {
    let (p, tx, ids) = problem(&[1.0, 2.0, 0.5], 300, 19, Some(5));
    let mut cfg = AttributionConfig::new(CpMethod::Lacp, 0.1);
    cfg.normalized = true;
    cfg.allocations = Allocations::Both;
    let res = attribute_exact(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    for pt in &res.points {
        for r in &pt.records {
            assert!(r.normalized);
            assert!((r.allocation.total() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn importance_both_shares_one_stream() {
    let (p, tx, ids) = problem(&[1.0, 2.0, 0.5, 0.3], 300, 23, Some(4));
    let mut cfg = AttributionConfig::new(CpMethod::Lacp, 0.1);
    cfg.sampling = Sampling::ImportanceBoth;
    cfg.allocations = Allocations::Both;
    cfg.m = 40;
    let res = attribute(&cfg, &p, TestPoints::new(&tx, &ids)).unwrap();
    for pt in &res.points {
        assert_eq!(pt.records.len(), 2);
        for r in &pt.records {
            assert_eq!(r.allocation.estimator, Estimator::ImportanceSampling);
            assert_eq!(r.allocation.m, 40);
            let span = r.v_full - r.v_empty;
            assert!(r.allocation.efficiency_gap(span) < 1e-9);
        }
    }
    cfg.ps_direct = true;
    assert!(cfg.validate(4).is_err());
}

#[test]
fn exact_rejects_too_many_features() {
    let mut cfg = AttributionConfig::new(CpMethod::Smr, 0.1);
    assert!(cfg.validate(20).is_ok());
    assert!(cfg.validate(21).is_err());
    cfg.sampling = Sampling::MonteCarlo;
    assert!(cfg.validate(30).is_ok());
}
