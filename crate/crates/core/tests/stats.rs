use proptest::prelude::*;
use skillpriv::stats::{compute_stratified_validity, StratifiedSample, StatsError, DEFAULT_Z};

#[test]
fn audit_rows() {
    let rows = [
        (StratifiedSample { N_I: 5541, N_C: 1498, n_I: 200, n_C: 100, h_I: 189, h_C: 93 }, "94.18% [91.48%, 96.89%]"),
        (StratifiedSample { N_I: 9846, N_C: 3171, n_I: 150, n_C: 50, h_I: 140, h_C: 46 }, "93.01% [89.48%, 96.54%]"),
        (StratifiedSample { N_I: 6075, N_C: 1642, n_I: 150, n_C: 50, h_I: 141, h_C: 46 }, "93.57% [90.18%, 96.97%]"),
    ];
    for (s, want) in rows {
        assert_eq!(compute_stratified_validity(&s, DEFAULT_Z).unwrap().display(), want);
    }
}

#[test]
fn single_certain_stratum() {
    let s = StratifiedSample { N_I: 40, N_C: 0, n_I: 10, n_C: 0, h_I: 10, h_C: 0 };
    let e = compute_stratified_validity(&s, DEFAULT_Z).unwrap();
    assert_eq!((e.p_hat, e.se, e.ci_low, e.ci_high), (1.0, 0.0, 1.0, 1.0));
    assert_eq!(e.display(), "100.00% [100.00%, 100.00%]");
}

#[test]
fn empty_stratum_is_an_error() {
    let s = StratifiedSample { N_I: 40, N_C: 5, n_I: 10, n_C: 0, h_I: 3, h_C: 0 };
    assert_eq!(compute_stratified_validity(&s, DEFAULT_Z), Err(StatsError::EmptyStratum("C")));
}

fn sample() -> impl Strategy<Value = StratifiedSample> {
    (1u64..100_000, 1u64..100_000)
        .prop_flat_map(|(ni, nc)| (Just(ni), Just(nc), 1..=ni.min(500), 1..=nc.min(500)))
        .prop_flat_map(|(ni, nc, si, sc)| (Just(ni), Just(nc), Just(si), Just(sc), 0..=si, 0..=sc))
        .prop_map(|(a, b, c, d, e, f)| StratifiedSample { N_I: a, N_C: b, n_I: c, n_C: d, h_I: e, h_C: f })
}

proptest! {
    /// Agreement with a direct evaluation written with the weights expanded.
    #[test]
    fn matches_direct_evaluation(s in sample(), z in 0.5f64..3.0) {
        let e = compute_stratified_validity(&s, z).unwrap();
        let n = (s.N_I + s.N_C) as f64;
        let pi = s.h_I as f64 / s.n_I as f64;
        let pc = s.h_C as f64 / s.n_C as f64;
        let p = (s.N_I as f64 * pi + s.N_C as f64 * pc) / n;
        let var = (s.N_I as f64).powi(2) * pi * (1.0 - pi) / s.n_I as f64 / (n * n)
            + (s.N_C as f64).powi(2) * pc * (1.0 - pc) / s.n_C as f64 / (n * n);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300) || a == b;
        prop_assert!(close(e.p_hat, p));
        prop_assert!(close(e.se, var.sqrt()));
        prop_assert!(close(e.ci_low, p - z * var.sqrt()));
        prop_assert!(close(e.ci_high, p + z * var.sqrt()));
        prop_assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
    }
}
