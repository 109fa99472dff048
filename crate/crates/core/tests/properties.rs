mod common;

use proptest::prelude::*;
use tnswac::confidence::{confidence_set, ConfsetOptions, ExclusionRule};
use tnswac::exact_tests::{
    chisq_df4_sf, fisher_combine, fisher_exact_two_sided, log_hypergeom_pmf,
};
use tnswac::study_model::{adjusted_exposed_cells, adjusted_tables};
use tnswac::{Level, NetEffectCounts, Procedure, StudyCounts, TwoByTwoTable};

use common::{chisq4_density, simpson};

#[test]
fn chisq_sf_matches_quadrature() {
    // upper tail integrated directly; the density is below 1e-40 past x + 200
    let mut prev = f64::INFINITY;
    for j in 0..=400 {
        let x = j as f64 * 0.25;
        let tail = simpson(chisq4_density, x, x + 200.0, 20_000);
        let sf = chisq_df4_sf(x).unwrap();
        assert!((sf - tail).abs() < 1e-10, "x = {x}: {sf} vs {tail}");
        assert!((0.0..=1.0).contains(&sf));
        if x > 0.0 {
            assert!(sf < prev, "not strictly decreasing at {x}");
        }
        prev = sf;
    }
}

#[test]
fn combination_of_halves_matches_quadrature() {
    let x = -2.0 * (0.25f64).ln();
    let tail = simpson(chisq4_density, x, x + 200.0, 20_000);
    assert!((fisher_combine(0.5, 0.5).unwrap() - tail).abs() < 1e-10);
}

#[test]
fn combination_below_each_input_on_a_grid() {
    // fisher_combine(p, p) < p up to the crossover near 0.28
    for i in 1..=1000 {
        let p = 0.28 * i as f64 / 1000.0;
        assert!(fisher_combine(p, p).unwrap() < p || p > 0.279, "p = {p}");
    }
}

fn exposed_table() -> impl Strategy<Value = TwoByTwoTable> {
    (0..40u64, 0..40u64, 0..40u64, 0..40u64).prop_map(|(a, b, c, d)| TwoByTwoTable::new(a, b, c, d))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn combination_is_monotone_and_symmetric(p1 in 0.0..=1.0f64, p2 in 0.0..=1.0f64, s in 0.0..=1.0f64) {
        let base = fisher_combine(p1, p2).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert_eq!(base, fisher_combine(p2, p1).unwrap());
        prop_assert!(fisher_combine(p1 * s, p2).unwrap() <= base);
        prop_assert!(fisher_combine(p1, p2 * s).unwrap() <= base);
    }

    #[test]
    fn fisher_is_invariant_to_transposition_and_row_swap(t in exposed_table()) {
        let p = fisher_exact_two_sided(&t);
        prop_assert!((0.0..=1.0).contains(&p));
        let transposed = TwoByTwoTable::new(t.a, t.c, t.b, t.d);
        let swapped = TwoByTwoTable::new(t.c, t.d, t.a, t.b);
        prop_assert!((fisher_exact_two_sided(&transposed) - p).abs() < 1e-12);
        prop_assert!((fisher_exact_two_sided(&swapped) - p).abs() < 1e-12);
    }

    #[test]
    fn hypergeometric_pmf_sums_to_one(row1 in 0..400u64, col1 in 0..400u64, extra in 0..400u64) {
        let n = row1.max(col1) + extra;
        let lo = (row1 + col1).saturating_sub(n);
        let hi = row1.min(col1);
        let s: f64 = (lo..=hi).map(|k| log_hypergeom_pmf(k, row1, col1, n).unwrap().exp()).sum();
        prop_assert!((s - 1.0).abs() < 1e-10, "{}", s);
    }

    #[test]
    fn adjustment_only_relabels_exposed_persons(
        cells in prop::array::uniform6(0..60u64),
        a_pn in -120..120i64, a_pc in -120..120i64, a_nc in -120..120i64,
    ) {
        let counts = StudyCounts::from_array(cells);
        let e = NetEffectCounts::new(a_pn, a_pc, a_nc);
        match adjusted_tables(&counts, &e) {
            None => {
                let p = counts.n_p1 as i64 - a_pn - a_pc;
                let n = counts.n_n1 as i64 + a_pn - a_nc;
                let c = counts.n_c1 as i64 + a_pc + a_nc;
                prop_assert!(!e.within_bounds(&counts) || p < 0 || n < 0 || c < 0);
            }
            Some(t) => {
                prop_assert_eq!(t.i.a + t.i.c + t.ii.c, counts.n_pn1() + counts.n_c1);
                prop_assert_eq!(t.iii.a, t.i.a + t.i.c);
                prop_assert_eq!(t.i.a, t.ii.a);
                prop_assert_eq!(t.ii.c, t.iii.c);
                prop_assert_eq!((t.i.b, t.i.d, t.ii.d, t.iii.b), (counts.n_p0, counts.n_n0, counts.n_c0, counts.n_pn0()));
                prop_assert_eq!(adjusted_exposed_cells(&counts, &e), Some([t.i.a, t.i.c, t.ii.c]));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn product_rule_contains_any_rejection_set(
        cells in prop::array::uniform6(0..10u64),
        procedure in prop::sample::select(Procedure::ALL.to_vec()),
        alpha in 0.01..0.3f64,
    ) {
        let counts = StudyCounts::from_array(cells);
        let mut o = ConfsetOptions::new(Level::new(alpha).unwrap(), procedure);
        o.emit_members = true;
        let product = confidence_set(&counts, &o).unwrap();
        o.rule = ExclusionRule::AnyReject;
        let any = confidence_set(&counts, &o).unwrap();
        let product = product.members.unwrap();
        for m in any.members.unwrap() {
            prop_assert!(product.binary_search(&m).is_ok());
        }
    }

    #[test]
    fn confidence_set_independent_of_thread_count(
        cells in prop::array::uniform6(0..15u64),
        threads in 1..5usize,
        stride in 1..3u64,
    ) {
        let counts = StudyCounts::from_array(cells);
        let mut o = ConfsetOptions::new(Level::new(0.05).unwrap(), Procedure::Method1);
        o.emit_members = true;
        o.stride = stride;
        let serial = confidence_set(&counts, &o).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let parallel = pool.install(|| confidence_set(&counts, &o).unwrap());
        prop_assert_eq!(serial, parallel);
    }
}
