mod common;

use num_traits::{One, Zero};
use proptest::prelude::*;

use tdl_core::circle_dynamics::{build_tower, ModulusTower};
use tdl_core::dual_sequences::{
    corrected_pair, corrected_pair_against, dual_value, singular_buildup, verify_feasibility,
};
use tdl_core::finite_ot::{solve, Marginals};
use tdl_core::rational::{int, rat};
use tdl_core::relaxed_gap::{
    build_gap_family, eta_closed_form, gap_cost, materialize_cost, verify_prop41, GapFamily,
};
use tdl_core::tau_construction::{build_levels, TauLevel};
use tdl_core::Rational;

fn tower_and_levels() -> impl Strategy<Value = (ModulusTower, Vec<TauLevel>)> {
    prop::sample::select(vec![5u64, 7, 11]).prop_map(|m1| {
        let t = build_tower(m1, 2, &[3 * m1 * m1]).unwrap();
        let levels = build_levels(&t, 2).unwrap();
        (t, levels)
    })
}

fn family() -> impl Strategy<Value = GapFamily> {
    prop::sample::select(vec![5u64, 7, 11, 13])
        .prop_map(|m1| build_gap_family(&build_tower(m1, 2, &[3 * m1]).unwrap(), 2).unwrap())
}

/// `1 - μ{h = 0}` on the diagonal cell, with `h = 1 + φ∘σ - φ` from the
/// brute-force potential.
fn oracle_eta(f: &GapFamily, n: usize) -> Rational {
    let t = &f.tower;
    let (big_m, p) = (t.big_m(n), t.p(n));
    let phi = common::brute_phi(big_m, p);
    let cell = f.cell(n, n).unwrap();
    let zeros = (0..big_m as usize)
        .filter(|&l| 1 + phi[cell.sigma[l] as usize] - phi[l] == 0)
        .count();
    int(1) - rat(zeros as i64, big_m as i64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn corrected_pairs_are_feasible_and_account_for_the_correction((t, levels) in tower_and_levels()) {
        for level in &levels {
            let pair = corrected_pair(level, &t);
            prop_assert!(verify_feasibility(&pair, level, &t).unwrap().passed());
            prop_assert!(pair.correction_norm >= Rational::zero());
            prop_assert_eq!(dual_value(&pair) + &pair.correction_norm, int(1));
        }
        let pair = corrected_pair_against(&levels[0], &levels[1], &t).unwrap();
        prop_assert!(verify_feasibility(&pair, &levels[1], &t).unwrap().passed());
        prop_assert_eq!(dual_value(&pair) + &pair.correction_norm, int(1));
    }

    #[test]
    fn diagnostics_balance_and_grow_with_delta((t, levels) in tower_and_levels()) {
        for d in singular_buildup(&levels, &t, None).unwrap() {
            prop_assert!(d.balanced());
            prop_assert!(d.negative_mass <= Rational::zero());
            prop_assert!(d.carrier_measure <= d.singular_set_measure || d.carrier_measure.is_zero());
            // δ runs from 1/2 downwards, so the supremum can only shrink.
            prop_assert!(d.small_set_sup.windows(2).all(|w| w[0].0 > w[1].0 && w[0].1 >= w[1].1));
            prop_assert!(d.small_set_sup.iter().all(|(_, v)| *v <= -d.negative_mass.clone()));
        }
    }

    #[test]
    fn every_cell_is_a_unit_mean_permutation(f in family()) {
        for j in 1..=f.j_max() {
            for n in 1..=j {
                let cell = f.cell(n, j).unwrap();
                prop_assert!(cell.is_permutation());
                let h = gap_cost(cell, &f.tower);
                prop_assert_eq!(h.integral(), int(1));
                prop_assert!(verify_prop41(&f, n, j).unwrap().passed());
            }
        }
    }

    #[test]
    fn eta_matches_oracle_and_closed_form(f in family()) {
        for n in 1..=f.j_max() {
            let eta = f.eta(n).unwrap().clone();
            prop_assert_eq!(&eta, &oracle_eta(&f, n));
            prop_assert_eq!(&eta, &eta_closed_form(&f.tower, n));
        }
    }
}

#[test]
fn truncated_gap_problem_has_value_one() {
    for m1 in [5u64, 7] {
        let f = build_gap_family(&build_tower(m1, 1, &[]).unwrap(), 1).unwrap();
        let (tc, cost) = materialize_cost(&f, 1, 1).unwrap();
        assert_eq!(tc.finite_pairs(), cost.finite_count());
        let (plan, duals) = solve(&cost, &Marginals::uniform(tc.size())).unwrap();
        assert!(plan.value.is_one(), "M1 = {m1}: {}", plan.value);
        assert!(duals.value.is_one());
    }
}

#[test]
fn level_one_diagnostic_at_eleven() {
    let t = build_tower(11, 1, &[]).unwrap();
    let d = singular_buildup(&build_levels(&t, 1).unwrap(), &t, None).unwrap();
    assert_eq!(d[0].carrier_measure, rat(2, 11));
    assert_eq!(d[0].negative_mass, rat(-6, 11));
    assert_eq!(d[0].positive_part, rat(17, 11));
}
