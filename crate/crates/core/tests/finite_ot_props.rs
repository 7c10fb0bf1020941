mod common;

use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tdl_core::finite_ot::{
    check_complementary_slackness, is_cyclically_monotone, solve, solve_relaxed_dual,
    strong_monotone_potentials, CostMatrix, Marginals, TransportPlan,
};
use tdl_core::rational::{int, rat};
use tdl_core::{Error, ExtRational, Rational};

fn instance(seed: u64, max_n: usize, inf_prob: f64) -> (CostMatrix, Marginals) {
    common::random_instance(&mut ChaCha8Rng::seed_from_u64(seed), max_n, inf_prob)
}

/// Product coupling `μ ⊗ ν`, which charges every pair.
fn product_plan(cost: &CostMatrix, marg: &Marginals) -> TransportPlan {
    let entries = marg
        .mu
        .iter()
        .flat_map(|a| marg.nu.iter().map(move |b| a * b))
        .collect();
    TransportPlan::from_entries(cost, marg, entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn primal_equals_dual_with_slackness(seed in any::<u64>()) {
        let (cost, marg) = instance(seed, 6, 0.25);
        let (plan, duals) = solve(&cost, &marg).unwrap();
        prop_assert_eq!(&plan.value, &duals.value);
        prop_assert!(duals.is_feasible(&cost));
        prop_assert!(check_complementary_slackness(&plan, &duals, &cost).unwrap().passed());
    }

    #[test]
    fn plan_has_the_prescribed_marginals(seed in any::<u64>()) {
        let (cost, marg) = instance(seed, 6, 0.25);
        let (plan, _) = solve(&cost, &marg).unwrap();
        for i in 0..plan.n_rows {
            let row: Rational = (0..plan.n_cols).map(|j| plan.get(i, j).clone()).sum();
            prop_assert_eq!(&row, &marg.mu[i]);
        }
        for j in 0..plan.n_cols {
            let col: Rational = (0..plan.n_rows).map(|i| plan.get(i, j).clone()).sum();
            prop_assert_eq!(&col, &marg.nu[j]);
        }
        prop_assert!(plan.entries.iter().all(|x| *x >= Rational::zero()));
    }

    #[test]
    fn optimal_support_is_monotone_with_potentials(seed in any::<u64>()) {
        let (cost, marg) = instance(seed, 6, 0.25);
        let (plan, _) = solve(&cost, &marg).unwrap();
        let support = plan.support();
        prop_assert!(is_cyclically_monotone(&support, &cost).unwrap().monotone);
        let pot = strong_monotone_potentials(&support, &cost).unwrap();
        prop_assert!(pot.is_some());
        let pot = pot.unwrap();
        prop_assert!(pot.is_feasible(&cost));
        for (i, j) in support {
            prop_assert_eq!(&pot.phi[i] + &pot.psi[j], cost.finite(i, j).unwrap().clone());
        }
    }

    #[test]
    fn shifting_the_cost_shifts_the_value(seed in any::<u64>(), shift in 0i64..5) {
        let (cost, marg) = instance(seed, 5, 0.0);
        let shifted = CostMatrix::from_rows(
            (0..cost.n_rows())
                .map(|i| (0..cost.n_cols()).map(|j| ExtRational::Finite(cost.finite(i, j).unwrap() + int(shift))).collect())
                .collect(),
        )
        .unwrap();
        let a = solve(&cost, &marg).unwrap().0.value;
        let b = solve(&shifted, &marg).unwrap().0.value;
        prop_assert_eq!(b, a + int(shift));
    }

    #[test]
    fn relaxed_dual_is_monotone_in_eps(seed in any::<u64>()) {
        let (cost, marg) = instance(seed, 4, 0.0);
        let pi0 = product_plan(&cost, &marg);
        let mut prev: Option<ExtRational> = None;
        for eps in [int(0), rat(1, 10), rat(1, 2), int(2)] {
            let v = solve_relaxed_dual(&cost, &marg, &pi0, &eps).unwrap().value;
            if let (Some(ExtRational::Finite(p)), ExtRational::Finite(c)) = (&prev, &v) {
                prop_assert!(c >= p);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn relaxed_dual_with_full_support_reference_is_the_primal(seed in any::<u64>()) {
        let (cost, marg) = instance(seed, 4, 0.0);
        let pi0 = product_plan(&cost, &marg);
        let p = solve(&cost, &marg).unwrap().0.value;
        let d = solve_relaxed_dual(&cost, &marg, &pi0, &Rational::zero()).unwrap().value;
        prop_assert_eq!(d, ExtRational::Finite(p));
    }
}

#[test]
fn two_point_example() {
    let cost = CostMatrix::from_rows(vec![
        vec![ExtRational::Finite(int(0)), ExtRational::Finite(int(1))],
        vec![ExtRational::Finite(int(1)), ExtRational::Finite(int(0))],
    ])
    .unwrap();
    let (plan, duals) = solve(&cost, &Marginals::uniform(2)).unwrap();
    assert!(plan.value.is_zero());
    assert!(duals.value.is_zero());
    assert_eq!(plan.get(0, 0), &rat(1, 2));
}

#[test]
fn anti_diagonal_plan_is_not_monotone() {
    let cost = CostMatrix::from_rows(vec![
        vec![ExtRational::Finite(int(0)), ExtRational::Finite(int(1))],
        vec![ExtRational::Finite(int(1)), ExtRational::Finite(int(0))],
    ])
    .unwrap();
    let support = [(0, 1), (1, 0)];
    let check = is_cyclically_monotone(&support, &cost).unwrap();
    assert!(!check.monotone);
    assert!(check.witness.is_some());
    assert!(strong_monotone_potentials(&support, &cost).unwrap().is_none());
}

#[test]
fn infinite_everywhere_but_one_cell_is_forced() {
    let mut cost = CostMatrix::infinite(1, 1);
    cost.set(0, 0, ExtRational::Finite(rat(7, 3))).unwrap();
    let (plan, duals) = solve(&cost, &Marginals::uniform(1)).unwrap();
    assert_eq!(plan.value, rat(7, 3));
    assert_eq!(duals.value, rat(7, 3));
    assert!(plan.get(0, 0).is_one());
}

#[test]
fn no_finite_plan_is_reported() {
    let mut cost = CostMatrix::infinite(2, 2);
    cost.set(0, 0, ExtRational::Finite(int(1))).unwrap();
    cost.set(1, 0, ExtRational::Finite(int(1))).unwrap();
    let err = solve(&cost, &Marginals::uniform(2)).unwrap_err();
    assert!(matches!(err, Error::NoFinitePlan), "{err:?}");
}

#[test]
fn negative_eps_is_rejected() {
    let (cost, marg) = instance(1, 3, 0.0);
    let pi0 = product_plan(&cost, &marg);
    let err = solve_relaxed_dual(&cost, &marg, &pi0, &rat(-1, 2)).unwrap_err();
    assert!(matches!(err, Error::NegativeEpsilon(_)));
}
