//! Acceptance suite: one line per criterion, tolerances pinned in the code.
//! Exits nonzero when any criterion fails.

mod common;

use std::time::{Duration, Instant};

use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdl_core::circle_dynamics::{build_compliant_tower, build_tower, is_prime, verify_oscillations, ModulusTower};
use tdl_core::dual_sequences::{corrected_pair, corrected_pair_against, dual_value, singular_buildup, verify_feasibility};
use tdl_core::finite_ot::{
    check_complementary_slackness, is_cyclically_monotone, solve, solve_dual, solve_primal,
    strong_monotone_potentials, Marginals,
};
use tdl_core::rational::{fmt_rat, int, rat};
use tdl_core::relaxed_gap::{build_gap_family, gap_demonstration, materialize_cost, verify_prop41, BetaSearch};
use tdl_core::tau_construction::{build_levels, build_tau_level1, quasi_cost, singular_mass, verify_level, TauLevel};
use tdl_core::Rational;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Towers {
    small: ModulusTower,
    small_levels: Vec<TauLevel>,
    compliant: ModulusTower,
    compliant_levels: Vec<TauLevel>,
}

fn towers() -> Towers {
    let small = build_tower(5, 2, &[]).unwrap();
    let compliant = build_compliant_tower(5, 2).unwrap();
    Towers {
        small_levels: build_levels(&small, 2).unwrap(),
        compliant_levels: build_levels(&compliant, 2).unwrap(),
        small,
        compliant,
    }
}

fn c1_strong_duality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0;
    for _ in 0..200 {
        let (cost, marg) = common::random_instance(&mut rng, 12, 0.2);
        let p = solve_primal(&cost, &marg).unwrap();
        let d = solve_dual(&cost, &marg).unwrap();
        let (plan, duals) = solve(&cost, &marg).unwrap();
        let slack = check_complementary_slackness(&plan, &duals, &cost).unwrap();
        if p.value != d.value || !slack.passed() {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("200 instances, N <= 12, {failures} mismatches"))
}

fn c2_birkhoff() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=6);
        let cost = common::random_square_cost(&mut rng, n);
        let value = solve_primal(&cost, &Marginals::uniform(n)).unwrap().value;
        if Some(value) != common::birkhoff_value(&cost) {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("50 instances, N <= 6, {failures} mismatches"))
}

fn c3_monotonicity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let perms = common::permutations(4);
    let mut exceptions = 0;
    let mut optimal = 0;
    for _ in 0..20 {
        let cost = common::random_square_cost(&mut rng, 4);
        let best = solve_primal(&cost, &Marginals::uniform(4)).unwrap().value;
        for p in &perms {
            let support: Vec<(usize, usize)> = p.iter().copied().enumerate().collect();
            let value: Rational = support.iter().map(|&(i, j)| cost.finite(i, j).unwrap().clone()).sum::<Rational>() / int(4);
            let is_opt = value == best;
            let mono = is_cyclically_monotone(&support, &cost).unwrap().monotone;
            let strong = strong_monotone_potentials(&support, &cost).unwrap().is_some();
            optimal += usize::from(is_opt);
            if is_opt != mono || mono != strong {
                exceptions += 1;
            }
        }
    }
    verdict(
        exceptions == 0,
        format!("480 plans ({optimal} optimal), {exceptions} exceptions"),
    )
}

fn c4_level_one() -> Verdict {
    let mut bad = Vec::new();
    for m1 in [5i64, 7, 11, 13] {
        let t = build_tower(m1 as u64, 1, &[]).unwrap();
        let level = build_tau_level1(&t).unwrap();
        let q = quasi_cost(&level, &t);
        let expected: Vec<i64> = (1..=m1)
            .map(|k| {
                if k == 1 || k == m1 {
                    -(m1 - 5) / 2
                } else if k == (m1 + 1) / 2 {
                    1
                } else {
                    2
                }
            })
            .collect();
        let ok = q.values == expected
            && singular_mass(&level, &t) == int(-1) + rat(3, m1)
            && q.integral() == int(1);
        if !ok {
            bad.push(m1);
        }
    }
    verdict(bad.is_empty(), format!("M1 in {{5, 7, 11, 13}}, failing: {bad:?}"))
}

fn c5_level_two(tw: &Towers) -> Verdict {
    let level = &tw.small_levels[1];
    let rep = verify_level(level, &tw.small);
    let m1 = 5usize;
    let checks = [
        ("permutation of Z/55", rep.permutation_ok && level.len() == 55),
        ("nesting", rep.nesting_ok == Some(true)),
        ("middle avoidance", rep.middle_avoidance_violations.is_empty()),
        ("singular count per parent", rep.max_singular_per_parent == Some(m1 * (m1 - 3))),
        ("change measure", rep.max_changes_per_good_parent.is_some_and(|c| c <= m1 as u64)),
        ("good children of singular parents", rep.singular_parent_good_violations == 0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!(
            "singular per parent {:?} (total {}), max changes per good parent {:?} <= 5, failing: {failed:?}",
            rep.max_singular_per_parent, rep.singular_count, rep.max_changes_per_good_parent
        ),
    )
}

fn c6_compliant(tw: &Towers) -> Verdict {
    let t = &tw.compliant;
    let m2 = t.m(2);
    let floor = 40 * 5u64.pow(5);
    let smallest = (floor + 1..m2).all(|p| p % 5 != 1 || !is_prime(p)) && m2 > floor && m2 % 5 == 1;
    let osc = verify_oscillations(t, 2).unwrap();
    let rep = verify_level(&tw.compliant_levels[1], t);
    let rise_bound = int(m2 as i64) / int(10) - int(10 * 125);
    let ok = smallest
        && osc.neighbor_max <= 100
        && int(osc.rise_min) >= rise_bound
        && rep.singular_difference_ok == Some(true)
        && rep.singular_mass_bound_ok == Some(true);
    verdict(
        ok,
        format!(
            "m2 = {m2} (smallest: {smallest}), neighbor max {} <= 100, rise {} >= {}, max singular value {:?} <= {}, mass {} within -1 + 3/M1 + c/m2 for analytic c = {} and empirical c = {}",
            osc.neighbor_max,
            osc.rise_min,
            fmt_rat(&rise_bound),
            rep.max_singular_difference,
            rep.singular_difference_bound.as_ref().map(fmt_rat).unwrap_or_default(),
            fmt_rat(&rep.ledger.singular_mass),
            40 * 5i64.pow(4) * (5 - 3),
            rep.singular_mass_constant.as_ref().map(fmt_rat).unwrap_or_default(),
        ),
    )
}

fn c7_dual_sequence(tw: &Towers) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, t, levels) in [("(5,11)", &tw.small, &tw.small_levels), ("compliant", &tw.compliant, &tw.compliant_levels)] {
        for level in levels {
            let pair = corrected_pair(level, t);
            let feasible = verify_feasibility(&pair, level, t).unwrap().passed();
            let identity = dual_value(&pair) + &pair.correction_norm == int(1);
            ok &= feasible && identity;
            if level.level == 1 {
                ok &= dual_value(&pair).is_one();
            }
        }
        let coarse = corrected_pair_against(&levels[0], &levels[1], t).unwrap();
        let feasible = verify_feasibility(&coarse, &levels[1], t).unwrap().passed();
        ok &= feasible && dual_value(&coarse) + &coarse.correction_norm == int(1);
        notes.push(format!("{name}: level-1 pair against level 2 removes {}", fmt_rat(&coarse.correction_norm)));
    }
    verdict(ok, format!("levels 1-2 on both towers feasible; {}", notes.join("; ")))
}

fn c8_singular_buildup(tw: &Towers) -> Verdict {
    let d = singular_buildup(&tw.compliant_levels, &tw.compliant, None).unwrap();
    let m2 = tw.compliant.m(2) as i64;
    let c = 40 * 5i64.pow(4) * (5 - 3);
    let carrier_shrinks = d[1].carrier_measure < d[0].carrier_measure;
    let mass_floor = int(1) - rat(3, 5) - rat(c, m2);
    let mass_ok = d[1].negative_mass.abs() >= mass_floor;
    let t11 = build_tower(11, 1, &[]).unwrap();
    let d11 = singular_buildup(&build_levels(&t11, 1).unwrap(), &t11, None).unwrap();
    let positive_ok = d11[0].positive_part >= rat(3, 2);
    let empirical_c = (int(1) - rat(3, 5) - d[1].negative_mass.abs()) * int(m2);
    verdict(
        carrier_shrinks && mass_ok && positive_ok,
        format!(
            "carrier {} -> {} (shrinks: {carrier_shrinks}), singular set {} -> {}, |negative mass| {} >= {} (c = {c}, empirical c = {}), positive part at M1 = 11: {}",
            fmt_rat(&d[0].carrier_measure),
            fmt_rat(&d[1].carrier_measure),
            fmt_rat(&d[0].singular_set_measure),
            fmt_rat(&d[1].singular_set_measure),
            fmt_rat(&d[1].negative_mass.abs()),
            fmt_rat(&mass_floor),
            fmt_rat(&empirical_c),
            fmt_rat(&d11[0].positive_part),
        ),
    )
}

fn c9_gap(tw: &Towers) -> Verdict {
    let small = build_gap_family(&tw.small, 2).unwrap();
    let compliant = build_gap_family(&tw.compliant, 2).unwrap();
    let mut means = true;
    let mut displacement = true;
    for f in [&small, &compliant] {
        for j in 1..=2 {
            for n in 1..=j {
                means &= verify_prop41(f, n, j).unwrap().mean_cost.is_one();
            }
        }
        let r = verify_prop41(f, 2, 2).unwrap();
        displacement &= r.displacement_max < rat(1, 5);
    }
    let (_, cost) = materialize_cost(&small, 2, 2).unwrap();
    let (plan, duals) = solve(&cost, &Marginals::uniform(55)).unwrap();
    let pd = plan.value.is_one() && duals.value.is_one();
    let eta_down = compliant.eta.windows(2).all(|w| w[1] < w[0]);
    let show = |f: &tdl_core::relaxed_gap::GapFamily| f.eta.iter().map(fmt_rat).collect::<Vec<_>>().join(", ");
    verdict(
        means && displacement && pd && eta_down,
        format!(
            "unit means {means}, displacement of tau_(2,2) < 1/5 {displacement}, P = {} D = {} at M = 2 on (5,11), eta compliant [{}] decreasing {eta_down}; eta (5,11) [{}]",
            fmt_rat(&plan.value),
            fmt_rat(&duals.value),
            show(&compliant),
            show(&small),
        ),
    )
}

fn c10_limit_trends(tw: &Towers) -> Verdict {
    let f = build_gap_family(&tw.compliant, 2).unwrap();
    let r1 = verify_prop41(&f, 1, 1).unwrap();
    let r2 = verify_prop41(&f, 2, 2).unwrap();
    let small = build_gap_family(&tw.small, 2).unwrap();
    let g = gap_demonstration(&small, 2, 2, &BetaSearch::default()).unwrap();
    let d = singular_buildup(&tw.compliant_levels, &tw.compliant, None).unwrap();
    let exact = r1.mean_cost.is_one() && r2.mean_cost.is_one() && g.primal.is_one();
    let witness = g
        .witness_cost
        .iter()
        .map(|(n, c)| format!("{n}: {}", fmt_rat(c)))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        exact,
        format!(
            "reported, not asserted: ||f-g|| {} (target 1/2), {} (target 1/4); positive part {} -> {}; witness cost [{witness}]; truncated P = {}",
            fmt_rat(&r1.l1_to_two_valued),
            fmt_rat(&r2.l1_to_two_valued),
            fmt_rat(&d[0].positive_part),
            fmt_rat(&d[1].positive_part),
            fmt_rat(&g.primal),
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map(|l| format!(" / {}s", l.as_secs())).unwrap_or_default();
        println!(
            "criterion {id:>2} {} {name}: {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    };
    let secs = |s| Some(Duration::from_secs(s));
    report(1, "exact strong duality", secs(30), &mut c1_strong_duality);
    report(2, "Birkhoff oracle", secs(10), &mut c2_birkhoff);
    report(3, "monotonicity equivalence", None, &mut c3_monotonicity);
    report(4, "level-1 construction", secs(1), &mut c4_level_one);

    let start = Instant::now();
    let tw = towers();
    println!("(towers and levels built in {:.2}s)", start.elapsed().as_secs_f64());
    report(5, "level-2 structure on (5,11)", secs(1), &mut || c5_level_two(&tw));
    report(6, "level-2 compliant bounds", secs(120), &mut || c6_compliant(&tw));
    report(7, "dual sequence", None, &mut || c7_dual_sequence(&tw));
    report(8, "singular build-up surrogate", None, &mut || c8_singular_buildup(&tw));
    report(9, "double-indexed family", None, &mut || c9_gap(&tw));
    report(10, "limit claims as trends", None, &mut || c10_limit_trends(&tw));

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
