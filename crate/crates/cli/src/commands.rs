use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use tdl_core::circle_dynamics::{
    build_compliant_tower, build_tower, phi_level, verify_oscillations, IntStepFunction, ModulusTower,
};
use tdl_core::dual_sequences::{corrected_pair, corrected_pair_against, dual_value, singular_buildup, verify_feasibility};
use tdl_core::finite_ot::{self, check_complementary_slackness, is_cyclically_monotone, strong_monotone_potentials};
use tdl_core::io;
use tdl_core::rational::fmt_rat;
use tdl_core::relaxed_gap::{build_gap_family, gap_demonstration, verify_prop41, BetaSearch, GapFamily};
use tdl_core::tau_construction::{build_levels, quasi_cost, singular_ledger, verify_level, TauLevel};
use tdl_core::{Error, Rational};

use crate::{ConstructArgs, Format, GapArgs, Mode, SolveArgs, VerifyArgs};

/// 2 for bad input, 3 for infeasible instances, 4 for failed constructions.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(err) = e.downcast_ref::<Error>() {
        return match err {
            Error::InvalidInput(_) | Error::Parse(_) | Error::DimensionMismatch(_) | Error::NegativeEpsilon(_) => 2,
            Error::InfeasibleMarginals { .. } | Error::NoFinitePlan => 3,
            Error::SearchCapExceeded { .. } | Error::GrowthTooSmall(_) | Error::TowerTooShallow { .. } => 4,
            _ => 1,
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    1
}

fn r(v: &Rational) -> Value {
    Value::String(fmt_rat(v))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn solve_value(cost: &finite_ot::CostMatrix, marg: &finite_ot::Marginals) -> Result<(Value, bool)> {
    let (plan, duals) = finite_ot::solve(cost, marg)?;
    let slack = check_complementary_slackness(&plan, &duals, cost)?;
    let support = plan.support();
    let mono = is_cyclically_monotone(&support, cost)?;
    let potentials = strong_monotone_potentials(&support, cost)?;
    let passed = plan.value == duals.value && slack.passed() && mono.monotone && potentials.is_some();
    let pairs = |v: &[(usize, usize)]| v.iter().map(|&(i, j)| json!([i, j])).collect::<Vec<_>>();
    let report = json!({
        "primal": r(&plan.value),
        "dual": r(&duals.value),
        "plan": support.iter().map(|&(i, j)| json!([i, j, fmt_rat(plan.get(i, j))])).collect::<Vec<_>>(),
        "phi": duals.phi.iter().map(r).collect::<Vec<_>>(),
        "psi": duals.psi.iter().map(r).collect::<Vec<_>>(),
        "slackness": {
            "passed": slack.passed(),
            "gap": r(&slack.gap),
            "slack_violations": pairs(&slack.slack_violations),
            "infeasibilities": pairs(&slack.infeasibilities),
        },
        "monotonicity": {
            "cyclically_monotone": mono.monotone,
            "strong_potentials": potentials.is_some(),
        },
        "passed": passed,
    });
    Ok((report, passed))
}

pub fn solve(a: &SolveArgs) -> Result<bool> {
    let (cost, marg) = io::parse_instance(&read(&a.instance)?)?;
    eprintln!("solving a {} x {} instance", cost.n_rows(), cost.n_cols());
    let (report, passed) = solve_value(&cost, &marg)?;
    emit(a.out.as_deref(), &io::to_text(&report))?;
    Ok(passed)
}

fn make_tower(m1: u64, depth: usize, mode: Mode, floors: &[u64]) -> Result<ModulusTower> {
    eprintln!("building a depth-{depth} tower from m1 = {m1}");
    Ok(match mode {
        Mode::Compliant => build_compliant_tower(m1, depth)?,
        Mode::Relaxed => build_tower(m1, depth, floors)?,
    })
}

fn step_text(f: &IntStepFunction, format: Format) -> String {
    match format {
        Format::Csv => f.to_rational().to_csv(),
        Format::Json => io::to_text(&json!({"level": f.level, "values": f.values})),
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Everything `construct` writes, keyed by file name.
fn construct_files(tower: &ModulusTower, levels: &[TauLevel], format: Format) -> Result<(Vec<(String, String)>, bool)> {
    let mut files = vec![("tower.json".to_string(), io::to_text(&io::tower_to_json(tower)))];
    let mut level_reports = Vec::new();
    let mut passed = true;
    let deepest = levels.last().expect("at least one level");
    for level in levels {
        let n = level.level;
        eprintln!("level {n}: writing and verifying {} intervals", level.len());
        files.push((format!("level_{n}.json"), io::to_text(&io::level_to_json(level, tower))));
        files.push((format!("quasi_cost_{n}.{}", ext(format)), step_text(&quasi_cost(level, tower), format)));
        files.push((format!("phi_{n}.{}", ext(format)), step_text(&phi_level(tower, n), format)));

        let rep = verify_level(level, tower);
        let own = corrected_pair(level, tower);
        let own_feasible = verify_feasibility(&own, level, tower)?.passed();
        let against = corrected_pair_against(level, deepest, tower)?;
        let against_feasible = verify_feasibility(&against, deepest, tower)?.passed();
        let oscillation = if n >= 2 {
            let o = verify_oscillations(tower, n)?;
            passed &= o.passed();
            json!({"passed": o.passed(), "neighbor_max": o.neighbor_max, "short_orbit_max": o.short_orbit_max})
        } else {
            Value::Null
        };
        passed &= rep.passed() && own_feasible && against_feasible;
        level_reports.push(json!({
            "level": n,
            "passed": rep.passed(),
            "failures": rep.failures(),
            "singular_count": rep.singular_count,
            "singular_mass": r(&rep.ledger.singular_mass),
            "quasi_cost_integral": r(&rep.quasi_cost_integral),
            "dual_value": r(&dual_value(&own)),
            "dual_feasible": own_feasible,
            "surrogate_correction_norm": r(&against.correction_norm),
            "surrogate_feasible": against_feasible,
            "oscillations": oscillation,
        }));
    }
    let ledger: Vec<_> = levels.iter().map(|l| singular_ledger(l, tower)).collect();
    files.push(("ledger.json".into(), io::to_text(&io::ledger_to_json(&ledger))));
    let diagnostics = singular_buildup(levels, tower, None)?;
    files.push(("diagnostics.jsonl".into(), io::diagnostics_to_jsonl(&diagnostics)));
    files.push((
        "report.json".into(),
        io::to_text(&json!({"levels": level_reports, "passed": passed})),
    ));
    Ok((files, passed))
}

pub fn construct(a: &ConstructArgs) -> Result<bool> {
    let n = a.levels.unwrap_or(a.depth);
    if n == 0 || n > a.depth {
        return Err(Error::InvalidInput(format!("--levels must be in 1..={}", a.depth)).into());
    }
    let tower = make_tower(a.m1, a.depth, a.mode, &a.growth_floor)?;
    let levels = build_levels(&tower, n)?;
    let (files, passed) = construct_files(&tower, &levels, a.format)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (name, text) in &files {
        fs::write(a.out.join(name), text).with_context(|| format!("writing {name}"))?;
    }
    eprintln!("wrote {} files to {}", files.len(), a.out.display());
    Ok(passed)
}

fn gap_value(family: &GapFamily, graphs: usize, j: usize, search: &BetaSearch) -> Result<(Value, bool)> {
    let mut cells = Vec::new();
    let mut passed = true;
    for jj in 1..=family.j_max() {
        for n in 1..=jj {
            let rep = verify_prop41(family, n, jj)?;
            passed &= rep.passed();
            cells.push(json!({
                "n": n,
                "j": jj,
                "passed": rep.passed(),
                "mean_cost": r(&rep.mean_cost),
                "displacement_max": r(&rep.displacement_max),
                "displacement_bound": r(&rep.displacement_bound),
                "l1_to_two_valued": r(&rep.l1_to_two_valued),
                "l1_to_two_valued_unit_mean": r(&rep.l1_to_two_valued_unit_mean),
                "l1_target": r(&rep.l1_target),
            }));
        }
    }
    eprintln!("solving the truncated problem with {graphs} graphs at level {j}");
    let report = gap_demonstration(family, graphs, j, search)?;
    passed &= report.passed();
    let mut v = io::gap_report_to_json(&report);
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("tower".into(), io::tower_to_json(&family.tower));
    obj.insert("jmax".into(), json!(family.j_max()));
    obj.insert("seed".into(), json!(search.seed));
    obj.insert("samples".into(), json!(search.samples));
    obj.insert("cells".into(), Value::Array(cells));
    obj.insert("passed".into(), json!(passed));
    Ok((v, passed))
}

pub fn gap(a: &GapArgs) -> Result<bool> {
    let tower = if !a.primes.is_empty() {
        ModulusTower::from_primes(&a.primes)?
    } else {
        let m1 = a.m1.expect("clap requires --primes or --m1");
        make_tower(m1, a.jmax, a.mode, &a.growth_floor)?
    };
    if tower.depth() > a.jmax {
        // only the first jmax levels take part
        return gap_on(&tower.truncate(a.jmax)?, a);
    }
    gap_on(&tower, a)
}

fn gap_on(tower: &ModulusTower, a: &GapArgs) -> Result<bool> {
    eprintln!("building the family up to column {}", a.jmax);
    let family = build_gap_family(tower, a.jmax)?;
    let search = BetaSearch {
        seed: a.seed,
        samples: a.samples,
    };
    let (v, passed) = gap_value(&family, a.graphs, a.j.unwrap_or(a.jmax), &search)?;
    emit(a.out.as_deref(), &io::to_text(&v))?;
    Ok(passed)
}

struct Checks(Vec<(String, bool)>);

impl Checks {
    fn add(&mut self, name: impl Into<String>, ok: bool) {
        self.0.push((name.into(), ok));
    }

    fn finish(self) -> bool {
        let passed = self.0.iter().all(|c| c.1);
        let list: Vec<_> = self.0.iter().map(|(n, ok)| json!({"name": n, "passed": ok})).collect();
        print!("{}", io::to_text(&json!({"checks": list, "passed": passed})));
        passed
    }
}

fn verify_dir(dir: &Path) -> Result<bool> {
    let tower = io::tower_from_json(&io::parse_json(&read(&dir.join("tower.json"))?)?)?;
    let mut levels: Vec<TauLevel> = Vec::new();
    for n in 1..=tower.depth() {
        let path = dir.join(format!("level_{n}.json"));
        if !path.exists() {
            break;
        }
        eprintln!("loading level {n}");
        let level = io::level_from_json(&io::parse_json(&read(&path)?)?, &tower, levels.last())?;
        levels.push(level);
    }
    if levels.is_empty() {
        bail!(Error::InvalidInput(format!("{} holds no level files", dir.display())));
    }
    let format = if dir.join("quasi_cost_1.json").exists() {
        Format::Json
    } else {
        Format::Csv
    };
    let (files, passed) = construct_files(&tower, &levels, format)?;
    let mut checks = Checks(Vec::new());
    checks.add("invariants", passed);
    for (name, text) in files {
        let path = dir.join(&name);
        if path.exists() {
            checks.add(format!("{name} matches recomputation"), read(&path)? == text);
        }
    }
    Ok(checks.finish())
}

fn verify_file(path: &Path) -> Result<bool> {
    let text = read(path)?;
    let v = io::parse_json(&text)?;
    let mut checks = Checks(Vec::new());
    if v.get("cost").is_some() {
        let (cost, marg) = io::parse_instance(&text)?;
        let (_, passed) = solve_value(&cost, &marg)?;
        checks.add("certificates", passed);
    } else if v.get("witness_cost").is_some() {
        let field = |k: &str| {
            v.get(k)
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Parse(format!("gap report lacks {k:?}")))
        };
        let tower = io::tower_from_json(v.get("tower").ok_or_else(|| Error::Parse("gap report lacks \"tower\"".into()))?)?;
        let family = build_gap_family(&tower, field("jmax")? as usize)?;
        let search = BetaSearch {
            seed: field("seed")?,
            samples: field("samples")? as usize,
        };
        let (again, passed) = gap_value(&family, field("M")? as usize, field("j")? as usize, &search)?;
        checks.add("exact assertions", passed);
        checks.add("report matches recomputation", io::to_text(&again) == text);
    } else {
        bail!(Error::Parse(format!("{} is neither an instance nor a gap report", path.display())));
    }
    Ok(checks.finish())
}

pub fn verify(a: &VerifyArgs) -> Result<bool> {
    if a.path.is_dir() {
        verify_dir(&a.path)
    } else {
        verify_file(&a.path)
    }
}
