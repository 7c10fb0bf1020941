//! JSON reading and writing. Rationals travel as canonical `"p/q"` strings;
//! object keys come out sorted.

use serde_json::{json, Map, Value};

use crate::circle_dynamics::{ModulusTower, TowerMode};
use crate::dual_sequences::SingularDiagnostic;
use crate::error::{Error, Result};
use crate::finite_ot::{CostMatrix, Marginals};
use crate::rational::{fmt_rat, parse_rat, ExtRational, Rational};
use crate::relaxed_gap::GapReport;
use crate::tau_construction::{IndexClass, ParentView, SingularLedger, TauLevel};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Pretty JSON with a trailing newline.
pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
}

fn r(v: &Rational) -> Value {
    Value::String(fmt_rat(v))
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| parse_err(format!("missing field {key:?}")))
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| parse_err(format!("{what} must be a string")))
}

fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| parse_err(format!("{what} must be an array")))
}

fn as_u64(v: &Value, what: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| parse_err(format!("{what} must be a nonnegative integer")))
}

fn rational_list(v: &Value, what: &str) -> Result<Vec<Rational>> {
    as_array(v, what)?
        .iter()
        .map(|x| parse_rat(as_str(x, what)?))
        .collect()
}

/// `{"n", "cost", "mu", "nu"}` with cost entries `"p/q"` or `"inf"`.
pub fn parse_instance(text: &str) -> Result<(CostMatrix, Marginals)> {
    let v = parse_json(text)?;
    let n = as_u64(field(&v, "n")?, "n")? as usize;
    let rows = as_array(field(&v, "cost")?, "cost")?
        .iter()
        .map(|row| {
            as_array(row, "cost row")?
                .iter()
                .map(|x| ExtRational::parse(as_str(x, "cost entry")?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mu = rational_list(field(&v, "mu")?, "mu")?;
    let nu = rational_list(field(&v, "nu")?, "nu")?;
    if rows.len() != n || mu.len() != n || nu.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "n = {n} but cost has {} rows, mu {} and nu {} entries",
            rows.len(),
            mu.len(),
            nu.len()
        )));
    }
    let cost = CostMatrix::from_rows(rows)?;
    if cost.n_cols() != n {
        return Err(Error::DimensionMismatch(format!("cost is not {n} x {n}")));
    }
    Ok((cost, Marginals::new(mu, nu)))
}

pub fn instance_to_json(cost: &CostMatrix, marg: &Marginals) -> Value {
    let rows: Vec<Value> = (0..cost.n_rows())
        .map(|i| {
            Value::Array(
                (0..cost.n_cols())
                    .map(|j| match cost.get(i, j) {
                        ExtRational::Finite(c) => r(c),
                        ExtRational::Infinite => Value::String("inf".into()),
                    })
                    .collect(),
            )
        })
        .collect();
    json!({
        "n": cost.n_rows(),
        "cost": rows,
        "mu": marg.mu.iter().map(r).collect::<Vec<_>>(),
        "nu": marg.nu.iter().map(r).collect::<Vec<_>>(),
    })
}

pub fn tower_to_json(tower: &ModulusTower) -> Value {
    let d = tower.depth();
    json!({
        "mode": tower.mode().as_str(),
        "primes": tower.primes(),
        "products": (1..=d).map(|j| tower.big_m(j)).collect::<Vec<_>>(),
        "alpha": (1..=d).map(|j| r(&tower.alpha(j))).collect::<Vec<_>>(),
    })
}

/// Rebuilds a tower from its primes; a stored mode must match the recomputed one.
pub fn tower_from_json(v: &Value) -> Result<ModulusTower> {
    let primes = as_array(field(v, "primes")?, "primes")?
        .iter()
        .map(|p| as_u64(p, "prime"))
        .collect::<Result<Vec<_>>>()?;
    let tower = ModulusTower::from_primes(&primes)?;
    if let Some(mode) = v.get("mode") {
        let stored = TowerMode::parse(as_str(mode, "mode")?)?;
        if stored != tower.mode() {
            return Err(Error::InvalidInput(format!(
                "stored mode {} disagrees with the primes ({})",
                stored.as_str(),
                tower.mode().as_str()
            )));
        }
    }
    Ok(tower)
}

fn runs<T: PartialEq + Clone>(xs: &[T]) -> Vec<(T, usize)> {
    let mut out: Vec<(T, usize)> = Vec::new();
    for x in xs {
        match out.last_mut() {
            Some((v, c)) if v == x => *c += 1,
            _ => out.push((x.clone(), 1)),
        }
    }
    out
}

/// Step counts and classes, run-length encoded inside each parent block.
pub fn level_to_json(level: &TauLevel, tower: &ModulusTower) -> Value {
    let block = tower.m(level.level) as usize;
    let blocks: Vec<Value> = level
        .tau
        .chunks(block)
        .zip(level.classes.chunks(block))
        .map(|(t, c)| {
            let codes: Vec<char> = c.iter().map(|x| x.code()).collect();
            json!({
                "tau": runs(t).into_iter().map(|(v, n)| json!([v, n])).collect::<Vec<_>>(),
                "classes": runs(&codes).into_iter().map(|(v, n)| json!([v.to_string(), n])).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "level": level.level,
        "block": block,
        "primes": tower.primes()[..level.level],
        "blocks": blocks,
    })
}

fn expand<T: Clone>(runs: &[Value], what: &str, parse: impl Fn(&Value) -> Result<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for run in runs {
        let pair = as_array(run, what)?;
        if pair.len() != 2 {
            return Err(parse_err(format!("{what} run must be [value, count]")));
        }
        let v = parse(&pair[0])?;
        let n = as_u64(&pair[1], "run length")? as usize;
        out.extend(std::iter::repeat_n(v, n));
    }
    Ok(out)
}

/// Reads a level back; `parent` must be the already loaded previous level.
pub fn level_from_json(v: &Value, tower: &ModulusTower, parent: Option<&TauLevel>) -> Result<TauLevel> {
    let n = as_u64(field(v, "level")?, "level")? as usize;
    tower.require(n)?;
    let primes = as_array(field(v, "primes")?, "primes")?
        .iter()
        .map(|p| as_u64(p, "prime"))
        .collect::<Result<Vec<_>>>()?;
    if primes[..] != tower.primes()[..n] {
        return Err(Error::InvalidInput(format!("level {n} was built on another tower")));
    }
    let mut tau = Vec::new();
    let mut classes = Vec::new();
    for b in as_array(field(v, "blocks")?, "blocks")? {
        tau.extend(expand(as_array(field(b, "tau")?, "tau")?, "tau", |x| {
            x.as_i64().ok_or_else(|| parse_err("step count must be an integer"))
        })?);
        classes.extend(expand(as_array(field(b, "classes")?, "classes")?, "classes", |x| {
            let s = as_str(x, "class")?;
            let mut chars = s.chars();
            match (chars.next().and_then(IndexClass::from_code), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(parse_err(format!("unknown class code {s:?}"))),
            }
        })?);
    }
    let view = match (n, parent) {
        (1, _) => None,
        (_, Some(p)) if p.level + 1 == n => Some(ParentView {
            tau: p.tau.clone(),
            sigma: p.sigma.clone(),
            classes: p.classes.clone(),
        }),
        _ => return Err(Error::InvalidInput(format!("level {n} needs level {} as parent", n - 1))),
    };
    TauLevel::from_parts(tower, n, tau, classes, view)
}

pub fn ledger_to_json(ledger: &[SingularLedger]) -> Value {
    Value::Array(
        ledger
            .iter()
            .map(|l| {
                json!({
                    "level": l.level,
                    "singular_mass": r(&l.singular_mass),
                    "good_deviation": r(&l.good_deviation),
                    "change_measure": r(&l.change_measure),
                })
            })
            .collect(),
    )
}

/// One diagnostics line.
pub fn diagnostic_to_json(d: &SingularDiagnostic) -> Value {
    let mut sup = Map::new();
    for (delta, value) in &d.small_set_sup {
        sup.insert(fmt_rat(delta), r(value));
    }
    json!({
        "level": d.level,
        "dual_value": r(&d.dual_value),
        "correction_norm": r(&d.correction_norm),
        "surrogate_correction_norm": r(&d.surrogate_correction_norm),
        "carrier_measure": r(&d.carrier_measure),
        "singular_set_measure": r(&d.singular_set_measure),
        "negative_mass": r(&d.negative_mass),
        "excess_above_one": r(&d.excess_above_one),
        "deficit_below_one": r(&d.deficit_below_one),
        "positive_part": r(&d.positive_part),
        "good_part": r(&d.good_part),
        "rotation_error_bound": d.rotation_error_bound.as_ref().map(r),
        "small_set_sup": Value::Object(sup),
    })
}

/// JSON lines, one per level.
pub fn diagnostics_to_jsonl(ds: &[SingularDiagnostic]) -> String {
    ds.iter()
        .map(|d| serde_json::to_string(&diagnostic_to_json(d)).expect("serializable") + "\n")
        .collect()
}

pub fn gap_report_to_json(g: &GapReport) -> Value {
    let by_n = |xs: &[(usize, Rational)]| {
        let mut m = Map::new();
        for (n, v) in xs {
            m.insert(n.to_string(), r(v));
        }
        Value::Object(m)
    };
    json!({
        "M": g.graphs,
        "j": g.level,
        "primal": r(&g.primal),
        "dual": r(&g.dual),
        "eta": by_n(&g.eta),
        "witness_cost": by_n(&g.witness_cost),
        "beta_threshold": g.beta_threshold.as_ref().map(r),
        "unit_means": g.unit_means,
        "passed": g.passed(),
    })
}
