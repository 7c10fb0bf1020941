//! Corrected dual pairs on the three-graph cost and the negative-mass
//! diagnostics of the quasi-cost.
//!
//! The cost is finite on three graphs: the identity (cost 1), one rotation
//! step (cost `1 - sign(l)`: 0 on the left half, 1 on the middle index, 2 on
//! the right half) and `σ` (cost `q₊`). A level-`n` pair `(φ^n, 1 - φ^n)` is
//! evaluated against the graphs of some reference level `N >= n` and `φ` is
//! lowered by the positive excess on each graph. Against its own level the
//! excess vanishes identically; against a deeper level it measures how far
//! the level-`n` pair is from feasibility for the finer dynamics.

use num_traits::Zero;

use crate::circle_dynamics::{phi_level, psi_level, region_sign, rotate, IntStepFunction, ModulusTower};
use crate::error::{Error, Result};
use crate::rational::{int, rat, Rational};
use crate::tau_construction::{quasi_cost_with, transport_cost_tau, IndexClass, TauLevel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualPairLevel {
    pub level: usize,
    /// Level whose graphs the pair was corrected against.
    pub reference_level: usize,
    pub phi_raw: IntStepFunction,
    pub psi: IntStepFunction,
    /// `φ_n` on the reference level's intervals.
    pub phi_corrected: IntStepFunction,
    /// Excess removed for the rotation graph, per reference index.
    pub rotation_excess: Vec<i64>,
    /// Excess removed for the `σ` graph, per reference index.
    pub tau_excess: Vec<i64>,
    pub correction_norm: Rational,
}

impl DualPairLevel {
    fn block(&self) -> usize {
        self.phi_corrected.len() / self.phi_raw.len()
    }

    /// `φ^n` lifted to the reference level.
    pub fn phi_raw_lifted(&self, x: usize) -> i64 {
        self.phi_raw.values[x / self.block()]
    }

    pub fn psi_lifted(&self, x: usize) -> i64 {
        self.psi.values[x / self.block()]
    }
}

/// Cost on the one-step rotation graph at modulus `big_m`.
pub fn rotation_cost(big_m: u64, l: u64) -> i64 {
    1 - region_sign(big_m, l)
}

fn pair_against(level: &TauLevel, reference: &TauLevel, tower: &ModulusTower, correct: bool) -> Result<DualPairLevel> {
    let n = level.level;
    let big_n = reference.level;
    if big_n < n {
        return Err(Error::InvalidInput(format!(
            "reference level {big_n} is coarser than level {n}"
        )));
    }
    tower.require(big_n)?;
    let phi = phi_level(tower, n);
    let psi = psi_level(&phi);
    let big_m = tower.big_m(big_n);
    let block = (big_m / tower.big_m(n)) as usize;
    let q_ref = quasi_cost_with(reference, &phi_level(tower, big_n));

    let size = big_m as usize;
    let mut rotation_excess = vec![0i64; size];
    let mut tau_excess = vec![0i64; size];
    let mut corrected = vec![0i64; size];
    let mut removed: i128 = 0;
    for x in 0..size {
        let f = phi.values[x / block];
        let t1 = rotate(tower, big_n, x as u64, 1) as usize;
        let ts = reference.sigma[x] as usize;
        if correct {
            rotation_excess[x] = (f + psi.values[t1 / block] - rotation_cost(big_m, x as u64)).max(0);
            tau_excess[x] = (f + psi.values[ts / block] - q_ref.values[x].max(0)).max(0);
        }
        corrected[x] = f - rotation_excess[x] - tau_excess[x];
        removed += i128::from(rotation_excess[x] + tau_excess[x]);
    }
    Ok(DualPairLevel {
        level: n,
        reference_level: big_n,
        phi_raw: phi,
        psi,
        phi_corrected: IntStepFunction {
            level: big_n,
            values: corrected,
        },
        rotation_excess,
        tau_excess,
        correction_norm: Rational::new(removed.into(), (size as i64).into()),
    })
}

/// The pair corrected against its own level's graphs.
pub fn corrected_pair(level: &TauLevel, tower: &ModulusTower) -> DualPairLevel {
    pair_against(level, level, tower, true).expect("a level is its own valid reference")
}

/// The level-`n` pair corrected against the graphs of a finer level.
pub fn corrected_pair_against(level: &TauLevel, reference: &TauLevel, tower: &ModulusTower) -> Result<DualPairLevel> {
    pair_against(level, reference, tower, true)
}

/// The uncorrected pair, laid out on the reference level.
pub fn raw_pair_against(level: &TauLevel, reference: &TauLevel, tower: &ModulusTower) -> Result<DualPairLevel> {
    pair_against(level, reference, tower, false)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub level: usize,
    pub reference_level: usize,
    pub identity_violations: Vec<u64>,
    pub rotation_violations: Vec<u64>,
    pub tau_violations: Vec<u64>,
    /// Indices where the corrected `φ` exceeds the raw one.
    pub monotonicity_violations: Vec<u64>,
    /// Measure of reference indices where the rotation and identity graphs are
    /// both tight after correction.
    pub tight_measure: Rational,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.identity_violations.is_empty()
            && self.rotation_violations.is_empty()
            && self.tau_violations.is_empty()
            && self.monotonicity_violations.is_empty()
    }
}

/// Exact check of `φ_n ⊕ ψ_n <= c` on the three graphs of `reference`.
pub fn verify_feasibility(pair: &DualPairLevel, reference: &TauLevel, tower: &ModulusTower) -> Result<FeasibilityReport> {
    let big_n = pair.reference_level;
    if reference.level != big_n {
        return Err(Error::InvalidInput(format!(
            "pair was built against level {big_n}, not {}",
            reference.level
        )));
    }
    let big_m = tower.big_m(big_n);
    let q_ref = quasi_cost_with(reference, &phi_level(tower, big_n));
    let mut rep = FeasibilityReport {
        level: pair.level,
        reference_level: big_n,
        identity_violations: Vec::new(),
        rotation_violations: Vec::new(),
        tau_violations: Vec::new(),
        monotonicity_violations: Vec::new(),
        tight_measure: Rational::zero(),
    };
    let mut tight = 0i64;
    for x in 0..big_m as usize {
        let f = pair.phi_corrected.values[x];
        let xu = x as u64;
        let id = f + pair.psi_lifted(x);
        let rot = f + pair.psi_lifted(rotate(tower, big_n, xu, 1) as usize);
        let tau = f + pair.psi_lifted(reference.sigma[x] as usize);
        if id > 1 {
            rep.identity_violations.push(xu);
        }
        if rot > rotation_cost(big_m, xu) {
            rep.rotation_violations.push(xu);
        }
        if tau > q_ref.values[x].max(0) {
            rep.tau_violations.push(xu);
        }
        if f > pair.phi_raw_lifted(x) {
            rep.monotonicity_violations.push(xu);
        }
        if id == 1 && rot == rotation_cost(big_m, xu) {
            tight += 1;
        }
    }
    rep.tight_measure = rat(tight, big_m as i64);
    Ok(rep)
}

/// `(1/M_N)·Σ (φ_n + ψ_n)` on the reference level.
pub fn dual_value(pair: &DualPairLevel) -> Rational {
    let size = pair.phi_corrected.len();
    let s: i128 = (0..size)
        .map(|x| i128::from(pair.phi_corrected.values[x] + pair.psi_lifted(x)))
        .sum();
    Rational::new(s.into(), (size as i64).into())
}

/// `{1/2, 1/4, …}` down to the smallest power of two at least `2/M`.
pub fn default_delta_grid(big_m: u64) -> Vec<Rational> {
    let floor = rat(2, big_m as i64);
    let mut out = Vec::new();
    let mut d = rat(1, 2);
    while d >= floor {
        out.push(d.clone());
        d /= int(2);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingularDiagnostic {
    pub level: usize,
    /// `Σ min(q, 0) / M_n`.
    pub negative_mass: Rational,
    /// `μ{q < 0}`.
    pub carrier_measure: Rational,
    /// `μ` of the singular index set.
    pub singular_set_measure: Rational,
    /// For each δ: the largest `-Σ_{l∈A} q(l)/M_n` over index sets `A` of
    /// measure below δ.
    pub small_set_sup: Vec<(Rational, Rational)>,
    /// `Σ (q - 1)₊ / M_n`.
    pub excess_above_one: Rational,
    /// `Σ (1 - q)₊ / M_n`.
    pub deficit_below_one: Rational,
    pub positive_part: Rational,
    pub good_part: Rational,
    /// Own-level corrected pair.
    pub dual_value: Rational,
    pub correction_norm: Rational,
    /// Correction against the deepest supplied level.
    pub surrogate_correction_norm: Rational,
    /// `4 M_n / m_{n+1}` when the next level exists.
    pub rotation_error_bound: Option<Rational>,
}

impl SingularDiagnostic {
    pub fn balanced(&self) -> bool {
        self.excess_above_one == self.deficit_below_one
    }
}

/// Diagnostics for each supplied level, in increasing order. The surrogate
/// correction is taken against the last one.
pub fn singular_buildup(
    levels: &[TauLevel],
    tower: &ModulusTower,
    delta_grid: Option<&[Rational]>,
) -> Result<Vec<SingularDiagnostic>> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("no levels supplied".into()));
    }
    let deepest = levels.last().unwrap();
    let mut out = Vec::with_capacity(levels.len());
    for level in levels {
        let n = level.level;
        let big_m = tower.big_m(n);
        let q = quasi_cost_with(level, &phi_level(tower, n));
        let size = q.len() as i64;
        let frac = |v: i128| Rational::new(v.into(), size.into());

        let neg: i128 = q.values.iter().map(|&v| i128::from(v.min(0))).sum();
        let carrier = q.values.iter().filter(|&&v| v < 0).count() as i128;
        let singular = level.classes.iter().filter(|c| **c == IndexClass::Singular).count() as i128;
        let above: i128 = q.values.iter().map(|&v| i128::from((v - 1).max(0))).sum();
        let below: i128 = q.values.iter().map(|&v| i128::from((1 - v).max(0))).sum();

        let mut negatives: Vec<i64> = q.values.iter().copied().filter(|&v| v < 0).collect();
        negatives.sort_unstable();
        let grid = match delta_grid {
            Some(g) => g.to_vec(),
            None => default_delta_grid(big_m),
        };
        let small_set_sup = grid
            .into_iter()
            .map(|delta| {
                // |A| / M < δ  <=>  |A| <= ceil(δ·M) - 1
                let scaled = &delta * int(size);
                let cap: num_bigint::BigInt = scaled.ceil().to_integer() - 1;
                let cap = usize::try_from(cap).unwrap_or(0);
                let s: i128 = negatives.iter().take(cap).map(|&v| -i128::from(v)).sum();
                (delta, frac(s))
            })
            .collect();

        let tc = transport_cost_tau(level, tower);
        let own = corrected_pair(level, tower);
        let surrogate = corrected_pair_against(level, deepest, tower)?;
        let rotation_error_bound = (n < tower.depth()).then(|| rat(4 * big_m as i64, tower.m(n + 1) as i64));
        out.push(SingularDiagnostic {
            level: n,
            negative_mass: frac(neg),
            carrier_measure: frac(carrier),
            singular_set_measure: frac(singular),
            small_set_sup,
            excess_above_one: frac(above),
            deficit_below_one: frac(below),
            positive_part: tc.positive_part,
            good_part: tc.good_part,
            dual_value: dual_value(&own),
            correction_norm: own.correction_norm,
            surrogate_correction_norm: surrogate.correction_norm,
            rotation_error_bound,
        });
    }
    Ok(out)
}

/// Measure of reference indices where the correction is nonzero.
pub fn correction_support_measure(pair: &DualPairLevel) -> Rational {
    let size = pair.phi_corrected.len();
    let c = (0..size)
        .filter(|&x| (pair.rotation_excess[x] + pair.tau_excess[x]).is_positive())
        .count();
    rat(c as i64, size as i64)
}
