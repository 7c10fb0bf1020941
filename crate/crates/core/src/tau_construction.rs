//! Level-by-level interval permutations `T^(τ_n)` on `Z/M_n Z`.
//!
//! A level-`n` index is `l = parent·m_n + k` with `k` the 0-based sub-index.
//! One rotation step moves the parent by `P_{n-1}` and the sub-index by one,
//! so a step count `τ` with `0 <= k + τ < m_n` carries `(parent, k)` to
//! `(σ_{n-1}(parent), k + τ)` exactly when `τ` is the parent's own count.
//!
//! The construction keeps those inherited counts where they fit, shifts the
//! outer halves of singular parents by `±Δφ·M_{n-1}`, and routes everything
//! else into the unused sub-indices of the image block, in increasing order on
//! both sides. Patched step counts are chosen so their orbit segment never
//! touches the middle index.

use num_traits::Zero;

use crate::circle_dynamics::{mod_inverse, phi_level, IntStepFunction, ModulusTower};
use crate::error::{Error, Result};
use crate::rational::{int, rat, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexClass {
    Good,
    Singular,
    /// Descendants of the middle level-1 interval; `τ = 0` there.
    Middle,
}

impl IndexClass {
    pub fn code(self) -> char {
        match self {
            IndexClass::Good => 'g',
            IndexClass::Singular => 's',
            IndexClass::Middle => 'm',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'g' => Some(IndexClass::Good),
            's' => Some(IndexClass::Singular),
            'm' => Some(IndexClass::Middle),
            _ => None,
        }
    }
}

/// The previous level as seen from its refinement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParentView {
    pub tau: Vec<i64>,
    pub sigma: Vec<u64>,
    pub classes: Vec<IndexClass>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TauLevel {
    pub level: usize,
    pub tau: Vec<i64>,
    pub sigma: Vec<u64>,
    pub classes: Vec<IndexClass>,
    pub parent: Option<ParentView>,
}

impl TauLevel {
    /// Rebuilds a level from stored step counts and classes.
    pub fn from_parts(
        tower: &ModulusTower,
        level: usize,
        tau: Vec<i64>,
        classes: Vec<IndexClass>,
        parent: Option<ParentView>,
    ) -> Result<Self> {
        tower.require(level)?;
        let big_m = tower.big_m(level) as usize;
        if tau.len() != big_m || classes.len() != big_m {
            return Err(Error::DimensionMismatch(format!(
                "level {level} needs {big_m} entries, got {} / {}",
                tau.len(),
                classes.len()
            )));
        }
        let sigma = induced_sigma(tower, level, &tau);
        Ok(TauLevel {
            level,
            tau,
            sigma,
            classes,
            parent,
        })
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn good_set(&self) -> Vec<u64> {
        self.indices_of(IndexClass::Good)
    }

    pub fn singular_set(&self) -> Vec<u64> {
        self.indices_of(IndexClass::Singular)
    }

    fn indices_of(&self, class: IndexClass) -> Vec<u64> {
        (0..self.len() as u64)
            .filter(|&l| self.classes[l as usize] == class)
            .collect()
    }

    fn view(&self) -> ParentView {
        ParentView {
            tau: self.tau.clone(),
            sigma: self.sigma.clone(),
            classes: self.classes.clone(),
        }
    }
}

fn induced_sigma(tower: &ModulusTower, n: usize, tau: &[i64]) -> Vec<u64> {
    let big_m = i128::from(tower.big_m(n));
    let p = i128::from(tower.p(n));
    tau.iter()
        .enumerate()
        .map(|(l, &t)| (l as i128 + i128::from(t) * p).rem_euclid(big_m) as u64)
        .collect()
}

pub fn build_tau_level1(tower: &ModulusTower) -> Result<TauLevel> {
    tower.require(1)?;
    let m1 = tower.m(1) as i64;
    let half = (m1 - 3) / 2;
    let mut tau = Vec::with_capacity(m1 as usize);
    let mut classes = Vec::with_capacity(m1 as usize);
    for k in 1..=m1 {
        let (t, c) = if k == 1 {
            (half, IndexClass::Singular)
        } else if k == m1 {
            (-half, IndexClass::Singular)
        } else if k <= (m1 - 1) / 2 {
            (-1, IndexClass::Good)
        } else if k == (m1 + 1) / 2 {
            (0, IndexClass::Middle)
        } else {
            (1, IndexClass::Good)
        };
        tau.push(t);
        classes.push(c);
    }
    TauLevel::from_parts(tower, 1, tau, classes, None)
}

/// Step-count solver for one level: `l + s·P ≡ t (mod M)` with the orbit
/// segment between `l` and `t` avoiding the middle index.
pub(crate) struct Router {
    big_m: i128,
    p_inv: i128,
    mid: i128,
}

impl Router {
    pub(crate) fn new(tower: &ModulusTower, n: usize) -> Self {
        let big_m = tower.big_m(n);
        Router {
            big_m: i128::from(big_m),
            p_inv: i128::from(mod_inverse(tower.p(n) % big_m, big_m).expect("P_n and M_n coprime")),
            mid: i128::from((big_m - 1) / 2),
        }
    }

    /// Orbit offset of `to` as seen from `from`, in `[0, M)`.
    fn offset(&self, from: u64, to: u64) -> i128 {
        ((i128::from(to) - i128::from(from)).rem_euclid(self.big_m) * self.p_inv).rem_euclid(self.big_m)
    }

    pub(crate) fn avoids_middle(&self, l: u64, tau: i64) -> bool {
        if tau == 0 {
            return true;
        }
        let i_mid = self.offset(l, self.mid as u64);
        if i_mid == 0 {
            return false;
        }
        let t = i128::from(tau);
        if t > 0 {
            i_mid > t
        } else {
            i_mid < self.big_m + t
        }
    }

    pub(crate) fn route(&self, l: u64, target: u64) -> Option<i64> {
        let s0 = self.offset(l, target);
        if s0 == 0 {
            return Some(0);
        }
        [s0, s0 - self.big_m]
            .into_iter()
            .map(|s| s as i64)
            .find(|&s| self.avoids_middle(l, s))
    }

    /// A middle-avoiding route if there is one, else the nonnegative one.
    pub(crate) fn route_any(&self, l: u64, target: u64) -> i64 {
        self.route(l, target).unwrap_or_else(|| self.offset(l, target) as i64)
    }
}

/// Refines `prev` to the next level of `tower`.
pub fn extend_tau(prev: &TauLevel, tower: &ModulusTower) -> Result<TauLevel> {
    let n = prev.level + 1;
    tower.require_size(n)?;
    let m = tower.m(n) as i64;
    let prev_m = tower.big_m(n - 1);
    let big_m = tower.big_m(n);
    if prev.len() as u64 != prev_m {
        return Err(Error::DimensionMismatch("previous level does not match the tower".into()));
    }
    let phi_prev = phi_level(tower, n - 1);
    let router = Router::new(tower, n);
    let mut tau = vec![0i64; big_m as usize];
    let mut classes = vec![IndexClass::Middle; big_m as usize];

    for p in 0..prev_m {
        let pi = p as usize;
        let tp = prev.tau[pi];
        let image = prev.sigma[pi];
        let base = p * m as u64;
        // (0-based sub-index, step count) pairs that land by a fixed shift.
        let mut fixed: Vec<(i64, i64)> = Vec::new();
        let patched_class = match prev.classes[pi] {
            IndexClass::Middle => continue,
            IndexClass::Good => {
                if tp.abs() >= m {
                    return Err(Error::GrowthTooSmall(format!(
                        "level {n}: |τ| = {} does not fit in m = {m}",
                        tp.abs()
                    )));
                }
                fixed.extend((0..m).filter(|k| (0..m).contains(&(k + tp))).map(|k| (k, tp)));
                IndexClass::Good
            }
            IndexClass::Singular => {
                let dphi = phi_prev.values[image as usize] - phi_prev.values[pi];
                if dphi < 0 {
                    return Err(Error::GrowthTooSmall(format!(
                        "level {n}: singular parent {p} has Δφ = {dphi} < 0"
                    )));
                }
                let shift = dphi * prev_m as i64;
                // The block-middle child joins the side the parent moves
                // toward, so the two mirror-image singular parents agree.
                let right_from = if tp >= 0 { (m + 1) / 2 } else { (m + 3) / 2 };
                for k1 in 1..=m {
                    let t = if k1 >= right_from { tp + shift } else { tp - shift };
                    if (1..=m).contains(&(k1 + t)) {
                        fixed.push((k1 - 1, t));
                    }
                }
                let singular = m - fixed.len() as i64;
                if singular != 2 * shift {
                    return Err(Error::GrowthTooSmall(format!(
                        "level {n}: singular parent {p} leaves {singular} indices, expected 2Δφ·M = {}",
                        2 * shift
                    )));
                }
                IndexClass::Singular
            }
        };
        let mut used = vec![false; m as usize];
        let mut is_fixed = vec![false; m as usize];
        for &(k, t) in &fixed {
            used[(k + t) as usize] = true;
            is_fixed[k as usize] = true;
            tau[(base + k as u64) as usize] = t;
            classes[(base + k as u64) as usize] = IndexClass::Good;
        }
        let sources = (0..m).filter(|&k| !is_fixed[k as usize]);
        let gaps = (0..m).filter(|&k| !used[k as usize]);
        let image_base = image * m as u64;
        for (k, g) in sources.zip(gaps) {
            let l = base + k as u64;
            let target = image_base + g as u64;
            let s = router.route(l, target).ok_or_else(|| {
                Error::GrowthTooSmall(format!("level {n}: no middle-avoiding route from {l} to {target}"))
            })?;
            tau[l as usize] = s;
            classes[l as usize] = patched_class;
        }
    }

    for l in 0..big_m {
        if !router.avoids_middle(l, tau[l as usize]) {
            return Err(Error::GrowthTooSmall(format!(
                "level {n}: index {l} with τ = {} passes the middle index",
                tau[l as usize]
            )));
        }
    }
    TauLevel::from_parts(tower, n, tau, classes, Some(prev.view()))
}

/// Levels `1..=depth` of the construction.
pub fn build_levels(tower: &ModulusTower, depth: usize) -> Result<Vec<TauLevel>> {
    tower.require(depth)?;
    let mut levels = vec![build_tau_level1(tower)?];
    for _ in 1..depth {
        let next = extend_tau(levels.last().unwrap(), tower)?;
        levels.push(next);
    }
    Ok(levels)
}

/// `q(l) = φ^n(l) + ψ^n(σ(l)) = φ^n(l) - φ^n(σ(l)) + 1`.
pub fn quasi_cost(level: &TauLevel, tower: &ModulusTower) -> IntStepFunction {
    quasi_cost_with(level, &phi_level(tower, level.level))
}

pub fn quasi_cost_with(level: &TauLevel, phi: &IntStepFunction) -> IntStepFunction {
    IntStepFunction {
        level: level.level,
        values: (0..level.len())
            .map(|l| phi.values[l] - phi.values[level.sigma[l] as usize] + 1)
            .collect(),
    }
}

fn over(total: i128, big_m: usize) -> Rational {
    Rational::new(total.into(), (big_m as i64).into())
}

/// `Σ_{singular} (φ^n - φ^n∘σ) / M_n`.
pub fn singular_mass(level: &TauLevel, tower: &ModulusTower) -> Rational {
    let q = quasi_cost(level, tower);
    singular_mass_from(level, &q)
}

fn singular_mass_from(level: &TauLevel, q: &IntStepFunction) -> Rational {
    let s: i128 = (0..level.len())
        .filter(|&l| level.classes[l] == IndexClass::Singular)
        .map(|l| i128::from(q.values[l] - 1))
        .sum();
    over(s, level.len())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportCost {
    /// `Σ q / M_n`, always 1.
    pub total: Rational,
    /// `Σ q₊ / M_n`.
    pub positive_part: Rational,
    /// `Σ q / M_n` over good and middle indices.
    pub good_part: Rational,
}

pub fn transport_cost_tau(level: &TauLevel, tower: &ModulusTower) -> TransportCost {
    let q = quasi_cost(level, tower);
    let n = level.len();
    let total: i128 = q.values.iter().map(|&v| i128::from(v)).sum();
    let pos: i128 = q.values.iter().map(|&v| i128::from(v.max(0))).sum();
    let good: i128 = (0..n)
        .filter(|&l| level.classes[l] != IndexClass::Singular)
        .map(|l| i128::from(q.values[l]))
        .sum();
    TransportCost {
        total: over(total, n),
        positive_part: over(pos, n),
        good_part: over(good, n),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingularLedger {
    pub level: usize,
    pub singular_mass: Rational,
    /// `Σ |d_{n-1}(parent) - d_n(l)| / M_n` over children of good parents,
    /// with `d = φ - φ∘σ` at the respective level. At level 1 this is
    /// `Σ_{good} |1 - d| / M_1`.
    pub good_deviation: Rational,
    /// `μ{τ_n ≠ τ_{n-1}}` inside good parents (zero at level 1).
    pub change_measure: Rational,
}

pub fn singular_ledger(level: &TauLevel, tower: &ModulusTower) -> SingularLedger {
    let n = level.level;
    let phi = phi_level(tower, n);
    let q = quasi_cost_with(level, &phi);
    let size = level.len();
    let (dev, changed) = match &level.parent {
        None => {
            let dev: i128 = (0..size)
                .filter(|&l| level.classes[l] == IndexClass::Good)
                .map(|l| i128::from((q.values[l] - 2).abs()))
                .sum();
            (dev, 0i128)
        }
        Some(parent) => {
            let m = tower.m(n) as usize;
            let phi_prev = phi_level(tower, n - 1);
            let (mut dev, mut changed) = (0i128, 0i128);
            for l in 0..size {
                let p = l / m;
                if parent.classes[p] != IndexClass::Good {
                    continue;
                }
                let d_prev = phi_prev.values[p] - phi_prev.values[parent.sigma[p] as usize];
                dev += i128::from((d_prev - (q.values[l] - 1)).abs());
                if level.tau[l] != parent.tau[p] {
                    changed += 1;
                }
            }
            (dev, changed)
        }
    };
    SingularLedger {
        level: n,
        singular_mass: singular_mass_from(level, &q),
        good_deviation: over(dev, size),
        change_measure: over(changed, size),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub compliant: bool,
    pub permutation_ok: bool,
    /// Two sources with the same image, and that image.
    pub collision: Option<(u64, u64, u64)>,
    pub sigma_consistent: bool,
    pub tau_range_ok: bool,
    /// Every block's children land in the block its parent maps to.
    pub nesting_ok: Option<bool>,
    pub middle_avoidance_violations: Vec<u64>,
    pub middle_chain_zero: bool,
    pub singular_count: usize,
    /// `Σ 2Δφ·M_{n-1}` over singular parents.
    pub expected_singular_count: Option<usize>,
    /// Largest number of singular children in one parent.
    pub max_singular_per_parent: Option<usize>,
    pub singular_count_bound: Option<usize>,
    /// Singular indices where `φ - φ∘σ > 0`.
    pub singular_sign_violations: usize,
    pub quasi_cost_integral: Rational,
    pub ledger: SingularLedger,
    /// Largest per-parent count of changed step counts in good parents.
    pub max_changes_per_good_parent: Option<u64>,
    pub change_bound_ok: Option<bool>,
    /// Good children of singular parents with `φ - φ∘σ ≠ 0`.
    pub singular_parent_good_violations: usize,
    /// Unchanged children of good parents whose difference differs from the parent's.
    pub unchanged_difference_violations: usize,
    pub max_singular_difference: Option<i64>,
    /// Compliant level 2: `-m_2/(2M_1) + 20 M_1^4`.
    pub singular_difference_bound: Option<Rational>,
    pub singular_difference_ok: Option<bool>,
    /// Compliant level 2: `-1 + 3/M_1 + 40 M_1^4 (M_1 - 3)/m_2`.
    pub singular_mass_bound: Option<Rational>,
    pub singular_mass_bound_ok: Option<bool>,
    /// `m_2·(mass + 1 - 3/M_1)`: the constant the level-2 mass actually needs.
    pub singular_mass_constant: Option<Rational>,
    /// Compliant level 2: `good_deviation < 4 M_1^2 / m_2`.
    pub good_deviation_bound: Option<Rational>,
    pub good_deviation_ok: Option<bool>,
}

impl LevelReport {
    pub fn passed(&self) -> bool {
        self.permutation_ok
            && self.sigma_consistent
            && self.tau_range_ok
            && self.nesting_ok != Some(false)
            && self.middle_avoidance_violations.is_empty()
            && self.middle_chain_zero
            && self.expected_singular_count.is_none_or(|e| e == self.singular_count)
            && self.singular_count_bound.is_none_or(|b| self.singular_count < b)
            && self.singular_sign_violations == 0
            && self.quasi_cost_integral == int(1)
            && self.ledger.singular_mass <= Rational::zero()
            && self.change_bound_ok != Some(false)
            && self.singular_parent_good_violations == 0
            && self.unchanged_difference_violations == 0
            && self.singular_difference_ok != Some(false)
            && self.singular_mass_bound_ok != Some(false)
            && self.good_deviation_ok != Some(false)
    }

    /// Names of failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut flag = |ok: bool, name: &'static str| {
            if !ok {
                out.push(name);
            }
        };
        flag(self.permutation_ok, "permutation");
        flag(self.sigma_consistent, "sigma_consistent");
        flag(self.tau_range_ok, "tau_range");
        flag(self.nesting_ok != Some(false), "nesting");
        flag(self.middle_avoidance_violations.is_empty(), "middle_avoidance");
        flag(self.middle_chain_zero, "middle_chain_zero");
        flag(
            self.expected_singular_count.is_none_or(|e| e == self.singular_count),
            "singular_count",
        );
        flag(
            self.singular_count_bound.is_none_or(|b| self.singular_count < b),
            "singular_count_bound",
        );
        flag(self.singular_sign_violations == 0, "singular_sign");
        flag(self.quasi_cost_integral == int(1), "quasi_cost_integral");
        flag(self.ledger.singular_mass <= Rational::zero(), "singular_mass_sign");
        flag(self.change_bound_ok != Some(false), "change_bound");
        flag(self.singular_parent_good_violations == 0, "singular_parent_good");
        flag(self.unchanged_difference_violations == 0, "unchanged_difference");
        flag(self.singular_difference_ok != Some(false), "singular_difference_bound");
        flag(self.singular_mass_bound_ok != Some(false), "singular_mass_bound");
        flag(self.good_deviation_ok != Some(false), "good_deviation_bound");
        out
    }
}

pub fn verify_level(level: &TauLevel, tower: &ModulusTower) -> LevelReport {
    let n = level.level;
    let size = level.len();
    let big_m = tower.big_m(n);
    let phi = phi_level(tower, n);
    let q = quasi_cost_with(level, &phi);
    let router = Router::new(tower, n);

    let mut seen: Vec<Option<u64>> = vec![None; size];
    let mut collision = None;
    for l in 0..size {
        let s = level.sigma[l] as usize;
        if s >= size {
            collision.get_or_insert((l as u64, l as u64, s as u64));
            continue;
        }
        match seen[s] {
            Some(other) if collision.is_none() => collision = Some((other, l as u64, s as u64)),
            Some(_) => {}
            None => seen[s] = Some(l as u64),
        }
    }
    let sigma_consistent = induced_sigma(tower, n, &level.tau) == level.sigma;
    let tau_range_ok = level.tau.iter().all(|t| t.unsigned_abs() < big_m);
    let middle_avoidance_violations: Vec<u64> = (0..big_m)
        .filter(|&l| !router.avoids_middle(l, level.tau[l as usize]))
        .collect();
    let middle_chain_zero = (0..size)
        .filter(|&l| level.classes[l] == IndexClass::Middle)
        .all(|l| level.tau[l] == 0);
    let singular_count = level.classes.iter().filter(|c| **c == IndexClass::Singular).count();
    let singular_sign_violations = (0..size)
        .filter(|&l| level.classes[l] == IndexClass::Singular && q.values[l] > 1)
        .count();
    let mut ledger = singular_ledger(level, tower);
    ledger.singular_mass = singular_mass_from(level, &q);

    let mut rep = LevelReport {
        level: n,
        compliant: tower.is_compliant(),
        permutation_ok: collision.is_none(),
        collision,
        sigma_consistent,
        tau_range_ok,
        nesting_ok: None,
        middle_avoidance_violations,
        middle_chain_zero,
        singular_count,
        expected_singular_count: None,
        max_singular_per_parent: None,
        singular_count_bound: None,
        singular_sign_violations,
        quasi_cost_integral: q.integral(),
        ledger,
        max_changes_per_good_parent: None,
        change_bound_ok: None,
        singular_parent_good_violations: 0,
        unchanged_difference_violations: 0,
        max_singular_difference: (0..size)
            .filter(|&l| level.classes[l] == IndexClass::Singular)
            .map(|l| q.values[l] - 1)
            .max(),
        singular_difference_bound: None,
        singular_difference_ok: None,
        singular_mass_bound: None,
        singular_mass_bound_ok: None,
        singular_mass_constant: None,
        good_deviation_bound: None,
        good_deviation_ok: None,
    };

    let Some(parent) = &level.parent else {
        return rep;
    };
    let m = tower.m(n) as usize;
    let prev_m = tower.big_m(n - 1);
    let phi_prev = phi_level(tower, n - 1);
    rep.nesting_ok = Some((0..size).all(|l| level.sigma[l] as usize / m == parent.sigma[l / m] as usize));

    let mut expected = 0usize;
    let mut max_sing = 0usize;
    let mut max_changes = 0u64;
    for p in 0..prev_m as usize {
        let children = p * m..(p + 1) * m;
        let d_prev = phi_prev.values[p] - phi_prev.values[parent.sigma[p] as usize];
        match parent.classes[p] {
            IndexClass::Singular => {
                expected += 2 * (-d_prev).max(0) as usize * prev_m as usize;
                let mut count = 0;
                for l in children {
                    match level.classes[l] {
                        IndexClass::Singular => count += 1,
                        _ if q.values[l] != 1 => rep.singular_parent_good_violations += 1,
                        _ => {}
                    }
                }
                max_sing = max_sing.max(count);
            }
            IndexClass::Good => {
                let mut changes = 0;
                for l in children {
                    if level.tau[l] != parent.tau[p] {
                        changes += 1;
                    } else if q.values[l] - 1 != d_prev {
                        rep.unchanged_difference_violations += 1;
                    }
                }
                max_changes = max_changes.max(changes);
            }
            IndexClass::Middle => {}
        }
    }
    rep.expected_singular_count = Some(expected);
    rep.max_singular_per_parent = Some(max_sing);
    rep.singular_count_bound = Some(2 * (prev_m * prev_m) as usize);
    rep.max_changes_per_good_parent = Some(max_changes);
    rep.change_bound_ok = Some(max_changes <= prev_m);

    if n == 2 {
        let m1 = tower.m(1) as i64;
        let m2 = tower.m(2) as i64;
        let mass_const = Rational::from_integer(m2.into()) * (&rep.ledger.singular_mass + int(1) - rat(3, m1));
        rep.singular_mass_constant = Some(mass_const);
        if tower.is_compliant() {
            let d_bound = rat(-m2, 2 * m1) + int(20 * m1.pow(4));
            rep.singular_difference_ok = rep
                .max_singular_difference
                .map(|d| int(d) <= d_bound);
            rep.singular_difference_bound = Some(d_bound);
            let mass_bound = int(-1) + rat(3, m1) + rat(40 * m1.pow(4) * (m1 - 3), m2);
            rep.singular_mass_bound_ok = Some(rep.ledger.singular_mass <= mass_bound);
            rep.singular_mass_bound = Some(mass_bound);
            let dev_bound = rat(4 * m1 * m1, m2);
            rep.good_deviation_ok = Some(rep.ledger.good_deviation < dev_bound);
            rep.good_deviation_bound = Some(dev_bound);
        }
    }
    rep
}
