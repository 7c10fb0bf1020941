//! The circle at level `n` as `Z/M_n Z`.
//!
//! Index `l` stands for the interval `[l/M_n, (l+1)/M_n)`. The rotation by
//! `alpha_n = P_n/M_n` is the shift `l -> l + P_n`, and every potential built
//! from orbit counts is an integer vector over the indices.

use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{rat, Rational};

/// Default upper bound for prime candidates when `TDL_SEARCH_CAP` is unset.
pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TowerMode {
    Compliant,
    Relaxed,
}

impl TowerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TowerMode::Compliant => "compliant",
            TowerMode::Relaxed => "relaxed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "compliant" => Ok(TowerMode::Compliant),
            "relaxed" => Ok(TowerMode::Relaxed),
            other => Err(Error::Parse(format!("unknown tower mode {other:?}"))),
        }
    }
}

impl fmt::Display for TowerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModulusTower {
    primes: Vec<u64>,
    products: Vec<u64>,
    numerators: Vec<u64>,
    mode: TowerMode,
}

/// Largest `M_n` for which per-index level data is built.
pub const MAX_LEVEL_SIZE: u64 = 1 << 24;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Inverse of `a` modulo `m`, for coprime inputs.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (i128::from(m), i128::from(a % m));
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(i128::from(m)) as u64)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

/// Smallest `m_j` satisfying the growth requirement `m_j > 40 M_{j-1}^5`.
pub fn compliant_floor(prev_product: u64) -> Option<u64> {
    let p = u128::from(prev_product);
    let v = 40u128.checked_mul(p.checked_pow(5)?)?.checked_add(1)?;
    u64::try_from(v).ok()
}

fn growth_ok(prev_product: u64, m: u64) -> bool {
    compliant_floor(prev_product).is_some_and(|f| m >= f)
}

/// Reads `TDL_SEARCH_CAP`, falling back to [`DEFAULT_SEARCH_CAP`].
pub fn search_cap() -> u64 {
    std::env::var("TDL_SEARCH_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_SEARCH_CAP)
}

impl ModulusTower {
    /// Validates an explicit prime list against the tower congruences.
    pub fn from_primes(primes: &[u64]) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::InvalidInput("a tower needs at least one prime".into()));
        }
        for (j, &m) in primes.iter().enumerate() {
            if m < 5 || !is_prime(m) {
                return Err(Error::InvalidInput(format!("m_{} = {m} is not a prime >= 5", j + 1)));
            }
            for (i, &mi) in primes[..j].iter().enumerate() {
                let want = if i + 1 == j { 1 } else { mi - 1 };
                if m % mi != want {
                    return Err(Error::InvalidInput(format!(
                        "m_{} = {m} violates the congruence modulo m_{} = {mi}",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let mut products = Vec::with_capacity(primes.len());
        let mut numerators = Vec::with_capacity(primes.len());
        let (mut big_m, mut p) = (1u64, 0u64);
        for &m in primes {
            big_m = big_m
                .checked_mul(m)
                .ok_or_else(|| Error::InvalidInput("tower product overflows u64".into()))?;
            p = p
                .checked_mul(m)
                .and_then(|v| v.checked_add(1))
                .ok_or_else(|| Error::InvalidInput("tower numerator overflows u64".into()))?;
            products.push(big_m);
            numerators.push(p);
        }
        let compliant = (1..primes.len()).all(|j| growth_ok(products[j - 1], primes[j]));
        let tower = ModulusTower {
            primes: primes.to_vec(),
            products,
            numerators,
            mode: if compliant { TowerMode::Compliant } else { TowerMode::Relaxed },
        };
        for j in 1..=tower.depth() {
            assert_eq!(gcd(tower.p(j), tower.big_m(j)), 1, "P_j and M_j must be coprime");
        }
        Ok(tower)
    }

    pub fn depth(&self) -> usize {
        self.primes.len()
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn mode(&self) -> TowerMode {
        self.mode
    }

    pub fn is_compliant(&self) -> bool {
        self.mode == TowerMode::Compliant
    }

    /// `m_j`, 1-based.
    pub fn m(&self, j: usize) -> u64 {
        self.primes[j - 1]
    }

    /// `M_j = m_1 ⋯ m_j`, with `M_0 = 1`.
    pub fn big_m(&self, j: usize) -> u64 {
        if j == 0 {
            1
        } else {
            self.products[j - 1]
        }
    }

    /// `P_j` with `alpha_j = P_j / M_j`, and `P_0 = 0`.
    pub fn p(&self, j: usize) -> u64 {
        if j == 0 {
            0
        } else {
            self.numerators[j - 1]
        }
    }

    pub fn alpha(&self, j: usize) -> Rational {
        rat(self.p(j) as i64, self.big_m(j) as i64)
    }

    pub fn require(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.depth() {
            Err(Error::TowerTooShallow {
                have: self.depth(),
                need: n,
            })
        } else {
            Ok(())
        }
    }

    /// Refuses levels too large to hold per-index vectors in memory.
    pub fn require_size(&self, n: usize) -> Result<()> {
        self.require(n)?;
        let size = self.big_m(n);
        if size > MAX_LEVEL_SIZE {
            return Err(Error::InvalidInput(format!(
                "level {n} has {size} intervals, above the limit of {MAX_LEVEL_SIZE}"
            )));
        }
        Ok(())
    }

    /// Tower truncated to its first `n` levels.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        self.require(n)?;
        Self::from_primes(&self.primes[..n])
    }

    /// 1-based mixed-radix digits `k_1, …, k_n` of a level-`n` index.
    pub fn digits(&self, n: usize, l: u64) -> Vec<u64> {
        let mut out = vec![0; n];
        let mut rest = l;
        for j in (1..=n).rev() {
            out[j - 1] = rest % self.m(j) + 1;
            rest /= self.m(j);
        }
        out
    }

    pub fn from_digits(&self, digits: &[u64]) -> u64 {
        digits
            .iter()
            .enumerate()
            .fold(0, |acc, (j, k)| acc * self.m(j + 1) + (k - 1))
    }
}

/// Builds a tower: `m_{i+1} ≡ 1 (mod m_i)`, `m_{i+1} ≡ -1 (mod m_k)` for
/// `k < i`, each the least prime in that progression at or above its floor.
/// `growth_floor[j]` is the floor for `m_{j+2}`; missing floors mean none.
pub fn build_tower(m1: u64, depth: usize, growth_floor: &[u64]) -> Result<ModulusTower> {
    build_tower_with_cap(m1, depth, growth_floor, search_cap())
}

pub fn build_tower_with_cap(m1: u64, depth: usize, growth_floor: &[u64], cap: u64) -> Result<ModulusTower> {
    if m1 < 5 || !is_prime(m1) {
        return Err(Error::InvalidInput(format!("m1 = {m1} is not an odd prime >= 5")));
    }
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    if growth_floor.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("growth floors must be nondecreasing".into()));
    }
    let mut primes = vec![m1];
    for level in 2..=depth {
        let big_m = primes
            .iter()
            .try_fold(1u64, |a, &m| a.checked_mul(m))
            .ok_or(Error::SearchCapExceeded { level, cap })?;
        let x0 = crt_residue(&primes);
        let floor = growth_floor.get(level - 2).copied().unwrap_or(0).max(5);
        let start = if x0 >= floor {
            x0
        } else {
            x0 + (floor - x0).div_ceil(big_m) * big_m
        };
        let mut x = start;
        loop {
            if x > cap {
                return Err(Error::SearchCapExceeded { level, cap });
            }
            if is_prime(x) {
                break;
            }
            x = x.checked_add(big_m).ok_or(Error::SearchCapExceeded { level, cap })?;
        }
        primes.push(x);
    }
    ModulusTower::from_primes(&primes)
}

/// Tower whose every level meets `m_j > 40 M_{j-1}^5`.
pub fn build_compliant_tower(m1: u64, depth: usize) -> Result<ModulusTower> {
    let mut tower = build_tower(m1, 1, &[])?;
    for level in 2..=depth {
        let floor = compliant_floor(tower.big_m(level - 1)).ok_or(Error::SearchCapExceeded {
            level,
            cap: search_cap(),
        })?;
        let mut floors: Vec<u64> = (2..level).map(|j| tower.m(j)).collect();
        floors.push(floor);
        tower = build_tower(m1, level, &floors)?;
    }
    Ok(tower)
}

/// Residue in `[0, M)` that is `1` mod the last prime and `-1` mod the others.
fn crt_residue(primes: &[u64]) -> u64 {
    let last = primes.len() - 1;
    let (mut x, mut modulus) = (0u128, 1u128);
    for (i, &m) in primes.iter().enumerate() {
        let target = if i == last { 1 } else { m - 1 };
        let m = u128::from(m);
        // x + t·modulus ≡ target (mod m)
        let inv = mod_inverse((modulus % m) as u64, m as u64).expect("distinct primes") as u128;
        let diff = (u128::from(target) + m - x % m) % m;
        let t = diff * inv % m;
        x += t * modulus;
        modulus *= m;
    }
    x as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Left,
    Middle,
    Right,
}

/// Position of index `l` relative to the half circle at modulus `big_m`.
pub fn region(big_m: u64, l: u64) -> Region {
    let mid = (big_m - 1) / 2;
    match l.cmp(&mid) {
        std::cmp::Ordering::Less => Region::Left,
        std::cmp::Ordering::Equal => Region::Middle,
        std::cmp::Ordering::Greater => Region::Right,
    }
}

/// `+1` on the left half, `-1` on the right half, `0` on the middle index.
pub fn region_sign(big_m: u64, l: u64) -> i64 {
    match region(big_m, l) {
        Region::Left => 1,
        Region::Middle => 0,
        Region::Right => -1,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HalfCirclePartition {
    pub level: usize,
    pub left: std::ops::Range<u64>,
    pub middle: u64,
    pub right: std::ops::Range<u64>,
}

pub fn half_circle(tower: &ModulusTower, n: usize) -> HalfCirclePartition {
    let big_m = tower.big_m(n);
    let mid = (big_m - 1) / 2;
    HalfCirclePartition {
        level: n,
        left: 0..mid,
        middle: mid,
        right: mid + 1..big_m,
    }
}

/// `(l + steps·P_n) mod M_n`.
pub fn rotate(tower: &ModulusTower, n: usize, l: u64, steps: i64) -> u64 {
    let big_m = i128::from(tower.big_m(n));
    let shift = i128::from(steps) * i128::from(tower.p(n));
    (i128::from(l) + shift).rem_euclid(big_m) as u64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VisitCounts {
    pub left: u64,
    pub right: u64,
    pub middle: u64,
}

impl VisitCounts {
    /// `1 + visits_L - visits_R`.
    pub fn rho(&self) -> i64 {
        1 + self.left as i64 - self.right as i64
    }
}

/// Counts orbit points `T^i(x)` over `i = 0..steps-1`, or `i = steps+1..=0`
/// for negative `steps`.
pub fn orbit_visit_balance(tower: &ModulusTower, n: usize, x: u64, steps: i64) -> VisitCounts {
    let big_m = tower.big_m(n);
    let range = if steps >= 0 { 0..steps } else { steps + 1..1 };
    let mut counts = VisitCounts::default();
    for i in range {
        match region(big_m, rotate(tower, n, x, i)) {
            Region::Left => counts.left += 1,
            Region::Middle => counts.middle += 1,
            Region::Right => counts.right += 1,
        }
    }
    counts
}

/// Integer-valued step function on the level-`n` intervals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntStepFunction {
    pub level: usize,
    pub values: Vec<i64>,
}

impl IntStepFunction {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn integral(&self) -> Rational {
        let s: i128 = self.values.iter().map(|&v| i128::from(v)).sum();
        Rational::new(s.into(), (self.values.len() as i64).into())
    }

    pub fn to_rational(&self) -> StepFunction {
        StepFunction {
            level: self.level,
            values: self.values.iter().map(|&v| Rational::from_integer(v.into())).collect(),
        }
    }
}

/// Exact-rational step function on the level-`n` intervals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFunction {
    pub level: usize,
    pub values: Vec<Rational>,
}

impl StepFunction {
    pub fn integral(&self) -> Rational {
        let s: Rational = self.values.iter().sum();
        s / Rational::from_integer((self.values.len() as i64).into())
    }

    /// CSV rows `index,left_endpoint,value` with rationals as `p/q`.
    pub fn to_csv(&self) -> String {
        let big_m = self.values.len() as i64;
        let mut out = String::from("index,left_endpoint,value\n");
        for (l, v) in self.values.iter().enumerate() {
            out.push_str(&format!(
                "{l},{},{}\n",
                crate::rational::fmt_rat(&rat(l as i64, big_m)),
                crate::rational::fmt_rat(v)
            ));
        }
        out
    }
}

/// `φ^n`: along the orbit of index 0, the number of left-half visits minus
/// right-half visits made before reaching each index.
pub fn phi_level(tower: &ModulusTower, n: usize) -> IntStepFunction {
    let big_m = tower.big_m(n);
    let p = tower.p(n);
    let mut values = vec![0i64; big_m as usize];
    let (mut cur, mut acc) = (0u64, 0i64);
    for _ in 0..big_m {
        values[cur as usize] = acc;
        acc += region_sign(big_m, cur);
        cur = (cur + p) % big_m;
    }
    debug_assert_eq!(acc, 0, "full orbit is balanced");
    IntStepFunction { level: n, values }
}

/// `ψ^n = 1 - φ^n`.
pub fn psi_level(phi: &IntStepFunction) -> IntStepFunction {
    IntStepFunction {
        level: phi.level,
        values: phi.values.iter().map(|v| 1 - v).collect(),
    }
}

/// Orbit position of `l`: the `j` in `[0, M_n)` with `T^j(0) = l`.
pub fn orbit_position(tower: &ModulusTower, n: usize, l: u64) -> u64 {
    let big_m = tower.big_m(n);
    let inv = mod_inverse(tower.p(n) % big_m.max(1), big_m).unwrap_or(0);
    ((u128::from(l) * u128::from(inv)) % u128::from(big_m)) as u64
}

/// Left-minus-right visits over `orbit_visit_balance(x, steps)`, read off `φ`.
pub fn visit_difference(phi: &IntStepFunction, tower: &ModulusTower, x: u64, steps: i64) -> i64 {
    let n = phi.level;
    let at = |l: u64| phi.values[l as usize];
    if steps >= 0 {
        at(rotate(tower, n, x, steps)) - at(x)
    } else {
        at(rotate(tower, n, x, 1)) - at(rotate(tower, n, x, steps + 1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillationReport {
    pub level: usize,
    pub mode: TowerMode,
    pub neighbor_max: i64,
    /// Explicit neighbor bound where one is known (`4 M_1^2` at level 2).
    pub neighbor_bound: Option<i64>,
    pub neighbor_ok: Option<bool>,
    /// `min φ(block middle) - max φ(block start)` over level-`(n-1)` blocks.
    pub rise_min: i64,
    pub rise_bound: Option<Rational>,
    pub rise_ok: Option<bool>,
    /// Spread of `φ` over sub-indices within `M_{n-1}` of a block edge.
    pub boundary_spread: i64,
    /// `rotate(x, M_{n-1}) == x + M_{n-1}` for every `x`.
    pub shift_block_ok: bool,
    /// Level 2 only: `rotate(x, m_2 - 2) == x - 2` for every `x`.
    pub shift_back_two_ok: Option<bool>,
    /// Level 2 only: max over `x` of the left/right visit difference along
    /// `T^1(x), …, T^{m_2-2}(x)`, checked against `4 M_1`.
    pub short_orbit_max: Option<i64>,
    pub short_orbit_ok: Option<bool>,
}

impl OscillationReport {
    pub fn passed(&self) -> bool {
        self.shift_block_ok
            && self.neighbor_ok != Some(false)
            && self.rise_ok != Some(false)
            && self.shift_back_two_ok != Some(false)
            && self.short_orbit_ok != Some(false)
    }
}

pub fn verify_oscillations(tower: &ModulusTower, n: usize) -> Result<OscillationReport> {
    tower.require(n)?;
    if n < 2 {
        return Err(Error::InvalidInput("oscillation checks need level >= 2".into()));
    }
    let phi = phi_level(tower, n);
    let big_m = tower.big_m(n);
    let prev = tower.big_m(n - 1);
    let m = tower.m(n);
    let m1 = tower.m(1) as i64;

    let neighbor_max = (0..big_m)
        .map(|l| (phi.values[l as usize] - phi.values[((l + 1) % big_m) as usize]).abs())
        .max()
        .unwrap_or(0);
    let neighbor_bound = (n == 2).then_some(4 * m1 * m1);

    let half = (m - 1) / 2;
    let starts = (0..prev).map(|p| phi.values[(p * m) as usize]);
    let middles = (0..prev).map(|p| phi.values[(p * m + half) as usize]);
    let rise_min = middles.min().unwrap() - starts.max().unwrap();
    let rise_bound =
        (n == 2).then(|| rat(m as i64, 2 * prev as i64) - Rational::from_integer((10 * m1 * m1 * m1).into()));
    let rise_ok = match (&rise_bound, tower.is_compliant()) {
        (Some(b), true) => Some(Rational::from_integer(rise_min.into()) >= *b),
        _ => None,
    };

    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
    for p in 0..prev {
        for k in 1..=m {
            if k.min(m - k) < prev {
                let v = phi.values[(p * m + k - 1) as usize];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }

    let shift_block_ok = (0..big_m).all(|x| rotate(tower, n, x, prev as i64) == (x + prev) % big_m);
    let (shift_back_two_ok, short_orbit_max) = if n == 2 {
        let back = (0..big_m).all(|x| rotate(tower, n, x, m as i64 - 2) == (x + big_m - 2) % big_m);
        let worst = (0..big_m)
            .map(|x| {
                let start = rotate(tower, n, x, 1);
                visit_difference(&phi, tower, start, m as i64 - 2).abs()
            })
            .max()
            .unwrap_or(0);
        (Some(back), Some(worst))
    } else {
        (None, None)
    };

    Ok(OscillationReport {
        level: n,
        mode: tower.mode(),
        neighbor_max,
        neighbor_bound,
        neighbor_ok: neighbor_bound.map(|b| neighbor_max <= b),
        rise_min,
        rise_bound,
        rise_ok,
        boundary_spread: hi - lo,
        shift_block_ok,
        shift_back_two_ok,
        short_orbit_max,
        short_orbit_ok: short_orbit_max.map(|v| v <= 4 * m1),
    })
}

/// Exact `(1/M_n)·Σ φ^n`, computed by walking indices in orbit order.
pub fn integral_along_orbit(phi: &IntStepFunction, tower: &ModulusTower) -> Rational {
    let n = phi.level;
    let big_m = tower.big_m(n);
    let mut s = Rational::zero();
    let mut cur = 0u64;
    for _ in 0..big_m {
        s += Rational::from_integer(phi.values[cur as usize].into());
        cur = rotate(tower, n, cur, 1);
    }
    s / Rational::from_integer((big_m as i64).into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t511() -> ModulusTower {
        build_tower(5, 2, &[7]).unwrap()
    }

    #[test]
    fn five_eleven_tower() {
        let t = t511();
        assert_eq!(t.primes(), &[5, 11]);
        assert_eq!((t.big_m(2), t.p(2)), (55, 12));
        assert_eq!(t.mode(), TowerMode::Relaxed);
    }

    #[test]
    fn depth_three_progression_scan() {
        let t = build_tower(5, 3, &[7, 13]).unwrap();
        assert_eq!(t.primes(), &[5, 11, 89]);
        assert_eq!((t.big_m(3), t.p(3)), (4895, 1069));
        assert_eq!(crt_residue(&[5, 11]), 34);
    }

    #[test]
    fn depth_one_is_trivial() {
        let t = build_tower(7, 1, &[]).unwrap();
        assert_eq!((t.big_m(1), t.p(1)), (7, 1));
        assert!(t.is_compliant());
    }

    #[test]
    fn bad_first_prime_and_cap() {
        assert!(matches!(build_tower(4, 1, &[]), Err(Error::InvalidInput(_))));
        assert!(matches!(build_tower(9, 1, &[]), Err(Error::InvalidInput(_))));
        assert_eq!(
            build_tower_with_cap(5, 2, &[100], 50),
            Err(Error::SearchCapExceeded { level: 2, cap: 50 })
        );
    }

    #[test]
    fn from_primes_rejects_wrong_congruence() {
        assert!(ModulusTower::from_primes(&[5, 13]).is_err());
        assert!(ModulusTower::from_primes(&[5, 11, 23]).is_err());
        assert!(ModulusTower::from_primes(&[5, 11, 89]).is_ok());
    }

    #[test]
    fn level_one_phi_matches_rise_and_fall() {
        let t = build_tower(5, 1, &[]).unwrap();
        assert_eq!(phi_level(&t, 1).values, vec![0, 1, 2, 2, 1]);
        let t = build_tower(11, 1, &[]).unwrap();
        assert_eq!(phi_level(&t, 1).values, vec![0, 1, 2, 3, 4, 5, 5, 4, 3, 2, 1]);
    }

    #[test]
    fn visits_from_zero() {
        let t = build_tower(5, 1, &[]).unwrap();
        let v = orbit_visit_balance(&t, 1, 0, 2);
        assert_eq!((v.left, v.right, v.middle), (2, 0, 0));
        assert_eq!(orbit_visit_balance(&t, 1, 3, 0), VisitCounts::default());
        let v = orbit_visit_balance(&t, 1, 0, -2);
        // i ∈ {-1, 0}: indices 4 and 0
        assert_eq!((v.left, v.right, v.middle), (1, 1, 0));
        assert_eq!(visit_difference(&phi_level(&t, 1), &t, 0, -2), 0);
    }

    #[test]
    fn digits_round_trip() {
        let t = t511();
        for l in 0..55 {
            assert_eq!(t.from_digits(&t.digits(2, l)), l);
        }
        assert_eq!(t.digits(2, 0), vec![1, 1]);
        assert_eq!(t.digits(2, 54), vec![5, 11]);
    }

    #[test]
    fn orbit_integral_agrees_with_index_integral() {
        let t = t511();
        let phi = phi_level(&t, 2);
        assert_eq!(phi.values[0], 0);
        assert_eq!(phi.integral(), integral_along_orbit(&phi, &t));
    }

    #[test]
    fn oscillations_on_small_tower() {
        let rep = verify_oscillations(&t511(), 2).unwrap();
        assert!(rep.neighbor_max <= 100);
        assert_eq!(rep.rise_ok, None);
        assert_eq!(rep.shift_back_two_ok, Some(true));
        assert!(rep.passed());
    }

    #[test]
    fn csv_layout() {
        let t = build_tower(5, 1, &[]).unwrap();
        let csv = phi_level(&t, 1).to_rational().to_csv();
        assert!(csv.starts_with("index,left_endpoint,value\n0,0/1,0/1\n1,1/5,1/1\n"));
    }
}
