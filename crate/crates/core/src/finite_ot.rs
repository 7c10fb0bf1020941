//! Finite Monge–Kantorovich problems over exact rationals.
//!
//! The primal is the transportation LP restricted to finite-cost arcs. Dual
//! potentials are read off the same simplex run, so primal and dual values
//! agree as rationals rather than up to a tolerance. Support certificates
//! (cyclical monotonicity, potentials with equality on a support) are plain
//! shortest-path computations.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::lp::{Lp, Outcome, Sense};
use crate::rational::{fmt_rat, int, ExtRational, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<ExtRational>,
}

impl CostMatrix {
    /// Row-major entries; every finite entry must be nonnegative.
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<ExtRational>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::DimensionMismatch("cost matrix must be nonempty".into()));
        }
        if entries.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n_rows}x{n_cols} matrix",
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|e| e.finite().is_some_and(|r| r.is_negative())) {
            return Err(Error::InvalidInput(format!(
                "negative cost at ({}, {})",
                k / n_cols,
                k % n_cols
            )));
        }
        Ok(CostMatrix { n_rows, n_cols, entries })
    }

    pub fn from_rows(rows: Vec<Vec<ExtRational>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch("ragged cost rows".into()));
        }
        Self::new(n_rows, n_cols, rows.into_iter().flatten().collect())
    }

    /// All entries `+inf`; callers fill in the finite arcs.
    pub fn infinite(n_rows: usize, n_cols: usize) -> Self {
        CostMatrix {
            n_rows,
            n_cols,
            entries: vec![ExtRational::Infinite; n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, i: usize, j: usize) -> &ExtRational {
        &self.entries[i * self.n_cols + j]
    }

    pub fn finite(&self, i: usize, j: usize) -> Option<&Rational> {
        self.get(i, j).finite()
    }

    pub fn set(&mut self, i: usize, j: usize, v: ExtRational) -> Result<()> {
        if v.finite().is_some_and(|r| r.is_negative()) {
            return Err(Error::InvalidInput(format!("negative cost at ({i}, {j})")));
        }
        self.entries[i * self.n_cols + j] = v;
        Ok(())
    }

    pub fn finite_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_infinite()).count()
    }

    /// `⟨c, π⟩`, or `+inf` when `π` charges an infinite entry.
    pub fn pair_with(&self, plan: &[Rational]) -> ExtRational {
        let mut total = Rational::zero();
        for (e, p) in self.entries.iter().zip(plan) {
            if p.is_zero() {
                continue;
            }
            match e {
                ExtRational::Finite(c) => total += c * p,
                ExtRational::Infinite => return ExtRational::Infinite,
            }
        }
        ExtRational::Finite(total)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Marginals {
    pub mu: Vec<Rational>,
    pub nu: Vec<Rational>,
}

impl Marginals {
    pub fn new(mu: Vec<Rational>, nu: Vec<Rational>) -> Self {
        Marginals { mu, nu }
    }

    pub fn uniform(n: usize) -> Self {
        let w = Rational::new(1.into(), (n as i64).into());
        Marginals {
            mu: vec![w.clone(); n],
            nu: vec![w; n],
        }
    }

    fn validate(&self, cost: &CostMatrix) -> Result<()> {
        if self.mu.len() != cost.n_rows || self.nu.len() != cost.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "marginals {}x{} vs cost {}x{}",
                self.mu.len(),
                self.nu.len(),
                cost.n_rows,
                cost.n_cols
            )));
        }
        if self.mu.iter().chain(&self.nu).any(Signed::is_negative) {
            return Err(Error::InvalidInput("negative marginal weight".into()));
        }
        let sm: Rational = self.mu.iter().sum();
        let sn: Rational = self.nu.iter().sum();
        if sm != sn {
            return Err(Error::InfeasibleMarginals {
                mu: fmt_rat(&sm),
                nu: fmt_rat(&sn),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportPlan {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<Rational>,
    pub value: Rational,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.n_cols + j]
    }

    pub fn support(&self) -> Vec<(usize, usize)> {
        (0..self.n_rows)
            .flat_map(|i| (0..self.n_cols).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j).is_positive())
            .collect()
    }

    /// Builds a plan from raw entries, checking marginals and finiteness.
    pub fn from_entries(cost: &CostMatrix, marg: &Marginals, entries: Vec<Rational>) -> Result<Self> {
        marg.validate(cost)?;
        let (r, c) = (cost.n_rows, cost.n_cols);
        if entries.len() != r * c {
            return Err(Error::DimensionMismatch("plan size".into()));
        }
        if entries.iter().any(Signed::is_negative) {
            return Err(Error::InvalidInput("negative plan entry".into()));
        }
        for i in 0..r {
            let s: Rational = entries[i * c..(i + 1) * c].iter().sum();
            if s != marg.mu[i] {
                return Err(Error::InvalidInput(format!("row {i} sums to {}", fmt_rat(&s))));
            }
        }
        for j in 0..c {
            let s: Rational = (0..r).map(|i| &entries[i * c + j]).sum();
            if s != marg.nu[j] {
                return Err(Error::InvalidInput(format!("column {j} sums to {}", fmt_rat(&s))));
            }
        }
        match cost.pair_with(&entries) {
            ExtRational::Finite(value) => Ok(TransportPlan {
                n_rows: r,
                n_cols: c,
                entries,
                value,
            }),
            ExtRational::Infinite => Err(Error::NoFinitePlan),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualPair {
    pub phi: Vec<Rational>,
    pub psi: Vec<Rational>,
    pub value: Rational,
}

impl DualPair {
    pub fn new(phi: Vec<Rational>, psi: Vec<Rational>, marg: &Marginals) -> Self {
        let value = phi.iter().zip(&marg.mu).map(|(a, b)| a * b).sum::<Rational>()
            + psi.iter().zip(&marg.nu).map(|(a, b)| a * b).sum::<Rational>();
        DualPair { phi, psi, value }
    }

    /// `φ(i) + ψ(j) <= c(i, j)` on every finite entry.
    pub fn is_feasible(&self, cost: &CostMatrix) -> bool {
        (0..cost.n_rows).all(|i| {
            (0..cost.n_cols).all(|j| match cost.finite(i, j) {
                Some(c) => &self.phi[i] + &self.psi[j] <= *c,
                None => true,
            })
        })
    }
}

/// Sub-coupling: row sums at most `mu`, column sums at most `nu`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialPlan {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<Rational>,
    pub mass: Rational,
}

impl PartialPlan {
    pub fn new(marg: &Marginals, entries: Vec<Rational>) -> Result<Self> {
        let (r, c) = (marg.mu.len(), marg.nu.len());
        if entries.len() != r * c {
            return Err(Error::DimensionMismatch("partial plan size".into()));
        }
        if entries.iter().any(Signed::is_negative) {
            return Err(Error::InvalidInput("negative partial plan entry".into()));
        }
        for i in 0..r {
            let s: Rational = entries[i * c..(i + 1) * c].iter().sum();
            if s > marg.mu[i] {
                return Err(Error::InvalidInput(format!("row {i} exceeds its marginal")));
            }
        }
        for j in 0..c {
            let s: Rational = (0..r).map(|i| &entries[i * c + j]).sum();
            if s > marg.nu[j] {
                return Err(Error::InvalidInput(format!("column {j} exceeds its marginal")));
            }
        }
        let mass = entries.iter().sum();
        Ok(PartialPlan {
            n_rows: r,
            n_cols: c,
            entries,
            mass,
        })
    }

    /// Marginals left over after removing this partial plan.
    pub fn residual(&self, marg: &Marginals) -> Marginals {
        let c = self.n_cols;
        let mu = (0..self.n_rows)
            .map(|i| &marg.mu[i] - self.entries[i * c..(i + 1) * c].iter().sum::<Rational>())
            .collect();
        let nu = (0..c)
            .map(|j| &marg.nu[j] - (0..self.n_rows).map(|i| &self.entries[i * c + j]).sum::<Rational>())
            .collect();
        Marginals { mu, nu }
    }
}

/// Optimal plan and optimal potentials from one simplex run.
pub fn solve(cost: &CostMatrix, marg: &Marginals) -> Result<(TransportPlan, DualPair)> {
    marg.validate(cost)?;
    let (nr, nc) = (cost.n_rows, cost.n_cols);
    let rows: Vec<usize> = (0..nr).filter(|&i| marg.mu[i].is_positive()).collect();
    let cols: Vec<usize> = (0..nc).filter(|&j| marg.nu[j].is_positive()).collect();

    let mut arcs = Vec::new();
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            if let Some(c) = cost.finite(i, j) {
                arcs.push((a, b, c.clone()));
            }
        }
    }
    let mut lp = Lp::new(arcs.len());
    lp.cost = arcs.iter().map(|a| a.2.clone()).collect();
    let mut row_terms = vec![Vec::new(); rows.len()];
    let mut col_terms = vec![Vec::new(); cols.len()];
    for (k, (a, b, _)) in arcs.iter().enumerate() {
        row_terms[*a].push((k, int(1)));
        col_terms[*b].push((k, int(1)));
    }
    for (a, terms) in row_terms.into_iter().enumerate() {
        lp.add_row(terms, Sense::Eq, marg.mu[rows[a]].clone());
    }
    for (b, terms) in col_terms.into_iter().enumerate() {
        lp.add_row(terms, Sense::Eq, marg.nu[cols[b]].clone());
    }

    let (x, value, y) = match lp.solve() {
        Outcome::Optimal { x, value, duals } => (x, value, duals),
        Outcome::Infeasible => return Err(Error::NoFinitePlan),
        Outcome::Unbounded => unreachable!("transportation LP with nonnegative costs is bounded"),
    };

    let mut entries = vec![Rational::zero(); nr * nc];
    for (k, (a, b, _)) in arcs.iter().enumerate() {
        entries[rows[*a] * nc + cols[*b]] = x[k].clone();
    }
    let plan = TransportPlan {
        n_rows: nr,
        n_cols: nc,
        entries,
        value,
    };

    let mut phi: Vec<Option<Rational>> = vec![None; nr];
    let mut psi: Vec<Option<Rational>> = vec![None; nc];
    for (a, &i) in rows.iter().enumerate() {
        phi[i] = Some(y[a].clone());
    }
    for (b, &j) in cols.iter().enumerate() {
        psi[j] = Some(y[rows.len() + b].clone());
    }
    // Eliminated rows and columns carry no mass; give them the tightest
    // values that keep every finite constraint satisfied.
    for i in 0..nr {
        if phi[i].is_none() {
            let best = (0..nc)
                .filter_map(|j| Some(cost.finite(i, j)? - psi[j].as_ref()?))
                .min();
            phi[i] = Some(best.unwrap_or_else(Rational::zero));
        }
    }
    for j in 0..nc {
        if psi[j].is_none() {
            let best = (0..nr)
                .filter_map(|i| Some(cost.finite(i, j)? - phi[i].as_ref().unwrap()))
                .min();
            psi[j] = Some(best.unwrap_or_else(Rational::zero));
        }
    }
    let pair = DualPair::new(
        phi.into_iter().map(Option::unwrap).collect(),
        psi.into_iter().map(Option::unwrap).collect(),
        marg,
    );
    Ok((plan, pair))
}

pub fn solve_primal(cost: &CostMatrix, marg: &Marginals) -> Result<TransportPlan> {
    solve(cost, marg).map(|(p, _)| p)
}

pub fn solve_dual(cost: &CostMatrix, marg: &Marginals) -> Result<DualPair> {
    solve(cost, marg).map(|(_, d)| d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlacknessReport {
    /// Pairs carrying mass where `c > φ + ψ` (or `c = +inf`).
    pub slack_violations: Vec<(usize, usize)>,
    /// Pairs where `φ + ψ > c`.
    pub infeasibilities: Vec<(usize, usize)>,
    /// `⟨c - (φ ⊕ ψ), π⟩` over finite entries.
    pub gap: Rational,
}

impl SlacknessReport {
    pub fn passed(&self) -> bool {
        self.slack_violations.is_empty() && self.infeasibilities.is_empty()
    }
}

pub fn check_complementary_slackness(
    plan: &TransportPlan,
    duals: &DualPair,
    cost: &CostMatrix,
) -> Result<SlacknessReport> {
    let (r, c) = (cost.n_rows, cost.n_cols);
    if plan.n_rows != r || plan.n_cols != c || duals.phi.len() != r || duals.psi.len() != c {
        return Err(Error::DimensionMismatch("plan, duals and cost disagree in shape".into()));
    }
    let mut report = SlacknessReport {
        slack_violations: Vec::new(),
        infeasibilities: Vec::new(),
        gap: Rational::zero(),
    };
    for i in 0..r {
        for j in 0..c {
            let p = plan.get(i, j);
            let s = &duals.phi[i] + &duals.psi[j];
            match cost.finite(i, j) {
                Some(cij) => {
                    if s > *cij {
                        report.infeasibilities.push((i, j));
                    }
                    if p.is_positive() && *cij > s {
                        report.slack_violations.push((i, j));
                        report.gap += (cij - &s) * p;
                    }
                }
                None if p.is_positive() => report.slack_violations.push((i, j)),
                None => {}
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotonicityCheck {
    pub monotone: bool,
    /// Support pairs `(i_1, j_1), …, (i_k, j_k)` with
    /// `Σ c(i_t, j_{t+1}) < Σ c(i_t, j_t)`, indices taken cyclically.
    pub witness: Option<Vec<(usize, usize)>>,
}

fn dedup_support(support: &[(usize, usize)], cost: &CostMatrix) -> Result<Vec<(usize, usize)>> {
    let set: BTreeSet<(usize, usize)> = support.iter().copied().collect();
    for &(i, j) in &set {
        if i >= cost.n_rows || j >= cost.n_cols {
            return Err(Error::DimensionMismatch(format!("support pair ({i}, {j}) out of range")));
        }
        if cost.get(i, j).is_infinite() {
            return Err(Error::InfiniteCostInSupport(i, j));
        }
    }
    Ok(set.into_iter().collect())
}

/// Bellman–Ford from a virtual source joined to every node by a zero arc.
/// Returns distances, or a negative cycle as a node list in walk order.
fn bellman_ford(n: usize, arcs: &[(usize, usize, Rational)]) -> std::result::Result<Vec<Rational>, Vec<usize>> {
    let mut dist = vec![Rational::zero(); n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last = None;
    for _ in 0..=n {
        last = None;
        for (u, v, w) in arcs {
            let cand = &dist[*u] + w;
            if cand < dist[*v] {
                dist[*v] = cand;
                pred[*v] = Some(*u);
                last = Some(*v);
            }
        }
        if last.is_none() {
            return Ok(dist);
        }
    }
    let mut v = last.expect("relaxation in final round");
    for _ in 0..n {
        v = pred[v].expect("relaxed node has a predecessor");
    }
    let start = v;
    let mut cycle = vec![start];
    let mut u = pred[start].unwrap();
    while u != start {
        cycle.push(u);
        u = pred[u].unwrap();
    }
    cycle.reverse();
    Err(cycle)
}

pub fn is_cyclically_monotone(support: &[(usize, usize)], cost: &CostMatrix) -> Result<MonotonicityCheck> {
    let pairs = dedup_support(support, cost)?;
    let mut arcs = Vec::new();
    for (a, &(i, j)) in pairs.iter().enumerate() {
        let cij = cost.finite(i, j).unwrap();
        for (b, &(_, j2)) in pairs.iter().enumerate() {
            if a == b {
                continue;
            }
            if let Some(c2) = cost.finite(i, j2) {
                arcs.push((a, b, c2 - cij));
            }
        }
    }
    Ok(match bellman_ford(pairs.len(), &arcs) {
        Ok(_) => MonotonicityCheck {
            monotone: true,
            witness: None,
        },
        Err(cycle) => MonotonicityCheck {
            monotone: false,
            witness: Some(cycle.into_iter().map(|k| pairs[k]).collect()),
        },
    })
}

/// Potentials with `φ ⊕ ψ <= c` on every finite entry and equality on the
/// support, or `None` when the support is not cyclically monotone.
pub fn strong_monotone_potentials(support: &[(usize, usize)], cost: &CostMatrix) -> Result<Option<DualPair>> {
    let pairs = dedup_support(support, cost)?;
    let (r, c) = (cost.n_rows, cost.n_cols);
    // Node i is row i, node r + j is column j; u(row) = φ, u(col) = -ψ.
    let mut arcs = Vec::new();
    for i in 0..r {
        for j in 0..c {
            if let Some(cij) = cost.finite(i, j) {
                arcs.push((r + j, i, cij.clone()));
            }
        }
    }
    for &(i, j) in &pairs {
        arcs.push((i, r + j, -cost.finite(i, j).unwrap()));
    }
    Ok(match bellman_ford(r + c, &arcs) {
        Ok(dist) => {
            let phi = dist[..r].to_vec();
            let psi = dist[r..].iter().map(|d| -d).collect();
            let marg = Marginals {
                mu: vec![Rational::zero(); r],
                nu: vec![Rational::zero(); c],
            };
            let mut pair = DualPair::new(phi, psi, &marg);
            pair.value = Rational::zero();
            Some(pair)
        }
        Err(_) => None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelaxedDual {
    /// `+inf` when some row or column with positive weight is untouched by
    /// the reference plan and so unconstrained.
    pub value: ExtRational,
    pub pair: Option<DualPair>,
}

/// `max ⟨φ,μ⟩ + ⟨ψ,ν⟩` subject to `Σ π₀(i,j)·(φ(i) + ψ(j) - c(i,j))₊ <= ε`.
pub fn solve_relaxed_dual(
    cost: &CostMatrix,
    marg: &Marginals,
    pi0: &TransportPlan,
    eps: &Rational,
) -> Result<RelaxedDual> {
    if eps.is_negative() {
        return Err(Error::NegativeEpsilon(fmt_rat(eps)));
    }
    marg.validate(cost)?;
    let (r, c) = (cost.n_rows, cost.n_cols);
    if pi0.n_rows != r || pi0.n_cols != c {
        return Err(Error::DimensionMismatch("reference plan shape".into()));
    }
    let support = pi0.support();
    for &(i, j) in &support {
        if cost.get(i, j).is_infinite() {
            return Err(Error::InfiniteCostOnPi0Support(i, j));
        }
    }
    // Columns: φ⁺ | φ⁻ | ψ⁺ | ψ⁻ | s per support pair.
    let (pp, pm, qp, qm, s0) = (0, r, 2 * r, 2 * r + c, 2 * r + 2 * c);
    let mut lp = Lp::new(s0 + support.len());
    for i in 0..r {
        lp.cost[pp + i] = -&marg.mu[i];
        lp.cost[pm + i] = marg.mu[i].clone();
    }
    for j in 0..c {
        lp.cost[qp + j] = -&marg.nu[j];
        lp.cost[qm + j] = marg.nu[j].clone();
    }
    let mut budget = Vec::new();
    for (k, &(i, j)) in support.iter().enumerate() {
        lp.add_row(
            vec![
                (pp + i, int(1)),
                (pm + i, int(-1)),
                (qp + j, int(1)),
                (qm + j, int(-1)),
                (s0 + k, int(-1)),
            ],
            Sense::Le,
            cost.finite(i, j).unwrap().clone(),
        );
        budget.push((s0 + k, pi0.get(i, j).clone()));
    }
    lp.add_row(budget, Sense::Le, eps.clone());
    Ok(match lp.solve() {
        Outcome::Optimal { x, .. } => {
            let phi = (0..r).map(|i| &x[pp + i] - &x[pm + i]).collect();
            let psi = (0..c).map(|j| &x[qp + j] - &x[qm + j]).collect();
            let pair = DualPair::new(phi, psi, marg);
            RelaxedDual {
                value: ExtRational::Finite(pair.value.clone()),
                pair: Some(pair),
            }
        }
        Outcome::Unbounded => RelaxedDual {
            value: ExtRational::Infinite,
            pair: None,
        },
        Outcome::Infeasible => unreachable!("zero potentials with zero excess are feasible"),
    })
}

/// The perturbation map: optimal cost between `f` and `g`, `+inf` when they
/// cannot be coupled at finite cost (unequal totals, negative weights, or a
/// shape that does not match the cost).
pub fn fenchel_value(f: &[Rational], g: &[Rational], cost: &CostMatrix) -> ExtRational {
    let marg = Marginals::new(f.to_vec(), g.to_vec());
    match solve_primal(cost, &marg) {
        Ok(plan) => ExtRational::Finite(plan.value),
        Err(_) => ExtRational::Infinite,
    }
}
