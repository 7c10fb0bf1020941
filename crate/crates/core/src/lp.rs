//! Dense two-phase simplex over exact rationals.
//!
//! Minimizes `c·x` subject to sparse rows `a·x (<=|=|>=) b` and `x >= 0`.
//! Pivoting follows Bland's rule: the lowest-index improving column enters and
//! ratio ties leave by lowest basic-variable index, so runs are deterministic
//! and cannot cycle.
//!
//! Every row keeps the column that formed its starting basis (its slack or its
//! artificial). Those columns are carried through all pivots, so the final
//! tableau holds `B^-1` and the row duals fall out as `c_B B^-1`.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Lp {
    pub n_vars: usize,
    pub cost: Vec<Rational>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug)]
pub(crate) enum Outcome {
    Optimal {
        x: Vec<Rational>,
        value: Rational,
        /// One multiplier per row. Satisfies `c - A^T y >= 0` on the
        /// structural columns and `b·y == value`.
        duals: Vec<Rational>,
    },
    Infeasible,
    Unbounded,
}

impl Lp {
    pub fn new(n_vars: usize) -> Self {
        Lp {
            n_vars,
            cost: vec![Rational::zero(); n_vars],
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, Rational)>, sense: Sense, rhs: Rational) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.n_vars));
        self.rows.push(Row { coeffs, sense, rhs });
    }

    pub fn solve(&self) -> Outcome {
        Tableau::build(self).run()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    kinds: Vec<ColKind>,
    /// `m` constraint rows, each `width + 1` long with the rhs last.
    t: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Column that formed row `r`'s starting basis.
    origin_col: Vec<usize>,
    /// `-1` where the row was negated to make its rhs nonnegative.
    flipped: Vec<bool>,
    cost: Vec<Rational>,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let m = lp.rows.len();
        let mut kinds = vec![ColKind::Structural; lp.n_vars];
        let mut flipped = Vec::with_capacity(m);
        let mut senses = Vec::with_capacity(m);
        for row in &lp.rows {
            let flip = row.rhs.is_negative();
            flipped.push(flip);
            senses.push(match (row.sense, flip) {
                (Sense::Eq, _) => Sense::Eq,
                (Sense::Le, false) | (Sense::Ge, true) => Sense::Le,
                (Sense::Ge, false) | (Sense::Le, true) => Sense::Ge,
            });
        }
        let mut slack_col = vec![None; m];
        for (r, s) in senses.iter().enumerate() {
            if *s != Sense::Eq {
                slack_col[r] = Some(kinds.len());
                kinds.push(ColKind::Slack);
            }
        }
        let mut origin_col = vec![0; m];
        for r in 0..m {
            if senses[r] == Sense::Le {
                origin_col[r] = slack_col[r].unwrap();
            } else {
                origin_col[r] = kinds.len();
                kinds.push(ColKind::Artificial);
            }
        }
        let width = kinds.len();
        let mut t = vec![vec![Rational::zero(); width + 1]; m];
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if flipped[r] { -Rational::one() } else { Rational::one() };
            for (j, a) in &row.coeffs {
                t[r][*j] += a * &sign;
            }
            if let Some(s) = slack_col[r] {
                t[r][s] = if senses[r] == Sense::Le { Rational::one() } else { -Rational::one() };
            }
            if senses[r] != Sense::Le {
                t[r][origin_col[r]] = Rational::one();
            }
            t[r][width] = &row.rhs * &sign;
        }
        let mut cost = vec![Rational::zero(); width];
        cost[..lp.n_vars].clone_from_slice(&lp.cost);
        Tableau {
            m,
            n_struct: lp.n_vars,
            kinds,
            t,
            basis: origin_col.clone(),
            origin_col,
            flipped,
            cost,
        }
    }

    fn width(&self) -> usize {
        self.kinds.len()
    }

    fn reduced_costs(&self, cost: &[Rational]) -> Vec<Rational> {
        let w = self.width();
        let mut d = cost.to_vec();
        for r in 0..self.m {
            let cb = &cost[self.basis[r]];
            if cb.is_zero() {
                continue;
            }
            for j in 0..w {
                if !self.t[r][j].is_zero() {
                    d[j] -= cb * &self.t[r][j];
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, c: usize, d: &mut [Rational]) {
        let w = self.width();
        let inv = Rational::one() / &self.t[r][c];
        let nz: Vec<usize> = (0..=w).filter(|&j| !self.t[r][j].is_zero()).collect();
        for &j in &nz {
            let v = &self.t[r][j] * &inv;
            self.t[r][j] = v;
        }
        let prow: Vec<(usize, Rational)> = nz.iter().map(|&j| (j, self.t[r][j].clone())).collect();
        for i in 0..self.m {
            if i == r || self.t[i][c].is_zero() {
                continue;
            }
            let f = self.t[i][c].clone();
            for (j, v) in &prow {
                let delta = &f * v;
                self.t[i][*j] -= delta;
            }
        }
        if !d[c].is_zero() {
            let f = d[c].clone();
            for (j, v) in &prow {
                if *j < w {
                    d[*j] -= &f * v;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland iterations. `allowed(j)` gates entering columns.
    fn iterate(&mut self, d: &mut [Rational], allowed: impl Fn(ColKind) -> bool) -> bool {
        let w = self.width();
        loop {
            let enter = (0..w).find(|&j| allowed(self.kinds[j]) && d[j].is_negative());
            let Some(c) = enter else { return true };
            let mut best: Option<(usize, Rational)> = None;
            for r in 0..self.m {
                let a = &self.t[r][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.t[r][w] / a;
                let better = match &best {
                    None => true,
                    Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c, d),
                None => return false,
            }
        }
    }

    fn run(mut self) -> Outcome {
        let w = self.width();
        let phase1: Vec<Rational> = self
            .kinds
            .iter()
            .map(|k| if *k == ColKind::Artificial { Rational::one() } else { Rational::zero() })
            .collect();
        let mut d = self.reduced_costs(&phase1);
        self.iterate(&mut d, |_| true);
        let infeas: Rational = (0..self.m)
            .filter(|&r| self.kinds[self.basis[r]] == ColKind::Artificial)
            .map(|r| self.t[r][w].clone())
            .fold(Rational::zero(), |a, b| a + b);
        if infeas.is_positive() {
            return Outcome::Infeasible;
        }
        // Drive zero-level artificials out wherever the row allows it; rows
        // that cannot pivot are redundant and keep their artificial at zero.
        for r in 0..self.m {
            if self.kinds[self.basis[r]] != ColKind::Artificial {
                continue;
            }
            if let Some(c) = (0..w).find(|&j| self.kinds[j] != ColKind::Artificial && !self.t[r][j].is_zero()) {
                self.pivot(r, c, &mut d);
            }
        }
        let cost = self.cost.clone();
        let mut d = self.reduced_costs(&cost);
        if !self.iterate(&mut d, |k| k != ColKind::Artificial) {
            return Outcome::Unbounded;
        }
        let mut x = vec![Rational::zero(); self.n_struct];
        for r in 0..self.m {
            if self.basis[r] < self.n_struct {
                x[self.basis[r]] = self.t[r][w].clone();
            }
        }
        let value = x
            .iter()
            .zip(&self.cost)
            .filter(|(v, _)| !v.is_zero())
            .fold(Rational::zero(), |a, (v, c)| a + v * c);
        let duals = (0..self.m)
            .map(|r| {
                let col = self.origin_col[r];
                let mut y = Rational::zero();
                for i in 0..self.m {
                    let cb = &self.cost[self.basis[i]];
                    if !cb.is_zero() && !self.t[i][col].is_zero() {
                        y += cb * &self.t[i][col];
                    }
                }
                if self.flipped[r] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Outcome::Optimal { x, value, duals }
    }
}
