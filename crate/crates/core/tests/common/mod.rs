//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use num_traits::Zero;
use rand::Rng;
use tdl_core::finite_ot::{CostMatrix, Marginals};
use tdl_core::rational::{int, rat};
use tdl_core::{ExtRational, Rational};

/// Positive integer weights normalized to total 1.
pub fn random_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=9)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| rat(x, total)).collect()
}

/// Support of the north-west corner plan, which is always feasible.
pub fn north_west_support(mu: &[Rational], nu: &[Rational]) -> Vec<(usize, usize)> {
    let (mut a, mut b) = (mu.to_vec(), nu.to_vec());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        out.push((i, j));
        let m = a[i].clone().min(b[j].clone());
        a[i] -= &m;
        b[j] -= &m;
        if a[i].is_zero() {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Random rational costs with denominators up to 6; a fraction of entries
/// off the north-west support are `+inf`.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize, inf_prob: f64) -> (CostMatrix, Marginals) {
    let r = rng.gen_range(1..=max_n);
    let c = rng.gen_range(1..=max_n);
    let marg = Marginals::new(random_weights(rng, r), random_weights(rng, c));
    let keep = north_west_support(&marg.mu, &marg.nu);
    let rows = (0..r)
        .map(|i| {
            (0..c)
                .map(|j| {
                    if !keep.contains(&(i, j)) && rng.gen_bool(inf_prob) {
                        ExtRational::Infinite
                    } else {
                        ExtRational::Finite(rat(rng.gen_range(0..=30), rng.gen_range(1..=6)))
                    }
                })
                .collect()
        })
        .collect();
    (CostMatrix::from_rows(rows).unwrap(), marg)
}

pub fn random_square_cost<R: Rng>(rng: &mut R, n: usize) -> CostMatrix {
    let rows = (0..n)
        .map(|_| (0..n).map(|_| ExtRational::Finite(int(rng.gen_range(0..=20)))).collect())
        .collect();
    CostMatrix::from_rows(rows).unwrap()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// `(1/N)·min_σ Σ c(i, σ(i))`, or `None` when every permutation hits `+inf`.
pub fn birkhoff_value(cost: &CostMatrix) -> Option<Rational> {
    let n = cost.n_rows();
    permutations(n)
        .iter()
        .filter_map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| cost.finite(i, j).cloned())
                .sum::<Option<Rational>>()
        })
        .min()
        .map(|v| v / int(n as i64))
}

/// `sign` of index `l` on `Z/M`: +1 left of the middle, -1 right of it.
pub fn half_sign(big_m: u64, l: u64) -> i64 {
    let mid = (big_m - 1) / 2;
    match l.cmp(&mid) {
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => -1,
    }
}

/// Orbit-count potential by direct search: for each `l`, find the number of
/// steps `j` from 0 with `j·P ≡ l` and count the signs along the way.
pub fn brute_phi(big_m: u64, p: u64) -> Vec<i64> {
    (0..big_m)
        .map(|l| {
            let j = (0..big_m).find(|&j| (j * p) % big_m == l).unwrap();
            (0..j).map(|i| half_sign(big_m, (i * p) % big_m)).sum()
        })
        .collect()
}
