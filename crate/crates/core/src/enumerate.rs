//! Depth-first enumeration of cubefree `k` whose descent bound reaches a
//! target rank, pruned by what the partially built matrix already forces.
//!
//! Nodes are prime-power paths `[(p₁, ε₁), (p₂, ε₂), …]` with increasing
//! primes. Symbol entries between two chosen primes never change as the
//! path grows, only diagonals do, so the rank of any chosen submatrix that
//! avoids diagonal positions bounds the final rank from below.

use std::cmp::Ordering;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::f3::rank_of_rows;
use crate::arith::residue::cubic_symbol_u64;
use crate::arith::{primes_up_to, CubefreeK};
use crate::curves::beta3_of_residue;
use crate::descent::selmer_bound_u64;
use crate::error::{domain, Result};

/// Largest prime pool the enumerator will sieve.
pub const MAX_PRIME_POOL: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    MaxK(u128),
    MaxConductor(u128),
}

impl Measure {
    fn budget(self) -> u128 {
        match self {
            Measure::MaxK(b) | Measure::MaxConductor(b) => b,
        }
    }

    /// Cost a prime adds; for conductors the exponent does not matter.
    fn prime_cost(self, p: u64, eps: u32) -> u128 {
        match self {
            Measure::MaxK(_) => (p as u128).pow(eps),
            Measure::MaxConductor(_) if p == 3 => 27,
            Measure::MaxConductor(_) => (p as u128) * (p as u128),
        }
    }

    fn root_cost(self) -> u128 {
        match self {
            Measure::MaxK(_) => 1,
            Measure::MaxConductor(_) => 9,
        }
    }
}

/// Exact conductor of `E'_k` for a small factored `k`.
pub fn conductor_u128(factors: &[(u64, u32)], k_mod9: u64) -> u128 {
    let mut n = 3u128.pow(2 + beta3_of_residue(k_mod9));
    for &(p, _) in factors {
        if p != 3 {
            n *= (p as u128) * (p as u128);
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumState {
    pub chosen: Vec<(u64, u32)>,
    pub product: u128,
    /// Running lower bound on the measure of any completion.
    pub cost: u128,
}

impl EnumState {
    pub fn root(measure: Measure) -> Self {
        Self {
            chosen: Vec::new(),
            product: 1,
            cost: measure.root_cost(),
        }
    }

    pub fn push(&self, p: u64, eps: u32, measure: Measure) -> Self {
        let mut chosen = self.chosen.clone();
        chosen.push((p, eps));
        Self {
            chosen,
            product: self.product * (p as u128).pow(eps),
            cost: self.cost * measure.prime_cost(p, eps),
        }
    }

    fn last_prime(&self) -> u64 {
        self.chosen.last().map_or(1, |c| c.0)
    }

    fn exact_measure(&self, measure: Measure) -> u128 {
        match measure {
            Measure::MaxK(_) => self.product,
            Measure::MaxConductor(_) => conductor_u128(&self.chosen, (self.product % 9) as u64),
        }
    }

    pub fn selmer_bound(&self) -> usize {
        selmer_bound_u64(&self.chosen, (self.product % 9) as u64)
    }
}

fn entry(p: u64, eps: u32, q: u64) -> u8 {
    (eps as u8 * cubic_symbol_u64(p % q, q)) % 3
}

/// Largest rank among submatrices whose entries are already final: rows a
/// subset `R` of the chosen primes `≡ 1 (mod 3)`, columns every other
/// chosen prime. All bipartitions of the first ten split primes are tried.
pub fn partial_rank_lower_bound(state: &EnumState) -> usize {
    let split: Vec<(u64, u32)> = state.chosen.iter().copied().filter(|(p, _)| p % 3 == 1).take(10).collect();
    if split.is_empty() {
        return 0;
    }
    let mut best = 0;
    for mask in 1u32..(1 << split.len()) {
        let rows: Vec<u64> = split.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| s.0).collect();
        let cols: Vec<(u64, u32)> = state.chosen.iter().copied().filter(|(p, _)| !rows.contains(p)).collect();
        if cols.is_empty() || rows.len().min(cols.len()) <= best {
            continue;
        }
        let m: Vec<Vec<u8>> = rows.iter().map(|&q| cols.iter().map(|&(p, e)| entry(p, e, q)).collect()).collect();
        best = best.max(rank_of_rows(m, cols.len()));
    }
    best
}

/// Counts `(all primes, split primes)` after `after` whose cheapest costs
/// multiply to at most `room`.
fn fit_counts(primes: &[u64], after: u64, room: u128, measure: Measure) -> (usize, usize) {
    let start = primes.partition_point(|&p| p <= after);
    let count = |only_split: bool| {
        let mut left = room;
        let mut n = 0;
        for &p in &primes[start..] {
            if only_split && p % 3 != 1 {
                continue;
            }
            let c = measure.prime_cost(p, 1);
            if c > left {
                break;
            }
            left /= c;
            n += 1;
        }
        n
    };
    (count(false), count(true))
}

fn mod9_possible(state: &EnumState) -> bool {
    !state.chosen.contains(&(3, 1))
}

fn optimistic(state: &EnumState, lb: usize, extra_all: usize, extra_split: usize, extra_gain: usize) -> i64 {
    let split = state.chosen.iter().filter(|(p, _)| p % 3 == 1).count();
    let cols = state.chosen.len();
    (split + cols + extra_gain + extra_all + extra_split + mod9_possible(state) as usize) as i64 - 2 * lb as i64 - 1
}

/// Largest descent bound any completion of `state` within the budget could
/// reach. Each further prime adds a column, a split prime also a row; the
/// mod-9 row counts unless `3 ∥ k` already.
pub fn best_case_bound(state: &EnumState, measure: Measure, primes: &[u64]) -> i64 {
    if state.cost > measure.budget() {
        return -1;
    }
    let room = measure.budget() / state.cost;
    let (m, m1) = fit_counts(primes, state.last_prime(), room, measure);
    optimistic(state, partial_rank_lower_bound(state), m, m1, 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub k: u128,
    pub factors: Vec<(u64, u32)>,
    pub selmer_bound: usize,
}

impl Candidate {
    pub fn cubefree(&self) -> CubefreeK {
        CubefreeK::from_prime_powers(self.factors.iter().map(|&(p, e)| (BigUint::from(p), e)).collect()).unwrap()
    }
}

/// Preorder comparison of DFS paths (a prefix sorts first).
fn path_cmp(a: &[(u64, u32)], b: &[(u64, u32)]) -> Ordering {
    a.cmp(b)
}

struct Dfs<'a> {
    measure: Measure,
    target: usize,
    primes: &'a [u64],
    /// Nodes at or before this path are already done.
    cursor: Option<Vec<(u64, u32)>>,
}

impl Dfs<'_> {
    fn visit<F: FnMut(&EnumState, Option<Candidate>) -> bool>(&self, state: &EnumState, out: &mut F) -> bool {
        let (emit, descend) = match &self.cursor {
            None => (true, true),
            Some(c) => match path_cmp(&state.chosen, c) {
                Ordering::Greater => (true, true),
                _ => (false, c.starts_with(&state.chosen)),
            },
        };
        if emit && state.exact_measure(self.measure) <= self.measure.budget() {
            let b = state.selmer_bound();
            let hit = (b >= self.target).then(|| Candidate {
                k: state.product,
                factors: state.chosen.clone(),
                selmer_bound: b,
            });
            if !out(state, hit) {
                return false;
            }
        }
        if !descend {
            return true;
        }
        let lb = partial_rank_lower_bound(state);
        let start = self.primes.partition_point(|&p| p <= state.last_prime());
        for &p in &self.primes[start..] {
            let c1 = self.measure.prime_cost(p, 1);
            if state.cost.saturating_mul(c1) > self.measure.budget() {
                break;
            }
            let room = self.measure.budget() / (state.cost * c1);
            let (m, m1) = fit_counts(self.primes, p, room, self.measure);
            // Upper bound for every child from here on: decreasing in p.
            if optimistic(state, lb, m, m1, 2) < self.target as i64 {
                break;
            }
            for eps in [1, 2] {
                let cost = state.cost.saturating_mul(self.measure.prime_cost(p, eps));
                if cost > self.measure.budget() {
                    continue;
                }
                let child = state.push(p, eps, self.measure);
                if best_case_bound(&child, self.measure, self.primes) < self.target as i64 {
                    continue;
                }
                if !self.visit(&child, out) {
                    return false;
                }
            }
        }
        true
    }
}

/// Primes large enough for any `k` within the budget.
pub fn prime_pool(measure: Measure) -> Result<Vec<u64>> {
    let limit = match measure {
        Measure::MaxK(b) => b,
        Measure::MaxConductor(b) => ((b / 9) as f64).sqrt() as u128 + 1,
    };
    if limit > MAX_PRIME_POOL as u128 {
        return domain(format!("budget needs primes up to {limit}, above the pool cap {MAX_PRIME_POOL}"));
    }
    Ok(primes_up_to(limit as u64))
}

/// Sequential DFS from `cursor` (exclusive), calling `on_node` for every
/// node inside the budget with the candidate it yields, if any. Stops early
/// when `on_node` returns `false`.
pub fn enumerate_from<F>(measure: Measure, target: usize, cursor: Option<Vec<(u64, u32)>>, mut on_node: F) -> Result<()>
where
    F: FnMut(&EnumState, Option<Candidate>) -> bool,
{
    let primes = prime_pool(measure)?;
    let dfs = Dfs {
        measure,
        target,
        primes: &primes,
        cursor,
    };
    let root = EnumState::root(measure);
    if best_case_bound(&root, measure, &primes) >= target as i64 {
        dfs.visit(&root, &mut on_node);
    }
    Ok(())
}

/// All cubefree `k` within the budget with descent bound `≥ target`,
/// ascending. Top-level branches run in parallel.
pub fn enumerate_candidates(measure: Measure, target: usize) -> Result<Vec<Candidate>> {
    let primes = prime_pool(measure)?;
    let root = EnumState::root(measure);
    let mut out = Vec::new();
    if best_case_bound(&root, measure, &primes) < target as i64 {
        return Ok(out);
    }
    if root.selmer_bound() >= target {
        out.push(Candidate {
            k: 1,
            factors: Vec::new(),
            selmer_bound: root.selmer_bound(),
        });
    }
    let tops: Vec<(u64, u32)> = primes
        .iter()
        .take_while(|&&p| measure.prime_cost(p, 1).saturating_mul(root.cost) <= measure.budget())
        .flat_map(|&p| [(p, 1), (p, 2)])
        .collect();
    let dfs = Dfs {
        measure,
        target,
        primes: &primes,
        cursor: None,
    };
    let parts: Vec<Vec<Candidate>> = tops
        .par_iter()
        .map(|&(p, e)| {
            let mut v = Vec::new();
            if root.cost.saturating_mul(measure.prime_cost(p, e)) > measure.budget() {
                return v;
            }
            let child = root.push(p, e, measure);
            if best_case_bound(&child, measure, &primes) >= target as i64 {
                dfs.visit(&child, &mut |_, c| {
                    v.extend(c);
                    true
                });
            }
            v
        })
        .collect();
    out.extend(parts.into_iter().flatten());
    out.sort_by_key(|c| c.k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factor_u64;
    use rand::{Rng, SeedableRng};

    fn ks(v: &[Candidate]) -> Vec<u128> {
        v.iter().map(|c| c.k).collect()
    }

    fn brute(max_k: u64, target: usize) -> Vec<u128> {
        (1..=max_k)
            .filter(|&n| {
                let f = factor_u64(n);
                f.iter().all(|&(_, e)| e < 3) && selmer_bound_u64(&f, n % 9) >= target
            })
            .map(|n| n as u128)
            .collect()
    }

    #[test]
    fn examples() {
        assert_eq!(ks(&enumerate_candidates(Measure::MaxK(19), 2).unwrap()), vec![19]);
        assert!(ks(&enumerate_candidates(Measure::MaxK(657), 3).unwrap()).contains(&657));
        assert!(ks(&enumerate_candidates(Measure::MaxConductor(9747), 2).unwrap()).contains(&19));
        let c = enumerate_candidates(Measure::MaxK(21691), 4).unwrap();
        assert_eq!(c.last().unwrap().k, 21691);
    }

    #[test]
    fn state_bounds() {
        let m = Measure::MaxK(21691);
        let primes = prime_pool(m).unwrap();
        assert_eq!(partial_rank_lower_bound(&EnumState::root(m)), 0);
        assert_eq!(partial_rank_lower_bound(&EnumState::root(m).push(19, 1, m)), 0);
        let s = EnumState::root(m).push(7, 1, m).push(13, 1, m);
        let e = cubic_symbol_u64(7, 13);
        assert_eq!(partial_rank_lower_bound(&s), usize::from(e != 0 || cubic_symbol_u64(13, 7) != 0));
        let s = EnumState::root(m).push(109, 1, m);
        assert!(best_case_bound(&s, m, &primes) >= 4);
        let s = EnumState::root(Measure::MaxK(19));
        assert!(best_case_bound(&s, Measure::MaxK(19), &prime_pool(Measure::MaxK(19)).unwrap()) >= 2);
        let over = EnumState::root(m).push(199, 2, m);
        assert!(best_case_bound(&over, m, &primes) < 0);
    }

    #[test]
    fn matches_brute_force() {
        for (b, t) in [(1000u64, 0usize), (1000, 1), (20_000, 2), (100_000, 3), (100_000, 4), (100_000, 5)] {
            assert_eq!(ks(&enumerate_candidates(Measure::MaxK(b as u128), t).unwrap()), brute(b, t), "budget {b}, target {t}");
        }
    }

    #[test]
    fn conductor_measure_matches_brute_force() {
        for (n, t) in [(9747u128, 2usize), (100_000, 1), (2_000_000, 3), (50_000_000, 3)] {
            let got = ks(&enumerate_candidates(Measure::MaxConductor(n), t).unwrap());
            let limit = (n / 9) as u64;
            let want: Vec<u128> = (1..=limit)
                .filter(|&k| {
                    let f = factor_u64(k);
                    f.iter().all(|&(_, e)| e < 3) && conductor_u128(&f, k % 9) <= n && selmer_bound_u64(&f, k % 9) >= t
                })
                .map(|k| k as u128)
                .collect();
            assert_eq!(got, want, "conductor {n}, target {t}");
        }
    }

    #[test]
    fn square_vs_simple_same_cost_under_conductor() {
        let m = Measure::MaxConductor(1 << 60);
        for p in [2u64, 5, 7, 13, 19] {
            assert_eq!(m.prime_cost(p, 1), m.prime_cost(p, 2));
        }
        let n1 = conductor_u128(&[(3, 2), (7, 1)], 63 % 9);
        let n2 = conductor_u128(&[(3, 1), (7, 2)], (3 * 49) % 9);
        assert_eq!(n1, n2);
    }

    #[test]
    fn lower_bound_never_exceeds_completions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let primes = primes_up_to(400);
        let m = Measure::MaxK(u128::MAX);
        for _ in 0..400 {
            let mut chosen: Vec<u64> = (0..rng.gen_range(1..5)).map(|_| primes[rng.gen_range(0..primes.len())]).collect();
            chosen.sort();
            chosen.dedup();
            let mut s = EnumState::root(m);
            for &p in &chosen {
                s = s.push(p, rng.gen_range(1..3), m);
            }
            let lb = partial_rank_lower_bound(&s);
            for _ in 0..5 {
                let mut full = s.clone();
                let mut p = s.last_prime();
                for _ in 0..rng.gen_range(0..4) {
                    p = primes.iter().copied().find(|&q| q > p + rng.gen_range(0..40)).unwrap_or(397);
                    if p <= full.last_prime() {
                        break;
                    }
                    full = full.push(p, rng.gen_range(1..3), m);
                }
                let k = full.cubefree_k();
                let dm = crate::descent::build_descent_matrix(&k).unwrap();
                assert!(lb <= crate::arith::f3_rank(&dm.matrix));
            }
        }
    }

    #[test]
    fn resume_at_every_step() {
        let m = Measure::MaxK(5000);
        let mut straight = Vec::new();
        enumerate_from(m, 2, None, |_, c| {
            straight.extend(c);
            true
        })
        .unwrap();
        let mut resumed = Vec::new();
        let mut cursor = None;
        loop {
            let mut step = None;
            enumerate_from(m, 2, cursor.clone(), |s, c| {
                step = Some((s.chosen.clone(), c));
                false
            })
            .unwrap();
            let Some((path, c)) = step else { break };
            resumed.extend(c);
            cursor = Some(path);
        }
        assert_eq!(straight, resumed);
        let mut sorted = straight.clone();
        sorted.sort_by_key(|c| c.k);
        assert_eq!(sorted, enumerate_candidates(m, 2).unwrap());
    }

    impl EnumState {
        fn cubefree_k(&self) -> CubefreeK {
            CubefreeK::from_prime_powers(self.chosen.iter().map(|&(p, e)| (BigUint::from(p), e)).collect()).unwrap()
        }
    }
}
