//! Traces of Frobenius for the family and the Mestre product
//! `∏_{p ≤ x} #E_k(F_p)/(p + 1)`.
//!
//! Modulo a prime `p ≡ 1 (mod 3)` the curve `E_k` only depends on the cubic
//! residue class of `k`, so each prime needs three point counts. Primes
//! `p ≡ 2 (mod 3)` are supersingular and contribute a factor of 1.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::residue::cubic_symbol_u64;
use crate::arith::{is_prime_u64, primes_up_to, CubefreeK};
use crate::error::{domain, Error, Result};

/// `a_p` for the three cubic residue classes of `k` modulo `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ApTable {
    pub p: u64,
    /// Smallest positive representative of each class.
    pub reps: [u64; 3],
    pub a_by_class: [i64; 3],
}

fn check_split_prime(p: u64) -> Result<()> {
    if p % 3 != 1 || !is_prime_u64(p) {
        return domain(format!("{p} is not a prime congruent to 1 mod 3"));
    }
    Ok(())
}

/// Counts points on `Y² = X³ − 432c²` for the smallest representative `c`
/// of each class.
pub fn build_ap_table(p: u64) -> Result<ApTable> {
    check_split_prime(p)?;
    let mut reps = [0u64; 3];
    let mut found = 0;
    let mut c = 1;
    while found < 3 {
        let e = cubic_symbol_u64(c, p) as usize;
        if reps[e] == 0 {
            reps[e] = c;
            found += 1;
        }
        c += 1;
    }
    let mut sq = vec![0u32; p as usize];
    for y in 0..p {
        sq[(y * y % p) as usize] += 1;
    }
    let a_by_class = reps.map(|c| {
        let b = (p - 432 % p * (c * c % p) % p) % p;
        let affine: u64 = (0..p).map(|x| sq[((x * x % p * x + b) % p) as usize] as u64).sum();
        p as i64 - affine as i64
    });
    Ok(ApTable { p, reps, a_by_class })
}

/// Tables for every `p ≡ 1 (mod 3)` up to some limit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApTables {
    tables: BTreeMap<u64, [i64; 3]>,
    limit: u64,
}

impl ApTables {
    pub fn build(limit: u64) -> Self {
        let primes: Vec<u64> = primes_up_to(limit).into_iter().filter(|p| p % 3 == 1).collect();
        let tables = primes
            .par_iter()
            .map(|&p| (p, build_ap_table(p).unwrap().a_by_class))
            .collect();
        Self { tables, limit }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn get(&self, p: u64) -> Option<[i64; 3]> {
        self.tables.get(&p).copied()
    }

    /// Reads a cache file of lines `p 0 a0 1 a1 2 a2`.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut tables = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::MalformedLine {
                line: i + 1,
                msg: msg.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<i64> = line
                .split_whitespace()
                .map(|w| w.parse::<i64>().map_err(|_| bad("not an integer")))
                .collect::<Result<_>>()?;
            if v.len() != 7 || v[1] != 0 || v[3] != 1 || v[5] != 2 || v[0] < 7 {
                return Err(bad("expected `p 0 a0 1 a1 2 a2`"));
            }
            tables.insert(v[0] as u64, [v[2], v[4], v[6]]);
        }
        let limit = tables.keys().next_back().copied().unwrap_or(0);
        Ok(Self { tables, limit })
    }

    /// Writes the cache through a temporary file and a rename.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            for (p, a) in &self.tables {
                writeln!(f, "{p} 0 {} 1 {} 2 {}", a[0], a[1], a[2])?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads `ap_tables.txt` from `dir` when it covers `limit`, otherwise
    /// builds and (re)writes it.
    pub fn load_or_build(limit: u64, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self::build(limit));
        };
        let path = dir.join("ap_tables.txt");
        if path.exists() {
            let t = Self::read(&path)?;
            let expected = primes_up_to(limit).iter().filter(|p| *p % 3 == 1).count();
            if t.tables.range(..=limit).count() == expected {
                return Ok(Self { limit, ..t });
            }
        }
        let t = Self::build(limit);
        fs::create_dir_all(dir)?;
        t.write(&path)?;
        Ok(t)
    }
}

/// Cache directory from `CUBESUM_CACHE`, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os("CUBESUM_CACHE").map(PathBuf::from)
}

/// `a_p(E_k)` at a prime of good reduction.
pub fn ap(k: &CubefreeK, p: u64, tables: &ApTables) -> Result<i64> {
    if !is_prime_u64(p) {
        return domain(format!("{p} is not prime"));
    }
    if p == 3 || k.rem_u64(p) == 0 {
        return domain(format!("E_{k} has bad reduction at {p}"));
    }
    if p % 3 == 2 {
        return Ok(0);
    }
    let e = cubic_symbol_u64(k.rem_u64(p), p) as usize;
    match tables.get(p) {
        Some(a) => Ok(a[e]),
        None => Ok(build_ap_table(p)?.a_by_class[e]),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MestreScore {
    pub k: CubefreeK,
    pub x_cut: u64,
    pub score: f64,
    pub log_score: f64,
}

/// Running log-score after each contributing prime up to `x_cut`.
pub fn score_series(k: &CubefreeK, x_cut: u64, tables: &ApTables) -> Vec<(u64, f64)> {
    let mut log = 0.0;
    let mut out = Vec::new();
    for p in primes_up_to(x_cut) {
        if p % 3 != 1 || k.rem_u64(p) == 0 {
            continue;
        }
        let a = ap(k, p, tables).expect("good split prime");
        log += ((p as f64 + 1.0 - a as f64) / (p as f64 + 1.0)).ln();
        out.push((p, log));
    }
    out
}

pub fn mestre_score(k: &CubefreeK, x_cut: u64, tables: &ApTables) -> MestreScore {
    let log_score = score_series(k, x_cut, tables).last().map_or(0.0, |x| x.1);
    MestreScore {
        k: k.clone(),
        x_cut,
        score: log_score.exp(),
        log_score,
    }
}
