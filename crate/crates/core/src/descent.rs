//! Descent via 3-isogeny: the F₃ matrix built from cubic residue symbols of
//! the prime-power divisors of `k`, and the resulting upper bound on the
//! Mordell-Weil rank of `E_k`.
//!
//! Rows are the primes `q | k` with `q ≡ 1 (mod 3)`, plus one row for the
//! cubic character mod 9 when `k ≡ 0, ±1 (mod 9)`. Columns are the prime
//! powers `p^ε` exactly dividing `k`. Diagonal entries (`p = q`) are set so
//! that every row sums to zero.

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::arith::residue::{cubic_character_mod9_u64, cubic_symbol_u64};
use crate::arith::{cubic_character_mod9, cubic_residue_symbol, f3_rank, CubefreeK, F3Matrix};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLabel {
    Prime(String),
    Mod9,
}

#[derive(Debug, Clone)]
pub struct DescentMatrix {
    pub k: CubefreeK,
    pub matrix: F3Matrix,
    pub row_labels: Vec<RowLabel>,
    pub col_labels: Vec<(BigUint, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelmerBound {
    #[serde(serialize_with = "ser_k")]
    pub k: CubefreeK,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub bound: usize,
}

fn ser_k<S: serde::Serializer>(k: &CubefreeK, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&k.to_string())
}

/// Whether the mod-9 row is present for `k ≡ r (mod 9)`.
pub fn has_mod9_row(r: u64) -> bool {
    matches!(r % 9, 0 | 1 | 8)
}

/// `max(0, rows + cols − 2·rank − 1)`.
pub fn bound_formula(rows: usize, cols: usize, rank: usize) -> usize {
    (rows + cols).saturating_sub(2 * rank + 1)
}

/// Symbol of `p^eps` at `q`, both primes with `p != q`.
fn prime_power_symbol(p: &BigUint, eps: u32, q: &BigUint) -> Result<u8> {
    if let (Some(p), Some(q)) = (p.to_u64(), q.to_u64()) {
        return Ok((eps as u8 * cubic_symbol_u64(p % q, q)) % 3);
    }
    Ok((eps as u8 * cubic_residue_symbol(&BigInt::from(p.clone()), q)?) % 3)
}

fn mod9_symbol(p: &BigUint, eps: u32) -> Result<u8> {
    if let Some(p) = p.to_u64() {
        return Ok((eps as u8 * cubic_character_mod9_u64(p)) % 3);
    }
    Ok((eps as u8 * cubic_character_mod9(&BigInt::from(p.clone()))?) % 3)
}

pub fn build_descent_matrix(k: &CubefreeK) -> Result<DescentMatrix> {
    let cols: Vec<(BigUint, u32)> = k.factors().to_vec();
    let three = BigUint::from(3u32);
    let mut row_primes: Vec<Option<BigUint>> = cols
        .iter()
        .filter(|(p, _)| (p % 3u32) == BigUint::from(1u32))
        .map(|(p, _)| Some(p.clone()))
        .collect();
    if has_mod9_row(k.rem_u64(9)) {
        row_primes.push(None);
    }
    let mut matrix = F3Matrix::zeros(row_primes.len(), cols.len());
    for (i, q) in row_primes.iter().enumerate() {
        let mut diag = None;
        let mut sum = 0u8;
        for (j, (p, eps)) in cols.iter().enumerate() {
            let entry = match q {
                Some(q) if q == p => {
                    diag = Some(j);
                    continue;
                }
                Some(q) => prime_power_symbol(p, *eps, q)?,
                None if *p == three => {
                    diag = Some(j);
                    continue;
                }
                None => mod9_symbol(p, *eps)?,
            };
            matrix.set(i, j, entry);
            sum = (sum + entry) % 3;
        }
        if let Some(j) = diag {
            matrix.set(i, j, (3 - sum) % 3);
        }
    }
    let row_labels: Vec<RowLabel> = row_primes
        .iter()
        .map(|q| match q {
            Some(q) => RowLabel::Prime(q.to_string()),
            None => RowLabel::Mod9,
        })
        .collect();
    matrix.row_labels = row_labels
        .iter()
        .map(|l| match l {
            RowLabel::Prime(q) => format!("q={q}"),
            RowLabel::Mod9 => "mod9".into(),
        })
        .collect();
    matrix.col_labels = cols
        .iter()
        .map(|(p, e)| if *e == 1 { p.to_string() } else { format!("{p}^{e}") })
        .collect();
    Ok(DescentMatrix {
        k: k.clone(),
        matrix,
        row_labels,
        col_labels: cols,
    })
}

impl DescentMatrix {
    pub fn selmer_bound(&self) -> SelmerBound {
        let rows = self.matrix.rows();
        let cols = self.matrix.cols();
        let rank = f3_rank(&self.matrix);
        SelmerBound {
            k: self.k.clone(),
            rows,
            cols,
            rank,
            bound: bound_formula(rows, cols, rank),
        }
    }
}

pub fn selmer_rank_bound(k: &CubefreeK) -> Result<SelmerBound> {
    Ok(build_descent_matrix(k)?.selmer_bound())
}

/// Bound for a `k` given as small `(prime, eps)` pairs; used by the
/// enumerator's inner loop and the brute-force oracles.
pub fn selmer_bound_u64(factors: &[(u64, u32)], k_mod9: u64) -> usize {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for &(q, _) in factors.iter().filter(|(q, _)| q % 3 == 1) {
        let mut row = vec![0u8; factors.len()];
        let mut sum = 0;
        let mut diag = 0;
        for (j, &(p, eps)) in factors.iter().enumerate() {
            if p == q {
                diag = j;
                continue;
            }
            row[j] = (eps as u8 * cubic_symbol_u64(p % q, q)) % 3;
            sum = (sum + row[j]) % 3;
        }
        row[diag] = (3 - sum) % 3;
        rows.push(row);
    }
    if has_mod9_row(k_mod9) {
        let mut row = vec![0u8; factors.len()];
        let mut sum = 0;
        let mut diag = None;
        for (j, &(p, eps)) in factors.iter().enumerate() {
            if p == 3 {
                diag = Some(j);
                continue;
            }
            row[j] = (eps as u8 * cubic_character_mod9_u64(p)) % 3;
            sum = (sum + row[j]) % 3;
        }
        if let Some(j) = diag {
            row[j] = (3 - sum) % 3;
        }
        rows.push(row);
    }
    let n_rows = rows.len();
    let rank = crate::arith::f3::rank_of_rows(rows, factors.len());
    bound_formula(n_rows, factors.len(), rank)
}
