//! JSONL candidate ledgers and single-line checkpoints.
//!
//! Big integers are always decimal strings.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Candidate,
    Searched,
    Certified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MestreSummary {
    pub x_cut: u64,
    pub log_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRecord {
    /// Model tag, see `CurveForm::tag`.
    pub model: String,
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub params: serde_json::Value,
    /// Seconds since the epoch.
    pub timestamp: u64,
}

impl Provenance {
    pub fn now(command: &str, params: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            params,
            timestamp: now_secs(),
        }
    }
}

/// `SOURCE_DATE_EPOCH` when set, so runs can be made reproducible.
pub fn now_secs() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub k: String,
    /// `(prime, exponent)` with primes as decimal strings.
    pub factors: Vec<(String, u32)>,
    pub selmer_bound: Option<usize>,
    pub mestre: Option<MestreSummary>,
    #[serde(default)]
    pub points: Vec<PointRecord>,
    pub rank_lb: Option<usize>,
    pub status: Status,
    pub provenance: Provenance,
}

impl CandidateRecord {
    pub fn k_value(&self) -> Result<BigUint> {
        self.k
            .parse()
            .map_err(|_| Error::Domain(format!("k {:?} is not a decimal integer", self.k)))
    }

    fn check(&self) -> std::result::Result<(), String> {
        self.k.parse::<BigUint>().map_err(|_| format!("k {:?} is not a decimal integer", self.k))?;
        if let (Some(r), Some(s)) = (self.rank_lb, self.selmer_bound) {
            if r > s {
                return Err(format!("rank_lb {r} exceeds selmer_bound {s} for k = {}", self.k));
            }
        }
        Ok(())
    }

    /// Merge precedence: larger `rank_lb`, then larger `selmer_bound`, then newer.
    fn precedence(&self) -> (Option<usize>, Option<usize>, u64) {
        (self.rank_lb, self.selmer_bound, self.provenance.timestamp)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub records: Vec<CandidateRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct Query {
    pub min_rank_lb: Option<usize>,
    pub min_selmer: Option<usize>,
    pub k_min: Option<BigUint>,
    pub k_max: Option<BigUint>,
}

impl Ledger {
    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| Error::MalformedLine { line: i + 1, msg };
            let r: CandidateRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            r.check().map_err(bad)?;
            records.push(r);
        }
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_jsonl()?)
    }

    /// One record per `k`, ascending.
    pub fn merge<'a>(ledgers: impl IntoIterator<Item = &'a Ledger>) -> Result<Ledger> {
        let mut best: BTreeMap<BigUint, CandidateRecord> = BTreeMap::new();
        for l in ledgers {
            for r in &l.records {
                let k = r.k_value()?;
                match best.get(&k) {
                    Some(old) if old.precedence() >= r.precedence() => {}
                    _ => {
                        best.insert(k, r.clone());
                    }
                }
            }
        }
        Ok(Ledger {
            records: best.into_values().collect(),
        })
    }

    pub fn query(&self, q: &Query) -> Vec<&CandidateRecord> {
        self.records
            .iter()
            .filter(|r| q.min_rank_lb.is_none_or(|m| r.rank_lb.is_some_and(|v| v >= m)))
            .filter(|r| q.min_selmer.is_none_or(|m| r.selmer_bound.is_some_and(|v| v >= m)))
            .filter(|r| {
                let Ok(k) = r.k_value() else { return false };
                q.k_min.as_ref().is_none_or(|m| &k >= m) && q.k_max.as_ref().is_none_or(|m| &k <= m)
            })
            .collect()
    }
}

/// Appends one record as a JSONL line.
pub fn append(path: &Path, record: &CandidateRecord) -> Result<()> {
    record.check().map_err(Error::Domain)?;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(record)?)?;
    Ok(())
}

pub(crate) fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub fingerprint: String,
    pub cursor: serde_json::Value,
    pub timestamp: u64,
}

/// SHA-256 of the command and its parameters.
pub fn fingerprint(command: &str, params: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(params.to_string().as_bytes());
    hex::encode(h.finalize())
}

impl Checkpoint {
    pub fn new(fingerprint: String, cursor: serde_json::Value) -> Self {
        Self {
            fingerprint,
            cursor,
            timestamp: now_secs(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &(serde_json::to_string(self)? + "\n"))
    }

    /// Loads a checkpoint and checks it belongs to the same command.
    pub fn load(path: &Path, expected_fingerprint: &str) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let line = text.lines().next().unwrap_or("");
        let c: Checkpoint = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: 1,
            msg: e.to_string(),
        })?;
        if c.fingerprint != expected_fingerprint {
            return Err(Error::Domain(format!(
                "checkpoint {} was written by a different command",
                path.display()
            )));
        }
        Ok(c)
    }
}
