use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::PairRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("no records to split")]
    EmptyRecordList,
    #[error("record {0} has an empty patient id")]
    EmptyPatientId(usize),
    #[error("split ratio must be three positive integers a:b:c, got {0:?}")]
    BadRatio(String),
    #[error("patient {0:?} appears in more than one split")]
    PatientSpansSplits(String),
}

/// Train:val:test proportions, written `a:b:c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitRatio {
    pub fn new(train: u32, val: u32, test: u32) -> Result<Self, SplitError> {
        if train == 0 || val == 0 || test == 0 {
            return Err(SplitError::BadRatio(alloc::format!("{train}:{val}:{test}")));
        }
        Ok(Self { train, val, test })
    }

    /// Patients per split for `n` patients: rounded train and val shares,
    /// test takes the remainder.
    pub fn quotas(&self, n: usize) -> (usize, usize, usize) {
        let total = (self.train + self.val + self.test) as f64;
        let share = |k: u32| ((k as f64 * n as f64) / total).round() as usize;
        let train = share(self.train).min(n);
        let val = share(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self {
            train: 8,
            val: 1,
            test: 1,
        }
    }
}

impl FromStr for SplitRatio {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SplitError::BadRatio(String::from(s));
        let parts: Vec<u32> = s
            .split(':')
            .map(|p| p.trim().parse::<u32>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [a, b, c] => SplitRatio::new(a, b, c).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for SplitRatio {
    type Error = SplitError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SplitRatio> for String {
    fn from(r: SplitRatio) -> Self {
        alloc::format!("{r}")
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.val, self.test)
    }
}

/// Keyed SHA-256 of `(seed, patient_id)`, first 8 bytes big-endian.
pub fn patient_key(seed: u64, patient_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(patient_id.as_bytes());
    let digest = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head)
}

/// Split for each distinct patient. Patients are ranked by their keyed hash
/// (ties by id) and the ranking is cut at the exact quotas, so the result
/// depends only on the set of patients and the seed.
pub fn assign_patients<'a>(
    patient_ids: impl IntoIterator<Item = &'a str>,
    ratio: SplitRatio,
    seed: u64,
) -> BTreeMap<String, Split> {
    let mut ranked: Vec<(u64, &str)> = patient_ids
        .into_iter()
        .map(|p| (patient_key(seed, p), p))
        .collect();
    ranked.sort_unstable();
    ranked.dedup();
    let (train, val, _) = ratio.quotas(ranked.len());
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, (_, p))| {
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            (String::from(p), split)
        })
        .collect()
}

/// Assigns every record the split of its patient.
pub fn patient_split(
    records: &mut [PairRecord],
    ratio: SplitRatio,
    seed: u64,
) -> Result<(), SplitError> {
    if records.is_empty() {
        return Err(SplitError::EmptyRecordList);
    }
    if let Some(i) = records.iter().position(|r| r.patient_id.is_empty()) {
        return Err(SplitError::EmptyPatientId(i));
    }
    let table = assign_patients(records.iter().map(|r| r.patient_id.as_str()), ratio, seed);
    for r in records.iter_mut() {
        r.split = Some(table[&r.patient_id]);
    }
    Ok(())
}

/// Fails if any patient's records carry different splits (an unassigned
/// record next to an assigned one counts as different).
pub fn check_split_integrity(records: &[PairRecord]) -> Result<(), SplitError> {
    let mut seen: BTreeMap<&str, Option<Split>> = BTreeMap::new();
    for r in records {
        match seen.get(r.patient_id.as_str()) {
            Some(s) if *s != r.split => {
                return Err(SplitError::PatientSpansSplits(r.patient_id.clone()))
            }
            Some(_) => {}
            None => {
                seen.insert(&r.patient_id, r.split);
            }
        }
    }
    Ok(())
}
