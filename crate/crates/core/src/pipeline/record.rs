use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use serde::{Deserialize, Serialize};

use super::{Phase, Split};
use crate::geometry::{Homography, RegistrationResult, ValidityFailure};
use crate::metrics::MetricReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
}

/// The single primary reason a pair was excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RejectReason {
    Validity { failure: ValidityFailure },
    Dice { dice: f64, gate: f64 },
    Error { message: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Validity { failure } => write!(f, "{failure}"),
            RejectReason::Dice { dice, gate } => write!(f, "dice {dice:.3} < {gate}"),
            RejectReason::Error { message } => f.write_str(message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum Status {
    /// Not yet registered.
    #[default]
    Pending,
    Accepted,
    Rejected {
        reason: RejectReason,
    },
}

impl Status {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Status::Accepted)
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self, Status::Rejected { .. })
    }
}

/// One RI/FA pair and everything learned about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub patient_id: String,
    pub eye: Eye,
    pub visit_id: String,
    pub ri_path: String,
    pub fa_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection_elapsed_s: Option<f64>,
    #[serde(default)]
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration: Option<RegistrationResult>,
    /// Registration homography re-expressed in native pixel coordinates,
    /// present when the inputs were resampled to the working resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_homography: Option<Homography>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    #[serde(default)]
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl PairRecord {
    pub fn new(
        patient_id: impl Into<String>,
        eye: Eye,
        visit_id: impl Into<String>,
        ri_path: impl Into<String>,
        fa_path: impl Into<String>,
    ) -> Self {
        PairRecord {
            patient_id: patient_id.into(),
            eye,
            visit_id: visit_id.into(),
            ri_path: ri_path.into(),
            fa_path: fa_path.into(),
            injection_elapsed_s: None,
            phase: Phase::Unknown,
            registration: None,
            native_homography: None,
            metrics: None,
            status: Status::Pending,
            split: None,
        }
    }

    pub fn reject(&mut self, reason: RejectReason) {
        self.status = Status::Rejected { reason };
    }
}

/// Manifest order: patient, visit, FA path, then RI path.
pub fn manifest_order(a: &PairRecord, b: &PairRecord) -> Ordering {
    (&a.patient_id, &a.visit_id, &a.fa_path, &a.ri_path, a.eye).cmp(&(
        &b.patient_id,
        &b.visit_id,
        &b.fa_path,
        &b.ri_path,
        b.eye,
    ))
}

pub fn sort_manifest(records: &mut [PairRecord]) {
    records.sort_by(manifest_order);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ri,
    Fa,
}

/// A single acquired frame, before pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub patient_id: String,
    pub eye: Eye,
    pub visit_id: String,
    pub modality: Modality,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection_elapsed_s: Option<f64>,
}

/// Pairs every FA frame with every RI frame of the same patient, eye and
/// visit. The FA frame supplies the injection time. Output is in manifest
/// order.
pub fn pair_frames(frames: &[Frame]) -> Vec<PairRecord> {
    let mut groups: BTreeMap<(&str, Eye, &str), (Vec<&Frame>, Vec<&Frame>)> = BTreeMap::new();
    for f in frames {
        let slot = groups
            .entry((f.patient_id.as_str(), f.eye, f.visit_id.as_str()))
            .or_default();
        match f.modality {
            Modality::Ri => slot.0.push(f),
            Modality::Fa => slot.1.push(f),
        }
    }
    let mut out = Vec::new();
    for ((patient, eye, visit), (ris, fas)) in groups {
        for fa in &fas {
            for ri in &ris {
                let mut r = PairRecord::new(patient, eye, visit, ri.path.clone(), fa.path.clone());
                r.injection_elapsed_s = fa.injection_elapsed_s;
                out.push(r);
            }
        }
    }
    sort_manifest(&mut out);
    out
}
