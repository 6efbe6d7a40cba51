use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{PairRecord, RejectReason, Status};
use crate::geometry::Validity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateSummary {
    pub total: usize,
    pub accepted: usize,
    pub rejected_validity: usize,
    pub rejected_dice: usize,
    pub rejected_error: usize,
}

/// Status implied by a registration and the dice gate. Pairs with
/// `dice < gate` are excluded; `dice == gate` passes.
pub fn gate_status(record: &PairRecord, gate: f64) -> Status {
    if let Status::Rejected {
        reason: reason @ RejectReason::Error { .. },
    } = &record.status
    {
        return Status::Rejected {
            reason: reason.clone(),
        };
    }
    let Some(reg) = &record.registration else {
        return Status::Rejected {
            reason: RejectReason::Error {
                message: "no registration".into(),
            },
        };
    };
    match &reg.validity {
        Validity::Fail { reason } => Status::Rejected {
            reason: RejectReason::Validity {
                failure: reason.clone(),
            },
        },
        Validity::Pass if reg.dice < gate || reg.dice.is_nan() => Status::Rejected {
            reason: RejectReason::Dice {
                dice: reg.dice,
                gate,
            },
        },
        Validity::Pass => Status::Accepted,
    }
}

/// Re-gates every record at `gate` and partitions them, preserving order.
pub fn qc_gate(
    records: Vec<PairRecord>,
    gate: f64,
) -> (Vec<PairRecord>, Vec<PairRecord>, GateSummary) {
    let mut summary = GateSummary {
        total: records.len(),
        ..GateSummary::default()
    };
    let (mut accepted, mut rejected) = (Vec::new(), Vec::new());
    for mut r in records {
        r.status = gate_status(&r, gate);
        match &r.status {
            Status::Accepted => {
                summary.accepted += 1;
                accepted.push(r);
            }
            Status::Rejected { reason } => {
                match reason {
                    RejectReason::Validity { .. } => summary.rejected_validity += 1,
                    RejectReason::Dice { .. } => summary.rejected_dice += 1,
                    RejectReason::Error { .. } => summary.rejected_error += 1,
                }
                rejected.push(r);
            }
            Status::Pending => unreachable!("gate_status never yields pending"),
        }
    }
    (accepted, rejected, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Homography, RegistrationResult, ValidityFailure};
    use crate::pipeline::Eye;

    fn with_dice(dice: f64, validity: Validity) -> PairRecord {
        let mut r = PairRecord::new("p", Eye::Left, "v", "ri", "fa");
        r.registration = Some(RegistrationResult {
            homography: Homography::identity(),
            inlier_count: 10,
            total_matches: 20,
            scale: 1.0,
            rotation: 0.0,
            validity,
            dice,
        });
        r
    }

    #[test]
    fn gate_boundary_is_inclusive() {
        let (acc, rej, s) = qc_gate(
            alloc::vec![
                with_dice(0.49, Validity::Pass),
                with_dice(0.50, Validity::Pass)
            ],
            0.5,
        );
        assert_eq!(acc.len(), 1);
        assert_eq!(acc[0].registration.as_ref().unwrap().dice, 0.50);
        assert_eq!(rej.len(), 1);
        assert_eq!((s.accepted, s.rejected_dice), (1, 1));
    }

    #[test]
    fn empty_input() {
        let (a, r, s) = qc_gate(Vec::new(), 0.5);
        assert!(a.is_empty() && r.is_empty());
        assert_eq!(s, GateSummary::default());
    }

    #[test]
    fn validity_failures_always_rejected() {
        let fail = Validity::Fail {
            reason: ValidityFailure::Reflection,
        };
        let recs = alloc::vec![with_dice(0.99, fail.clone()), with_dice(1.0, fail)];
        let (a, r, s) = qc_gate(recs, 0.5);
        assert!(a.is_empty());
        assert_eq!(r.len(), 2);
        assert_eq!(s.rejected_validity, 2);
        assert_eq!(
            s.accepted + s.rejected_validity + s.rejected_dice + s.rejected_error,
            s.total
        );
    }

    #[test]
    fn errors_stay_errors() {
        let mut r = PairRecord::new("p", Eye::Left, "v", "ri", "fa");
        r.reject(RejectReason::Error {
            message: "decode failed".into(),
        });
        let (_, rej, s) = qc_gate(alloc::vec![r], 0.5);
        assert_eq!(s.rejected_error, 1);
        assert_eq!(
            rej[0].status,
            Status::Rejected {
                reason: RejectReason::Error {
                    message: "decode failed".into()
                }
            }
        );
    }
}
