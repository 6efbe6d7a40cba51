use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Phase;
use crate::metrics::MetricReport;
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error("report {index}: {field} out of range")]
    OutOfRange { index: usize, field: &'static str },
}

/// Mean and sample standard deviation of one metric in one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    /// NaN (`null`) when no finite value exists.
    #[serde(with = "crate::nan_as_null")]
    pub mean: f64,
    /// Sample (N-1) standard deviation; 0 when only one value exists.
    #[serde(with = "crate::nan_as_null")]
    pub sd: f64,
    pub n: usize,
    /// Infinite values excluded from the statistics.
    pub skipped: usize,
    /// Set when `n == 1`, so the SD is a convention rather than an estimate.
    pub single: bool,
}

impl MetricStat {
    fn of(values: impl Iterator<Item = f64>) -> MetricStat {
        let mut finite = Vec::new();
        let mut skipped = 0;
        for v in values {
            if v.is_finite() {
                finite.push(v);
            } else {
                skipped += 1;
            }
        }
        let n = finite.len();
        if n == 0 {
            return MetricStat {
                mean: f64::NAN,
                sd: f64::NAN,
                n,
                skipped,
                single: false,
            };
        }
        let mean = finite.iter().copied().collect::<NeumaierSum>().total() / n as f64;
        let sd = if n > 1 {
            let ss: NeumaierSum = finite.iter().map(|v| (v - mean) * (v - mean)).collect();
            (ss.total() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MetricStat {
            mean,
            sd,
            n,
            skipped,
            single: n == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub count: usize,
    pub mae: MetricStat,
    pub psnr: MetricStat,
    pub ssim: MetricStat,
    pub ms_ssim: MetricStat,
    pub gv: MetricStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub phases: Vec<PhaseSummary>,
    /// Phases without any report, omitted from `phases`.
    pub missing: Vec<Phase>,
}

/// Per-phase mean and SD of every metric, phases in early/mid/late/unknown
/// order. Infinite PSNR values are excluded and counted.
pub fn aggregate_report(reports: &[(Phase, MetricReport)]) -> Result<AggregateReport, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    for (index, (_, r)) in reports.iter().enumerate() {
        r.check_ranges()
            .map_err(|v| ReportError::OutOfRange { index, field: v.0 })?;
    }
    let mut phases = Vec::new();
    let mut missing = Vec::new();
    for phase in Phase::ALL {
        let rs: Vec<&MetricReport> = reports
            .iter()
            .filter(|(p, _)| *p == phase)
            .map(|(_, r)| r)
            .collect();
        if rs.is_empty() {
            if phase != Phase::Unknown {
                missing.push(phase);
            }
            continue;
        }
        phases.push(PhaseSummary {
            phase,
            count: rs.len(),
            mae: MetricStat::of(rs.iter().map(|r| r.mae)),
            psnr: MetricStat::of(rs.iter().map(|r| r.psnr)),
            ssim: MetricStat::of(rs.iter().map(|r| r.ssim)),
            ms_ssim: MetricStat::of(rs.iter().map(|r| r.ms_ssim)),
            gv: MetricStat::of(rs.iter().map(|r| r.gv)),
        });
    }
    Ok(AggregateReport { phases, missing })
}

fn cell(s: &MetricStat, decimals: usize) -> String {
    if s.n == 0 {
        return String::from("-");
    }
    let mut out = alloc::format!("{:.*} (\u{b1}{:.*})", decimals, s.mean, decimals, s.sd);
    if s.single {
        out.push('*');
    }
    out
}

impl AggregateReport {
    /// Aligned text table: one row per phase, `mean (±SD)` per metric.
    pub fn to_table(&self) -> String {
        let header = ["Phase", "N", "MAE", "PSNR", "SSIM", "MS-SSIM", "GV"];
        let mut rows: Vec<[String; 7]> = Vec::new();
        for p in &self.phases {
            rows.push([
                String::from(p.phase.as_str()),
                alloc::format!("{}", p.count),
                cell(&p.mae, 2),
                cell(&p.psnr, 2),
                cell(&p.ssim, 2),
                cell(&p.ms_ssim, 2),
                cell(&p.gv, 4),
            ]);
        }
        let mut widths = header.map(|h| h.chars().count());
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = w - c.chars().count();
                s.push_str(c);
                s.extend(core::iter::repeat_n(' ', pad));
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&mut out, &header);
        for r in &rows {
            let cells: Vec<&str> = r.iter().map(|s| s.as_str()).collect();
            line(&mut out, &cells);
        }
        for p in &self.phases {
            if p.psnr.skipped > 0 {
                let _ = writeln!(
                    out,
                    "{}: {} infinite PSNR value(s) excluded",
                    p.phase, p.psnr.skipped
                );
            }
        }
        if self.phases.iter().any(|p| p.count == 1) {
            out.push_str("* single report: SD reported as 0\n");
        }
        if !self.missing.is_empty() {
            let names: Vec<&str> = self.missing.iter().map(|p| p.as_str()).collect();
            let _ = writeln!(out, "no reports: {}", names.join(", "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(mae: f64) -> MetricReport {
        MetricReport {
            mae,
            psnr: 20.0,
            ssim: 0.8,
            ms_ssim: 0.7,
            gv: 0.01,
        }
    }

    #[test]
    fn single_report() {
        let agg = aggregate_report(&[(Phase::Early, report(12.5))]).unwrap();
        let p = &agg.phases[0];
        assert_eq!((p.mae.mean, p.mae.sd, p.mae.single), (12.5, 0.0, true));
        assert_eq!(agg.missing, [Phase::Mid, Phase::Late]);
    }

    #[test]
    fn two_reports() {
        let agg =
            aggregate_report(&[(Phase::Mid, report(10.0)), (Phase::Mid, report(20.0))]).unwrap();
        let s = agg.phases[0].mae;
        assert_eq!(s.mean, 15.0);
        assert!((s.sd - 50f64.sqrt()).abs() < 1e-12);
        assert!((s.sd - 7.0711).abs() < 1e-4);
    }

    #[test]
    fn infinite_psnr_skipped() {
        let mut r = report(1.0);
        r.psnr = f64::INFINITY;
        let agg = aggregate_report(&[(Phase::Late, r), (Phase::Late, report(3.0))]).unwrap();
        let s = agg.phases[0].psnr;
        assert_eq!((s.n, s.skipped, s.mean), (1, 1, 20.0));
        let table = agg.to_table();
        assert!(
            table.contains("late: 1 infinite PSNR value(s) excluded"),
            "{table}"
        );
        assert!(table.contains("no reports: early, mid"), "{table}");
    }

    #[test]
    fn errors() {
        assert_eq!(aggregate_report(&[]), Err(ReportError::EmptyInput));
        let mut bad = report(1.0);
        bad.ssim = 2.0;
        assert_eq!(
            aggregate_report(&[(Phase::Early, bad)]),
            Err(ReportError::OutOfRange {
                index: 0,
                field: "ssim"
            })
        );
    }

    #[test]
    fn table_layout() {
        let agg = aggregate_report(&[(Phase::Early, report(10.0)), (Phase::Early, report(20.0))])
            .unwrap();
        let table = agg.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Phase  N  MAE"));
        assert!(
            lines[1].starts_with("early  2  15.00 (\u{b1}7.07)"),
            "{table}"
        );
    }
}
