//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 when a command fails as a whole (unreadable
//! input, unwritable output, invalid configuration), 2 on usage errors.
//! Per-pair failures inside `batch` become rejected records, not failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uwfkit_core::geometry::Homography;
use uwfkit_core::pipeline::{
    aggregate_report, check_split_integrity, pair_seed, patient_split, phase_bin, qc_gate,
    register_rasters, registration_status, synth_pair, Diagnostics, Eye, GateSummary, PairRecord,
    PipelineConfig, RejectReason, SplitRatio, Status, SynthParams,
};
use uwfkit_core::raster::to_grayscale;
use uwfkit_core::vesselness::{binarize_mask, frangi_vesselness, Polarity};
use uwfkit_core::{BinaryMask, RegistrationResult};

use crate::batch::run_batch;
use crate::config::{load_config, to_toml};
use crate::io::{decode_image, encode_image};
use crate::manifest::{read_manifest, write_manifest};

const PHASE_HELP: &str = "Phase bins by seconds after injection: [0, 25) unknown \
(pre-venous, excluded), [25, 60] early, (60, 300] mid, above 300 late. \
60 s counts as early and 300 s as mid.";

#[derive(Debug, Parser)]
#[command(
    name = "uwfkit",
    version,
    about = "Cross-modal retinal registration and generation-quality evaluation"
)]
pub struct Cli {
    /// TOML configuration; defaults to $UWFKIT_CONFIG, then built-in values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolarityArg {
    /// Bright vessels on a dark background.
    Bright,
    /// Dark vessels on a bright background.
    Dark,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::Bright => Polarity::BrightOnDark,
            PolarityArg::Dark => Polarity::DarkOnBright,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multiscale vesselness map of one image.
    Vesselmap {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value = "bright")]
        polarity: PolarityArg,
        /// Comma-separated filter scales in pixels.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        /// Also write the binarized vessel mask here.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Register one FA image (moving) onto one RI image (fixed).
    Register {
        #[arg(long)]
        ri: PathBuf,
        #[arg(long)]
        fa: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register every pair of a manifest.
    Batch {
        #[arg(long = "manifest-in")]
        manifest_in: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply the validity and dice gate; accepted records go to --out.
    Gate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "dice-min")]
        dice_min: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the rejected records.
        #[arg(long)]
        rejected: Option<PathBuf>,
    },
    #[command(about = "Assign FA phases from injection-elapsed seconds", long_about = PHASE_HELP)]
    PhaseBin {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Patient-level train/val/test split.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// Proportions a:b:c.
        #[arg(long)]
        ratio: Option<SplitRatio>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// All fidelity metrics of a generated frame against its target.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-phase metric summary; `.json` output or an aligned text table.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic fixed/moving pairs with their true homographies, plus a
    /// manifest and a matching configuration.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Image side in pixels.
        #[arg(long, default_value_t = 1024)]
        size: usize,
    },
}

#[derive(Serialize)]
struct RegisterOutput<'a> {
    ri_path: String,
    fa_path: String,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    registration: Option<&'a RegistrationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    native_homography: Option<&'a Homography>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a Diagnostics>,
}

#[derive(Serialize)]
struct SynthTruth {
    seed: u64,
    fixed: String,
    moving: String,
    true_h: Homography,
    params: SynthParams,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn checked(cfg: PipelineConfig) -> Result<PipelineConfig> {
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Vesselmap {
            input,
            output,
            polarity,
            scales,
            mask,
        } => {
            if let Some(s) = scales {
                cfg.vessel.scales = s;
            }
            let cfg = checked(cfg)?;
            let img = to_grayscale(&decode_image(&input)?);
            let v = frangi_vesselness(&img, &cfg.vessel.params(polarity.into()))?;
            encode_image(&v, &output)?;
            if let Some(path) = mask {
                let all = BinaryMask::filled(v.width(), v.height(), true);
                encode_image(&binarize_mask(&v, &all)?.to_raster(), &path)?;
            }
        }
        Command::Register { ri, fa, seed, out } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let cfg = checked(cfg)?;
            let (ri_path, fa_path) = (ri.display().to_string(), fa.display().to_string());
            let ri_img = decode_image(&ri)?;
            let fa_img = decode_image(&fa)?;
            let outcome = register_rasters(
                &ri_img,
                &fa_img,
                &cfg,
                pair_seed(cfg.seed, &ri_path, &fa_path),
            );
            let status = registration_status(&outcome, cfg.dice_gate);
            let ok = outcome.as_ref().ok();
            write_json(
                &out,
                &RegisterOutput {
                    ri_path,
                    fa_path,
                    status,
                    registration: ok.map(|o| &o.result),
                    native_homography: ok.map(|o| &o.native_homography),
                    diagnostics: ok.map(|o| &o.diagnostics),
                },
            )?;
        }
        Command::Batch {
            manifest_in,
            out,
            workers,
            seed,
        } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let cfg = checked(cfg)?;
            let records = read_manifest(&manifest_in)?;
            let done = run_batch(records, &cfg, &base_dir(&manifest_in), workers)?;
            let accepted = done.iter().filter(|r| r.status.is_accepted()).count();
            write_manifest(&out, &done)?;
            eprintln!(
                "{} pairs: {} accepted, {} rejected",
                done.len(),
                accepted,
                done.len() - accepted
            );
        }
        Command::Gate {
            manifest,
            dice_min,
            out,
            rejected,
        } => {
            if let Some(g) = dice_min {
                cfg.dice_gate = g;
            }
            let cfg = checked(cfg)?;
            let (acc, rej, summary) = qc_gate(read_manifest(&manifest)?, cfg.dice_gate);
            write_manifest(&out, &acc)?;
            if let Some(path) = rejected {
                write_manifest(&path, &rej)?;
            }
            print_summary(&summary);
        }
        Command::PhaseBin { manifest, out } => {
            let mut records = read_manifest(&manifest)?;
            for r in &mut records {
                match phase_bin(r.injection_elapsed_s) {
                    Ok(p) => r.phase = p,
                    Err(e) => r.reject(RejectReason::Error {
                        message: e.to_string(),
                    }),
                }
            }
            write_manifest(&out, &records)?;
        }
        Command::Split {
            manifest,
            ratio,
            seed,
            out,
        } => {
            if let Some(r) = ratio {
                cfg.split_ratio = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut records = read_manifest(&manifest)?;
            patient_split(&mut records, cfg.split_ratio, cfg.seed)?;
            check_split_integrity(&records)?;
            write_manifest(&out, &records)?;
        }
        Command::Evaluate { pred, target, out } => {
            let cfg = checked(cfg)?;
            let report = uwfkit_core::pipeline::evaluate_rasters(
                &decode_image(&pred)?,
                &decode_image(&target)?,
                &cfg,
            )?;
            write_json(&out, &report)?;
        }
        Command::Report { manifest, out } => {
            let records = read_manifest(&manifest)?;
            let reports: Vec<_> = records
                .iter()
                .filter_map(|r| r.metrics.map(|m| (r.phase, m)))
                .collect();
            if reports.is_empty() {
                bail!("{}: no records carry metrics", manifest.display());
            }
            let agg = aggregate_report(&reports)?;
            if out
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json"))
            {
                write_json(&out, &agg)?;
            } else {
                fs::write(&out, agg.to_table())
                    .with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Synth {
            seed,
            out_dir,
            count,
            size,
        } => {
            if size < 64 {
                bail!("--size must be at least 64");
            }
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let params = SynthParams {
                size,
                ..SynthParams::default()
            };
            let mut records = Vec::new();
            for s in seed..seed + count {
                let pair = synth_pair(s, &params);
                let fixed = format!("pair_{s:04}_ri.png");
                let moving = format!("pair_{s:04}_fa.png");
                encode_image(&pair.fixed, &out_dir.join(&fixed))?;
                encode_image(&pair.moving, &out_dir.join(&moving))?;
                write_json(
                    &out_dir.join(format!("pair_{s:04}_truth.json")),
                    &SynthTruth {
                        seed: s,
                        fixed: fixed.clone(),
                        moving: moving.clone(),
                        true_h: pair.true_h,
                        params: params.clone(),
                    },
                )?;
                records.push(PairRecord::new(
                    format!("synth{s:04}"),
                    Eye::Left,
                    "v1",
                    fixed,
                    moving,
                ));
            }
            write_manifest(&out_dir.join("manifest.jsonl"), &records)?;
            let synth_cfg = PipelineConfig {
                working_resolution: size,
                ..PipelineConfig::synthetic()
            };
            fs::write(out_dir.join("config.toml"), to_toml(&synth_cfg))
                .context("writing config.toml")?;
        }
    }
    Ok(())
}

fn print_summary(s: &GateSummary) {
    println!("{}", serde_json::to_string(s).expect("summary serializes"));
}
