//! Dataset bookkeeping and the end-to-end registration/evaluation chain:
//! phase bins, patient-level splits, pair records, the QC gate, report
//! aggregation, synthetic pairs and training-style augmentation.

mod augment;
mod config;
mod phase;
mod qc;
mod record;
mod register;
mod report;
mod split;
mod synth;

use thiserror::Error;

pub use augment::{apply_augment, augment_random, sample_augment, AugmentDraw};
pub use config::{
    ConfigError, FeatureConfig, PipelineConfig, RansacConfig, RefineConfig, VesselConfig,
};
pub use phase::{phase_bin, Phase, PhaseError, EARLY_END_S, EARLY_START_S, MID_END_S};
pub use qc::{gate_status, qc_gate, GateSummary};
pub use record::{
    manifest_order, pair_frames, sort_manifest, Eye, Frame, Modality, PairRecord, RejectReason,
    Status,
};
pub use register::{
    describe_prepared, evaluate_rasters, pair_seed, prepare_image, process_record,
    register_prepared, register_rasters, registration_status, Diagnostics, PreparedImage,
    RegistrationOutcome,
};
pub use report::{aggregate_report, AggregateReport, MetricStat, PhaseSummary, ReportError};
pub use split::{
    assign_patients, check_split_integrity, patient_key, patient_split, Split, SplitError,
    SplitRatio,
};
pub use synth::{synth_pair, SynthPair, SynthParams};

use crate::features::FeatureError;
use crate::geometry::GeometryError;
use crate::metrics::MetricError;
use crate::raster::RasterError;
use crate::vesselness::VesselError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Vessel(#[from] VesselError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("prediction {pred:?} and target {target:?} differ in size and resizing is off")]
    SizeMismatch {
        pred: (usize, usize),
        target: (usize, usize),
    },
    #[error("{0}")]
    Input(alloc::string::String),
}
