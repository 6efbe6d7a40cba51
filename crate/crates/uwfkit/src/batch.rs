//! Batch registration on a bounded worker pool.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use uwfkit_core::pipeline::{
    process_record, sort_manifest, PairRecord, PipelineConfig, PipelineError,
};
use uwfkit_core::Raster;

use crate::io::decode_image;

/// Relative manifest paths are taken relative to `base`.
pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn load_pair(base: &Path, r: &PairRecord) -> Result<(Raster, Raster), PipelineError> {
    let load =
        |p: &str| decode_image(&resolve(base, p)).map_err(|e| PipelineError::Input(e.to_string()));
    Ok((load(&r.ri_path)?, load(&r.fa_path)?))
}

/// Registers every record. Each pair is processed independently and
/// single-threaded, so the output (in manifest order) does not depend on
/// `workers` or on the input order.
pub fn run_batch(
    mut records: Vec<PairRecord>,
    cfg: &PipelineConfig,
    base: &Path,
    workers: usize,
) -> Result<Vec<PairRecord>, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    pool.install(|| {
        records.par_iter_mut().for_each(|r| {
            let images = load_pair(base, r);
            process_record(r, images, cfg);
        })
    });
    sort_manifest(&mut records);
    Ok(records)
}
