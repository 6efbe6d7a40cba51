//! JSON Lines manifests: one record per line, written in manifest order.
//!
//! Input lines may be full pair records or single-frame descriptions
//! (`modality` + `path`); frames are expanded into every same-eye,
//! same-visit RI x FA pair.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use uwfkit_core::pipeline::{pair_frames, sort_manifest, Frame, PairRecord};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Pair(Box<PairRecord>),
    Frame(Frame),
}

/// Parses manifest text. Blank lines are skipped.
pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<PairRecord>, ManifestError> {
    let mut pairs = Vec::new();
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        // Try the strict record form first for a precise error message.
        match serde_json::from_str::<Line>(line) {
            Ok(Line::Pair(p)) => pairs.push(*p),
            Ok(Line::Frame(f)) => frames.push(f),
            Err(_) => {
                let source = serde_json::from_str::<PairRecord>(line).unwrap_err();
                return Err(ManifestError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    source,
                });
            }
        }
    }
    pairs.extend(pair_frames(&frames));
    Ok(pairs)
}

pub fn read_manifest(path: &Path) -> Result<Vec<PairRecord>, ManifestError> {
    let io = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut text = String::new();
    for line in BufReader::new(File::open(path).map_err(io)?).lines() {
        text.push_str(&line.map_err(io)?);
        text.push('\n');
    }
    parse_manifest(&text, path)
}

/// Serializes records sorted into manifest order.
pub fn render_manifest(records: &[PairRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_manifest(&mut sorted);
    let mut out = String::new();
    for r in &sorted {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, records: &[PairRecord]) -> Result<(), ManifestError> {
    let io = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(render_manifest(records).as_bytes())
        .map_err(io)?;
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use uwfkit_core::pipeline::{Eye, Status};

    #[test]
    fn frames_expand_and_records_pass_through() {
        let text = r#"
{"patient_id":"p1","eye":"left","visit_id":"v1","modality":"ri","path":"a_ri.png"}
{"patient_id":"p1","eye":"left","visit_id":"v1","modality":"fa","path":"a_fa1.png","injection_elapsed_s":40}
{"patient_id":"p1","eye":"left","visit_id":"v1","modality":"fa","path":"a_fa2.png","injection_elapsed_s":400}
{"patient_id":"p0","eye":"right","visit_id":"v9","ri_path":"r.png","fa_path":"f.png"}
"#;
        let rs = parse_manifest(text, Path::new("m.jsonl")).unwrap();
        assert_eq!(rs.len(), 3);
        assert_eq!(rs[0].patient_id, "p0");
        assert_eq!(rs[0].eye, Eye::Right);
        assert_eq!(rs[0].status, Status::Pending);
        let rendered = render_manifest(&rs);
        assert_eq!(rendered.lines().count(), 3);
        assert!(rendered.starts_with(r#"{"patient_id":"p0""#));
        let again = parse_manifest(&rendered, Path::new("m.jsonl")).unwrap();
        assert_eq!(render_manifest(&again), rendered);
    }

    #[test]
    fn bad_line_reports_its_number() {
        let text = "{\"patient_id\":\"p\",\"eye\":\"left\",\"visit_id\":\"v\",\"ri_path\":\"a\",\"fa_path\":\"b\"}\n{\"patient_id\":3}\n";
        match parse_manifest(text, Path::new("m.jsonl")) {
            Err(ManifestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
