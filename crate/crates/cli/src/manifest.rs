//! Label manifests: one frame per line,
//! `points.pnts pose.txt camera.txt features.vgrd [timestamp]`, paths
//! relative to the manifest. `#` starts a comment.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub points: PathBuf,
    pub pose: PathBuf,
    pub camera: PathBuf,
    pub features: PathBuf,
    pub timestamp: Option<f64>,
}

pub fn parse_manifest(text: &str, base: &Path) -> CliResult<Vec<FrameEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(CliError::Validation(format!(
                "manifest line {}: expected 4 paths and an optional timestamp, got {} fields",
                i + 1,
                fields.len()
            )));
        }
        let timestamp = match fields.get(4) {
            Some(t) => Some(
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Validation(format!("manifest line {}: bad timestamp {t:?}", i + 1)))?,
            ),
            None => None,
        };
        out.push(FrameEntry {
            points: base.join(fields[0]),
            pose: base.join(fields[1]),
            camera: base.join(fields[2]),
            features: base.join(fields[3]),
            timestamp,
        });
    }
    Ok(out)
}

/// Keeps the first frame and then every frame at least `1/hz` seconds after
/// the last kept one. Timestamps must be present and nondecreasing.
pub fn keyframes(frames: &[FrameEntry], hz: f64) -> CliResult<Vec<usize>> {
    if !(hz > 0.0 && hz.is_finite()) {
        return Err(CliError::Validation(format!("keyframe rate {hz} must be positive")));
    }
    let period = 1.0 / hz;
    let mut kept = Vec::new();
    let mut last: Option<f64> = None;
    let mut prev = f64::NEG_INFINITY;
    for (i, f) in frames.iter().enumerate() {
        let t = f
            .timestamp
            .ok_or_else(|| CliError::Validation(format!("frame {i} has no timestamp for the keyframe filter")))?;
        if t < prev {
            return Err(CliError::Validation(format!("frame {i}: timestamps go backwards")));
        }
        prev = t;
        if last.is_none_or(|l| t - l >= period * (1.0 - 1e-9)) {
            kept.push(i);
            last = Some(t);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_relative_paths_and_timestamps() {
        let m = parse_manifest("# frames\na.pnts a.pose a.cam a.vgrd 0.25\n\nb.pnts b.pose b.cam b.vgrd\n", Path::new("/d")).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].points, PathBuf::from("/d/a.pnts"));
        assert_eq!(m[0].timestamp, Some(0.25));
        assert_eq!(m[1].timestamp, None);
        assert!(parse_manifest("a b c", Path::new(".")).is_err());
        assert!(parse_manifest("a b c d nan", Path::new(".")).is_err());
    }

    #[test]
    fn keyframe_rate_filter() {
        let at = |t: f64| FrameEntry {
            points: "p".into(),
            pose: "p".into(),
            camera: "c".into(),
            features: "f".into(),
            timestamp: Some(t),
        };
        // 10 Hz stream filtered to 2 Hz
        let frames: Vec<FrameEntry> = (0..12).map(|i| at(i as f64 * 0.1)).collect();
        assert_eq!(keyframes(&frames, 2.0).unwrap(), vec![0, 5, 10]);
        let mut bad = frames.clone();
        bad[3].timestamp = None;
        assert!(keyframes(&bad, 2.0).is_err());
        bad[3].timestamp = Some(0.0);
        assert!(keyframes(&bad, 2.0).is_err());
    }
}
