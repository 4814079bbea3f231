use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::labels::{bin_fms, BinningScheme, FmsLabel, SeverityClass};
use super::{read_feature_file, FrameFeatureSequence};
use crate::error::{Error, Result};

/// On-disk dataset description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub feature_dim: usize,
    #[serde(default)]
    pub binning: BinningScheme,
    pub sessions: Vec<SessionEntry>,
}

/// Kept as an alias so callers can name the JSON document directly.
pub type Manifest = DatasetManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub feature_file: String,
    pub frame_rate_hz: f64,
    pub labels: Vec<FmsLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
}

/// A session with its features materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    pub features: FrameFeatureSequence,
    pub labels: Vec<FmsLabel>,
    pub participant_id: Option<String>,
}

/// One labeled minute: the frames covering it plus its severity class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub session_id: String,
    pub minute_index: u32,
    pub fms: u8,
    pub label: SeverityClass,
    pub frames: Array2<f64>,
}

/// Immutable set of labeled samples sharing one embedding width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub feature_dim: usize,
    pub binning: BinningScheme,
}

impl Dataset {
    pub fn class_count(&self) -> usize {
        self.binning.class_count()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<SeverityClass> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn get(&self, id: usize) -> Result<&Sample> {
        self.samples.get(id).ok_or(Error::Lookup(id))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for s in &self.samples {
            counts[s.label.0] += 1;
        }
        counts
    }

    /// Re-derives every label from its FMS score under `binning`.
    pub fn rebin(&mut self, binning: BinningScheme) -> Result<()> {
        for s in &mut self.samples {
            s.label = bin_fms(s.fms, &binning)?;
        }
        self.binning = binning;
        Ok(())
    }

    /// One sample per labeled minute, in session then minute order.
    pub fn from_sessions(sessions: &[SessionRecord], feature_dim: usize, binning: BinningScheme) -> Result<Self> {
        let mut samples = Vec::new();
        for session in sessions {
            if session.features.dim() != feature_dim {
                return Err(Error::Load(format!(
                    "session {}: feature width {} does not match manifest feature_dim {feature_dim}",
                    session.session_id,
                    session.features.dim()
                )));
            }
            check_label_order(&session.session_id, &session.labels)?;
            let per_minute = frames_per_minute(session.features.frame_rate_hz()).ok_or_else(|| {
                Error::Load(format!(
                    "session {}: frame rate {} Hz gives no frames per minute",
                    session.session_id,
                    session.features.frame_rate_hz()
                ))
            })?;
            let total = session.features.len();
            for label in &session.labels {
                let start = label.minute_index as usize * per_minute;
                if start >= total {
                    return Err(Error::Load(format!(
                        "session {}: minute {} starts at frame {start} but only {total} frames exist",
                        session.session_id, label.minute_index
                    )));
                }
                let end = (start + per_minute).min(total);
                samples.push(Sample {
                    id: samples.len(),
                    session_id: session.session_id.clone(),
                    minute_index: label.minute_index,
                    fms: label.fms,
                    label: bin_fms(label.fms, &binning)?,
                    frames: session.features.frames().slice(s![start..end, ..]).to_owned(),
                });
            }
        }
        Ok(Self {
            samples,
            feature_dim,
            binning,
        })
    }
}

/// Frames owned by one label: minute `m` covers `[m·w, (m+1)·w)`.
pub(crate) fn frames_per_minute(frame_rate_hz: f64) -> Option<usize> {
    let w = (60.0 * frame_rate_hz).round();
    (w >= 1.0 && w.is_finite()).then_some(w as usize)
}

fn check_label_order(session_id: &str, labels: &[FmsLabel]) -> Result<()> {
    for w in labels.windows(2) {
        if w[0].minute_index >= w[1].minute_index {
            return Err(Error::Load(format!(
                "session {session_id}: labels must have strictly increasing minute_index ({} then {})",
                w[0].minute_index, w[1].minute_index
            )));
        }
    }
    for l in labels {
        FmsLabel::new(l.minute_index, l.fms).map_err(|e| Error::Load(format!("session {session_id}: {e}")))?;
    }
    Ok(())
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(format!("manifest {}", path.display()), e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        super::fseq::write_bytes(path, text.as_bytes())
    }

    pub fn resolve(&self, manifest_path: &Path, entry: &SessionEntry) -> PathBuf {
        let p = Path::new(&entry.feature_file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new("")).join(p)
        }
    }

    pub fn sample_count(&self) -> usize {
        self.sessions.iter().map(|s| s.labels.len()).sum()
    }
}

/// Parses a manifest, reads every feature file and cuts one sample per label.
pub fn load_manifest(path: &Path) -> Result<(DatasetManifest, Dataset)> {
    let manifest = DatasetManifest::read(path)?;
    if manifest.feature_dim == 0 {
        return Err(Error::Load("feature_dim must be positive".into()));
    }
    let mut records = Vec::with_capacity(manifest.sessions.len());
    for entry in &manifest.sessions {
        let file = manifest.resolve(path, entry);
        if !file.exists() {
            return Err(Error::Load(format!(
                "session {}: feature file {} does not exist",
                entry.session_id,
                file.display()
            )));
        }
        let features = read_feature_file(&file)?
            .with_frame_rate(entry.frame_rate_hz)
            .map_err(|e| Error::Load(format!("session {}: {e}", entry.session_id)))?;
        records.push(SessionRecord {
            session_id: entry.session_id.clone(),
            features,
            labels: entry.labels.clone(),
            participant_id: entry.participant_id.clone(),
        });
    }
    let dataset = Dataset::from_sessions(&records, manifest.feature_dim, manifest.binning.clone())?;
    Ok((manifest, dataset))
}
