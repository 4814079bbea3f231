//! Labeled feature sequences: storage, FMS labels, manifests and synthetic sets.

pub mod fseq;
mod labels;
mod manifest;
mod synth;

use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub use labels::{bin_fms, BinningScheme, FmsLabel, SeverityClass, FMS_MAX, FMS_MIN};
pub use manifest::{load_manifest, Dataset, DatasetManifest, Manifest, Sample, SessionEntry, SessionRecord};
pub use synth::{generate_synthetic, synthesize_sessions, MotifRegion, SyntheticSpec};

/// Per-frame embeddings of one recording, `T × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSequence {
    frames: Array2<f64>,
    frame_rate_hz: f64,
}

impl FrameFeatureSequence {
    pub fn new(frames: Array2<f64>, frame_rate_hz: f64) -> Result<Self> {
        let (t, d) = frames.dim();
        if t == 0 || d == 0 {
            return Err(Error::Domain(format!(
                "feature sequence must be non-empty, got {t}x{d}"
            )));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::Domain(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        if let Some(pos) = frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { frames, frame_rate_hz })
    }

    pub fn frames(&self) -> ArrayView2<'_, f64> {
        self.frames.view()
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    /// Frame count T.
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    /// Embedding width D.
    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn with_frame_rate(self, frame_rate_hz: f64) -> Result<Self> {
        Self::new(self.frames, frame_rate_hz)
    }
}

/// Reads an FSEQ file. The format carries no sampling rate, so the result
/// reports 1 Hz; manifests supply the real rate via [`FrameFeatureSequence::with_frame_rate`].
pub fn read_feature_file(path: &Path) -> Result<FrameFeatureSequence> {
    let frames = fseq::read_matrix_file(fseq::FEATURE_MAGIC, path)?;
    FrameFeatureSequence::new(frames, 1.0)
}

pub fn write_feature_file(seq: &FrameFeatureSequence, path: &Path) -> Result<()> {
    fseq::write_matrix_file(fseq::FEATURE_MAGIC, seq.frames(), path)
}
