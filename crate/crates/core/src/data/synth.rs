use std::ops::Range;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::labels::{BinningScheme, FmsLabel, SeverityClass};
use super::manifest::{load_manifest, Dataset, DatasetManifest, SessionEntry, SessionRecord};
use super::{write_feature_file, FrameFeatureSequence};
use crate::error::{Error, Result};

/// Recipe for a labeled desk-scale dataset with a planted class signal.
///
/// Every session is one labeled minute of `frames_per_sample` frames. Class
/// `c` adds `motif_strength` to the block of columns and frames returned by
/// [`SyntheticSpec::motif`], on top of `N(0, noise_sigma²)` noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub session_count: usize,
    pub frames_per_sample: usize,
    pub feature_dim: usize,
    pub class_count: usize,
    pub motif_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            session_count: 300,
            frames_per_sample: 25,
            feature_dim: 16,
            class_count: 4,
            motif_strength: 5.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

/// Columns and frames a class elevates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifRegion {
    pub columns: Range<usize>,
    pub frames: Range<usize>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.session_count == 0 || self.feature_dim == 0 {
            return bad("session-count and feature-dim must be positive".into());
        }
        if self.class_count < 2 {
            return bad(format!("class-count must be at least 2, got {}", self.class_count));
        }
        if self.frames_per_sample < self.class_count {
            return bad(format!(
                "frames-per-sample ({}) must be at least class-count ({}) so every class gets a motif window",
                self.frames_per_sample, self.class_count
            ));
        }
        if !(self.motif_strength.is_finite() && self.motif_strength >= 0.0) {
            return bad(format!(
                "motif-strength must be non-negative, got {}",
                self.motif_strength
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad(format!("noise-sigma must be positive, got {}", self.noise_sigma));
        }
        BinningScheme::for_class_count(self.class_count)?;
        Ok(())
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frames_per_sample as f64 / 60.0
    }

    pub fn motif(&self, class: SeverityClass) -> MotifRegion {
        let (c, n) = (class.0, self.class_count);
        let t = self.frames_per_sample;
        let width = (self.feature_dim / n).max(1);
        let start = (c * width) % self.feature_dim;
        MotifRegion {
            columns: start..(start + width).min(self.feature_dim),
            frames: c * t / n..(c + 1) * t / n,
        }
    }

    /// Class of session `i`; round-robin keeps classes balanced up to remainder.
    pub fn class_of(&self, session: usize) -> SeverityClass {
        SeverityClass(session % self.class_count)
    }

    /// One-rule reference classifier: mean over each class's motif block,
    /// argmax across classes, ties to the lower class.
    pub fn template_oracle(&self, frames: ArrayView2<'_, f64>) -> SeverityClass {
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..self.class_count {
            let m = self.motif(SeverityClass(c));
            let score = frames
                .slice(s![m.frames.clone(), m.columns.clone()])
                .mean()
                .unwrap_or(0.0);
            if score > best.1 {
                best = (c, score);
            }
        }
        SeverityClass(best.0)
    }

    pub fn oracle_accuracy(&self, dataset: &Dataset) -> f64 {
        let correct = dataset
            .samples
            .iter()
            .filter(|s| self.template_oracle(s.frames.view()) == s.label)
            .count();
        correct as f64 / dataset.len().max(1) as f64
    }
}

/// In-memory sessions, values already rounded to storage precision.
pub fn synthesize_sessions(spec: &SyntheticSpec) -> Result<(Vec<SessionRecord>, BinningScheme)> {
    spec.validate()?;
    let binning = BinningScheme::for_class_count(spec.class_count)?;
    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut sessions = Vec::with_capacity(spec.session_count);
    for i in 0..spec.session_count {
        let class = spec.class_of(i);
        let motif = spec.motif(class);
        let mut frames = Array2::<f64>::zeros((spec.frames_per_sample, spec.feature_dim));
        for ((t, d), v) in frames.indexed_iter_mut() {
            let mut x = noise.sample(&mut rng);
            if motif.frames.contains(&t) && motif.columns.contains(&d) {
                x += spec.motif_strength;
            }
            *v = f64::from(x as f32);
        }
        let (fms, _) = binning.class_range(class).expect("class below class_count");
        sessions.push(SessionRecord {
            session_id: format!("synth_{i:04}"),
            features: FrameFeatureSequence::new(frames, spec.frame_rate_hz())?,
            labels: vec![FmsLabel::new(0, fms)?],
            participant_id: None,
        });
    }
    Ok((sessions, binning))
}

/// Writes `manifest.json` plus one FSEQ file per session under `out_dir`, then
/// loads the result back.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<(DatasetManifest, Dataset)> {
    let (sessions, binning) = synthesize_sessions(spec)?;
    let mut entries = Vec::with_capacity(sessions.len());
    for s in &sessions {
        let rel = format!("sessions/{}.fseq", s.session_id);
        write_feature_file(&s.features, &out_dir.join(&rel))?;
        entries.push(SessionEntry {
            session_id: s.session_id.clone(),
            feature_file: rel,
            frame_rate_hz: spec.frame_rate_hz(),
            labels: s.labels.clone(),
            participant_id: None,
        });
    }
    let manifest = DatasetManifest {
        feature_dim: spec.feature_dim,
        binning,
        sessions: entries,
    };
    let path = out_dir.join("manifest.json");
    manifest.write(&path)?;
    load_manifest(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            session_count: 40,
            frames_per_sample: 20,
            feature_dim: 8,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn same_seed_same_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic(&small(), a.path()).unwrap();
        generate_synthetic(&small(), b.path()).unwrap();
        for name in ["manifest.json", "sessions/synth_0000.fseq", "sessions/synth_0039.fseq"] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn reloaded_dataset_matches_memory() {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, ds) = generate_synthetic(&small(), dir.path()).unwrap();
        let (sessions, binning) = synthesize_sessions(&small()).unwrap();
        let direct = Dataset::from_sessions(&sessions, 8, binning).unwrap();
        assert_eq!(ds, direct);
        assert_eq!(manifest.sample_count(), 40);
        assert_eq!(ds.class_counts(), vec![10, 10, 10, 10]);
    }

    #[test]
    fn classes_balanced_up_to_remainder() {
        let spec = SyntheticSpec {
            session_count: 10,
            class_count: 3,
            ..small()
        };
        let (sessions, binning) = synthesize_sessions(&spec).unwrap();
        let ds = Dataset::from_sessions(&sessions, 8, binning).unwrap();
        assert_eq!(ds.class_counts(), vec![4, 3, 3]);
    }

    #[test]
    fn motif_regions_are_distinct_and_in_bounds() {
        let spec = SyntheticSpec::default();
        let regions: Vec<_> = (0..4).map(|c| spec.motif(SeverityClass(c))).collect();
        assert_eq!(
            regions[0],
            MotifRegion {
                columns: 0..4,
                frames: 0..6
            }
        );
        assert_eq!(
            regions[3],
            MotifRegion {
                columns: 12..16,
                frames: 18..25
            }
        );
        for r in &regions {
            assert!(!r.frames.is_empty() && r.frames.end <= 25 && r.columns.end <= 16);
        }
    }

    #[test]
    fn strong_motif_is_recoverable_by_template_matching() {
        let spec = SyntheticSpec {
            session_count: 200,
            ..SyntheticSpec::default()
        };
        let (sessions, binning) = synthesize_sessions(&spec).unwrap();
        let ds = Dataset::from_sessions(&sessions, spec.feature_dim, binning).unwrap();
        let acc = spec.oracle_accuracy(&ds);
        assert!(acc >= 0.99, "{acc}");
    }

    #[test]
    fn spec_validation() {
        assert!(SyntheticSpec {
            class_count: 1,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            noise_sigma: 0.0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            motif_strength: -1.0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            frames_per_sample: 2,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            motif_strength: 0.0,
            ..small()
        }
        .validate()
        .is_ok());
    }
}
