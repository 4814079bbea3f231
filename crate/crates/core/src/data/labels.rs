use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FMS_MIN: u8 = 1;
pub const FMS_MAX: u8 = 10;

/// One Fast Motion Sickness answer, asked once per minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FmsLabel {
    pub minute_index: u32,
    pub fms: u8,
}

impl FmsLabel {
    pub fn new(minute_index: u32, fms: u8) -> Result<Self> {
        check_fms(fms)?;
        Ok(Self { minute_index, fms })
    }
}

fn check_fms(fms: u8) -> Result<()> {
    if (FMS_MIN..=FMS_MAX).contains(&fms) {
        Ok(())
    } else {
        Err(Error::Domain(format!("FMS score {fms} outside {FMS_MIN}..={FMS_MAX}")))
    }
}

/// Index of a severity band, `0..C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeverityClass(pub usize);

impl SeverityClass {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Cut points splitting the FMS range into contiguous bands.
///
/// An edge `e` opens a new class at score `e`, so `edges = [2, 4, 7]` yields
/// `{1}`, `{2,3}`, `{4,5,6}`, `{7..10}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBinning", into = "RawBinning")]
pub struct BinningScheme {
    edges: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct RawBinning {
    edges: Vec<u8>,
}

impl TryFrom<RawBinning> for BinningScheme {
    type Error = Error;
    fn try_from(raw: RawBinning) -> Result<Self> {
        BinningScheme::new(raw.edges)
    }
}

impl From<BinningScheme> for RawBinning {
    fn from(b: BinningScheme) -> Self {
        RawBinning { edges: b.edges }
    }
}

impl Default for BinningScheme {
    fn default() -> Self {
        Self { edges: vec![2, 4, 7] }
    }
}

impl BinningScheme {
    pub fn new(edges: Vec<u8>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Config("binning needs at least one edge (two classes)".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "binning edges {edges:?} are not strictly ascending"
            )));
        }
        if edges[0] <= FMS_MIN || *edges.last().unwrap() > FMS_MAX {
            return Err(Error::Config(format!(
                "binning edges {edges:?} must lie in ({FMS_MIN}, {FMS_MAX}]"
            )));
        }
        Ok(Self { edges })
    }

    /// Even-width bands for `class_count` classes; the default edges when `class_count == 4`.
    pub fn for_class_count(class_count: usize) -> Result<Self> {
        if class_count == 4 {
            return Ok(Self::default());
        }
        let span = usize::from(FMS_MAX - FMS_MIN + 1);
        if !(2..=span).contains(&class_count) {
            return Err(Error::Config(format!("class count {class_count} outside 2..={span}")));
        }
        let edges = (1..class_count)
            .map(|c| FMS_MIN + (c * span / class_count) as u8)
            .collect();
        Self::new(edges)
    }

    pub fn edges(&self) -> &[u8] {
        &self.edges
    }

    pub fn class_count(&self) -> usize {
        self.edges.len() + 1
    }

    /// Inclusive FMS range covered by `class`.
    pub fn class_range(&self, class: SeverityClass) -> Option<(u8, u8)> {
        let c = class.0;
        if c >= self.class_count() {
            return None;
        }
        let lo = if c == 0 { FMS_MIN } else { self.edges[c - 1] };
        let hi = if c == self.edges.len() {
            FMS_MAX
        } else {
            self.edges[c] - 1
        };
        Some((lo, hi))
    }
}

pub fn bin_fms(fms: u8, scheme: &BinningScheme) -> Result<SeverityClass> {
    check_fms(fms)?;
    Ok(SeverityClass(scheme.edges.iter().filter(|&&e| e <= fms).count()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_bins_match_interval_membership() {
        let scheme = BinningScheme::default();
        let intervals = [(1u8, 1u8), (2, 3), (4, 6), (7, 10)];
        for fms in 1..=10u8 {
            let brute = intervals.iter().position(|&(lo, hi)| lo <= fms && fms <= hi).unwrap();
            assert_eq!(bin_fms(fms, &scheme).unwrap(), SeverityClass(brute), "fms {fms}");
        }
        assert_eq!(
            (1..=10).map(|f| bin_fms(f, &scheme).unwrap().0).collect::<Vec<_>>(),
            vec![0, 1, 1, 2, 2, 2, 3, 3, 3, 3]
        );
    }

    #[test]
    fn out_of_range_scores_rejected() {
        let scheme = BinningScheme::default();
        assert!(matches!(bin_fms(0, &scheme), Err(Error::Domain(_))));
        assert!(matches!(bin_fms(11, &scheme), Err(Error::Domain(_))));
        assert!(FmsLabel::new(0, 12).is_err());
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(BinningScheme::new(vec![]).is_err());
        assert!(BinningScheme::new(vec![1, 5]).is_err());
        assert!(BinningScheme::new(vec![4, 4]).is_err());
        assert!(BinningScheme::new(vec![5, 11]).is_err());
        assert!(BinningScheme::new(vec![10]).is_ok());
    }

    #[test]
    fn class_ranges_tile_the_scale() {
        for c in 2..=10 {
            let scheme = BinningScheme::for_class_count(c).unwrap();
            assert_eq!(scheme.class_count(), c);
            let mut next = FMS_MIN;
            for k in 0..c {
                let (lo, hi) = scheme.class_range(SeverityClass(k)).unwrap();
                assert_eq!(lo, next);
                assert!(hi >= lo);
                next = hi + 1;
            }
            assert_eq!(next, FMS_MAX + 1);
        }
    }

    #[test]
    fn json_shape() {
        let scheme: BinningScheme = serde_json::from_str(r#"{"edges":[2,4,7]}"#).unwrap();
        assert_eq!(scheme, BinningScheme::default());
        assert!(serde_json::from_str::<BinningScheme>(r#"{"edges":[7,4]}"#).is_err());
    }

    fn scheme_strategy() -> impl Strategy<Value = BinningScheme> {
        proptest::sample::subsequence((2u8..=10).collect::<Vec<_>>(), 1..=9)
            .prop_map(|edges| BinningScheme::new(edges).unwrap())
    }

    proptest! {
        #[test]
        fn binning_is_monotone_and_surjective(scheme in scheme_strategy()) {
            let classes: Vec<usize> = (1..=10).map(|f| bin_fms(f, &scheme).unwrap().0).collect();
            prop_assert!(classes.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(classes[0], 0);
            prop_assert_eq!(classes[9], scheme.class_count() - 1);
            for c in 0..scheme.class_count() {
                prop_assert!(classes.contains(&c));
            }
        }
    }
}
