//! Segment statistics: the 16-dimensional mean/std feature vector, relative
//! band power and box-plot summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::SessionRecord;
use crate::types::{Band, BandPowerRow, Emotion, Segment, NUM_BANDS};

pub const FEATURE_DIM: usize = 2 * NUM_BANDS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("segment has no rows")]
    EmptySegment,
    #[error("all eight band powers are zero")]
    AllZeroRow,
    #[error("no values to summarize")]
    EmptyInput,
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("scaler expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Options shared by feature extraction and everything that consumes it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Normalize each row to relative band power before taking statistics.
    #[serde(default)]
    pub relative: bool,
}

/// Per-band means followed by per-band sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub subject_id: String,
    pub emotion: Emotion,
    pub values: [f64; FEATURE_DIM],
}

impl FeatureVector {
    pub fn mean(&self, b: Band) -> f64 {
        self.values[b.index()]
    }

    pub fn std(&self, b: Band) -> f64 {
        self.values[NUM_BANDS + b.index()]
    }

    pub fn column_names() -> Vec<String> {
        let means = Band::ALL.iter().map(|b| format!("mean_{b}"));
        let stds = Band::ALL.iter().map(|b| format!("std_{b}"));
        means.chain(stds).collect()
    }
}

/// Each band's share of the row's total power.
pub fn relative_band_power(row: &BandPowerRow) -> Result<[f64; NUM_BANDS], FeatureError> {
    let total: f64 = row.bands.iter().map(|&b| b as f64).sum();
    if total == 0.0 {
        return Err(FeatureError::AllZeroRow);
    }
    Ok(row.bands.map(|b| b as f64 / total))
}

fn row_values(row: &BandPowerRow, opts: FeatureOptions) -> Result<[f64; NUM_BANDS], FeatureError> {
    if opts.relative {
        relative_band_power(row)
    } else {
        Ok(row.bands.map(|b| b as f64))
    }
}

/// Mean and sample standard deviation (n - 1 denominator, zero for a
/// single row) of each band over the segment.
pub fn extract_features(segment: &Segment) -> Result<FeatureVector, FeatureError> {
    extract_features_with(segment, FeatureOptions::default())
}

pub fn extract_features_with(
    segment: &Segment,
    opts: FeatureOptions,
) -> Result<FeatureVector, FeatureError> {
    if segment.rows.is_empty() {
        return Err(FeatureError::EmptySegment);
    }
    // Welford's single-pass update per band.
    let mut mean = [0.0; NUM_BANDS];
    let mut m2 = [0.0; NUM_BANDS];
    for (k, row) in segment.rows.iter().enumerate() {
        let x = row_values(row, opts)?;
        let n = (k + 1) as f64;
        for b in 0..NUM_BANDS {
            let delta = x[b] - mean[b];
            mean[b] += delta / n;
            m2[b] += delta * (x[b] - mean[b]);
        }
    }
    let n = segment.rows.len();
    let mut values = [0.0; FEATURE_DIM];
    values[..NUM_BANDS].copy_from_slice(&mean);
    for b in 0..NUM_BANDS {
        values[NUM_BANDS + b] = if n > 1 {
            (m2[b] / (n - 1) as f64).max(0.0).sqrt()
        } else {
            0.0
        };
    }
    Ok(FeatureVector {
        subject_id: segment.subject_id.clone(),
        emotion: segment.emotion,
        values,
    })
}

/// Feature vectors for every emotion of a record.
pub fn record_features(
    record: &SessionRecord,
    opts: FeatureOptions,
) -> Result<BTreeMap<Emotion, FeatureVector>, FeatureError> {
    record
        .segments()
        .map(|s| Ok((s.emotion, extract_features_with(s, opts)?)))
        .collect()
}

/// Per-feature z-scoring fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant columns use 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let Some(first) = rows.first() else {
            return Err(FeatureError::EmptyInput);
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(FeatureError::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                scale[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Five-number summary with Tukey fences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Smallest value inside the lower fence, never above `q1`.
    pub whisker_low: f64,
    /// Largest value inside the upper fence, never below `q3`.
    pub whisker_high: f64,
    /// Values outside `[q1 - 1.5 IQR, q3 + 1.5 IQR]`, ascending.
    pub outliers: Vec<f64>,
}

/// Linear interpolation between order statistics at position `p (n - 1)`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite(bad));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;

    let mut inside = sorted
        .iter()
        .copied()
        .filter(|&v| v >= lo_fence && v <= hi_fence);
    let whisker_low = inside.clone().next().map_or(q1, |v| v.min(q1));
    let whisker_high = inside.next_back().map_or(q3, |v| v.max(q3));
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();

    Ok(BoxplotStats {
        n: sorted.len(),
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        whisker_low,
        whisker_high,
        outliers,
    })
}

/// Box-plot grid indexed `[band][emotion]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEmotionReport {
    pub relative: bool,
    pub cells: Vec<Vec<BoxplotStats>>,
}

impl BandEmotionReport {
    pub fn cell(&self, band: Band, emotion: Emotion) -> &BoxplotStats {
        &self.cells[band.index()][emotion.index()]
    }

    /// `{"relative": bool, "bands": {band: {emotion: stats}}}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut bands = serde_json::Map::new();
        for band in Band::ALL {
            let mut per_emotion = serde_json::Map::new();
            for emotion in Emotion::ALL {
                per_emotion.insert(
                    emotion.name().into(),
                    serde_json::to_value(self.cell(band, emotion)).expect("stats serialize"),
                );
            }
            bands.insert(band.name().into(), per_emotion.into());
        }
        serde_json::json!({ "relative": self.relative, "bands": bands })
    }
}

/// One box plot per (band, emotion) over per-segment band means.
pub fn band_emotion_report(
    records: &[SessionRecord],
    use_relative: bool,
) -> Result<BandEmotionReport, FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let opts = FeatureOptions {
        relative: use_relative,
    };
    let mut means = vec![vec![Vec::new(); 4]; NUM_BANDS];
    for r in records {
        for (emotion, fv) in record_features(r, opts)? {
            for band in Band::ALL {
                means[band.index()][emotion.index()].push(fv.mean(band));
            }
        }
    }
    let cells = means
        .iter()
        .map(|row| row.iter().map(|v| boxplot_stats(v)).collect())
        .collect::<Result<_, _>>()?;
    Ok(BandEmotionReport {
        relative: use_relative,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(rows: Vec<[u32; NUM_BANDS]>) -> Segment {
        Segment::new(
            "S1",
            Emotion::Happy,
            rows.into_iter()
                .enumerate()
                .map(|(i, b)| BandPowerRow::new(i as u64 * 1000, b))
                .collect(),
        )
    }

    #[test]
    fn constant_segment_has_zero_std() {
        let fv = extract_features(&seg(vec![[100, 0, 0, 0, 0, 0, 0, 0]; 10])).unwrap();
        assert_eq!(fv.mean(Band::Delta), 100.0);
        assert_eq!(fv.std(Band::Delta), 0.0);
        assert_eq!(fv.values.len(), 16);
    }

    #[test]
    fn two_rows_mean_and_std() {
        let fv = extract_features(&seg(vec![
            [10, 0, 0, 0, 0, 0, 0, 0],
            [20, 0, 0, 0, 0, 0, 0, 0],
        ]))
        .unwrap();
        assert_eq!(fv.mean(Band::Delta), 15.0);
        // sqrt(((10-15)^2 + (20-15)^2) / 1) = sqrt(50)
        assert!((fv.std(Band::Delta) - 7.0710678118654755).abs() < 1e-12);
    }

    #[test]
    fn single_row_std_is_zero() {
        let fv = extract_features(&seg(vec![[5, 6, 7, 8, 9, 10, 11, 12]])).unwrap();
        assert!(fv.values[NUM_BANDS..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn empty_segment_rejected() {
        assert_eq!(
            extract_features(&seg(vec![])),
            Err(FeatureError::EmptySegment)
        );
    }

    #[test]
    fn relative_power_examples() {
        let eq = relative_band_power(&BandPowerRow::new(0, [9; NUM_BANDS])).unwrap();
        assert!(eq.iter().all(|&v| v == 0.125));
        let one = relative_band_power(&BandPowerRow::new(0, [3, 0, 0, 0, 0, 0, 0, 0])).unwrap();
        assert_eq!(one, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            relative_band_power(&BandPowerRow::default()),
            Err(FeatureError::AllZeroRow)
        );
    }

    #[test]
    fn relative_features_propagate_zero_rows() {
        let s = seg(vec![[1; NUM_BANDS], [0; NUM_BANDS]]);
        assert_eq!(
            extract_features_with(&s, FeatureOptions { relative: true }),
            Err(FeatureError::AllZeroRow)
        );
    }

    #[test]
    fn column_names_bracket_the_layout() {
        let names = FeatureVector::column_names();
        assert_eq!(names.len(), 16);
        assert_eq!(names[0], "mean_delta");
        assert_eq!(names[8], "std_delta");
        assert_eq!(names[15], "std_mid_gamma");
    }

    #[test]
    fn boxplot_five_values() {
        let s = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert!(s.outliers.is_empty());
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 5.0));
    }

    #[test]
    fn boxplot_singleton() {
        let s = boxplot_stats(&[7.0]).unwrap();
        for v in [
            s.min,
            s.q1,
            s.median,
            s.q3,
            s.max,
            s.whisker_low,
            s.whisker_high,
        ] {
            assert_eq!(v, 7.0);
        }
    }

    #[test]
    fn boxplot_flags_high_outlier() {
        let s = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        // q1 = 2, q3 = 4, upper fence = 4 + 1.5 * 2 = 7
        assert_eq!(s.outliers, vec![100.0]);
        assert_eq!(s.whisker_high, 4.0);
        assert_eq!(s.max, 100.0);
    }

    #[test]
    fn boxplot_whisker_clamped_to_quartile() {
        // q1 lands between 0 and 100; 0 is an outlier and the first inlier
        // sits above q1.
        let s = boxplot_stats(&[0.0, 100.0, 100.0, 100.0]).unwrap();
        assert_eq!(s.q1, 75.0);
        assert_eq!(s.outliers, vec![0.0]);
        assert_eq!(s.whisker_low, 75.0);
    }

    #[test]
    fn boxplot_rejects_bad_input() {
        assert_eq!(boxplot_stats(&[]), Err(FeatureError::EmptyInput));
        assert!(matches!(
            boxplot_stats(&[1.0, f64::NAN]),
            Err(FeatureError::NonFinite(_))
        ));
    }

    #[test]
    fn standardizer_centres_training_data() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.transform(&[1.0, 5.0]), vec![-1.0, 0.0]);
        assert_eq!(s.transform(&[3.0, 7.0]), vec![1.0, 2.0]);
    }

    fn check_chain(s: &BoxplotStats) -> bool {
        s.min <= s.whisker_low
            && s.whisker_low <= s.q1
            && s.q1 <= s.median
            && s.median <= s.q3
            && s.q3 <= s.whisker_high
            && s.whisker_high <= s.max
    }

    proptest! {
        #[test]
        fn boxplot_ordering_chain(values in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let s = boxplot_stats(&values).unwrap();
            prop_assert!(check_chain(&s), "{:?}", s);
            let iqr = s.q3 - s.q1;
            for o in &s.outliers {
                prop_assert!(*o < s.q1 - 1.5 * iqr || *o > s.q3 + 1.5 * iqr);
            }
            let mut rev = values.clone();
            rev.reverse();
            let r = boxplot_stats(&rev).unwrap();
            prop_assert_eq!((r.q1, r.median, r.q3), (s.q1, s.median, s.q3));
        }

        #[test]
        fn features_permutation_invariant(
            rows in prop::collection::vec(prop::array::uniform8(0u32..1_000_000), 1..40),
            rot in 0usize..40,
        ) {
            let a = extract_features(&seg(rows.clone())).unwrap();
            let mut rotated = rows.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let b = extract_features(&seg(rotated)).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn relative_power_sums_to_one(row in prop::array::uniform8(1u32..(1 << 24))) {
            let rel = relative_band_power(&BandPowerRow::new(0, row)).unwrap();
            prop_assert!((rel.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
