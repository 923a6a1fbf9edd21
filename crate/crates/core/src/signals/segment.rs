//! RMS-threshold segmentation and 1-second windowing.

use super::{Label, Origin, TimeSeries, TimeSeriesSample};
use crate::error::{Error, Result};

/// Extract the linear-movement bursts of a continuous recording.
///
/// A sliding window of `rms_window` samples moves over the joint 3-axis
/// energy; a sample belongs to a segment when at least one window containing
/// it has RMS >= `threshold`. Maximal covered runs are returned in order, so
/// below-threshold gaps shorter than the window merge and longer gaps split.
pub fn segment_movements(
    raw: &TimeSeries,
    rms_window: usize,
    threshold: f64,
) -> Result<Vec<TimeSeries>> {
    if rms_window < 1 {
        return Err(Error::InvalidConfig("rms_window must be >= 1".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig("threshold must be positive".into()));
    }
    let n = raw.len();
    if n == 0 {
        return Ok(Vec::new());
    }

    // Mean of the three squared axes per time step; prefix sums give each
    // window's mean square in O(1).
    let mut prefix = vec![0.0f64; n + 1];
    for i in 0..n {
        let e = (raw.axis(0)[i].powi(2) + raw.axis(1)[i].powi(2) + raw.axis(2)[i].powi(2)) / 3.0;
        prefix[i + 1] = prefix[i] + e;
    }

    let w = rms_window.min(n);
    let thr_sq = threshold * threshold;

    // Coverage marks via a difference array over active windows.
    let mut cover = vec![0i32; n + 1];
    for start in 0..=(n - w) {
        let mean_sq = (prefix[start + w] - prefix[start]) / w as f64;
        if mean_sq >= thr_sq {
            cover[start] += 1;
            cover[start + w] -= 1;
        }
    }

    let mut segments = Vec::new();
    let mut depth = 0i32;
    let mut run_start = None;
    for i in 0..=n {
        depth += cover[i];
        match (run_start, depth > 0) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                segments.push(raw.slice(s, i));
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(segments)
}

/// Cut a labeled segment into disjoint consecutive 1-second windows.
///
/// Emits `floor(len / sample_rate)` windows; a trailing remainder shorter
/// than one second is discarded. All windows carry the segment's label and
/// a provenance record identifying source, segment, and window index.
pub fn window_segment(
    segment: &TimeSeries,
    label: Label,
    source: &str,
    segment_index: u32,
) -> Vec<TimeSeriesSample> {
    let window = segment.sample_rate() as usize;
    let count = segment.len() / window;
    (0..count)
        .map(|w| {
            let series = segment.slice(w * window, (w + 1) * window);
            TimeSeriesSample::new(
                series,
                label,
                Origin {
                    source: source.to_string(),
                    segment: segment_index,
                    window: w as u32,
                },
            )
            .expect("window length equals sample rate")
        })
        .collect()
}
