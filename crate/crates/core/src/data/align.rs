//! Word-level alignment of fixed-rate feature streams.
//!
//! Each word interval becomes one timestep whose value is the mean of all
//! frames with timestamps in `[start, end)`. Frame `i` is stamped `i / rate`.

use crate::error::{MctnError, Result};

/// Per-word `(start, end)` times in seconds, non-overlapping and non-decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalTable {
    intervals: Vec<(f64, f64)>,
}

impl IntervalTable {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        let mut prev_end = f64::NEG_INFINITY;
        for (i, &(start, end)) in intervals.iter().enumerate() {
            if !start.is_finite() || !end.is_finite() || end < start {
                return Err(MctnError::Intervals(format!("interval {i} is ({start}, {end})")));
            }
            if start < prev_end {
                return Err(MctnError::Intervals(format!(
                    "interval {i} starts at {start} before the previous end {prev_end}"
                )));
            }
            prev_end = end;
        }
        Ok(IntervalTable { intervals })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub rows: Vec<Vec<f64>>,
    /// Intervals that contained no frame and were filled with zeros.
    pub empty_intervals: usize,
}

pub fn align_by_intervals(frames: &[Vec<f64>], rate: f64, table: &IntervalTable) -> Result<Alignment> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(MctnError::Config(format!("frame rate must be positive, got {rate}")));
    }
    let dim = frames.first().map(Vec::len).ok_or(MctnError::EmptySequence)?;
    if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
        return Err(MctnError::Dimension {
            context: "aligned frame".into(),
            expected: dim,
            actual: bad.len(),
        });
    }
    let mut rows = Vec::with_capacity(table.len());
    let mut empty = 0;
    for &(start, end) in table.intervals() {
        let mut acc = vec![0.0; dim];
        let mut count = 0usize;
        for (i, f) in frames.iter().enumerate() {
            let ts = i as f64 / rate;
            if ts >= start && ts < end {
                count += 1;
                acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
            }
        }
        if count == 0 {
            empty += 1;
        } else {
            acc.iter_mut().for_each(|a| *a /= count as f64);
        }
        rows.push(acc);
    }
    Ok(Alignment { rows, empty_intervals: empty })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_frame_per_interval_is_identity() {
        let frames = vec![vec![1.0, -1.0], vec![2.0, 0.5], vec![3.0, 9.0]];
        // 10 Hz: frames at 0.0, 0.1, 0.2
        let table = IntervalTable::new(vec![(0.0, 0.05), (0.05, 0.15), (0.15, 0.25)]).unwrap();
        let out = align_by_intervals(&frames, 10.0, &table).unwrap();
        assert_eq!(out.rows, frames);
        assert_eq!(out.empty_intervals, 0);
    }

    #[test]
    fn interval_mean() {
        let frames = vec![vec![1.0], vec![3.0], vec![100.0]];
        let table = IntervalTable::new(vec![(0.0, 2.0)]).unwrap();
        let out = align_by_intervals(&frames, 1.0, &table).unwrap();
        assert_eq!(out.rows, vec![vec![2.0]]);
    }

    #[test]
    fn empty_interval_is_zero_row() {
        let frames = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let table = IntervalTable::new(vec![(0.0, 1.0), (1.2, 1.8), (5.0, 6.0)]).unwrap();
        let out = align_by_intervals(&frames, 1.0, &table).unwrap();
        assert_eq!(out.rows[1], vec![0.0, 0.0]);
        assert_eq!(out.rows[2], vec![0.0, 0.0]);
        assert_eq!(out.empty_intervals, 2);
        assert_eq!(out.rows.len(), table.len());
    }

    #[test]
    fn overlapping_intervals_rejected() {
        assert!(IntervalTable::new(vec![(0.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(IntervalTable::new(vec![(1.0, 0.5)]).is_err());
        assert!(IntervalTable::new(vec![(0.0, 1.0), (1.0, 2.0)]).is_ok());
    }
}
