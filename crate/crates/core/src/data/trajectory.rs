//! Gap-free trajectory extraction and the time-based dataset split.

use chrono::Duration;

use super::{DatasetSplit, RawRecord, Trajectory, STEP_MINUTES};

pub const MIN_LEN: usize = 48; // 12 h
pub const MAX_LEN: usize = 288; // 72 h
pub const STRIDE: usize = 4; // 1 h

#[derive(Debug, Clone, Copy)]
pub struct ExtractParams {
    pub min_len: usize,
    pub max_len: usize,
    pub stride: usize,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            min_len: MIN_LEN,
            max_len: MAX_LEN,
            stride: STRIDE,
        }
    }
}

/// Cut a time-sorted record stream into overlapping trajectories.
///
/// The stream is first split into maximal segments with strict 15-minute
/// cadence and a constant season. Within each segment, full `max_len`
/// windows are emitted every `stride` steps; a segment too short for a
/// full window but at least `min_len` long is emitted whole.
pub fn extract_trajectories(records: &[RawRecord], params: ExtractParams) -> Vec<Trajectory> {
    let mut out = Vec::new();
    if records.is_empty() {
        return out;
    }
    let step = Duration::minutes(STEP_MINUTES);

    let mut seg_start = 0;
    let mut flush = |start: usize, end: usize, out: &mut Vec<Trajectory>| {
        let len = end - start;
        if len >= params.max_len {
            let mut s = start;
            while s + params.max_len <= end {
                out.push(Trajectory {
                    records: records[s..s + params.max_len].to_vec(),
                });
                s += params.stride;
            }
        } else if len >= params.min_len {
            out.push(Trajectory {
                records: records[start..end].to_vec(),
            });
        }
    };

    for i in 1..records.len() {
        let contiguous = records[i].timestamp - records[i - 1].timestamp == step
            && records[i].mode == records[i - 1].mode;
        if !contiguous {
            flush(seg_start, i, &mut out);
            seg_start = i;
        }
    }
    flush(seg_start, records.len(), &mut out);
    out
}

/// Split trajectories at a calendar boundary: the last `validation_fraction`
/// of the covered time span becomes validation. Trajectories straddling the
/// boundary are dropped so the two sets never overlap in time.
pub fn split_dataset(trajectories: Vec<Trajectory>, validation_fraction: f64) -> DatasetSplit {
    assert!((0.0..1.0).contains(&validation_fraction));
    if trajectories.is_empty() {
        return DatasetSplit {
            train: Vec::new(),
            validation: Vec::new(),
        };
    }
    let t0 = trajectories.iter().map(|t| t.start()).min().unwrap();
    let t1 = trajectories.iter().map(|t| t.end()).max().unwrap();
    let span = (t1 - t0).num_seconds() as f64;
    let boundary = t0 + Duration::seconds((span * (1.0 - validation_fraction)) as i64);

    let mut train = Vec::new();
    let mut validation = Vec::new();
    for t in trajectories {
        if t.end() < boundary {
            train.push(t);
        } else if t.start() >= boundary {
            validation.push(t);
        }
        // Straddlers are dropped.
    }
    DatasetSplit { train, validation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Mode};

    #[test]
    fn full_length_window_count_matches_formula() {
        // 72 h of gap-free, single-season records -> exactly one window.
        let records = generate_synthetic(3, 0).unwrap();
        assert_eq!(records.len(), 288);
        let trajs = extract_trajectories(&records, ExtractParams::default());
        assert_eq!(trajs.len(), 1);

        // More generally: floor((total - 288) / 4) + 1.
        let records = generate_synthetic(5, 0).unwrap(); // 480 steps
        let trajs = extract_trajectories(&records, ExtractParams::default());
        assert_eq!(trajs.len(), (480 - 288) / 4 + 1);
        for t in &trajs {
            t.validate().unwrap();
            assert_eq!(t.len(), 288);
        }
        // Enumeration cross-check: every start index is a multiple of 4.
        for (i, t) in trajs.iter().enumerate() {
            assert_eq!(
                (t.start() - records[0].timestamp).num_minutes(),
                (i * 4 * 15) as i64
            );
        }
    }

    #[test]
    fn stream_shorter_than_12h_yields_nothing() {
        let records = generate_synthetic(3, 0).unwrap();
        let trajs = extract_trajectories(&records[..47], ExtractParams::default());
        assert!(trajs.is_empty());
    }

    #[test]
    fn short_segment_is_emitted_whole() {
        let records = generate_synthetic(3, 0).unwrap();
        let trajs = extract_trajectories(&records[..100], ExtractParams::default());
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].len(), 100);
    }

    #[test]
    fn a_single_missing_step_splits_the_stream() {
        let mut records = generate_synthetic(7, 0).unwrap();
        records.remove(300);
        let trajs = extract_trajectories(&records, ExtractParams::default());
        for t in &trajs {
            t.validate().unwrap();
        }
        // No trajectory spans the gap between former indices 299 and 301.
        let gap_time = records[299].timestamp;
        for t in &trajs {
            assert!(t.end() <= gap_time || t.start() > gap_time);
        }
    }

    #[test]
    fn mode_change_splits_the_stream() {
        let mut records = generate_synthetic(6, 0).unwrap();
        for r in records.iter_mut().skip(300) {
            r.mode = Mode::Cooling;
            r.power = -r.power.abs();
        }
        let trajs = extract_trajectories(&records, ExtractParams::default());
        for t in &trajs {
            t.validate().unwrap();
        }
        assert!(trajs.iter().any(|t| t.mode() == Mode::Cooling));
    }

    #[test]
    fn split_is_time_based_and_disjoint() {
        let records = generate_synthetic(30, 1).unwrap();
        let trajs = extract_trajectories(&records, ExtractParams::default());
        let n = trajs.len();
        let split = split_dataset(trajs, 0.2);
        assert!(!split.train.is_empty());
        assert!(!split.validation.is_empty());
        assert!(split.train.len() + split.validation.len() <= n);
        let latest_train = split.train.iter().map(|t| t.end()).max().unwrap();
        let earliest_val = split.validation.iter().map(|t| t.start()).min().unwrap();
        assert!(latest_train < earliest_val);
    }
}
