use std::collections::BTreeMap;
use std::fmt;

use crate::index::DatasetIndex;

const BIN_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub total_clips: usize,
    pub per_source: BTreeMap<String, usize>,
    pub total_hours: f64,
    pub avg_length_secs: f64,
    /// (bin start in seconds, clip count); bins are 5 s wide.
    pub histogram: Vec<(f64, usize)>,
}

pub fn corpus_stats(index: &DatasetIndex) -> StatsReport {
    let mut per_source = BTreeMap::new();
    let mut total_secs = 0.0;
    let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
    for rec in &index.records {
        *per_source.entry(rec.source.clone()).or_insert(0) += 1;
        let secs = rec.num_frames as f64 / rec.fps;
        total_secs += secs;
        *bins.entry((secs / BIN_SECONDS).floor() as usize).or_insert(0) += 1;
    }
    let n = index.records.len();
    StatsReport {
        total_clips: n,
        per_source,
        total_hours: total_secs / 3600.0,
        avg_length_secs: if n == 0 { 0.0 } else { total_secs / n as f64 },
        histogram: bins.into_iter().map(|(b, c)| (b as f64 * BIN_SECONDS, c)).collect(),
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "clips:      {}", self.total_clips)?;
        writeln!(f, "hours:      {:.4}", self.total_hours)?;
        writeln!(f, "avg length: {:.2} s", self.avg_length_secs)?;
        for (src, n) in &self.per_source {
            writeln!(f, "  source {src}: {n}")?;
        }
        for (start, n) in &self.histogram {
            writeln!(f, "  [{start:>5.0}s, {:>5.0}s): {n}", start + BIN_SECONDS)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{IndexRecord, Split};

    fn rec(id: &str, frames: usize, fps: f64, source: &str) -> IndexRecord {
        IndexRecord {
            id: id.into(),
            motion_path: format!("{id}.ot2m").into(),
            token_path: None,
            text: String::new(),
            num_frames: frames,
            fps,
            split: Split::Train,
            source: source.into(),
        }
    }

    #[test]
    fn average_length_of_two_clips() {
        let idx = DatasetIndex {
            records: vec![rec("a", 60, 20.0, "s1"), rec("b", 140, 20.0, "s1")],
        };
        let s = corpus_stats(&idx);
        assert_eq!(s.avg_length_secs, 5.0);
        assert_eq!(s.total_clips, 2);
        assert!((s.total_hours - 10.0 / 3600.0).abs() < 1e-12);
        assert_eq!(s.per_source["s1"], 2);
    }

    #[test]
    fn empty_index_is_all_zeros() {
        let s = corpus_stats(&DatasetIndex::default());
        assert_eq!(s.total_clips, 0);
        assert_eq!(s.avg_length_secs, 0.0);
        assert!(s.histogram.is_empty());
    }

    #[test]
    fn histogram_bins_at_five_second_multiples() {
        // 201 frames at 20 fps = 10.05 s -> the [10, 15) bin.
        let idx = DatasetIndex { records: vec![rec("a", 201, 20.0, "s")] };
        let s = corpus_stats(&idx);
        assert_eq!(s.histogram, vec![(10.0, 1)]);
    }

    #[test]
    fn source_counts_sum_to_total() {
        let idx = DatasetIndex {
            records: vec![
                rec("a", 40, 20.0, "s1"),
                rec("b", 40, 20.0, "s2"),
                rec("c", 40, 20.0, "s2"),
            ],
        };
        let s = corpus_stats(&idx);
        assert_eq!(s.per_source.values().sum::<usize>(), s.total_clips);
    }
}
