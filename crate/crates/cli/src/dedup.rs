use std::collections::HashMap;

use crate::index::{DatasetIndex, Split};

/// Exact-match text duplication across splits: each entry is a text that
/// appears verbatim (after whitespace normalization and lowercasing) in more
/// than one split, with the ids that share it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DuplicateReport {
    pub groups: Vec<(String, Vec<String>)>,
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn cross_split_duplicates(index: &DatasetIndex) -> DuplicateReport {
    let mut by_text: HashMap<String, Vec<(Split, String)>> = HashMap::new();
    for rec in &index.records {
        by_text.entry(normalize(&rec.text)).or_default().push((rec.split, rec.id.clone()));
    }
    let mut groups: Vec<(String, Vec<String>)> = by_text
        .into_iter()
        .filter(|(_, members)| {
            members.iter().any(|(s, _)| *s != members[0].0)
        })
        .map(|(text, members)| {
            let mut ids: Vec<String> = members.into_iter().map(|(_, id)| id).collect();
            ids.sort();
            (text, ids)
        })
        .collect();
    groups.sort();
    DuplicateReport { groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::IndexRecord;

    fn rec(id: &str, text: &str, split: Split) -> IndexRecord {
        IndexRecord {
            id: id.into(),
            motion_path: format!("{id}.ot2m").into(),
            token_path: None,
            text: text.into(),
            num_frames: 40,
            fps: 20.0,
            split,
            source: "s".into(),
        }
    }

    #[test]
    fn detects_cross_split_exact_matches() {
        let idx = DatasetIndex {
            records: vec![
                rec("a", "A person  walks", Split::Train),
                rec("b", "a person walks", Split::Test),
                rec("c", "someone jumps", Split::Train),
                rec("d", "someone jumps", Split::Train),
            ],
        };
        let report = cross_split_duplicates(&idx);
        // "someone jumps" stays within one split, so only one group remains.
        assert_eq!(report.groups.len(), 1);
        assert_eq!(report.groups[0].0, "a person walks");
        assert_eq!(report.groups[0].1, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn clean_index_reports_nothing() {
        let idx = DatasetIndex {
            records: vec![
                rec("a", "one", Split::Train),
                rec("b", "two", Split::Test),
            ],
        };
        assert!(cross_split_duplicates(&idx).groups.is_empty());
    }
}
