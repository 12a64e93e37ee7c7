//! Template text merging for concatenated clips.

use crate::CurationError;

/// Joins clause texts with ", then " after normalizing each clause:
/// trailing periods stripped, first letter lowercased.
pub fn merge_texts<S: AsRef<str>>(texts: &[S]) -> Result<String, CurationError> {
    let clauses: Vec<String> = texts
        .iter()
        .map(|t| normalize(t.as_ref()))
        .filter(|t| !t.is_empty())
        .collect();
    if clauses.is_empty() {
        return Err(CurationError::EmptyInput);
    }
    Ok(clauses.join(", then "))
}

fn normalize(s: &str) -> String {
    let s = s.trim().trim_end_matches('.').trim_end();
    let mut chars = s.chars();
    match chars.next() {
        None => String::new(),
        Some(c) => c.to_lowercase().chain(chars).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_clause_normalized() {
        assert_eq!(merge_texts(&["Wave left hand."]).unwrap(), "wave left hand");
    }

    #[test]
    fn two_clauses() {
        assert_eq!(
            merge_texts(&["Walk forward.", "Sit down."]).unwrap(),
            "walk forward, then sit down"
        );
    }

    #[test]
    fn three_clauses() {
        assert_eq!(merge_texts(&["A", "B", "C"]).unwrap(), "a, then b, then c");
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(merge_texts::<&str>(&[]), Err(CurationError::EmptyInput)));
        assert!(matches!(merge_texts(&["", "  "]), Err(CurationError::EmptyInput)));
    }
}
