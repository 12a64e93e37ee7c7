//! Token id space: specials, then motion codes, then corpus words.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::ArError;

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const MOT_OPEN: usize = 3;
pub const MOT_CLOSE: usize = 4;
pub const PART_OPEN: [usize; 5] = [5, 6, 7, 8, 9];
pub const PART_CLOSE: [usize; 5] = [10, 11, 12, 13, 14];
pub const NUM_SPECIALS: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    k_c: usize,
    words: Vec<String>,
}

impl Vocab {
    /// Builds the id space over `k_c` motion codes and a whitespace word
    /// vocabulary in order of first appearance.
    pub fn build(k_c: usize, texts: &[&str]) -> Vocab {
        let mut words: Vec<String> = Vec::new();
        for text in texts {
            for w in text.split_whitespace() {
                if !words.iter().any(|x| x == w) {
                    words.push(w.to_string());
                }
            }
        }
        Vocab { k_c, words }
    }

    pub fn size(&self) -> usize {
        NUM_SPECIALS + self.k_c + self.words.len()
    }

    pub fn k_c(&self) -> usize {
        self.k_c
    }

    pub fn motion_id(&self, code: usize) -> usize {
        debug_assert!(code < self.k_c);
        NUM_SPECIALS + code
    }

    /// Inverse of [`motion_id`]; None for ids outside the code block.
    pub fn motion_code(&self, id: usize) -> Option<usize> {
        (NUM_SPECIALS..NUM_SPECIALS + self.k_c).contains(&id).then(|| id - NUM_SPECIALS)
    }

    pub fn word_id(&self, w: &str) -> Result<usize, ArError> {
        self.words
            .iter()
            .position(|x| x == w)
            .map(|i| NUM_SPECIALS + self.k_c + i)
            .ok_or_else(|| ArError::UnknownWord(w.to_string()))
    }

    pub fn encode_text(&self, text: &str) -> Result<Vec<usize>, ArError> {
        text.split_whitespace().map(|w| self.word_id(w)).collect()
    }

    pub fn surface(&self, id: usize) -> String {
        match id {
            BOS => "<bos>".into(),
            EOS => "<eos>".into(),
            PAD => "<pad>".into(),
            MOT_OPEN => "<mot>".into(),
            MOT_CLOSE => "</mot>".into(),
            _ if PART_OPEN.contains(&id) => format!("<part_{}>", id - PART_OPEN[0] + 1),
            _ if PART_CLOSE.contains(&id) => format!("</part_{}>", id - PART_CLOSE[0] + 1),
            _ if id < NUM_SPECIALS + self.k_c => format!("<code_{}>", id - NUM_SPECIALS),
            _ => self.words[id - NUM_SPECIALS - self.k_c].clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ArError> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", self.k_c)?;
        for word in &self.words {
            writeln!(w, "{word}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab, ArError> {
        let r = BufReader::new(File::open(path)?);
        let mut lines = r.lines();
        let k_c: usize = lines
            .next()
            .transpose()?
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| ArError::BadConfig("vocab file missing code count".into()))?;
        let mut words = Vec::new();
        for line in lines {
            words.push(line?);
        }
        Ok(Vocab { k_c, words })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_ranges_are_disjoint_and_bijective() {
        let v = Vocab::build(8, &["walk forward", "sit down then walk"]);
        assert_eq!(v.size(), NUM_SPECIALS + 8 + 5);
        // Round-trip every id through its surface form.
        let mut seen = std::collections::HashSet::new();
        for id in 0..v.size() {
            assert!(seen.insert(v.surface(id)), "duplicate surface for id {id}");
        }
        assert_eq!(v.word_id("walk").unwrap(), NUM_SPECIALS + 8);
        assert_eq!(v.motion_code(v.motion_id(3)), Some(3));
        assert!(v.motion_code(BOS).is_none());
        assert!(matches!(v.word_id("jump"), Err(ArError::UnknownWord(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let v = Vocab::build(16, &["wave left hand"]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocab::load(&p).unwrap(), v);
    }
}
