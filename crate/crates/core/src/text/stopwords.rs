use std::collections::HashSet;
use std::io::{self, BufRead};

pub const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Fixed set of lowercase words dropped before stemming.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordSet {
    words: HashSet<String>,
}

impl StopwordSet {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        StopwordSet { words }
    }

    /// One word per line; blank lines and `#` comments are skipped. A trailing
    /// `<TAB>count` column is tolerated and ignored.
    pub fn from_reader<R: BufRead>(input: R) -> io::Result<Self> {
        let mut words = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let word = line.split('\t').next().unwrap_or(line);
            words.push(word.to_string());
        }
        Ok(Self::from_words(words))
    }

    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_STOPWORDS.as_bytes()).expect("in-memory read")
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_list_is_classic_english() {
        let stops = StopwordSet::builtin();
        assert!((160..=180).contains(&stops.len()), "{}", stops.len());
        for w in ["the", "a", "is", "and", "don", "t"] {
            assert!(stops.contains(w), "{w}");
        }
        assert!(!stops.contains("toxic"));
        assert!(!stops.contains("# classic english stopword list, v1."));
    }
}
