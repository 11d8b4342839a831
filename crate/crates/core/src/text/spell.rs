//! Frequency-ranked spelling correction within Damerau–Levenshtein distance 2.
//!
//! A candidate is any dictionary word reachable by at most two single-character
//! insertions, deletions, substitutions or adjacent transpositions. Candidates
//! at distance 1 beat those at distance 2; within a distance the more frequent
//! word wins, then the lexicographically smaller one.
//!
//! Lookup uses a symmetric-delete index: two words within distance `d` always
//! share a string reachable from each by at most `d` deletions, so the index
//! yields a superset of the candidates, which exact distance then filters.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::{self, BufRead};

const MAX_DISTANCE: usize = 2;

/// Tokens shorter than this are never corrected.
pub const MIN_CORRECTABLE_LEN: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum DictionaryError {
    #[error("line {line}: bad frequency `{value}`")]
    BadCount { line: usize, value: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct SpellDictionary {
    words: Vec<String>,
    freq: Vec<u64>,
    lookup: HashMap<String, u32>,
    // hash of a deletion variant -> ids of words producing it
    deletes: HashMap<u64, Vec<u32>>,
}

fn hash_str(s: &str) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

/// Every string obtained from `word` by deleting up to `depth` characters,
/// including `word` itself.
fn deletion_variants(word: &str, depth: usize) -> Vec<String> {
    let mut all = vec![word.to_string()];
    let mut frontier = vec![word.to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &frontier {
            let chars: Vec<char> = w.chars().collect();
            for i in 0..chars.len() {
                let v: String = chars[..i].iter().chain(&chars[i + 1..]).collect();
                next.push(v);
            }
        }
        next.sort();
        next.dedup();
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all.sort();
    all.dedup();
    all
}

/// Unrestricted Damerau–Levenshtein distance (Lowrance–Wagner).
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let inf = n + m;
    let width = m + 2;
    // d[(i + 1) * width + (j + 1)] holds the distance between a[..i] and b[..j].
    let mut d = vec![0usize; (n + 2) * width];
    d[0] = inf;
    for i in 0..=n {
        d[(i + 1) * width] = inf;
        d[(i + 1) * width + 1] = i;
    }
    for j in 0..=m {
        d[j + 1] = inf;
        d[width + j + 1] = j;
    }
    let mut last_row: HashMap<char, usize> = HashMap::new();
    for i in 1..=n {
        let mut last_match_col = 0;
        for j in 1..=m {
            let i1 = *last_row.get(&b[j - 1]).unwrap_or(&0);
            let j1 = last_match_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_match_col = j;
                0
            } else {
                1
            };
            let substitution = d[i * width + j] + cost;
            let insertion = d[(i + 1) * width + j] + 1;
            let deletion = d[i * width + j + 1] + 1;
            let transposition = d[i1 * width + j1] + (i - i1 - 1) + 1 + (j - j1 - 1);
            d[(i + 1) * width + j + 1] = substitution.min(insertion).min(deletion).min(transposition);
        }
        last_row.insert(a[i - 1], i);
    }
    d[(n + 1) * width + m + 1]
}

impl SpellDictionary {
    /// Builds a dictionary from `(word, count)` pairs. Words are lowercased;
    /// entries that are not purely `a-z` or have a zero count are skipped, and
    /// repeated words accumulate their counts.
    pub fn from_counts<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (word, count) in entries {
            let word = word.as_ref().trim().to_lowercase();
            if word.is_empty() || count == 0 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
                continue;
            }
            *merged.entry(word).or_insert(0) += count;
        }
        let mut pairs: Vec<(String, u64)> = merged.into_iter().collect();
        pairs.sort();
        let mut dict = SpellDictionary::default();
        for (id, (word, count)) in pairs.into_iter().enumerate() {
            let id = id as u32;
            for variant in deletion_variants(&word, MAX_DISTANCE) {
                dict.deletes.entry(hash_str(&variant)).or_default().push(id);
            }
            dict.lookup.insert(word.clone(), id);
            dict.words.push(word);
            dict.freq.push(count);
        }
        dict
    }

    /// Parses `word` or `word<TAB>count` lines; `#` starts a comment line.
    pub fn from_reader<R: BufRead>(input: R) -> Result<Self, DictionaryError> {
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, count) = match line.split_once('\t') {
                Some((w, c)) => {
                    let count = c.trim().parse::<u64>().map_err(|_| DictionaryError::BadCount {
                        line: i + 1,
                        value: c.to_string(),
                    })?;
                    (w.to_string(), count)
                }
                None => (line.to_string(), 1),
            };
            entries.push((word, count));
        }
        Ok(Self::from_counts(entries))
    }

    /// The dictionary bundled with the crate (about 30k frequent English words).
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_WORDS.as_bytes()).expect("bundled dictionary is well formed")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup.contains_key(word)
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        self.lookup.get(word).map(|&id| self.freq[id as usize])
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(String::as_str).zip(self.freq.iter().copied())
    }

    /// Ids of every dictionary word within distance 2 of `token`, paired with
    /// the distance.
    fn candidates(&self, token: &str) -> Vec<(usize, u32)> {
        let token_len = token.chars().count();
        let mut seen: Vec<u32> = Vec::new();
        for variant in deletion_variants(token, MAX_DISTANCE) {
            if let Some(ids) = self.deletes.get(&hash_str(&variant)) {
                seen.extend_from_slice(ids);
            }
        }
        seen.sort_unstable();
        seen.dedup();
        seen.into_iter()
            .filter_map(|id| {
                let word = &self.words[id as usize];
                if word.len().abs_diff(token_len) > MAX_DISTANCE {
                    return None;
                }
                let distance = damerau_levenshtein(token, word);
                (distance <= MAX_DISTANCE).then_some((distance, id))
            })
            .collect()
    }

    /// Corrects one normalized token.
    pub fn correct(&self, token: &str) -> String {
        if token.chars().count() < MIN_CORRECTABLE_LEN || self.contains(token) {
            return token.to_string();
        }
        let candidates = self.candidates(token);
        let best = candidates
            .iter()
            .min_by(|(da, a), (db, b)| {
                da.cmp(db)
                    .then_with(|| self.freq[*b as usize].cmp(&self.freq[*a as usize]))
                    .then_with(|| self.words[*a as usize].cmp(&self.words[*b as usize]))
            })
            .map(|&(_, id)| self.words[id as usize].clone());
        best.unwrap_or_else(|| token.to_string())
    }
}

pub const BUILTIN_WORDS: &str = include_str!("../../data/words.tsv");

/// Free-function form of [`SpellDictionary::correct`].
pub fn spell_correct(token: &str, dict: &SpellDictionary) -> String {
    dict.correct(token)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz";

    /// Every string one insertion, deletion, substitution or adjacent
    /// transposition away from `word`.
    fn edits1(word: &str) -> BTreeSet<String> {
        let chars: Vec<char> = word.chars().collect();
        let mut out = BTreeSet::new();
        for i in 0..=chars.len() {
            let (left, right) = chars.split_at(i);
            let l: String = left.iter().collect();
            if !right.is_empty() {
                out.insert(format!("{l}{}", right[1..].iter().collect::<String>()));
                for c in ALPHABET.chars() {
                    out.insert(format!("{l}{c}{}", right[1..].iter().collect::<String>()));
                }
            }
            if right.len() > 1 {
                out.insert(format!(
                    "{l}{}{}{}",
                    right[1],
                    right[0],
                    right[2..].iter().collect::<String>()
                ));
            }
            for c in ALPHABET.chars() {
                out.insert(format!("{l}{c}{}", right.iter().collect::<String>()));
            }
        }
        out
    }

    /// Exhaustive-enumeration reference corrector.
    fn oracle_correct(token: &str, dict: &SpellDictionary) -> String {
        if token.chars().count() < MIN_CORRECTABLE_LEN || dict.contains(token) {
            return token.to_string();
        }
        let pick = |set: &BTreeSet<String>| {
            set.iter()
                .filter_map(|w| dict.frequency(w).map(|f| (std::cmp::Reverse(f), w.clone())))
                .min()
                .map(|(_, w)| w)
        };
        let one = edits1(token);
        if let Some(w) = pick(&one) {
            return w;
        }
        let two: BTreeSet<String> = one.iter().flat_map(|w| edits1(w)).collect();
        pick(&two).unwrap_or_else(|| token.to_string())
    }

    fn small() -> SpellDictionary {
        SpellDictionary::from_counts([("hello", 100), ("help", 10)])
    }

    #[test]
    fn in_dictionary_is_identity() {
        assert_eq!(small().correct("hello"), "hello");
    }

    #[test]
    fn frequency_breaks_distance_one_tie() {
        let dict = small();
        let one = edits1("helo");
        assert!(one.contains("hello") && one.contains("help"));
        assert_eq!(dict.correct("helo"), "hello");
        assert_eq!(oracle_correct("helo", &dict), "hello");
    }

    #[test]
    fn far_tokens_are_unchanged() {
        assert_eq!(small().correct("zzzzzz"), "zzzzzz");
    }

    #[test]
    fn short_tokens_are_never_corrected() {
        let dict = SpellDictionary::from_counts([("the", 1000)]);
        assert_eq!(dict.correct("te"), "te");
        assert_eq!(dict.correct("thw"), "the");
    }

    #[test]
    fn lexicographic_tie_break() {
        let dict = SpellDictionary::from_counts([("cart", 5), ("card", 5)]);
        assert_eq!(dict.correct("carx"), "card");
    }

    #[test]
    fn distance_one_beats_more_frequent_distance_two() {
        let dict = SpellDictionary::from_counts([("abcd", 1), ("abxy", 1000)]);
        assert_eq!(dict.correct("abcx"), "abcd");
    }

    #[test]
    fn damerau_distances() {
        assert_eq!(damerau_levenshtein("ca", "abc"), 2);
        assert_eq!(damerau_levenshtein("abc", "acb"), 1);
        assert_eq!(damerau_levenshtein("kitten", "sitting"), 3);
        assert_eq!(damerau_levenshtein("", "abc"), 3);
        assert_eq!(damerau_levenshtein("same", "same"), 0);
    }

    #[test]
    fn loader_parses_both_line_shapes() {
        let dict = SpellDictionary::from_reader("# c\nHello\t3\nworld\nbad word\t2\nhello\t2\n".as_bytes()).unwrap();
        assert_eq!(dict.frequency("hello"), Some(5));
        assert_eq!(dict.frequency("world"), Some(1));
        assert_eq!(dict.len(), 2);
        assert!(SpellDictionary::from_reader("x\tnope\n".as_bytes()).is_err());
    }

    #[test]
    fn builtin_dictionary_loads() {
        let dict = SpellDictionary::builtin();
        assert!(dict.len() >= 29_000);
        assert!(dict.contains("hello"));
        assert_eq!(dict.correct("helllo"), "hello");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn index_matches_exhaustive_enumeration(
            words in proptest::collection::vec(("[abcd]{2,6}", 1u64..20), 1..25),
            token in "[abcde]{3,6}",
        ) {
            let dict = SpellDictionary::from_counts(words);
            prop_assert_eq!(dict.correct(&token), oracle_correct(&token, &dict));
        }
    }
}
