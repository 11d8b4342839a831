//! Vocabulary construction and sparse bag-of-words / TF-IDF rows.
//!
//! TF is the raw count divided by document length (0 for an empty document),
//! IDF is `ln(N / df)` without smoothing, and a TF-IDF weight is their product.
//! Rows are not length-normalized afterwards.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::text::TokenList;

pub const DEFAULT_MAX_FEATURES: usize = 20_000;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("term `{0}` is not in the vocabulary")]
    UnknownTerm(String),
    #[error("vocabulary file line {line}: {reason}")]
    BadVocabulary { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Bow,
    Tfidf,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Bow => "bow",
            FeatureKind::Tfidf => "tfidf",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bow" => Ok(FeatureKind::Bow),
            "tfidf" => Ok(FeatureKind::Tfidf),
            other => Err(format!("unknown feature kind `{other}` (expected bow or tfidf)")),
        }
    }
}

/// Term to column map with document frequencies.
///
/// Columns are assigned in rank order: document frequency descending, then
/// term ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    index: HashMap<String, usize>,
    n_docs: usize,
}

impl Vocabulary {
    fn from_ranked(ranked: Vec<(String, usize)>, n_docs: usize) -> Self {
        let index = ranked.iter().enumerate().map(|(i, (t, _))| (t.clone(), i)).collect();
        let (terms, doc_freq) = ranked.into_iter().unzip();
        Vocabulary {
            terms,
            doc_freq,
            index,
            n_docs,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.column(term).map(|c| self.doc_freq[c])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    fn idf_at(&self, column: usize) -> f64 {
        (self.n_docs as f64 / self.doc_freq[column] as f64).ln()
    }

    /// `n_docs<TAB>N` followed by one `term<TAB>column<TAB>doc_freq` line per term.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n_docs\t{}", self.n_docs)?;
        for (i, (term, df)) in self.terms.iter().zip(&self.doc_freq).enumerate() {
            writeln!(out, "{term}\t{i}\t{df}")?;
        }
        out.flush()
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("terms are UTF-8")
    }

    /// SHA-256 of the exported text, hex encoded. Model files and manifests
    /// record it to detect a vocabulary swap.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, FeatureError> {
        let bad = |line: usize, reason: &str| FeatureError::BadVocabulary {
            line,
            reason: reason.to_string(),
        };
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing n_docs header"))??;
        let n_docs = header
            .strip_prefix("n_docs\t")
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| bad(1, "malformed n_docs header"))?;
        let mut ranked = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let number = i + 2;
            let parts: Vec<&str> = line.split('\t').collect();
            let [term, column, df] = parts[..] else {
                return Err(bad(number, "expected term, column and doc_freq"));
            };
            let column: usize = column.parse().map_err(|_| bad(number, "bad column"))?;
            let df: usize = df.parse().map_err(|_| bad(number, "bad doc_freq"))?;
            if column != ranked.len() {
                return Err(bad(number, "columns must be dense and in order"));
            }
            if df == 0 || df > n_docs {
                return Err(bad(number, "doc_freq outside 1..=n_docs"));
            }
            ranked.push((term.to_string(), df));
        }
        Ok(Self::from_ranked(ranked, n_docs))
    }
}

pub fn build_vocabulary(corpus: &[TokenList], max_features: usize) -> Result<Vocabulary, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        let mut distinct: Vec<&str> = doc.iter().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().map(|(t, n)| (t.to_string(), n)).collect();
    ranked.sort_by(|(ta, na), (tb, nb)| nb.cmp(na).then_with(|| ta.cmp(tb)));
    ranked.truncate(max_features);
    Ok(Vocabulary::from_ranked(ranked, corpus.len()))
}

/// Sparse row: strictly increasing columns, finite nonzero weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    entries: Vec<(u32, f64)>,
}

impl SparseRow {
    /// Sorts by column, sums duplicates and drops zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(c, _)| c);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (c, w) in pairs {
            match entries.last_mut() {
                Some((last, acc)) if *last == c => *acc += w,
                _ => entries.push((c, w)),
            }
        }
        entries.retain(|&(_, w)| w != 0.0);
        SparseRow { entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseRow {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, column: u32) -> f64 {
        match self.entries.binary_search_by_key(&column, |&(c, _)| c) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    /// Highest column id plus one, 0 for an empty row.
    pub fn span(&self) -> usize {
        self.entries.last().map_or(0, |&(c, _)| c as usize + 1)
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, w)| w * dense[c as usize]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }

    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for &(c, w) in &self.entries {
            out[c as usize] = w;
        }
        out
    }

    /// Squared Euclidean distance by a sorted merge.
    pub fn distance_sq(&self, other: &SparseRow) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() || j < b.len() {
            let d = match (a.get(i), b.get(j)) {
                (Some(&(ca, wa)), Some(&(cb, wb))) if ca == cb => {
                    i += 1;
                    j += 1;
                    wa - wb
                }
                (Some(&(ca, wa)), Some(&(cb, _))) if ca < cb => {
                    i += 1;
                    wa
                }
                (Some(_), Some(&(_, wb))) => {
                    j += 1;
                    -wb
                }
                (Some(&(_, wa)), None) => {
                    i += 1;
                    wa
                }
                (None, Some(&(_, wb))) => {
                    j += 1;
                    -wb
                }
                (None, None) => unreachable!(),
            };
            sum += d * d;
        }
        sum
    }

    /// `self + gap * (other - self)`, the SMOTE interpolation.
    pub fn interpolate(&self, other: &SparseRow, gap: f64) -> SparseRow {
        let mut pairs: Vec<(u32, f64)> = Vec::with_capacity(self.nnz() + other.nnz());
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (c, x, n) = match (a.get(i), b.get(j)) {
                (Some(&(ca, wa)), Some(&(cb, wb))) if ca == cb => {
                    i += 1;
                    j += 1;
                    (ca, wa, wb)
                }
                (Some(&(ca, wa)), Some(&(cb, _))) if ca < cb => {
                    i += 1;
                    (ca, wa, 0.0)
                }
                (Some(_), Some(&(cb, wb))) => {
                    j += 1;
                    (cb, 0.0, wb)
                }
                (Some(&(ca, wa)), None) => {
                    i += 1;
                    (ca, wa, 0.0)
                }
                (None, Some(&(cb, wb))) => {
                    j += 1;
                    (cb, 0.0, wb)
                }
                (None, None) => unreachable!(),
            };
            pairs.push((c, x + gap * (n - x)));
        }
        pairs.retain(|&(_, w)| w != 0.0);
        SparseRow { entries: pairs }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<SparseRow>,
    pub width: usize,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            width: self.width,
            kind: self.kind,
        }
    }
}

fn counts_in_vocab(doc: &[String], vocab: &Vocabulary) -> Vec<(u32, f64)> {
    doc.iter()
        .filter_map(|t| vocab.column(t).map(|c| (c as u32, 1.0)))
        .collect()
}

pub fn bow_vectorize(doc: &[String], vocab: &Vocabulary) -> SparseRow {
    SparseRow::from_pairs(counts_in_vocab(doc, vocab))
}

pub fn term_frequency(doc: &[String], term: &str) -> f64 {
    if doc.is_empty() {
        return 0.0;
    }
    doc.iter().filter(|t| t.as_str() == term).count() as f64 / doc.len() as f64
}

pub fn inverse_doc_frequency(vocab: &Vocabulary, term: &str) -> Result<f64, FeatureError> {
    let column = vocab
        .column(term)
        .ok_or_else(|| FeatureError::UnknownTerm(term.to_string()))?;
    Ok(vocab.idf_at(column))
}

pub fn tfidf_vectorize(doc: &[String], vocab: &Vocabulary) -> SparseRow {
    if doc.is_empty() {
        return SparseRow::default();
    }
    let len = doc.len() as f64;
    let counts = bow_vectorize(doc, vocab);
    let pairs = counts
        .entries()
        .iter()
        .map(|&(c, n)| (c, (n / len) * vocab.idf_at(c as usize)))
        .collect();
    SparseRow::from_pairs(pairs)
}

pub fn vectorize(doc: &[String], vocab: &Vocabulary, kind: FeatureKind) -> SparseRow {
    match kind {
        FeatureKind::Bow => bow_vectorize(doc, vocab),
        FeatureKind::Tfidf => tfidf_vectorize(doc, vocab),
    }
}

pub fn vectorize_corpus(docs: &[TokenList], vocab: &Vocabulary, kind: FeatureKind) -> FeatureMatrix {
    FeatureMatrix {
        rows: docs.par_iter().map(|d| vectorize(d, vocab, kind)).collect(),
        width: vocab.len(),
        kind,
    }
}
