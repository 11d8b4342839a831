//! Comment text to token list: normalization and tokenization, spelling
//! correction, stopword removal and Porter stemming, in that order.
//!
//! Spelling correction runs before stemming because stems are generally not
//! dictionary words.

mod porter;
mod spell;
mod stopwords;

use std::collections::HashMap;

use rayon::prelude::*;

pub use porter::stem;
pub use spell::{
    damerau_levenshtein, spell_correct, DictionaryError, SpellDictionary, BUILTIN_WORDS, MIN_CORRECTABLE_LEN,
};
pub use stopwords::{StopwordSet, BUILTIN_STOPWORDS};

/// Ordered lowercase tokens. No token is empty, contains whitespace, an ASCII
/// punctuation character or an ASCII digit.
pub type TokenList = Vec<String>;

/// Characters blanked out before splitting.
pub fn is_removed_char(ch: char) -> bool {
    ch.is_ascii_punctuation() || ch.is_ascii_digit()
}

pub fn normalize_and_tokenize(text: &str) -> TokenList {
    let mut normalized = String::with_capacity(text.len());
    for ch in text.chars() {
        if is_removed_char(ch) {
            normalized.push(' ');
        } else {
            normalized.extend(ch.to_lowercase());
        }
    }
    normalized.split_whitespace().map(str::to_string).collect()
}

pub fn filter_stopwords(tokens: TokenList, stops: &StopwordSet) -> TokenList {
    tokens.into_iter().filter(|t| !stops.contains(t)).collect()
}

/// The full preprocessing chain with its two resources.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    dictionary: SpellDictionary,
    stopwords: StopwordSet,
}

impl Preprocessor {
    pub fn new(dictionary: SpellDictionary, stopwords: StopwordSet) -> Self {
        Preprocessor { dictionary, stopwords }
    }

    pub fn builtin() -> Self {
        Self::new(SpellDictionary::builtin(), StopwordSet::builtin())
    }

    pub fn dictionary(&self) -> &SpellDictionary {
        &self.dictionary
    }

    pub fn stopwords(&self) -> &StopwordSet {
        &self.stopwords
    }

    /// Corrected and stemmed form of one normalized token, or `None` when the
    /// corrected token is a stopword.
    fn finish_token(&self, token: &str) -> Option<String> {
        let corrected = self.dictionary.correct(token);
        if self.stopwords.contains(&corrected) {
            None
        } else {
            Some(stem(&corrected))
        }
    }

    pub fn preprocess(&self, text: &str) -> TokenList {
        normalize_and_tokenize(text)
            .iter()
            .filter_map(|t| self.finish_token(t))
            .collect()
    }

    /// Preprocesses many texts, finishing each distinct token only once.
    /// Output equals mapping [`Preprocessor::preprocess`] over `texts`.
    pub fn preprocess_many<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<TokenList> {
        let normalized: Vec<TokenList> = texts.par_iter().map(|t| normalize_and_tokenize(t.as_ref())).collect();
        let mut distinct: Vec<&str> = normalized.iter().flatten().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let finished: HashMap<&str, Option<String>> = distinct.par_iter().map(|&t| (t, self.finish_token(t))).collect();
        normalized
            .iter()
            .map(|doc| doc.iter().filter_map(|t| finished[t.as_str()].clone()).collect())
            .collect()
    }
}

/// Free-function form of the chain.
pub fn preprocess(text: &str, dict: &SpellDictionary, stops: &StopwordSet) -> TokenList {
    normalize_and_tokenize(text)
        .into_iter()
        .map(|t| dict.correct(&t))
        .filter(|t| !stops.contains(t))
        .map(|t| stem(&t))
        .collect()
}
