//! Seeded generator of Jigsaw-schema comment corpora.
//!
//! The real Kaggle dump is not redistributable, so tests and desk-scale runs
//! use corpora drawn from two overlapping lexicons: talk-page vocabulary for
//! clean comments and insults mixed into the same vocabulary for toxic ones.
//! Texts carry typos, punctuation, digits, quotes and line breaks, and a
//! fraction of rows is written in the style of the opposite class.

use std::io::{self, Write};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{LabelFlags, RawRecord, FLAG_COLUMNS, ID_COLUMN, TEXT_COLUMN};
use crate::rng::{self, Stream};

const NEUTRAL: &[&str] = &[
    "article",
    "page",
    "edit",
    "source",
    "reference",
    "section",
    "talk",
    "discussion",
    "thanks",
    "please",
    "help",
    "change",
    "information",
    "topic",
    "history",
    "policy",
    "image",
    "link",
    "citation",
    "content",
    "editor",
    "user",
    "review",
    "name",
    "city",
    "school",
    "book",
    "film",
    "music",
    "team",
    "player",
    "season",
    "year",
    "people",
    "world",
    "government",
    "company",
    "war",
    "church",
    "university",
    "album",
    "song",
    "series",
    "game",
    "state",
    "country",
    "language",
    "data",
    "version",
    "notable",
    "sources",
    "style",
    "format",
    "category",
    "template",
    "question",
    "answer",
    "agree",
    "suggest",
    "consider",
    "improve",
    "update",
    "list",
    "table",
    "paragraph",
    "sentence",
    "word",
    "text",
    "explain",
    "note",
    "point",
    "issue",
    "problem",
    "comment",
    "vote",
    "support",
    "oppose",
    "merge",
    "delete",
    "keep",
    "move",
    "title",
    "redirect",
    "summary",
    "added",
    "removed",
    "fixed",
    "think",
    "believe",
    "read",
    "write",
    "looks",
    "good",
    "correct",
    "wrong",
    "fact",
    "evidence",
    "claim",
    "date",
    "original",
    "research",
    "author",
    "published",
    "news",
    "website",
    "online",
    "article",
    "welcome",
    "hello",
    "regards",
    "best",
    "work",
    "project",
    "discuss",
    "consensus",
    "neutral",
    "view",
    "opinion",
    "editing",
];

const TOXIC: &[&str] = &[
    "idiot",
    "stupid",
    "moron",
    "dumb",
    "loser",
    "pathetic",
    "hate",
    "ugly",
    "fool",
    "disgusting",
    "shut",
    "worthless",
    "trash",
    "garbage",
    "jerk",
    "coward",
    "liar",
    "scum",
    "freak",
    "crap",
    "clown",
    "ignorant",
    "fat",
    "filthy",
    "nasty",
    "sick",
    "hell",
    "damn",
    "shameful",
    "imbecile",
    "lame",
    "bastard",
    "creep",
    "vile",
    "psycho",
];

const FILLER: &[&str] = &[
    "the", "is", "this", "that", "i", "you", "it", "to", "of", "and", "a", "in", "for", "on", "not", "be", "are",
    "was", "have", "with", "your", "my", "an", "as", "at", "so", "but", "if", "or", "just",
];

/// Shape of a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Rows with every flag clear.
    pub non_toxic: usize,
    /// Rows with the `toxic` flag set.
    pub toxic: usize,
    /// Rows with some flag other than `toxic` set; these are dropped by the
    /// binary relabeling.
    pub other_flagged: usize,
    /// Fraction of clean/toxic rows whose text is drawn in the other class's
    /// style.
    pub label_noise: f64,
    /// Per-word probability of a typo.
    pub typo_rate: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Same label histogram as the Kaggle training file.
    pub fn jigsaw_shape(seed: u64) -> Self {
        SynthConfig {
            non_toxic: 143_346,
            toxic: 15_294,
            other_flagged: 931,
            label_noise: 0.03,
            typo_rate: 0.04,
            seed,
        }
    }

    pub fn balanced(per_class: usize, seed: u64) -> Self {
        SynthConfig {
            non_toxic: per_class,
            toxic: per_class,
            other_flagged: 0,
            label_noise: 0.03,
            typo_rate: 0.04,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Clean,
    Toxic,
    Other,
}

pub fn generate(config: &SynthConfig) -> Vec<RawRecord> {
    let mut kinds: Vec<Kind> = std::iter::repeat_n(Kind::Clean, config.non_toxic)
        .chain(std::iter::repeat_n(Kind::Toxic, config.toxic))
        .chain(std::iter::repeat_n(Kind::Other, config.other_flagged))
        .collect();
    kinds.shuffle(&mut rng::stream(config.seed, Stream::Synth));
    kinds
        .par_iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut rng = rng::substream(config.seed, Stream::Synth, i as u64 + 1);
            record(&mut rng, kind, config)
        })
        .collect()
}

fn record(rng: &mut ChaCha8Rng, kind: Kind, config: &SynthConfig) -> RawRecord {
    let id = format!("{:016x}", rng.gen::<u64>());
    let mut flags = [false; 6];
    let toxic_style = match kind {
        Kind::Clean => rng.gen_bool(config.label_noise),
        Kind::Toxic => {
            flags[0] = true;
            for f in flags.iter_mut().skip(1) {
                *f = rng.gen_bool(0.3);
            }
            !rng.gen_bool(config.label_noise)
        }
        Kind::Other => {
            let f = rng.gen_range(1..FLAG_COLUMNS.len());
            flags[f] = true;
            true
        }
    };
    let comment_text = if toxic_style {
        toxic_text(rng, config.typo_rate)
    } else {
        clean_text(rng, config.typo_rate)
    };
    RawRecord {
        id,
        comment_text,
        flags: LabelFlags::from_array(flags),
    }
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / (r as f64 + 1.0).powf(0.8))).expect("non-empty lexicon")
}

fn base_words(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    let neutral = zipf(NEUTRAL.len());
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.4) {
                FILLER[rng.gen_range(0..FILLER.len())].to_string()
            } else {
                NEUTRAL[neutral.sample(rng)].to_string()
            }
        })
        .collect()
}

fn clean_text(rng: &mut ChaCha8Rng, typo_rate: f64) -> String {
    let len = rng.gen_range(6..32);
    let mut words = base_words(rng, len);
    // clean comments sometimes quote or discuss rude words
    if rng.gen_bool(0.08) {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, TOXIC[rng.gen_range(0..TOXIC.len())].to_string());
    }
    render(rng, words, typo_rate, false)
}

fn toxic_text(rng: &mut ChaCha8Rng, typo_rate: f64) -> String {
    let len = rng.gen_range(4..24);
    let mut words = base_words(rng, len);
    let insults = zipf(TOXIC.len());
    // a few toxic comments are rude only in tone
    let n_insults = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=3) };
    for _ in 0..n_insults {
        let at = rng.gen_range(0..=words.len());
        let word = TOXIC[insults.sample(rng)].to_string();
        words.insert(at, word);
        if rng.gen_bool(0.5) {
            words.insert(at, "you".to_string());
        }
    }
    render(rng, words, typo_rate, true)
}

fn typo(rng: &mut ChaCha8Rng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let i = rng.gen_range(1..chars.len() - 1);
    match rng.gen_range(0..3) {
        0 => chars.swap(i, i + 1),
        1 => {
            chars.remove(i);
        }
        _ => {
            let c = chars[i];
            chars.insert(i, c);
        }
    }
    chars.into_iter().collect()
}

fn render(rng: &mut ChaCha8Rng, words: Vec<String>, typo_rate: f64, shouty: bool) -> String {
    let mut out = String::new();
    let n = words.len();
    for (i, mut word) in words.into_iter().enumerate() {
        if word.len() >= 4 && rng.gen_bool(typo_rate) {
            word = typo(rng, &word);
        }
        if shouty && rng.gen_bool(0.2) {
            word = word.to_uppercase();
        } else if i == 0 {
            let mut c = word.chars();
            word = c
                .next()
                .map(|f| f.to_uppercase().chain(c).collect())
                .unwrap_or_default();
        }
        if i > 0 {
            out.push(' ');
        }
        if rng.gen_bool(0.03) {
            out.push('"');
            out.push_str(&word);
            out.push('"');
        } else {
            out.push_str(&word);
        }
        if i + 1 < n {
            match rng.gen_range(0..40) {
                0..=2 => out.push(','),
                3 => out.push('.'),
                4 => out.push_str(&format!(" {}", rng.gen_range(1..2020))),
                5 => out.push_str(&format!(" [{}]", rng.gen_range(1..10))),
                6 => out.push_str("\n\n"),
                _ => {}
            }
        }
    }
    let end = if shouty {
        ["!", "!!!", ".", "?", ""][rng.gen_range(0..5)]
    } else {
        [".", ".", "?", "", ":)"][rng.gen_range(0..5)]
    };
    out.push_str(end);
    out
}

fn csv_field(out: &mut impl Write, value: &str) -> io::Result<()> {
    write!(out, "\"{}\"", value.replace('"', "\"\""))
}

/// Writes records as a Kaggle-style CSV with a header row.
pub fn write_csv<W: Write>(records: &[RawRecord], mut out: W) -> io::Result<()> {
    write!(out, "{ID_COLUMN},{TEXT_COLUMN}")?;
    for name in FLAG_COLUMNS {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for r in records {
        csv_field(&mut out, &r.id)?;
        out.write_all(b",")?;
        csv_field(&mut out, &r.comment_text)?;
        for f in r.flags.as_array() {
            write!(out, ",{}", u8::from(f))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_dataset, relabel_binary};
    use crate::label::Label;

    #[test]
    fn label_histogram_and_round_trip() {
        let config = SynthConfig {
            non_toxic: 300,
            toxic: 40,
            other_flagged: 7,
            ..SynthConfig::balanced(0, 5)
        };
        let records = generate(&config);
        assert_eq!(records.len(), 347);
        let mut csv = Vec::new();
        write_csv(&records, &mut csv).unwrap();
        let parsed = parse_dataset(csv.as_slice()).unwrap();
        assert_eq!(parsed, records);
        let corpus = relabel_binary(parsed);
        let counts = corpus.counts();
        assert_eq!((counts.non_toxic, counts.toxic), (300, 40));
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SynthConfig::balanced(50, 1));
        assert_eq!(a, generate(&SynthConfig::balanced(50, 1)));
        assert_ne!(a, generate(&SynthConfig::balanced(50, 2)));
    }

    #[test]
    fn toxic_rows_usually_carry_insults() {
        let records = generate(&SynthConfig::balanced(400, 3));
        let rude = |text: &str| {
            let lower = text.to_lowercase();
            TOXIC
                .iter()
                .any(|w| lower.split(|c: char| !c.is_alphabetic()).any(|t| t == *w))
        };
        let rate = |label: Label| {
            let rows: Vec<_> = records
                .iter()
                .filter(|r| crate::corpus::binary_label(&r.flags) == Some(label))
                .collect();
            rows.iter().filter(|r| rude(&r.comment_text)).count() as f64 / rows.len() as f64
        };
        assert!(rate(Label::Toxic) > 0.8);
        assert!(rate(Label::NonToxic) < 0.2);
    }
}
