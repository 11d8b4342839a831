//! Jigsaw-schema CSV ingest, binary relabeling and majority capping.
//!
//! The CSV reader is a small streaming RFC 4180 parser. It is strict about the
//! two failure modes that silently corrupt a comment corpus: rows whose arity
//! differs from the header and quoted fields that never close.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Read, Write};

use crate::label::{ClassCounts, Label};
use crate::rng::{self, Stream};

/// The six label columns of the Jigsaw schema, in canonical order.
pub const FLAG_COLUMNS: [&str; 6] = ["toxic", "severe_toxic", "obscene", "threat", "insult", "identity_hate"];

pub const TEXT_COLUMN: &str = "comment_text";
pub const ID_COLUMN: &str = "id";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("required column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("line {line}: column `{column}` holds `{value}`, expected 0 or 1")]
    NonBinaryLabel { line: usize, column: String, value: String },
    #[error("corpus cache line {line}: {reason}")]
    BadCache { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// The six binary flags of one record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelFlags {
    pub toxic: bool,
    pub severe_toxic: bool,
    pub obscene: bool,
    pub threat: bool,
    pub insult: bool,
    pub identity_hate: bool,
}

impl LabelFlags {
    pub fn from_array(flags: [bool; 6]) -> Self {
        LabelFlags {
            toxic: flags[0],
            severe_toxic: flags[1],
            obscene: flags[2],
            threat: flags[3],
            insult: flags[4],
            identity_hate: flags[5],
        }
    }

    pub fn as_array(&self) -> [bool; 6] {
        [
            self.toxic,
            self.severe_toxic,
            self.obscene,
            self.threat,
            self.insult,
            self.identity_hate,
        ]
    }

    pub fn none_set(&self) -> bool {
        !self.as_array().iter().any(|&f| f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub comment_text: String,
    pub flags: LabelFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComment {
    pub text: String,
    pub label: Label,
}

/// Ordered comments with their per-class totals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    comments: Vec<LabeledComment>,
    counts: ClassCounts,
}

impl LabeledCorpus {
    pub fn new(comments: Vec<LabeledComment>) -> Self {
        let counts = ClassCounts::from_labels(comments.iter().map(|c| &c.label));
        LabeledCorpus { comments, counts }
    }

    pub fn comments(&self) -> &[LabeledComment] {
        &self.comments
    }

    pub fn counts(&self) -> ClassCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.comments.iter().map(|c| c.label).collect()
    }

    pub fn into_comments(self) -> Vec<LabeledComment> {
        self.comments
    }
}

/// Streaming CSV record reader yielding raw fields.
pub struct CsvReader<R> {
    input: BufReader<R>,
    line: usize,
    done: bool,
}

impl<R: Read> CsvReader<R> {
    pub fn new(input: R) -> Self {
        CsvReader {
            input: BufReader::new(input),
            line: 1,
            done: false,
        }
    }

    /// Line on which the next record starts (1-based).
    pub fn line(&self) -> usize {
        self.line
    }

    fn peek(&mut self) -> io::Result<Option<u8>> {
        Ok(self.input.fill_buf()?.first().copied())
    }

    fn bump(&mut self) {
        self.input.consume(1);
    }

    fn malformed(&self, start: usize, reason: &str) -> IngestError {
        IngestError::MalformedCsv {
            line: start,
            reason: reason.to_string(),
        }
    }

    fn finish_field(&self, bytes: Vec<u8>, start: usize) -> Result<String> {
        String::from_utf8(bytes).map_err(|_| self.malformed(start, "field is not valid UTF-8"))
    }

    /// Reads the next record. Blank lines are skipped.
    pub fn read_record(&mut self) -> Result<Option<Vec<String>>> {
        loop {
            if self.done {
                return Ok(None);
            }
            let start = self.line;
            let mut fields = Vec::new();
            let mut field = Vec::new();
            let mut quoted = false;
            let mut any_byte = false;
            loop {
                let Some(b) = self.peek()? else {
                    self.done = true;
                    if !any_byte {
                        return Ok(None);
                    }
                    fields.push(self.finish_field(std::mem::take(&mut field), start)?);
                    return Ok(Some(fields));
                };
                self.bump();
                any_byte = true;
                match b {
                    b'"' if field.is_empty() && !quoted => {
                        quoted = true;
                        self.read_quoted(&mut field, start)?;
                        // Only a delimiter, a line end or EOF may follow the closing quote.
                        match self.peek()? {
                            None | Some(b',') | Some(b'\n') | Some(b'\r') => {}
                            Some(_) => return Err(self.malformed(start, "unexpected character after closing quote")),
                        }
                    }
                    b',' => {
                        fields.push(self.finish_field(std::mem::take(&mut field), start)?);
                        quoted = false;
                    }
                    b'\r' | b'\n' => {
                        if b == b'\r' && self.peek()? == Some(b'\n') {
                            self.bump();
                        }
                        self.line += 1;
                        if fields.is_empty() && field.is_empty() && !quoted {
                            // blank line
                            break;
                        }
                        fields.push(self.finish_field(std::mem::take(&mut field), start)?);
                        return Ok(Some(fields));
                    }
                    other => field.push(other),
                }
            }
        }
    }

    fn read_quoted(&mut self, field: &mut Vec<u8>, start: usize) -> Result<()> {
        loop {
            let Some(b) = self.peek()? else {
                return Err(self.malformed(start, "unterminated quoted field"));
            };
            self.bump();
            match b {
                b'"' => {
                    if self.peek()? == Some(b'"') {
                        self.bump();
                        field.push(b'"');
                    } else {
                        return Ok(());
                    }
                }
                b'\n' => {
                    self.line += 1;
                    field.push(b);
                }
                other => field.push(other),
            }
        }
    }
}

struct ColumnMap {
    width: usize,
    id: Option<usize>,
    text: usize,
    flags: [usize; 6],
}

impl ColumnMap {
    fn from_header(header: &[String]) -> Result<Self> {
        let mut positions: HashMap<&str, usize> = HashMap::new();
        for (i, name) in header.iter().enumerate() {
            let name = name.trim().trim_start_matches('\u{feff}');
            positions.entry(name).or_insert(i);
        }
        let find = |name: &str| {
            positions
                .get(name)
                .copied()
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        let text = find(TEXT_COLUMN)?;
        let mut flags = [0usize; 6];
        for (slot, name) in flags.iter_mut().zip(FLAG_COLUMNS) {
            *slot = find(name)?;
        }
        let id = positions.get(ID_COLUMN).copied();
        for name in positions.keys() {
            if *name != TEXT_COLUMN && *name != ID_COLUMN && !FLAG_COLUMNS.contains(name) {
                log::warn!("ignoring unknown column `{name}`");
            }
        }
        Ok(ColumnMap {
            width: header.len(),
            id,
            text,
            flags,
        })
    }
}

fn parse_flag(value: &str, column: &str, line: usize) -> Result<bool> {
    let trimmed = value.trim();
    let parsed = trimmed.parse::<f64>().ok();
    match parsed {
        Some(0.0) => Ok(false),
        Some(1.0) => Ok(true),
        _ => Err(IngestError::NonBinaryLabel {
            line,
            column: column.to_string(),
            value: value.to_string(),
        }),
    }
}

/// Iterator over the data rows of a Jigsaw-schema CSV.
pub struct DatasetReader<R> {
    csv: CsvReader<R>,
    columns: ColumnMap,
    row: usize,
}

impl<R: Read> DatasetReader<R> {
    /// Reads the header. An empty stream has no header and is rejected as
    /// missing `comment_text`.
    pub fn new(input: R) -> Result<Self> {
        let mut csv = CsvReader::new(input);
        let header = csv
            .read_record()?
            .ok_or_else(|| IngestError::MissingColumn(TEXT_COLUMN.to_string()))?;
        let columns = ColumnMap::from_header(&header)?;
        Ok(DatasetReader { csv, columns, row: 0 })
    }

    fn next_record(&mut self) -> Result<Option<RawRecord>> {
        let line = self.csv.line();
        let Some(fields) = self.csv.read_record()? else {
            return Ok(None);
        };
        self.row += 1;
        if fields.len() != self.columns.width {
            return Err(IngestError::MalformedCsv {
                line,
                reason: format!("expected {} fields, found {}", self.columns.width, fields.len()),
            });
        }
        let mut flags = [false; 6];
        for (k, &col) in self.columns.flags.iter().enumerate() {
            flags[k] = parse_flag(&fields[col], FLAG_COLUMNS[k], line)?;
        }
        let id = match self.columns.id {
            Some(col) => {
                if fields[col].is_empty() {
                    return Err(IngestError::MalformedCsv {
                        line,
                        reason: "empty id".to_string(),
                    });
                }
                fields[col].clone()
            }
            None => self.row.to_string(),
        };
        let mut fields = fields;
        let comment_text = std::mem::take(&mut fields[self.columns.text]);
        Ok(Some(RawRecord {
            id,
            comment_text,
            flags: LabelFlags::from_array(flags),
        }))
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<RawRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// Parses every data row of a Jigsaw-schema CSV.
pub fn parse_dataset<R: Read>(input: R) -> Result<Vec<RawRecord>> {
    DatasetReader::new(input)?.collect()
}

/// Binary view of one record: `toxic=1` wins, all-zero is non-toxic, and a
/// record carrying only the other flags has no binary label.
pub fn binary_label(flags: &LabelFlags) -> Option<Label> {
    if flags.toxic {
        Some(Label::Toxic)
    } else if flags.none_set() {
        Some(Label::NonToxic)
    } else {
        None
    }
}

pub fn relabel_binary(records: impl IntoIterator<Item = RawRecord>) -> LabeledCorpus {
    let comments = records
        .into_iter()
        .filter_map(|r| {
            binary_label(&r.flags).map(|label| LabeledComment {
                text: r.comment_text,
                label,
            })
        })
        .collect();
    LabeledCorpus::new(comments)
}

/// Reduces the majority class to at most `cap` comments by seeded sampling
/// without replacement. Surviving comments keep their relative order.
pub fn cap_majority(corpus: LabeledCorpus, cap: usize, seed: u64) -> LabeledCorpus {
    let majority = corpus.counts().majority();
    cap_class(corpus, majority, cap, &mut rng::stream(seed, Stream::Cap))
}

/// Caps each class at `per_class` comments, non-toxic first, each from its
/// own seeded draw.
pub fn cap_each_class(corpus: LabeledCorpus, per_class: usize, seed: u64) -> LabeledCorpus {
    let mut rng = rng::stream(seed, Stream::Subsample);
    let corpus = cap_class(corpus, Label::NonToxic, per_class, &mut rng);
    cap_class(corpus, Label::Toxic, per_class, &mut rng)
}

fn cap_class<R: rand::Rng>(corpus: LabeledCorpus, label: Label, cap: usize, rng: &mut R) -> LabeledCorpus {
    let size = corpus.counts().get(label);
    if cap >= size {
        return corpus;
    }
    let mut keep = rng::sample_sorted(rng, size, cap).into_iter().peekable();
    let mut position = 0usize;
    let comments = corpus
        .into_comments()
        .into_iter()
        .filter(|c| {
            if c.label != label {
                return true;
            }
            let here = position;
            position += 1;
            if keep.peek() == Some(&here) {
                keep.next();
                true
            } else {
                false
            }
        })
        .collect();
    LabeledCorpus::new(comments)
}

fn escape_field(text: &str, out: &mut String) {
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
}

fn unescape_field(text: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(IngestError::BadCache {
                    line,
                    reason: format!(
                        "bad escape sequence `\\{}`",
                        other.map(String::from).unwrap_or_default()
                    ),
                })
            }
        }
    }
    Ok(out)
}

/// Writes `label<TAB>text` lines with tabs, newlines and backslashes escaped.
pub fn write_corpus<W: Write>(corpus: &LabeledCorpus, mut out: W) -> io::Result<()> {
    let mut line = String::new();
    for comment in corpus.comments() {
        line.clear();
        line.push_str(comment.label.as_str());
        line.push('\t');
        escape_field(&comment.text, &mut line);
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn read_corpus<R: Read>(input: R) -> Result<LabeledCorpus> {
    let mut comments = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let number = i + 1;
        let (label, text) = line.split_once('\t').ok_or_else(|| IngestError::BadCache {
            line: number,
            reason: "missing tab separator".to_string(),
        })?;
        let label = label.parse::<Label>().map_err(|e| IngestError::BadCache {
            line: number,
            reason: e.to_string(),
        })?;
        comments.push(LabeledComment {
            text: unescape_field(text, number)?,
            label,
        });
    }
    Ok(LabeledCorpus::new(comments))
}
