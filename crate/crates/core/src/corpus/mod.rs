//! Speech corpora: loading, time windowing, token preprocessing and per-window
//! TF-IDF matrices.

mod matrix;
mod text;
mod window;

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matrix::{build_matrix, DocTermMatrix};
pub(crate) use matrix::{read_terms_file as read_matrix_terms, terms_file as matrix_terms_file};
pub use text::{
    default_stopwords, load_term_list, preprocess, tokenize, Normalizer, PreprocessConfig,
    TokenizedDocument,
};
pub(crate) use text::preprocess_text;
pub use window::{partition_windows, Granularity, TimeWindow, TimeWindowSpec, WindowPartition};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Speech {
    pub id: String,
    pub date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// One JSON object per line with keys `id`, `date`, `speaker_id` (optional), `text`.
    #[default]
    JsonLines,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    /// Sorted by date, then id.
    pub speeches: Vec<Speech>,
    /// Records that could not be used (malformed, missing fields, duplicate ids).
    pub skipped: usize,
}

impl Corpus {
    pub fn new(mut speeches: Vec<Speech>) -> Self {
        speeches.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
        Corpus {
            speeches,
            skipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.speeches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeches.is_empty()
    }

    /// First and last speech dates.
    pub fn date_span(&self) -> Option<(NaiveDate, NaiveDate)> {
        Some((self.speeches.first()?.date, self.speeches.last()?.date))
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for speech in &self.speeches {
            serde_json::to_writer(&mut out, speech)?;
            out.write_all(b"\n").map_err(|e| Error::io("<corpus output>", e))?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    date: Option<String>,
    speaker_id: Option<String>,
    text: Option<String>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::JsonLines => read_jsonl(std::io::BufReader::new(file), &path.display().to_string()),
    }
}

/// Parses JSON-lines records. Unusable records are skipped and counted; the
/// load fails only when more than half of the records are unusable.
pub fn read_jsonl<R: BufRead>(input: R, source: &str) -> Result<Corpus> {
    let mut speeches = Vec::new();
    let mut seen = HashSet::new();
    let mut total = 0;
    let mut skipped = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_record(&line) {
            Ok(speech) if seen.insert(speech.id.clone()) => speeches.push(speech),
            Ok(speech) => {
                log::warn!("{source}:{}: duplicate speech id {}", i + 1, speech.id);
                skipped += 1;
            }
            Err(reason) => {
                log::warn!("{source}:{}: skipping record: {reason}", i + 1);
                skipped += 1;
            }
        }
    }
    if total == 0 {
        log::warn!("{source}: corpus contains no records");
    } else if skipped * 2 > total {
        return Err(Error::MostlyMalformed {
            malformed: skipped,
            total,
        });
    }
    let mut corpus = Corpus::new(speeches);
    corpus.skipped = skipped;
    Ok(corpus)
}

fn parse_record(line: &str) -> std::result::Result<Speech, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = match raw.id {
        Some(serde_json::Value::String(s)) if !s.is_empty() => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return Err("missing id".into()),
    };
    let date = raw.date.ok_or("missing date")?;
    let date = parse_date(&date).ok_or_else(|| format!("unparseable date {date:?}"))?;
    let text = raw.text.ok_or("missing text")?;
    Ok(Speech {
        id,
        date,
        speaker_id: raw.speaker_id,
        text,
    })
}

/// Accepts `YYYY-MM-DD` or a full ISO-8601 timestamp, keeping the calendar date.
fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().or_else(|| {
        let head = s.get(..10)?;
        match s.as_bytes().get(10) {
            Some(b'T') | Some(b' ') => NaiveDate::parse_from_str(head, "%Y-%m-%d").ok(),
            _ => None,
        }
    })
}
