use chrono::{Datelike, Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    Quarter,
    Month,
    Year,
    FixedDays(u32),
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quarter" => Ok(Granularity::Quarter),
            "month" => Ok(Granularity::Month),
            "year" => Ok(Granularity::Year),
            other => other
                .strip_prefix("days:")
                .and_then(|d| d.parse().ok())
                .filter(|&d| d > 0)
                .map(Granularity::FixedDays)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "unknown granularity {other:?} (expected quarter, month, year or days:<n>)"
                    ))
                }),
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Granularity::Quarter => f.write_str("quarter"),
            Granularity::Month => f.write_str("month"),
            Granularity::Year => f.write_str("year"),
            Granularity::FixedDays(d) => write!(f, "days:{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindowSpec {
    pub granularity: Granularity,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub id: usize,
    pub label: String,
    /// Inclusive bounds, clipped to the span.
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPartition {
    pub window: TimeWindow,
    pub speech_ids: Vec<String>,
    pub empty: bool,
}

impl TimeWindowSpec {
    pub fn new(granularity: Granularity, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidConfig(format!("window span {start}..{end} is reversed")));
        }
        Ok(TimeWindowSpec {
            granularity,
            start,
            end,
        })
    }

    /// Span from the first to the last speech of `corpus`.
    pub fn covering(corpus: &Corpus, granularity: Granularity) -> Result<Self> {
        let (start, end) = corpus.date_span().ok_or(Error::EmptyCorpus)?;
        Self::new(granularity, start, end)
    }

    /// Disjoint windows covering the span in chronological order. Calendar
    /// granularities align to calendar periods; fixed-length windows start at
    /// the span start.
    pub fn windows(&self) -> Vec<TimeWindow> {
        let mut out = Vec::new();
        let mut cursor = self.period_start(self.start);
        while cursor <= self.end {
            let next = self.next_period(cursor);
            let last = next.pred_opt().expect("date after the minimum");
            out.push(TimeWindow {
                id: out.len(),
                label: self.label(cursor),
                start: cursor.max(self.start),
                end: last.min(self.end),
            });
            cursor = next;
        }
        out
    }

    fn period_start(&self, d: NaiveDate) -> NaiveDate {
        match self.granularity {
            Granularity::Quarter => {
                NaiveDate::from_ymd_opt(d.year(), (d.month0() / 3) * 3 + 1, 1).unwrap()
            }
            Granularity::Month => d.with_day(1).unwrap(),
            Granularity::Year => NaiveDate::from_ymd_opt(d.year(), 1, 1).unwrap(),
            Granularity::FixedDays(_) => d,
        }
    }

    fn next_period(&self, start: NaiveDate) -> NaiveDate {
        match self.granularity {
            Granularity::Quarter => start + Months::new(3),
            Granularity::Month => start + Months::new(1),
            Granularity::Year => start + Months::new(12),
            Granularity::FixedDays(d) => start + Days::new(u64::from(d)),
        }
    }

    fn label(&self, start: NaiveDate) -> String {
        match self.granularity {
            Granularity::Quarter => format!("{}-Q{}", start.year(), start.month0() / 3 + 1),
            Granularity::Month => format!("{}-{:02}", start.year(), start.month()),
            Granularity::Year => start.year().to_string(),
            Granularity::FixedDays(_) => start.to_string(),
        }
    }
}

/// Assigns every speech to the window containing its date. Empty windows are
/// kept and flagged.
pub fn partition_windows(corpus: &Corpus, spec: &TimeWindowSpec) -> Result<Vec<WindowPartition>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let windows = spec.windows();
    let mut parts: Vec<WindowPartition> = windows
        .into_iter()
        .map(|window| WindowPartition {
            window,
            speech_ids: Vec::new(),
            empty: true,
        })
        .collect();
    for speech in &corpus.speeches {
        if speech.date < spec.start || speech.date > spec.end {
            return Err(Error::DateOutOfSpan {
                id: speech.id.clone(),
                date: speech.date,
                start: spec.start,
                end: spec.end,
            });
        }
        // windows are sorted and contiguous
        let idx = parts.partition_point(|p| p.window.end < speech.date);
        parts[idx].speech_ids.push(speech.id.clone());
    }
    for p in &mut parts {
        p.empty = p.speech_ids.is_empty();
        if p.empty {
            log::warn!("time window {} ({}) contains no speeches", p.window.id, p.window.label);
        }
    }
    Ok(parts)
}
