//! From raw investor messages to the weekly engagement-weighted policy
//! expectations index.

mod classify;
mod index;
mod lexicon;

use std::io::{BufRead, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{
    classify_batch, parse_label, user_prompt, BatchOptions, BatchOutcome, ClassifyError, LexiconClassifier, RemoteClassifier, RemoteConfig,
    StanceClassifier, TransportError, CLASSIFIER_URL_ENV, SYSTEM_PROMPT,
};
pub use index::{
    build_mpe_weekly, build_mpe_weekly_on, event_study, partition_regime, stance_summary, EventGroup, EventStudy, IndexError, MpeSeries,
    Regime, RegimeMode, StanceRow, REGIME_THRESHOLD,
};
pub use lexicon::{Lexicon, LEXICON_VERSION};

#[derive(Debug, Error)]
pub enum MessageError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate message id `{0}`")]
    DuplicateId(String),
}

mod iso_datetime {
    use chrono::{DateTime, NaiveDate, NaiveDateTime};
    use serde::{Deserialize, Deserializer, Serializer};

    const OUT: &str = "%Y-%m-%dT%H:%M:%S";

    pub fn parse(s: &str) -> Option<NaiveDateTime> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(dt.naive_local());
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(dt);
            }
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0))
    }

    pub fn serialize<S: Serializer>(dt: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&dt.format(OUT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("unparseable timestamp `{raw}`")))
    }
}

pub use iso_datetime::parse as parse_timestamp;

/// One social-media post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMessage {
    pub id: String,
    #[serde(with = "iso_datetime")]
    pub created_at: NaiveDateTime,
    pub body: String,
    pub likes: u64,
    pub reshares: u64,
}

impl RawMessage {
    pub fn date(&self) -> NaiveDate {
        self.created_at.date()
    }

    /// Engagement weight `1 + likes + reshares`.
    pub fn weight(&self) -> f64 {
        1.0 + self.likes as f64 + self.reshares as f64
    }
}

/// Five-point policy stance; negative is hawkish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stance {
    VeryHawkish,
    Hawkish,
    Neutral,
    Dovish,
    VeryDovish,
}

impl Stance {
    pub const ALL: [Stance; 5] = [Stance::VeryHawkish, Stance::Hawkish, Stance::Neutral, Stance::Dovish, Stance::VeryDovish];

    pub fn value(self) -> i8 {
        match self {
            Stance::VeryHawkish => -2,
            Stance::Hawkish => -1,
            Stance::Neutral => 0,
            Stance::Dovish => 1,
            Stance::VeryDovish => 2,
        }
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            -2 => Some(Stance::VeryHawkish),
            -1 => Some(Stance::Hawkish),
            0 => Some(Stance::Neutral),
            1 => Some(Stance::Dovish),
            2 => Some(Stance::VeryDovish),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stance::VeryHawkish => "Very Hawkish",
            Stance::Hawkish => "Hawkish",
            Stance::Neutral => "Neutral",
            Stance::Dovish => "Dovish",
            Stance::VeryDovish => "Very Dovish",
        }
    }
}

impl std::fmt::Display for Stance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({:+})", self.label(), self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Remote,
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedMessage {
    pub message: RawMessage,
    pub stance: Stance,
    pub source: Source,
}

#[derive(Serialize, Deserialize)]
struct ClassifiedRecord {
    #[serde(flatten)]
    message: RawMessage,
    stance: i8,
    label: String,
    source: Source,
}

impl Serialize for ClassifiedMessage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ClassifiedRecord {
            message: self.message.clone(),
            stance: self.stance.value(),
            label: self.stance.label().to_string(),
            source: self.source,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClassifiedMessage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = ClassifiedRecord::deserialize(d)?;
        let stance = Stance::from_value(rec.stance as i64)
            .ok_or_else(|| serde::de::Error::custom(format!("stance {} outside -2..=2", rec.stance)))?;
        Ok(ClassifiedMessage { message: rec.message, stance, source: rec.source })
    }
}

/// Reads JSON Lines, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, MessageError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| MessageError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<(), MessageError> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|source| MessageError::Json { line: 0, source })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a message corpus and enforces id uniqueness.
pub fn read_messages<R: BufRead>(reader: R) -> Result<Vec<RawMessage>, MessageError> {
    let msgs: Vec<RawMessage> = read_jsonl(reader)?;
    let mut seen = std::collections::HashSet::new();
    for m in &msgs {
        if !seen.insert(m.id.as_str()) {
            return Err(MessageError::DuplicateId(m.id.clone()));
        }
    }
    Ok(msgs)
}
