use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CompressorId;
use crate::wire::{Frame, HelloPayload, SessionEndPayload, SessionProfile, TextSegmentPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentationStrategy {
    /// Split after `.`, `!` or `?` (closing quotes and brackets stay attached).
    Sentence,
    /// Greedy word packing into segments of at most this many characters.
    /// A single word longer than the limit becomes its own segment.
    FixedLength(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub text: String,
    /// Offset of this segment's speech from session start.
    pub start_ms: u64,
    pub speech_duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub segments: Vec<TranscriptSegment>,
    pub total_duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingRow {
    pub seq: u32,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("timing file row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("timing file has {rows} rows for {segments} segments")]
    CountMismatch { rows: usize, segments: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn is_sentence_end(word: &str) -> bool {
    let trimmed = word.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    trimmed.ends_with(['.', '!', '?'])
}

/// Splits `text` into segments. Whitespace is normalized first (runs
/// collapsed, ends trimmed), so joining the segments with single spaces
/// gives back the normalized input.
pub fn segment_transcript(text: &str, strategy: SegmentationStrategy) -> Transcript {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut pieces: Vec<String> = Vec::new();
    match strategy {
        SegmentationStrategy::Sentence => {
            let mut cur: Vec<&str> = Vec::new();
            for w in words {
                cur.push(w);
                if is_sentence_end(w) {
                    pieces.push(cur.join(" "));
                    cur.clear();
                }
            }
            if !cur.is_empty() {
                pieces.push(cur.join(" "));
            }
        }
        SegmentationStrategy::FixedLength(limit) => {
            let limit = limit.max(1);
            let mut cur = String::new();
            let mut cur_chars = 0usize;
            for w in words {
                let wc = w.chars().count();
                if cur_chars > 0 && cur_chars + 1 + wc > limit {
                    pieces.push(std::mem::take(&mut cur));
                    cur_chars = 0;
                }
                if cur_chars > 0 {
                    cur.push(' ');
                    cur_chars += 1;
                }
                cur.push_str(w);
                cur_chars += wc;
            }
            if cur_chars > 0 {
                pieces.push(cur);
            }
        }
    }
    Transcript {
        segments: pieces
            .into_iter()
            .map(|text| TranscriptSegment {
                text,
                start_ms: 0,
                speech_duration_ms: 0,
            })
            .collect(),
        total_duration_ms: 0,
    }
}

/// Parses `seq,start_ms,end_ms` rows. A header row is allowed.
pub fn parse_timing_csv(data: &str) -> Result<Vec<TimingRow>, TimingError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(data.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i == 0 && rec.get(0) == Some("seq") {
            continue;
        }
        let field = |k: usize| -> Result<u64, TimingError> {
            rec.get(k)
                .ok_or_else(|| TimingError::Row {
                    row: i + 1,
                    msg: "expected 3 columns".into(),
                })?
                .parse::<u64>()
                .map_err(|e| TimingError::Row {
                    row: i + 1,
                    msg: e.to_string(),
                })
        };
        let row = TimingRow {
            seq: field(0)? as u32,
            start_ms: field(1)?,
            end_ms: field(2)?,
        };
        if row.end_ms < row.start_ms {
            return Err(TimingError::Row {
                row: i + 1,
                msg: "end before start".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

impl Transcript {
    /// Normalized text of all segments joined by single spaces.
    pub fn joined(&self) -> String {
        self.segments.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn char_count(&self) -> usize {
        self.segments.iter().map(|s| s.text.chars().count()).sum()
    }

    /// Spreads `total_ms` of contiguous speech over the segments in
    /// proportion to their character counts (largest remainder, so the
    /// durations sum to exactly `total_ms`).
    pub fn with_nominal_duration(mut self, total_ms: u64) -> Self {
        let counts: Vec<u64> = self.segments.iter().map(|s| s.text.chars().count() as u64).collect();
        let total_chars: u64 = counts.iter().sum();
        if total_chars == 0 {
            self.total_duration_ms = total_ms;
            return self;
        }
        let mut shares: Vec<(u64, u64, usize)> = counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let num = c * total_ms;
                (num / total_chars, num % total_chars, i)
            })
            .collect();
        let assigned: u64 = shares.iter().map(|s| s.0).sum();
        let mut left = total_ms - assigned;
        let mut order: Vec<usize> = (0..shares.len()).collect();
        order.sort_by(|&a, &b| shares[b].1.cmp(&shares[a].1).then(a.cmp(&b)));
        for i in order {
            if left == 0 {
                break;
            }
            shares[i].0 += 1;
            left -= 1;
        }
        let mut start = 0;
        for (seg, share) in self.segments.iter_mut().zip(&shares) {
            seg.start_ms = start;
            seg.speech_duration_ms = share.0;
            start += share.0;
        }
        self.total_duration_ms = total_ms;
        self
    }

    /// Takes durations from a timing sidecar, one row per segment in seq order.
    pub fn with_timing(mut self, rows: &[TimingRow]) -> Result<Self, TimingError> {
        if rows.len() != self.segments.len() {
            return Err(TimingError::CountMismatch {
                rows: rows.len(),
                segments: self.segments.len(),
            });
        }
        let mut sorted = rows.to_vec();
        sorted.sort_by_key(|r| r.seq);
        for (i, (seg, row)) in self.segments.iter_mut().zip(&sorted).enumerate() {
            if row.seq as usize != i {
                return Err(TimingError::Row {
                    row: i + 1,
                    msg: format!("expected seq {i}, found {}", row.seq),
                });
            }
            seg.start_ms = row.start_ms;
            seg.speech_duration_ms = row.end_ms - row.start_ms;
        }
        self.total_duration_ms = sorted.last().map(|r| r.end_ms).unwrap_or(0);
        Ok(self)
    }

    /// Sender-side frame sequence for this transcript: HELLO, optional
    /// REGISTER_PROFILE, one TEXT_SEGMENT per segment, SESSION_END.
    pub fn to_trace(
        &self,
        session_id: u32,
        user_id: u16,
        compressor: CompressorId,
        profile: Option<&SessionProfile>,
    ) -> Vec<Frame> {
        let mut frames = vec![HelloPayload {
            session_id,
            features: 0,
        }
        .into_frame()];
        if let Some(p) = profile {
            frames.push(p.to_frame().expect("profile with a driving video"));
        }
        for (seq, seg) in self.segments.iter().enumerate() {
            frames.push(
                TextSegmentPayload::from_text(session_id, seq as u32, seg.start_ms, user_id, compressor, &seg.text)
                    .to_frame(),
            );
        }
        frames.push(
            SessionEndPayload {
                session_id,
                end_ts_ms: self.total_duration_ms,
            }
            .into_frame(),
        );
        frames
    }
}
