//! Pairwise preference study analysis: vote loading, sanity-check
//! filtering, preference-vs-bitrate-ratio curves with Wilson intervals and
//! 50% crossing estimates.

mod curve;
mod sanity;
mod synthetic;
mod votes;

pub use curve::{
    crossings, log_linear_crossing, preference_curve, wilson_interval, Crossing, CurvePoint, JoinTable, WILSON_Z95,
};
pub use sanity::{filter_sanity, SanityReport, DEFAULT_MAX_FAILED_SANITY};
pub use synthetic::{synthetic_study, SyntheticData, SyntheticShape, SyntheticStudy};
pub use votes::{load_votes, read_votes, write_votes, RowError, VOTES_HEADER};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{CodecParams, VideoCodec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Txt2VidArm {
    /// Speech rebuilt by TTS from the transcript.
    ResembleAudio,
    /// The speaker's own (compressed) audio driving the lip-sync.
    OriginalAudio,
}

impl Txt2VidArm {
    pub fn as_str(self) -> &'static str {
        match self {
            Txt2VidArm::ResembleAudio => "resemble_audio",
            Txt2VidArm::OriginalAudio => "original_audio",
        }
    }
}

impl fmt::Display for Txt2VidArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Txt2VidArm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "resemble_audio" => Ok(Txt2VidArm::ResembleAudio),
            "original_audio" => Ok(Txt2VidArm::OriginalAudio),
            _ => Err(format!("unknown txt2vid arm {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    Txt2vid,
    Codec,
}

impl Vote {
    pub fn as_str(self) -> &'static str {
        match self {
            Vote::Txt2vid => "txt2vid",
            Vote::Codec => "codec",
        }
    }
}

impl FromStr for Vote {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "txt2vid" => Ok(Vote::Txt2vid),
            "codec" => Ok(Vote::Codec),
            _ => Err(format!("unknown vote {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub participant_id: String,
    pub content_id: String,
    pub pair_id: String,
    /// Absent for sanity-check pairs.
    pub codec_arm: Option<CodecParams>,
    pub txt2vid_arm: Txt2VidArm,
    pub vote: Vote,
    pub is_sanity_check: bool,
    /// Correct answer of a sanity-check pair, when known.
    pub expected: Option<Vote>,
}

impl PreferenceRecord {
    pub fn video_codec(&self) -> Option<VideoCodec> {
        self.codec_arm.map(|p| p.video_codec)
    }
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("votes header mismatch: expected {expected:?}, found {found:?}")]
    SchemaMismatch { expected: String, found: String },
    #[error("participant {participant} voted twice on pair {pair} (rows {first_row} and {second_row})")]
    DuplicateVote {
        participant: String,
        pair: String,
        first_row: usize,
        second_row: usize,
    },
    #[error("{} bad rows, first: {}", .0.len(), .0.first().map(|e| e.to_string()).unwrap_or_default())]
    BadRows(Vec<RowError>),
    #[error("pair {pair_id} ({content_id}) has no bitrate ratio: {reason}")]
    UnjoinedPair {
        pair_id: String,
        content_id: String,
        reason: String,
    },
    #[error("pair {0} mixes contents or arms across votes")]
    InconsistentPair(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
