//! Request and response bodies of the gateway's JSON operations, and the
//! computations behind them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bench::MatrixRow;
use crate::media::{LatencyStats, Mode};
use crate::study::{
    crossings, filter_sanity, preference_curve, read_votes, Crossing, CurvePoint, JoinTable, Txt2VidArm,
    DEFAULT_MAX_FAILED_SANITY,
};
use crate::text::{
    parse_timing_csv, payload_bitrate_in, segment_transcript, AccountingContext, AccountingPolicy, BitrateReport,
    CompressorId, SegmentationStrategy, Transcript,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    Sentence,
    Fixed(usize),
}

/// A transcript to account.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BitrateRequest {
    pub text: String,
    pub segmentation: Segmentation,
    pub compressor: CompressorId,
    /// Spread this much speech over the segments by character count.
    pub duration_ms: Option<u64>,
    /// Per-segment timings (`seq,start_ms,end_ms`); overrides `duration_ms`.
    pub timing_csv: Option<String>,
    #[serde(default)]
    pub policy: AccountingPolicy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BitrateResponse {
    pub report: BitrateReport,
    pub transcript: Transcript,
}

pub fn compute_bitrate(req: &BitrateRequest) -> Result<BitrateResponse, String> {
    let strategy = match req.segmentation {
        Segmentation::Sentence => SegmentationStrategy::Sentence,
        Segmentation::Fixed(0) => return Err("fixed segment length must be positive".into()),
        Segmentation::Fixed(n) => SegmentationStrategy::FixedLength(n),
    };
    let transcript = segment_transcript(&req.text, strategy);
    if transcript.segments.is_empty() {
        return Err("transcript is empty".into());
    }
    let transcript = match (&req.timing_csv, req.duration_ms) {
        (Some(csv), _) => {
            let rows = parse_timing_csv(csv).map_err(|e| e.to_string())?;
            transcript.with_timing(&rows).map_err(|e| e.to_string())?
        }
        (None, Some(ms)) if ms > 0 => transcript.with_nominal_duration(ms),
        _ => return Err("need a positive duration_ms or a timing_csv".into()),
    };
    let trace = transcript.to_trace(1, 1, req.compressor, None);
    // A trace without a profile frame references user 1 out of band.
    let ctx = AccountingContext {
        known_profiles: [1].into(),
        open_end_ts_ms: None,
    };
    let report = payload_bitrate_in(&trace, req.policy, &ctx).map_err(|e| e.to_string())?;
    Ok(BitrateResponse { report, transcript })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatiosRequest {
    pub rows: Vec<MatrixRow>,
    pub txt2vid_bps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRequest {
    /// Votes file contents.
    pub votes_csv: String,
    /// Per-content matrix rows carrying `total_bps` and `txt2vid_bps`.
    pub matrix: Vec<MatrixRow>,
    /// Bitrate of the original-audio arm, applied to every content.
    pub original_audio_bps: Option<f64>,
    pub max_failed_sanity: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResponse {
    pub kept_participants: usize,
    pub excluded_participants: Vec<String>,
    pub warning: Option<String>,
    pub points: Vec<CurvePoint>,
    pub crossings: Vec<Crossing>,
}

pub fn compute_study(req: &StudyRequest) -> Result<StudyResponse, String> {
    let records = read_votes(req.votes_csv.as_bytes()).map_err(|e| e.to_string())?;
    let sanity = filter_sanity(&records, req.max_failed_sanity.unwrap_or(DEFAULT_MAX_FAILED_SANITY));
    let mut join = JoinTable::from_matrix(&req.matrix);
    if let Some(bps) = req.original_audio_bps {
        let contents: BTreeSet<&str> = req.matrix.iter().map(|r| r.content_id.as_str()).collect();
        for c in contents {
            join.set_txt2vid_bps(c, Txt2VidArm::OriginalAudio, bps);
        }
    }
    let points = preference_curve(&sanity.kept, &join).map_err(|e| e.to_string())?;
    Ok(StudyResponse {
        kept_participants: sanity.kept_participants.len(),
        excluded_participants: sanity.excluded.keys().cloned().collect(),
        warning: sanity.warning,
        crossings: crossings(&points),
        points,
    })
}

/// Where a session's text comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Wire,
    Ui,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionState {
    /// Accepting segments.
    Open,
    /// Input ended; the pipeline is draining.
    Draining,
    Finished,
    Failed { reason: String },
}

impl SessionState {
    pub fn is_done(&self) -> bool {
        matches!(self, SessionState::Finished | SessionState::Failed { .. })
    }
}

/// Numbers pushed to UI clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub bps_payload: f64,
    pub bps_wire: f64,
    /// Arrival to first displayed frame of the latest segment.
    pub latency_ms: Option<u64>,
    pub payload_bits: u64,
    pub segments: u32,
    pub accounted_duration_ms: u64,
}

/// Snapshot of a gateway session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: u32,
    pub origin: Origin,
    pub mode: Mode,
    #[serde(flatten)]
    pub state: SessionState,
    pub stats: Stats,
    pub report: Option<BitrateReport>,
    pub latency: Option<LatencyStats>,
    pub playback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub user_id: u16,
    /// Hex sha256 of the driving video; also its blob file name.
    pub blob_sha256: String,
    pub blob_len: u64,
    pub container_tag: String,
    pub voice_profile_ref: String,
    /// Unix time, milliseconds.
    pub registered_at_ms: u64,
}
