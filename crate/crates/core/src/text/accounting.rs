//! Bitrate accounting over a sender-side frame trace.
//!
//! Segment payloads (TEXT_SEGMENT / AUDIO_SEGMENT) are the accounted bits.
//! The profile transfer is a one-time cost and is reported under
//! `excluded_bits` together with the handshake and SESSION_END frames; it
//! never enters `bps`. Duration runs from the first segment's capture
//! timestamp to the SESSION_END timestamp.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{Action, AccountingEvent, Frame, MessageType, Role, SessionMachine, FRAME_OVERHEAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountingPolicy {
    /// Segment payload bytes only; comparable with published text bitrates.
    #[default]
    PayloadOnly,
    /// Payload plus the 13-byte framing of each segment frame.
    PayloadAndFraming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateReport {
    pub policy: AccountingPolicy,
    pub payload_bits: u64,
    pub accounted_duration_ms: u64,
    pub bps: f64,
    pub excluded_bits: u64,
    pub overhead_bits: u64,
    pub profile_bits: u64,
    pub handshake_bits: u64,
    pub segments: u32,
    pub profile_replacements: u32,
    pub mixed_modes: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum AccountingError {
    #[error("illegal trace at frame {index}: {reason}")]
    IllegalTrace { index: usize, reason: String },
}

/// What the receiver knew before the trace started, and where an open
/// session's accounting window ends.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccountingContext {
    /// Profiles registered in an earlier session, so segments may use them
    /// without a REGISTER_PROFILE in this trace.
    pub known_profiles: BTreeSet<u16>,
    /// End of the window (sender clock) when the trace has no SESSION_END.
    pub open_end_ts_ms: Option<u64>,
}

pub fn payload_bitrate(trace: &[Frame], policy: AccountingPolicy) -> Result<BitrateReport, AccountingError> {
    payload_bitrate_in(trace, policy, &AccountingContext::default())
}

pub fn payload_bitrate_in(
    trace: &[Frame],
    policy: AccountingPolicy,
    ctx: &AccountingContext,
) -> Result<BitrateReport, AccountingError> {
    let mut machine = SessionMachine::with_known_profiles(Role::Responder, ctx.known_profiles.iter().copied());
    let mut payload_bits = 0u64;
    let mut overhead_bits = 0u64;
    let mut profile_bits = 0u64;
    let mut handshake_bits = 0u64;
    let mut segments = 0u32;
    let mut first_ts: Option<u64> = None;
    let mut end_ts: Option<u64> = None;
    let mut intrinsic_end = 0u64;

    for (index, frame) in trace.iter().enumerate() {
        let wire_bits = frame.wire_len() as u64 * 8;
        for action in machine.step_frame(frame) {
            match action {
                Action::ProtocolError(p) => {
                    return Err(AccountingError::IllegalTrace {
                        index,
                        reason: p.message,
                    })
                }
                Action::DeliverText { segment, .. } => {
                    first_ts = Some(first_ts.map_or(segment.capture_ts_ms, |t| t.min(segment.capture_ts_ms)));
                    intrinsic_end = intrinsic_end.max(segment.capture_ts_ms);
                }
                Action::DeliverAudio(segment) => {
                    first_ts = Some(first_ts.map_or(segment.capture_ts_ms, |t| t.min(segment.capture_ts_ms)));
                    intrinsic_end = intrinsic_end.max(segment.capture_ts_ms + segment.duration_ms());
                }
                Action::Ended(end) => end_ts = Some(end.end_ts_ms),
                Action::Account(AccountingEvent::ProfileReplaced { .. }) => {}
                _ => {}
            }
        }
        match frame.msg_type {
            MessageType::TextSegment | MessageType::AudioSegment => {
                segments += 1;
                payload_bits += frame.payload.len() as u64 * 8;
                overhead_bits += FRAME_OVERHEAD as u64 * 8;
            }
            MessageType::RegisterProfile => profile_bits += wire_bits,
            _ => handshake_bits += wire_bits,
        }
    }

    let accounted_duration_ms = match first_ts {
        Some(first) => end_ts
            .or(ctx.open_end_ts_ms.map(|t| t.max(intrinsic_end)))
            .unwrap_or(intrinsic_end)
            .saturating_sub(first),
        None => 0,
    };
    let counted = match policy {
        AccountingPolicy::PayloadOnly => payload_bits,
        AccountingPolicy::PayloadAndFraming => payload_bits + overhead_bits,
    };
    let bps = if accounted_duration_ms == 0 {
        0.0
    } else {
        counted as f64 * 1000.0 / accounted_duration_ms as f64
    };
    Ok(BitrateReport {
        policy,
        payload_bits,
        accounted_duration_ms,
        bps,
        excluded_bits: profile_bits + handshake_bits,
        overhead_bits,
        profile_bits,
        handshake_bits,
        segments,
        profile_replacements: machine.profile_replacements(),
        mixed_modes: machine.mixed_modes(),
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum RatioError {
    #[error("bitrates must be positive and finite (codec {codec_bps}, txt2vid {txt2vid_bps})")]
    NonPositiveRate { codec_bps: f64, txt2vid_bps: f64 },
}

/// Standard-codec bitrate over txt2vid bitrate.
pub fn compression_ratio(codec_bps: f64, txt2vid_bps: f64) -> Result<f64, RatioError> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !ok(codec_bps) || !ok(txt2vid_bps) {
        return Err(RatioError::NonPositiveRate { codec_bps, txt2vid_bps });
    }
    Ok(codec_bps / txt2vid_bps)
}
