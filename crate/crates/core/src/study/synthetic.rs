//! Deterministic vote sets with a chosen preference-vs-ratio shape, for
//! exercising the analysis without a real study.

use std::collections::BTreeMap;

use super::{JoinTable, PreferenceRecord, Txt2VidArm, Vote};
use crate::bench::{
    table1_avg_kbps, table1_grid, BenchmarkMatrix, EncodeResult, MatrixEntry, MatrixRow, Outcome, VideoCodec,
};

/// Preference falls as `100 / (1 + (ratio / r50)^slope)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticShape {
    pub r50: f64,
    pub slope: f64,
}

impl SyntheticShape {
    pub fn pct(&self, ratio: f64) -> f64 {
        100.0 / (1.0 + (ratio / self.r50).powf(self.slope))
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticStudy {
    /// Content id and the factor applied to the table's average bitrates.
    pub contents: Vec<(String, f64)>,
    pub txt2vid_bps: f64,
    /// Bitrate of the original-audio arm.
    pub original_audio_bps: f64,
    pub h264: SyntheticShape,
    pub av1: SyntheticShape,
    pub h264_original_audio: SyntheticShape,
    pub av1_original_audio: SyntheticShape,
    /// Attentive viewers per content; each votes on every pair.
    pub viewers: u32,
    /// Extra viewers per content who fail two of three sanity checks and
    /// always vote txt2vid.
    pub inattentive: u32,
}

impl Default for SyntheticStudy {
    fn default() -> Self {
        Self {
            contents: [0.85, 1.0, 1.15, 0.9, 1.1, 0.95]
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("content{}", i + 1), *s))
                .collect(),
            txt2vid_bps: 85.0,
            original_audio_bps: 10_000.0,
            h264: SyntheticShape { r50: 1000.0, slope: 2.0 },
            av1: SyntheticShape { r50: 200.0, slope: 2.0 },
            h264_original_audio: SyntheticShape { r50: 5.0, slope: 2.0 },
            av1_original_audio: SyntheticShape { r50: 1.5, slope: 2.0 },
            viewers: 40,
            inattentive: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub records: Vec<PreferenceRecord>,
    pub matrix_rows: Vec<MatrixRow>,
    pub join: JoinTable,
    /// Pair id -> (txt2vid votes, total) among attentive viewers.
    pub expected_counts: BTreeMap<String, (u32, u32)>,
}

const SANITY_ANSWERS: [Vote; 3] = [Vote::Codec, Vote::Txt2vid, Vote::Codec];

pub fn synthetic_study(s: &SyntheticStudy) -> SyntheticData {
    let grid = table1_grid();
    let avg = table1_avg_kbps();
    let mut matrix = BenchmarkMatrix::default();
    let mut join = JoinTable::default();
    let mut records = Vec::new();
    let mut expected_counts = BTreeMap::new();
    for (content, scale) in &s.contents {
        matrix.txt2vid_bps.insert(content.clone(), s.txt2vid_bps);
        join.set_txt2vid_bps(content, Txt2VidArm::ResembleAudio, s.txt2vid_bps);
        join.set_txt2vid_bps(content, Txt2VidArm::OriginalAudio, s.original_audio_bps);
        let people: Vec<String> = (0..s.viewers + s.inattentive).map(|i| format!("{content}-p{i:03}")).collect();
        let mut pair_index = 0u32;
        for (params, kbps) in grid.iter().zip(&avg) {
            let total = kbps * 1000.0 * scale;
            let audio = params.audio_br_kbps as f64 * 1000.0;
            join.set_codec_bps(content, *params, total);
            matrix.entries.push(MatrixEntry {
                content_id: content.clone(),
                params: *params,
                outcome: Outcome::Ok(EncodeResult {
                    content_id: content.clone(),
                    params: *params,
                    video_bps: total - audio,
                    audio_bps: audio,
                    total_bps: total,
                    file_bytes: (total * 30.0 / 8.0).round() as u64,
                    duration_ms: 30_000,
                }),
            });
            for arm in [Txt2VidArm::ResembleAudio, Txt2VidArm::OriginalAudio] {
                let (shape, tx) = match (params.video_codec, arm) {
                    (VideoCodec::H264, Txt2VidArm::ResembleAudio) => (s.h264, s.txt2vid_bps),
                    (VideoCodec::Av1, Txt2VidArm::ResembleAudio) => (s.av1, s.txt2vid_bps),
                    (VideoCodec::H264, Txt2VidArm::OriginalAudio) => (s.h264_original_audio, s.original_audio_bps),
                    (VideoCodec::Av1, Txt2VidArm::OriginalAudio) => (s.av1_original_audio, s.original_audio_bps),
                };
                let pct = shape.pct(total / tx);
                let yes = (s.viewers as f64 * pct / 100.0).round() as u32;
                let pair_id = format!("{content}-{}-{arm}", params.label());
                expected_counts.insert(pair_id.clone(), (yes, s.viewers));
                let offset = pair_index * 7;
                pair_index += 1;
                for (i, person) in people.iter().enumerate() {
                    let i = i as u32;
                    let vote = if i >= s.viewers || (i + offset) % s.viewers < yes {
                        Vote::Txt2vid
                    } else {
                        Vote::Codec
                    };
                    records.push(PreferenceRecord {
                        participant_id: person.clone(),
                        content_id: content.clone(),
                        pair_id: pair_id.clone(),
                        codec_arm: Some(*params),
                        txt2vid_arm: arm,
                        vote,
                        is_sanity_check: false,
                        expected: None,
                    });
                }
            }
        }
        for (k, answer) in SANITY_ANSWERS.iter().enumerate() {
            for (i, person) in people.iter().enumerate() {
                let i = i as u32;
                // Inattentive viewers miss the first two checks; viewer 0
                // misses one, which the default threshold tolerates.
                let fails = (i >= s.viewers && k < 2) || (i == 0 && k == 0);
                let vote = match (answer, fails) {
                    (a, false) => *a,
                    (Vote::Codec, true) => Vote::Txt2vid,
                    (Vote::Txt2vid, true) => Vote::Codec,
                };
                records.push(PreferenceRecord {
                    participant_id: person.clone(),
                    content_id: content.clone(),
                    pair_id: format!("{content}-sanity-{k}"),
                    codec_arm: None,
                    txt2vid_arm: Txt2VidArm::ResembleAudio,
                    vote,
                    is_sanity_check: true,
                    expected: Some(*answer),
                });
            }
        }
    }
    SyntheticData {
        records,
        matrix_rows: matrix.rows(),
        join,
        expected_counts,
    }
}
