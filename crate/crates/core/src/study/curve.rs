use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PreferenceRecord, StudyError, Txt2VidArm, Vote};
use crate::bench::{CodecParams, MatrixRow, VideoCodec, AVERAGE_ID};

/// Two-sided 95% normal quantile.
pub const WILSON_Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n`, as proportions.
pub fn wilson_interval(k: u32, n: u32, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Bitrates needed to turn a pair into a ratio.
#[derive(Debug, Clone, Default)]
pub struct JoinTable {
    codec_bps: BTreeMap<(String, CodecParams), f64>,
    txt2vid_bps: BTreeMap<(String, Txt2VidArm), f64>,
}

impl JoinTable {
    /// Codec rates from per-content matrix rows; TTS-arm rates from their
    /// `txt2vid_bps` column. Averages rows and skipped rows are ignored.
    pub fn from_matrix(rows: &[MatrixRow]) -> Self {
        let mut t = Self::default();
        for r in rows.iter().filter(|r| r.content_id != AVERAGE_ID && r.status == "ok") {
            if let Some(total) = r.total_bps {
                t.codec_bps.insert((r.content_id.clone(), r.params()), total);
            }
            if let Some(tx) = r.txt2vid_bps {
                t.txt2vid_bps.insert((r.content_id.clone(), Txt2VidArm::ResembleAudio), tx);
            }
        }
        t
    }

    pub fn set_codec_bps(&mut self, content_id: &str, params: CodecParams, bps: f64) {
        self.codec_bps.insert((content_id.to_string(), params), bps);
    }

    pub fn set_txt2vid_bps(&mut self, content_id: &str, arm: Txt2VidArm, bps: f64) {
        self.txt2vid_bps.insert((content_id.to_string(), arm), bps);
    }

    pub fn ratio(&self, content_id: &str, params: &CodecParams, arm: Txt2VidArm) -> Result<f64, String> {
        let codec = self
            .codec_bps
            .get(&(content_id.to_string(), *params))
            .ok_or_else(|| format!("no encode of {} for this content", params.label()))?;
        let tx = self
            .txt2vid_bps
            .get(&(content_id.to_string(), arm))
            .ok_or_else(|| format!("no {arm} bitrate for this content"))?;
        crate::text::compression_ratio(*codec, *tx).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub pair_id: String,
    pub content_id: String,
    pub video_codec: VideoCodec,
    pub txt2vid_arm: Txt2VidArm,
    pub bitrate_ratio: f64,
    pub votes_txt2vid: u32,
    pub n_votes: u32,
    pub pct_prefer_txt2vid: f64,
    /// Wilson 95% bounds, in percent.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One point per non-sanity pair, sorted by (content, codec, arm, ratio).
pub fn preference_curve(records: &[PreferenceRecord], join: &JoinTable) -> Result<Vec<CurvePoint>, StudyError> {
    struct Acc<'a> {
        first: &'a PreferenceRecord,
        params: CodecParams,
        yes: u32,
        n: u32,
    }
    let mut pairs: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_sanity_check) {
        let Some(params) = r.codec_arm else {
            return Err(StudyError::InconsistentPair(r.pair_id.clone()));
        };
        let acc = pairs.entry(&r.pair_id).or_insert(Acc {
            first: r,
            params,
            yes: 0,
            n: 0,
        });
        if acc.first.content_id != r.content_id || acc.params != params || acc.first.txt2vid_arm != r.txt2vid_arm {
            return Err(StudyError::InconsistentPair(r.pair_id.clone()));
        }
        acc.n += 1;
        if r.vote == Vote::Txt2vid {
            acc.yes += 1;
        }
    }
    let mut points = Vec::with_capacity(pairs.len());
    for (pair_id, acc) in pairs {
        let ratio = join
            .ratio(&acc.first.content_id, &acc.params, acc.first.txt2vid_arm)
            .map_err(|reason| StudyError::UnjoinedPair {
                pair_id: pair_id.to_string(),
                content_id: acc.first.content_id.clone(),
                reason,
            })?;
        let (lo, hi) = wilson_interval(acc.yes, acc.n, WILSON_Z95);
        points.push(CurvePoint {
            pair_id: pair_id.to_string(),
            content_id: acc.first.content_id.clone(),
            video_codec: acc.params.video_codec,
            txt2vid_arm: acc.first.txt2vid_arm,
            bitrate_ratio: ratio,
            votes_txt2vid: acc.yes,
            n_votes: acc.n,
            pct_prefer_txt2vid: 100.0 * acc.yes as f64 / acc.n as f64,
            ci_low: 100.0 * lo,
            ci_high: 100.0 * hi,
        });
    }
    points.sort_by(|a, b| {
        (&a.content_id, a.video_codec, a.txt2vid_arm)
            .cmp(&(&b.content_id, b.video_codec, b.txt2vid_arm))
            .then(a.bitrate_ratio.total_cmp(&b.bitrate_ratio))
            .then(a.pair_id.cmp(&b.pair_id))
    });
    Ok(points)
}

/// Ratio at which preference crosses `level` percent, interpolating
/// linearly in log(ratio) between the first pair of neighbouring points
/// (sorted by ratio) that straddle it.
pub fn log_linear_crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        let ((r0, p0), (r1, p1)) = (w[0], w[1]);
        if p0 == level {
            return Some(r0);
        }
        if (p0 - level) * (p1 - level) < 0.0 {
            let t = (level - p0) / (p1 - p0);
            return Some((r0.ln() + t * (r1.ln() - r0.ln())).exp());
        }
    }
    match sorted.last() {
        Some(&(r, p)) if p == level => Some(r),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub content_id: String,
    pub video_codec: VideoCodec,
    pub txt2vid_arm: Txt2VidArm,
    /// None when the curve never reaches 50%.
    pub ratio_at_50: Option<f64>,
}

/// 50% crossing per (content, codec, arm) group.
pub fn crossings(points: &[CurvePoint]) -> Vec<Crossing> {
    type Group<'a> = (&'a str, VideoCodec, Txt2VidArm);
    let mut groups: BTreeMap<Group, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        groups
            .entry((&p.content_id, p.video_codec, p.txt2vid_arm))
            .or_default()
            .push((p.bitrate_ratio, p.pct_prefer_txt2vid));
    }
    groups
        .into_iter()
        .map(|((content, codec, arm), pts)| Crossing {
            content_id: content.to_string(),
            video_codec: codec,
            txt2vid_arm: arm,
            ratio_at_50: log_linear_crossing(&pts, 50.0),
        })
        .collect()
}
