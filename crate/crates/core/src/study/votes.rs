//! Votes CSV, schema v1.
//!
//! ```text
//! participant_id,content_id,pair_id,video_codec,crf,ds_video,audio_codec,audio_br_kbps,ds_audio,txt2vid_arm,vote,is_sanity_check,expected
//! p001,c1,c1-h264-crf32-ds4-aac5-dsa1-resemble_audio,h264,32,4,aac,5,1,resemble_audio,txt2vid,false,
//! p001,c1,sanity-1,,,,,,,resemble_audio,codec,true,codec
//! ```
//!
//! Codec columns are empty for sanity pairs. `expected` is the correct
//! answer of a sanity pair and empty otherwise.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PreferenceRecord, StudyError, Vote};
use crate::bench::{AudioCodec, CodecParams, VideoCodec};

pub const VOTES_HEADER: [&str; 13] = [
    "participant_id",
    "content_id",
    "pair_id",
    "video_codec",
    "crf",
    "ds_video",
    "audio_codec",
    "audio_br_kbps",
    "ds_audio",
    "txt2vid_arm",
    "vote",
    "is_sanity_check",
    "expected",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the file, header being line 1.
    pub row: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.message)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VoteRow {
    participant_id: String,
    content_id: String,
    pair_id: String,
    video_codec: Option<String>,
    crf: Option<u8>,
    ds_video: Option<u8>,
    audio_codec: Option<String>,
    audio_br_kbps: Option<u8>,
    ds_audio: Option<u8>,
    txt2vid_arm: String,
    vote: String,
    is_sanity_check: bool,
    expected: Option<String>,
}

impl VoteRow {
    fn into_record(self) -> Result<PreferenceRecord, String> {
        let codec_arm = match (&self.video_codec, self.crf, self.ds_video, &self.audio_codec, self.audio_br_kbps, self.ds_audio) {
            (Some(v), Some(crf), Some(ds_video), Some(a), Some(br), Some(ds_audio)) => Some(CodecParams {
                video_codec: v.parse::<VideoCodec>()?,
                crf,
                ds_video,
                audio_codec: a.parse::<AudioCodec>()?,
                audio_br_kbps: br,
                ds_audio,
            }),
            (None, None, None, None, None, None) => None,
            _ => return Err("codec columns must be all set or all empty".into()),
        };
        if codec_arm.is_none() && !self.is_sanity_check {
            return Err("non-sanity pair without codec arm".into());
        }
        let expected = self.expected.as_deref().map(str::parse::<Vote>).transpose()?;
        Ok(PreferenceRecord {
            participant_id: self.participant_id,
            content_id: self.content_id,
            pair_id: self.pair_id,
            codec_arm,
            txt2vid_arm: self.txt2vid_arm.parse()?,
            vote: self.vote.parse()?,
            is_sanity_check: self.is_sanity_check,
            expected,
        })
    }

    fn from_record(r: &PreferenceRecord) -> Self {
        let p = r.codec_arm;
        Self {
            participant_id: r.participant_id.clone(),
            content_id: r.content_id.clone(),
            pair_id: r.pair_id.clone(),
            video_codec: p.map(|p| p.video_codec.to_string()),
            crf: p.map(|p| p.crf),
            ds_video: p.map(|p| p.ds_video),
            audio_codec: p.map(|p| p.audio_codec.to_string()),
            audio_br_kbps: p.map(|p| p.audio_br_kbps),
            ds_audio: p.map(|p| p.ds_audio),
            txt2vid_arm: r.txt2vid_arm.to_string(),
            vote: r.vote.as_str().into(),
            is_sanity_check: r.is_sanity_check,
            expected: r.expected.map(|v| v.as_str().into()),
        }
    }
}

pub fn read_votes<R: Read>(input: R) -> Result<Vec<PreferenceRecord>, StudyError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rdr.records();
    let Some(header) = rows.next().transpose()? else {
        return Ok(Vec::new());
    };
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != VOTES_HEADER {
        return Err(StudyError::SchemaMismatch {
            expected: VOTES_HEADER.join(","),
            found: found.join(","),
        });
    }
    let header = csv::StringRecord::from(VOTES_HEADER.to_vec());
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let parsed = row
            .map_err(|e| e.to_string())
            .and_then(|r| r.deserialize::<VoteRow>(Some(&header)).map_err(|e| e.to_string()))
            .and_then(VoteRow::into_record);
        match parsed {
            Ok(rec) => {
                let key = (rec.participant_id.clone(), rec.pair_id.clone());
                if let Some(&first_row) = seen.get(&key) {
                    return Err(StudyError::DuplicateVote {
                        participant: key.0,
                        pair: key.1,
                        first_row,
                        second_row: line,
                    });
                }
                seen.insert(key, line);
                records.push(rec);
            }
            Err(message) => errors.push(RowError { row: line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(StudyError::BadRows(errors));
    }
    Ok(records)
}

pub fn load_votes(path: &Path) -> Result<Vec<PreferenceRecord>, StudyError> {
    read_votes(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_votes<W: Write>(records: &[PreferenceRecord], out: W) -> Result<(), StudyError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(VOTES_HEADER)?;
    for r in records {
        w.serialize(VoteRow::from_record(r))?;
    }
    w.flush()?;
    Ok(())
}
