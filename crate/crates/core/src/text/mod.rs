//! Transcript handling: segmentation, per-segment compression and the
//! bitrate accounting used for every reported number.

mod accounting;
mod segment;

pub use accounting::{
    compression_ratio, payload_bitrate, payload_bitrate_in, AccountingContext, AccountingError, AccountingPolicy, BitrateReport, RatioError,
};
pub use segment::{
    parse_timing_csv, segment_transcript, SegmentationStrategy, TimingError, TimingRow, Transcript,
    TranscriptSegment,
};

use std::io::{Read, Write};

use bzip2::Compression as BzLevel;
use flate2::Compression as DeflateLevel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Compressor applied to each text segment independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum CompressorId {
    Identity = 0,
    /// Raw DEFLATE stream, level 9.
    Deflate = 1,
    /// bzip2, 900k blocks. The reference compressor for bitrate figures.
    Bzip2 = 2,
}

impl CompressorId {
    pub const ALL: [CompressorId; 3] = [CompressorId::Identity, CompressorId::Deflate, CompressorId::Bzip2];
}

impl TryFrom<u8> for CompressorId {
    type Error = u8;

    fn try_from(v: u8) -> Result<Self, u8> {
        match v {
            0 => Ok(CompressorId::Identity),
            1 => Ok(CompressorId::Deflate),
            2 => Ok(CompressorId::Bzip2),
            other => Err(other),
        }
    }
}

impl std::str::FromStr for CompressorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "0" | "identity" => Ok(CompressorId::Identity),
            "1" | "deflate" => Ok(CompressorId::Deflate),
            "2" | "bzip2" => Ok(CompressorId::Bzip2),
            other => Err(format!("unknown compressor {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DecompressError {
    #[error("corrupt compressed stream: {0}")]
    Corrupt(#[from] std::io::Error),
    #[error("decompressed text is not UTF-8")]
    BadUtf8,
}

pub fn compress_text(text: &str, id: CompressorId) -> Vec<u8> {
    let raw = text.as_bytes();
    match id {
        CompressorId::Identity => raw.to_vec(),
        CompressorId::Deflate => {
            let mut enc = flate2::write::DeflateEncoder::new(Vec::new(), DeflateLevel::best());
            enc.write_all(raw).expect("in-memory write");
            enc.finish().expect("in-memory write")
        }
        CompressorId::Bzip2 => {
            let mut enc = bzip2::write::BzEncoder::new(Vec::new(), BzLevel::best());
            enc.write_all(raw).expect("in-memory write");
            enc.finish().expect("in-memory write")
        }
    }
}

pub fn decompress_text(body: &[u8], id: CompressorId) -> Result<String, DecompressError> {
    let bytes = match id {
        CompressorId::Identity => body.to_vec(),
        CompressorId::Deflate => {
            let mut out = Vec::new();
            flate2::read::DeflateDecoder::new(body).read_to_end(&mut out)?;
            out
        }
        CompressorId::Bzip2 => {
            let mut out = Vec::new();
            bzip2::read::BzDecoder::new(body).read_to_end(&mut out)?;
            out
        }
    };
    String::from_utf8(bytes).map_err(|_| DecompressError::BadUtf8)
}
