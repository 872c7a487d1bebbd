//! Codec benchmark harness: encodes clips over the H.264 / AV1 parameter
//! grid with an external ffmpeg, measures the achieved bitrates and writes
//! matrices with compression ratios against txt2vid.

mod grid;
mod matrix;
mod run;
mod transcoder;

pub use grid::{
    table1_avg_kbps, table1_grid, AudioCodec, CodecParams, VideoCodec, TARGET_FPS, TARGET_HEIGHT, TARGET_PIX_FMT,
    TARGET_SAMPLE_RATE, TARGET_WIDTH,
};
pub use matrix::{
    emit_matrix, load_matrix, read_rows, table1_reference_rows, with_ratios, write_rows, BenchmarkMatrix, EncodeResult,
    MatrixEntry, MatrixFormat, MatrixRow, Outcome, AVERAGE_ID,
};
pub use run::{encode_benchmark, measure, prepare_content, run_grid, BenchOptions};
pub use transcoder::{
    make_synthetic_clip, parse_framecrc, StreamInfo, StreamProbe, Transcoder, AOM_CPU_USED, X264_PRESET,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("transcoder missing: {0}")]
    TranscoderMissing(String),
    #[error("transcoder does not support {0}")]
    CodecUnsupported(String),
    #[error("encode failed at {stage}: {stderr}")]
    EncodeFailed { stage: String, stderr: String },
    #[error("stream probe failed: {0}")]
    Probe(String),
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
