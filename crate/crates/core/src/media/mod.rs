//! Receiver-side media: chunking, pacing, jitter buffering, the staged
//! pipeline and container output.

mod chunk;
mod clock;
mod jitter;
pub mod mux;
mod pace;
mod pipeline;
mod types;

pub use chunk::{chunk_audio, ChunkError};
pub use clock::{Clock, SimClock, WallClock};
pub use jitter::{JitterBuffer, PushOutcome, Released, Segment, SegmentBody};
pub use pace::{frames_for_ms, frames_for_samples, pace_frames, pts_for_index, Pacer};
pub use pipeline::{
    run_pipeline, BufferStage, ChannelSource, ChunkKind, MediaSink, MemorySink, MuxChunk, OutputStage, Pipeline,
    PipelineError, ScriptedSource, SegmentSource, SinkError, SourceEvent, SourceItem, SynthStage,
};
pub use types::{
    frame_len, samples_for_ms, LatencyStats, MediaChunk, Mode, PcmAudio, PipelineConfig, PixelFormat, SegmentLatency,
    VideoFrame, DEFAULT_FPS, DEFAULT_SAMPLE_RATE, MIN_CHUNK_MS,
};
