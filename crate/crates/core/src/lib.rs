//! Core of the txt2vid transmission stack.
//!
//! A talking-head session is sent as compressed transcript segments over a
//! small framed protocol, after a one-time profile transfer (driving video +
//! voice reference). The receiver rebuilds audio and video with a synthesis
//! backend. This crate holds everything that does not need an async runtime:
//!
//! - [`wire`]: frame codec, message payloads and the session state machine.
//! - [`text`]: transcript segmentation, compression and bitrate accounting.
//! - [`media`]: jitter buffer, audio chunking, frame pacing and the receiver pipeline.
//! - [`synth`]: synthesis backend protocol types and the deterministic mock backend.
//! - [`bench`]: codec sweep harness driving an external transcoder.
//! - [`study`]: pairwise preference analysis and curve generation.
//! - [`api`]: request and response bodies of the service operations.

pub mod api;
pub mod bench;
pub mod media;
pub mod study;
pub mod synth;
pub mod text;
pub mod wire;
