//! Receiver pipeline: jitter buffer -> synthesis -> pacing -> sink.
//!
//! The three stages are plain structs. [`Pipeline::run`] drives them in one
//! thread, which is what the simulated-clock tests use. [`Pipeline::run_threaded`]
//! gives each stage its own thread joined by bounded channels; a closed
//! channel is the shutdown signal.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError};
use thiserror::Error;
use tracing::{debug, warn};

use super::chunk::chunk_audio;
use super::clock::Clock;
use super::jitter::{JitterBuffer, Released, Segment, SegmentBody};
use super::pace::Pacer;
use super::types::{samples_for_ms, LatencyStats, Mode, PcmAudio, PipelineConfig, SegmentLatency, VideoFrame};
use crate::synth::SynthesisBackend;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("backend failed on segment {seq}: {message}")]
    BackendFailure { seq: u32, message: String },
    #[error("sink stalled at segment {seq}: {reason}")]
    SinkStall { seq: u32, reason: String },
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("sink closed")]
    Closed,
    #[error("sink i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug)]
pub enum SourceEvent {
    Segment(Segment),
    /// The sender ended the session.
    End,
    /// The deadline passed with nothing new.
    Idle,
}

/// Where segments come from (a socket, a channel, a script).
pub trait SegmentSource: Send {
    /// Waits for the next event, but not past `deadline_ms` on `clock`.
    fn next_event(&mut self, clock: &dyn Clock, deadline_ms: Option<u64>) -> SourceEvent;

    /// Receiver time of sender time 0, if the source knows it. Otherwise the
    /// first arrival anchors the timeline.
    fn epoch_ms(&self) -> Option<u64> {
        None
    }
}

/// Replays segments at fixed receiver arrival times.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSource {
    arrivals: VecDeque<(u64, Segment)>,
    epoch_ms: u64,
}

impl ScriptedSource {
    pub fn new(mut arrivals: Vec<(u64, Segment)>) -> Self {
        arrivals.sort_by_key(|(t, _)| *t);
        Self {
            arrivals: arrivals.into(),
            epoch_ms: 0,
        }
    }

    pub fn with_epoch(mut self, epoch_ms: u64) -> Self {
        self.epoch_ms = epoch_ms;
        self
    }
}

impl SegmentSource for ScriptedSource {
    fn next_event(&mut self, clock: &dyn Clock, deadline_ms: Option<u64>) -> SourceEvent {
        let Some(&(arrival, _)) = self.arrivals.front() else {
            return SourceEvent::End;
        };
        match deadline_ms {
            Some(d) if d < arrival => {
                clock.sleep_until(d);
                SourceEvent::Idle
            }
            _ => {
                clock.sleep_until(arrival);
                SourceEvent::Segment(self.arrivals.pop_front().expect("front").1)
            }
        }
    }

    fn epoch_ms(&self) -> Option<u64> {
        Some(self.epoch_ms)
    }
}

#[derive(Debug)]
pub enum SourceItem {
    Segment(Segment),
    End,
}

/// Segments pushed from another thread. Uses wall time for deadlines, so
/// pair it with [`super::WallClock`].
pub struct ChannelSource {
    rx: Receiver<SourceItem>,
}

impl ChannelSource {
    pub fn new(rx: Receiver<SourceItem>) -> Self {
        Self { rx }
    }
}

impl SegmentSource for ChannelSource {
    fn next_event(&mut self, clock: &dyn Clock, deadline_ms: Option<u64>) -> SourceEvent {
        let item = match deadline_ms {
            None => self.rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
            Some(d) => {
                let wait = d.saturating_sub(clock.now_ms());
                self.rx.recv_timeout(Duration::from_millis(wait))
            }
        };
        match item {
            Ok(SourceItem::Segment(s)) => SourceEvent::Segment(s),
            Ok(SourceItem::End) | Err(RecvTimeoutError::Disconnected) => SourceEvent::End,
            Err(RecvTimeoutError::Timeout) => SourceEvent::Idle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkKind {
    Speech,
    /// A segment that never arrived.
    Gap,
    /// Backend failed; silence and looped frames stand in.
    Substitute,
}

/// One chunk of output: unpadded audio plus the frames that cover it.
#[derive(Debug, Clone)]
pub struct MuxChunk {
    pub seq: u32,
    pub kind: ChunkKind,
    /// First chunk of its segment.
    pub segment_start: bool,
    pub audio: PcmAudio,
    pub frames: Vec<VideoFrame>,
    /// Receiver time at which the chunk starts playing.
    pub display_at_ms: u64,
}

pub trait MediaSink: Send {
    fn write_chunk(&mut self, chunk: &MuxChunk) -> Result<(), SinkError>;
    fn finish(&mut self) -> Result<(), SinkError>;
}

impl<S: MediaSink + ?Sized> MediaSink for Box<S> {
    fn write_chunk(&mut self, chunk: &MuxChunk) -> Result<(), SinkError> {
        (**self).write_chunk(chunk)
    }

    fn finish(&mut self) -> Result<(), SinkError> {
        (**self).finish()
    }
}

/// Keeps everything in memory; for tests and small sessions.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub chunks: Vec<MuxChunk>,
    pub finished: bool,
}

impl MemorySink {
    pub fn frames(&self) -> impl Iterator<Item = &VideoFrame> {
        self.chunks.iter().flat_map(|c| c.frames.iter())
    }

    pub fn frame_count(&self) -> usize {
        self.chunks.iter().map(|c| c.frames.len()).sum()
    }

    pub fn audio_samples(&self) -> usize {
        self.chunks.iter().map(|c| c.audio.samples.len()).sum()
    }

    /// Seq of each chunk, in write order.
    pub fn seqs(&self) -> Vec<u32> {
        self.chunks.iter().map(|c| c.seq).collect()
    }
}

impl MediaSink for MemorySink {
    fn write_chunk(&mut self, chunk: &MuxChunk) -> Result<(), SinkError> {
        if self.finished {
            return Err(SinkError::Closed);
        }
        self.chunks.push(chunk.clone());
        Ok(())
    }

    fn finish(&mut self) -> Result<(), SinkError> {
        self.finished = true;
        Ok(())
    }
}

/// Owns the jitter buffer and the session timeline anchor.
pub struct BufferStage {
    jitter: JitterBuffer,
    anchored: bool,
}

impl BufferStage {
    pub fn new(config: &PipelineConfig, epoch_ms: Option<u64>) -> Self {
        let mut jitter = match config.mode {
            Mode::File => JitterBuffer::immediate(config.gap_fill_ms),
            Mode::Stream | Mode::Live => JitterBuffer::new(config.jitter_buffer_ms, 0, config.gap_fill_ms),
        };
        if let Some(e) = epoch_ms {
            jitter.set_epoch(e);
        }
        Self {
            jitter,
            anchored: epoch_ms.is_some(),
        }
    }

    pub fn push(&mut self, segment: Segment, now_ms: u64) {
        if !self.anchored {
            self.jitter.set_epoch(now_ms.saturating_sub(segment.capture_ts_ms));
            self.anchored = true;
        }
        let seq = segment.seq;
        if self.jitter.push(segment, now_ms) == super::jitter::PushOutcome::Duplicate {
            debug!(seq, "dropped duplicate segment");
        }
    }

    pub fn deadline(&self) -> Option<u64> {
        self.jitter.next_deadline()
    }

    pub fn poll(&mut self, now_ms: u64) -> Vec<Released> {
        self.jitter.poll(now_ms)
    }

    pub fn flush(&mut self) -> Vec<Released> {
        self.jitter.flush()
    }

    pub fn is_empty(&self) -> bool {
        self.jitter.is_empty()
    }
}

/// Pulls events from `source` into `stage` until something is due, calling
/// `emit` for every released item. Returns false once the session is over
/// and everything has been released.
fn pump<S: SegmentSource + ?Sized>(
    source: &mut S,
    stage: &mut BufferStage,
    clock: &dyn Clock,
    ended: &mut bool,
    mut emit: impl FnMut(Released) -> Result<(), PipelineError>,
) -> Result<bool, PipelineError> {
    for r in stage.poll(clock.now_ms()) {
        emit(r)?;
    }
    if *ended {
        match stage.deadline() {
            None => return Ok(false),
            Some(d) => {
                clock.sleep_until(d);
                return Ok(true);
            }
        }
    }
    match source.next_event(clock, stage.deadline()) {
        SourceEvent::Segment(s) => stage.push(s, clock.now_ms()),
        SourceEvent::End => *ended = true,
        SourceEvent::Idle => {}
    }
    Ok(true)
}

/// Turns released segments into paced, synthesized chunks.
pub struct SynthStage {
    config: PipelineConfig,
    clock: Arc<dyn Clock>,
    voices: HashMap<u16, String>,
    pacer: Pacer,
    recent: VecDeque<VideoFrame>,
    loop_pos: usize,
    consecutive_failures: u32,
}

impl SynthStage {
    pub fn new(config: PipelineConfig, clock: Arc<dyn Clock>, voices: HashMap<u16, String>) -> Self {
        Self {
            pacer: Pacer::new(config.fps, config.sample_rate),
            config,
            clock,
            voices,
            recent: VecDeque::new(),
            loop_pos: 0,
            consecutive_failures: 0,
        }
    }

    pub fn process<B: SynthesisBackend + ?Sized>(
        &mut self,
        released: Released,
        backend: &mut B,
        mut emit: impl FnMut(MuxChunk, Option<u64>) -> Result<(), PipelineError>,
    ) -> Result<(), PipelineError> {
        match released {
            Released::Gap { seq, fill_ms } => {
                debug!(seq, fill_ms, "gap");
                let chunk = self.filler(seq, ChunkKind::Gap, fill_ms as u64);
                emit(chunk, None)
            }
            Released::Segment { segment, capture_at_ms } => {
                let seq = segment.seq;
                let user = segment.user_id;
                let audio = match segment.body {
                    SegmentBody::Audio(a) => a,
                    SegmentBody::Text(text) => {
                        let voice = self.voices.get(&user).cloned().unwrap_or_else(|| user.to_string());
                        match backend.tts(&voice, &text) {
                            Ok(a) => {
                                self.consecutive_failures = 0;
                                a
                            }
                            Err(e) => {
                                self.failure(seq, &e.to_string())?;
                                let chunk = self.filler(seq, ChunkKind::Substitute, self.config.gap_fill_ms as u64);
                                return emit(chunk, Some(capture_at_ms));
                            }
                        }
                    }
                };
                let chunks = chunk_audio(&audio, self.config.chunk_ms).map_err(|e| PipelineError::Config(e.to_string()))?;
                for (i, chunk) in chunks.into_iter().enumerate() {
                    let capture = (i == 0).then_some(capture_at_ms);
                    let start_frame = self.pacer.frames_emitted();
                    let content = PcmAudio::new(chunk.audio.sample_rate, chunk.content().to_vec());
                    match backend.lipsync(user, &chunk.audio, self.config.fps, start_frame) {
                        Ok(batch) => {
                            self.consecutive_failures = 0;
                            let frames = self.pacer.push(chunk.content_samples, batch);
                            self.remember(&frames);
                            emit(
                                MuxChunk {
                                    seq,
                                    kind: ChunkKind::Speech,
                                    segment_start: i == 0,
                                    audio: content,
                                    frames,
                                    display_at_ms: 0,
                                },
                                capture,
                            )?;
                        }
                        Err(e) => {
                            self.failure(seq, &e.to_string())?;
                            let n = self.pacer.frames_needed(chunk.content_samples);
                            let looped = self.looped(n);
                            let frames = self.pacer.push(chunk.content_samples, looped);
                            emit(
                                MuxChunk {
                                    seq,
                                    kind: ChunkKind::Substitute,
                                    segment_start: i == 0,
                                    audio: PcmAudio::new(content.sample_rate, vec![0; content.samples.len()]),
                                    frames,
                                    display_at_ms: 0,
                                },
                                capture,
                            )?;
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn failure(&mut self, seq: u32, message: &str) -> Result<(), PipelineError> {
        self.consecutive_failures += 1;
        warn!(seq, failures = self.consecutive_failures, "backend error: {message}");
        if self.consecutive_failures > self.config.max_consecutive_failures {
            return Err(PipelineError::BackendFailure {
                seq,
                message: message.to_string(),
            });
        }
        Ok(())
    }

    fn filler(&mut self, seq: u32, kind: ChunkKind, ms: u64) -> MuxChunk {
        let samples = samples_for_ms(self.config.sample_rate, ms);
        let n = self.pacer.frames_needed(samples);
        let looped = self.looped(n);
        let frames = self.pacer.push(samples, looped);
        MuxChunk {
            seq,
            kind,
            segment_start: true,
            audio: PcmAudio::new(self.config.sample_rate, vec![0; samples]),
            frames,
            display_at_ms: 0,
        }
    }

    fn remember(&mut self, frames: &[VideoFrame]) {
        let keep = self.config.fps as usize;
        for f in frames {
            if self.recent.len() == keep {
                self.recent.pop_front();
            }
            self.recent.push_back(f.clone());
        }
        self.loop_pos = 0;
    }

    /// Recent output frames played on a loop; black if nothing was shown yet.
    fn looped(&mut self, n: usize) -> Vec<VideoFrame> {
        if self.recent.is_empty() {
            let black = VideoFrame::black(self.config.fallback_width, self.config.fallback_height);
            return vec![black; n];
        }
        (0..n)
            .map(|_| {
                let f = self.recent[self.loop_pos % self.recent.len()].clone();
                self.loop_pos += 1;
                f
            })
            .collect()
    }

    pub fn pacer(&self) -> &Pacer {
        &self.pacer
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }
}

/// Schedules chunks for display, feeds the sink and keeps the stats.
pub struct OutputStage<K> {
    sink: K,
    sample_rate: u32,
    play_end_ms: Option<u64>,
    stats: LatencyStats,
}

impl<K: MediaSink> OutputStage<K> {
    pub fn new(sink: K, sample_rate: u32) -> Self {
        Self {
            sink,
            sample_rate,
            play_end_ms: None,
            stats: LatencyStats::default(),
        }
    }

    /// `capture_at_ms` is set for the first chunk of a segment; `now_ms` is
    /// when the chunk became ready.
    pub fn accept(&mut self, mut chunk: MuxChunk, capture_at_ms: Option<u64>, now_ms: u64) -> Result<(), PipelineError> {
        let start = match self.play_end_ms {
            Some(end) if end > now_ms => end,
            Some(end) => {
                // Output ran dry in the middle of a segment.
                if !chunk.segment_start && chunk.kind == ChunkKind::Speech {
                    self.stats.stall_count += 1;
                    self.stats.stall_total_ms += now_ms - end;
                }
                now_ms
            }
            None => now_ms,
        };
        match chunk.kind {
            ChunkKind::Gap => self.stats.gaps += 1,
            ChunkKind::Substitute => self.stats.stall_count += 1,
            ChunkKind::Speech => {}
        }
        if let Some(capture) = capture_at_ms {
            self.stats.per_segment.push(SegmentLatency {
                seq: chunk.seq,
                capture_to_first_frame_ms: start.saturating_sub(capture),
            });
        }
        let dur = (chunk.audio.samples.len() as u64 * 1000).div_ceil(self.sample_rate as u64);
        self.play_end_ms = Some(start + dur);
        chunk.display_at_ms = start;
        self.stats.frames += chunk.frames.len() as u64;
        self.stats.audio_samples += chunk.audio.samples.len() as u64;
        self.sink.write_chunk(&chunk).map_err(|e| PipelineError::SinkStall {
            seq: chunk.seq,
            reason: e.to_string(),
        })
    }

    pub fn finish(mut self) -> Result<(K, LatencyStats), PipelineError> {
        let seq = self.stats.per_segment.last().map(|s| s.seq).unwrap_or(0);
        self.sink.finish().map_err(|e| PipelineError::SinkStall {
            seq,
            reason: e.to_string(),
        })?;
        self.stats.finalize();
        Ok((self.sink, self.stats))
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    clock: Arc<dyn Clock>,
    voices: HashMap<u16, String>,
    queue_depth: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, clock: Arc<dyn Clock>) -> Self {
        Self {
            config,
            clock,
            voices: HashMap::new(),
            queue_depth: 8,
        }
    }

    /// TTS voice for a user; defaults to the user id in decimal.
    pub fn with_voice(mut self, user_id: u16, voice_id: impl Into<String>) -> Self {
        self.voices.insert(user_id, voice_id.into());
        self
    }

    pub fn with_queue_depth(mut self, depth: usize) -> Self {
        self.queue_depth = depth.max(1);
        self
    }

    /// Single-threaded run; deterministic under a simulated clock.
    pub fn run<S, B, K>(&self, source: &mut S, backend: &mut B, sink: K) -> Result<(K, LatencyStats), PipelineError>
    where
        S: SegmentSource + ?Sized,
        B: SynthesisBackend + ?Sized,
        K: MediaSink,
    {
        self.config.validate().map_err(PipelineError::Config)?;
        let clock = &*self.clock;
        let mut buffer = BufferStage::new(&self.config, source.epoch_ms());
        let mut synth = SynthStage::new(self.config.clone(), self.clock.clone(), self.voices.clone());
        let mut output = OutputStage::new(sink, self.config.sample_rate);
        let mut ended = false;
        loop {
            let more = pump(source, &mut buffer, clock, &mut ended, |r| {
                synth.process(r, backend, |chunk, capture| output.accept(chunk, capture, clock.now_ms()))
            })?;
            if !more {
                break;
            }
        }
        for r in buffer.flush() {
            synth.process(r, backend, |chunk, capture| output.accept(chunk, capture, clock.now_ms()))?;
        }
        output.finish()
    }

    /// Same stages, one thread each, joined by bounded queues.
    pub fn run_threaded<S, B, K>(&self, source: &mut S, backend: &mut B, sink: K) -> Result<(K, LatencyStats), PipelineError>
    where
        S: SegmentSource + ?Sized,
        B: SynthesisBackend + ?Sized,
        K: MediaSink,
    {
        self.config.validate().map_err(PipelineError::Config)?;
        let (rel_tx, rel_rx) = bounded::<Released>(self.queue_depth);
        let (out_tx, out_rx) = bounded::<(MuxChunk, Option<u64>, u64)>(self.queue_depth);
        let clock = &*self.clock;
        std::thread::scope(|scope| {
            let buffer_thread = scope.spawn(|| {
                let mut buffer = BufferStage::new(&self.config, source.epoch_ms());
                let mut ended = false;
                let tx = rel_tx;
                let send = |r: Released| {
                    // A closed queue means a later stage gave up; its error wins.
                    let _ = tx.send(r);
                    Ok(())
                };
                while pump(source, &mut buffer, clock, &mut ended, send)? {}
                for r in buffer.flush() {
                    let _ = tx.send(r);
                }
                Ok::<(), PipelineError>(())
            });
            let synth_thread = scope.spawn(|| {
                let mut synth = SynthStage::new(self.config.clone(), self.clock.clone(), self.voices.clone());
                let tx = out_tx;
                for r in rel_rx.iter() {
                    synth.process(r, backend, |chunk, capture| {
                        let now = clock.now_ms();
                        tx.send((chunk, capture, now)).map_err(|_| PipelineError::SinkStall {
                            seq: 0,
                            reason: "output stage stopped".into(),
                        })
                    })?;
                }
                Ok::<(), PipelineError>(())
            });
            let mut output = OutputStage::new(sink, self.config.sample_rate);
            let mut out_err = None;
            for (chunk, capture, ready) in out_rx.iter() {
                if let Err(e) = output.accept(chunk, capture, ready) {
                    out_err = Some(e);
                    break;
                }
            }
            drop(out_rx);
            let synth_res = synth_thread.join().expect("synth stage panicked");
            let buffer_res = buffer_thread.join().expect("buffer stage panicked");
            if let Some(e) = out_err {
                return Err(e);
            }
            synth_res?;
            buffer_res?;
            output.finish()
        })
    }
}

/// Single-threaded run with default voices.
pub fn run_pipeline<S, B, K>(
    source: &mut S,
    backend: &mut B,
    sink: K,
    config: &PipelineConfig,
    clock: Arc<dyn Clock>,
) -> Result<(K, LatencyStats), PipelineError>
where
    S: SegmentSource + ?Sized,
    B: SynthesisBackend + ?Sized,
    K: MediaSink,
{
    Pipeline::new(config.clone(), clock).run(source, backend, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{SimClock, MIN_CHUNK_MS};
    use crate::synth::{DrivingProfile, FaultyBackend, MockBackend, TimedBackend};

    fn backend() -> MockBackend {
        MockBackend::default().with_profile(1, DrivingProfile::from_frames(&[VideoFrame::black(8, 6)]))
    }

    fn text(seq: u32, capture: u64, t: &str) -> Segment {
        Segment {
            seq,
            capture_ts_ms: capture,
            user_id: 1,
            body: SegmentBody::Text(t.into()),
        }
    }

    fn audio(seq: u32, capture: u64, ms: u64) -> Segment {
        Segment {
            seq,
            capture_ts_ms: capture,
            user_id: 1,
            body: SegmentBody::Audio(PcmAudio::new(16000, vec![100; samples_for_ms(16000, ms)])),
        }
    }

    fn file_config() -> PipelineConfig {
        let mut c = PipelineConfig::for_mode(Mode::File);
        c.fallback_width = 8;
        c.fallback_height = 6;
        c
    }

    #[test]
    fn file_mode_frame_law() {
        let clock = Arc::new(SimClock::new());
        let mut src = ScriptedSource::new(vec![(0, audio(0, 0, 1000)), (0, audio(1, 1000, 250))]);
        let (sink, stats) = run_pipeline(&mut src, &mut backend(), MemorySink::default(), &file_config(), clock).unwrap();
        assert!(sink.finished);
        assert_eq!(sink.frame_count(), 32); // ceil(1.25 * 25)
        assert_eq!(stats.frames, 32);
        assert_eq!(sink.audio_samples(), 20000);
        let pts: Vec<u64> = sink.frames().map(|f| f.pts_ms).collect();
        assert!(pts.windows(2).all(|w| w[1] == w[0] + 40));
    }

    #[test]
    fn text_segments_use_tts() {
        let clock = Arc::new(SimClock::new());
        let mut src = ScriptedSource::new(vec![(0, text(0, 0, "hello world"))]);
        let (sink, _) = run_pipeline(&mut src, &mut backend(), MemorySink::default(), &file_config(), clock).unwrap();
        assert_eq!(sink.audio_samples(), 11728);
        assert_eq!(sink.frame_count(), 19); // ceil(733 ms * 25 / 1000)
    }

    #[test]
    fn gap_and_failure_substitution() {
        let clock = Arc::new(SimClock::new());
        let mut config = PipelineConfig::for_mode(Mode::Live);
        config.fallback_width = 8;
        config.fallback_height = 6;
        // seq 1 dropped; lipsync call 2 fails.
        let mut src = ScriptedSource::new(vec![(0, audio(0, 0, 400)), (3000, audio(2, 3000, 400))]);
        let mut b = FaultyBackend::new(backend(), vec![2]);
        let (sink, stats) = Pipeline::new(config, clock).run(&mut src, &mut b, MemorySink::default()).unwrap();
        assert_eq!(sink.seqs(), [0, 0, 1, 2, 2]);
        assert_eq!(sink.chunks[2].kind, ChunkKind::Gap);
        assert_eq!(sink.chunks[3].kind, ChunkKind::Substitute);
        assert_eq!(stats.gaps, 1);
        assert_eq!(stats.stall_count, 1);
        let audio_ms = sink.audio_samples() as u64 * 1000 / 16000;
        assert_eq!(audio_ms, 1800);
        assert_eq!(sink.frame_count(), 45);
    }

    #[test]
    fn repeated_failures_abort() {
        let clock = Arc::new(SimClock::new());
        let mut src = ScriptedSource::new(vec![(0, audio(0, 0, 1000))]);
        let mut b = FaultyBackend::new(backend(), vec![0, 1, 2, 3]);
        let err = run_pipeline(&mut src, &mut b, MemorySink::default(), &file_config(), clock).unwrap_err();
        assert!(matches!(err, PipelineError::BackendFailure { seq: 0, .. }));
    }

    #[test]
    fn live_latency_is_buffer_plus_backend() {
        let clock = Arc::new(SimClock::new());
        let mut config = PipelineConfig::for_mode(Mode::Live);
        config.fallback_width = 8;
        let mut b = TimedBackend::new(backend(), clock.clone(), 0, 50);
        let mut src = ScriptedSource::new(vec![(120, audio(0, 0, 600)), (2300, audio(1, 2000, 600))]);
        let (_, stats) = Pipeline::new(config, clock).run(&mut src, &mut b, MemorySink::default()).unwrap();
        let lat: Vec<u64> = stats.per_segment.iter().map(|s| s.capture_to_first_frame_ms).collect();
        assert_eq!(lat, [550, 550]);
        assert!(stats.p95_ms <= 500 + MIN_CHUNK_MS as u64 + 50);
    }

    #[test]
    fn threaded_matches_single_threaded() {
        let segs = || ScriptedSource::new(vec![(0, audio(0, 0, 700)), (0, text(1, 700, "hi there")), (0, audio(3, 2000, 300))]);
        let a = run_pipeline(&mut segs(), &mut backend(), MemorySink::default(), &file_config(), Arc::new(SimClock::new()))
            .unwrap()
            .0;
        let b = Pipeline::new(file_config(), Arc::new(SimClock::new()))
            .with_queue_depth(1)
            .run_threaded(&mut segs(), &mut backend(), MemorySink::default())
            .unwrap()
            .0;
        assert_eq!(a.seqs(), b.seqs());
        let fa: Vec<_> = a.frames().collect();
        let fb: Vec<_> = b.frames().collect();
        assert_eq!(fa, fb);
    }

    #[test]
    fn channel_source_ends_on_disconnect() {
        let (tx, rx) = bounded(4);
        tx.send(SourceItem::Segment(audio(0, 0, 200))).unwrap();
        drop(tx);
        let mut src = ChannelSource::new(rx);
        let clock = Arc::new(crate::media::WallClock::new());
        let (sink, _) = run_pipeline(&mut src, &mut backend(), MemorySink::default(), &file_config(), clock).unwrap();
        assert_eq!(sink.frame_count(), 5);
    }
}
