//! Receiver sessions.
//!
//! A [`SessionDriver`] owns the protocol state machine for one sender
//! (a wire connection or a UI client typing text). Frames it accepts are
//! appended to the session trace, profiles go to the store and segments to
//! the session's pipeline, which runs on its own thread and writes to a
//! [`GatewaySink`]. Everything a session shares with viewers lives in
//! [`Session`].

use std::collections::{BTreeSet, HashMap};
use std::panic::AssertUnwindSafe;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use bytes::Bytes;
use crossbeam_channel::Sender;
use tokio::sync::{broadcast, watch};
use tracing::{info, warn};
use txt2vid_core::media::{
    ChannelSource, Clock, LatencyStats, MediaSink, Mode, MuxChunk, PcmAudio,
    Pipeline, PipelineConfig, Segment, SegmentBody, SinkError, SourceItem, VideoFrame, WallClock,
};
use txt2vid_core::media::mux::{FfmpegSink, MuxTarget, MuxerSpec};
use txt2vid_core::synth::{BackendError, Capabilities, SynthesisBackend};
use txt2vid_core::text::{payload_bitrate_in, AccountingContext, AccountingPolicy, BitrateReport};
use txt2vid_core::wire::{
    Action, AudioSegmentPayload, ErrorCode, Frame, HelloPayload, MessageType, PeerState, ProtocolErrorPayload, Role,
    SessionEndPayload, SessionMachine, TextSegmentPayload,
};

use crate::profiles::ProfileStore;
pub use txt2vid_core::api::{Origin, SessionInfo, SessionState, Stats};
use crate::GatewayConfig;

pub type SessionId = u32;

/// UI-originated sessions take ids from here upward.
const UI_SESSION_BASE: u32 = 0x8000_0000;

#[derive(Debug, Clone, PartialEq)]
pub enum UiEvent {
    Echo { seq: u32, text: String },
    Frame { index: u64, pts_ms: u64, jpeg_b64: String },
    Ended { state: SessionState },
}

/// Container bytes produced so far, replayed from the start to every
/// viewer so all of them receive identical content.
#[derive(Debug)]
pub struct Playback {
    log: Mutex<PlaybackLog>,
    version: watch::Sender<u64>,
}

#[derive(Debug, Default)]
struct PlaybackLog {
    chunks: Vec<Bytes>,
    done: bool,
}

impl Playback {
    fn new() -> Self {
        Self {
            log: Mutex::new(PlaybackLog::default()),
            version: watch::channel(0).0,
        }
    }

    pub fn push(&self, bytes: Bytes) {
        lock(&self.log).chunks.push(bytes);
        self.version.send_modify(|v| *v += 1);
    }

    pub fn close(&self) {
        lock(&self.log).done = true;
        self.version.send_modify(|v| *v += 1);
    }

    /// Chunk `index`, `Ok(None)` when the stream has ended before it, or
    /// `Err(())` when it is not there yet.
    fn chunk(&self, index: usize) -> Result<Option<Bytes>, ()> {
        let log = lock(&self.log);
        match log.chunks.get(index) {
            Some(b) => Ok(Some(b.clone())),
            None if log.done => Ok(None),
            None => Err(()),
        }
    }

    pub fn total_bytes(&self) -> usize {
        lock(&self.log).chunks.iter().map(Bytes::len).sum()
    }

    /// Every chunk from the beginning, then new ones as they arrive.
    pub fn stream(self: Arc<Self>) -> impl futures::Stream<Item = Result<Bytes, std::io::Error>> + Send {
        let rx = self.version.subscribe();
        futures::stream::unfold((self, 0usize, rx), |(pb, index, mut rx)| async move {
            loop {
                match pb.chunk(index) {
                    Ok(Some(b)) => return Some((Ok(b), (pb, index + 1, rx))),
                    Ok(None) => return None,
                    Err(()) => {
                        if rx.changed().await.is_err() {
                            return None;
                        }
                    }
                }
            }
        })
    }
}

struct Ledger {
    trace: Vec<Frame>,
    /// Profiles known from storage rather than registered in this trace.
    known: BTreeSet<u16>,
    /// Sender capture time of the latest segment and when it arrived.
    last_capture: Option<(u64, Instant)>,
    ended: bool,
}

struct Feed {
    tx: Option<Sender<SourceItem>>,
    mode: Mode,
    started: bool,
}

pub struct Session {
    pub id: SessionId,
    pub origin: Origin,
    created: Instant,
    clock: Arc<WallClock>,
    ledger: Mutex<Ledger>,
    feed: Mutex<Feed>,
    state: Mutex<SessionState>,
    latency: Mutex<LatencyStats>,
    arrivals: Mutex<HashMap<u32, u64>>,
    last_latency: AtomicU64,
    has_latency: AtomicBool,
    events: broadcast::Sender<UiEvent>,
    pub playback: Option<Arc<Playback>>,
}

impl Session {
    fn new(id: SessionId, origin: Origin, mode: Mode, playback: bool) -> Self {
        Self {
            id,
            origin,
            created: Instant::now(),
            clock: Arc::new(WallClock::new()),
            ledger: Mutex::new(Ledger {
                trace: Vec::new(),
                known: BTreeSet::new(),
                last_capture: None,
                ended: false,
            }),
            feed: Mutex::new(Feed {
                tx: None,
                mode,
                started: false,
            }),
            state: Mutex::new(SessionState::Open),
            latency: Mutex::new(LatencyStats::default()),
            arrivals: Mutex::new(HashMap::new()),
            last_latency: AtomicU64::new(0),
            has_latency: AtomicBool::new(false),
            events: broadcast::channel(256).0,
            playback: playback.then(|| Arc::new(Playback::new())),
        }
    }

    pub fn subscribe(&self) -> broadcast::Receiver<UiEvent> {
        self.events.subscribe()
    }

    pub fn state(&self) -> SessionState {
        lock(&self.state).clone()
    }

    pub fn mode(&self) -> Mode {
        lock(&self.feed).mode
    }

    pub fn pipeline_started(&self) -> bool {
        lock(&self.feed).started
    }

    /// Changes the mode; only before the pipeline starts.
    pub fn set_mode(&self, mode: Mode) -> Result<(), String> {
        let mut feed = lock(&self.feed);
        if feed.started {
            return Err("mode is fixed once the session has started".into());
        }
        feed.mode = mode;
        Ok(())
    }

    /// Milliseconds since the session was created, used as the capture
    /// clock of UI-typed text.
    pub fn elapsed_ms(&self) -> u64 {
        self.created.elapsed().as_millis() as u64
    }

    pub fn trace(&self) -> Vec<Frame> {
        lock(&self.ledger).trace.clone()
    }

    /// Accounting window for the trace as it stands now.
    pub fn accounting_context(&self) -> AccountingContext {
        let ledger = lock(&self.ledger);
        accounting_context(&ledger)
    }

    pub fn report(&self, policy: AccountingPolicy) -> Option<BitrateReport> {
        let ledger = lock(&self.ledger);
        payload_bitrate_in(&ledger.trace, policy, &accounting_context(&ledger)).ok()
    }

    pub fn stats(&self) -> Stats {
        let ledger = lock(&self.ledger);
        let ctx = accounting_context(&ledger);
        let payload = payload_bitrate_in(&ledger.trace, AccountingPolicy::PayloadOnly, &ctx).ok();
        let wire = payload_bitrate_in(&ledger.trace, AccountingPolicy::PayloadAndFraming, &ctx).ok();
        drop(ledger);
        Stats {
            bps_payload: payload.as_ref().map_or(0.0, |r| r.bps),
            bps_wire: wire.as_ref().map_or(0.0, |r| r.bps),
            latency_ms: self
                .has_latency
                .load(Ordering::Acquire)
                .then(|| self.last_latency.load(Ordering::Acquire)),
            payload_bits: payload.as_ref().map_or(0, |r| r.payload_bits),
            segments: payload.as_ref().map_or(0, |r| r.segments),
            accounted_duration_ms: payload.as_ref().map_or(0, |r| r.accounted_duration_ms),
        }
    }

    pub fn info(&self) -> SessionInfo {
        let state = self.state();
        SessionInfo {
            id: self.id,
            origin: self.origin,
            mode: self.mode(),
            stats: self.stats(),
            report: self.report(AccountingPolicy::PayloadOnly),
            latency: state.is_done().then(|| lock(&self.latency).clone()),
            playback: self.playback.is_some(),
            state,
        }
    }

    fn record(&self, frame: &Frame) {
        lock(&self.ledger).trace.push(frame.clone());
    }

    fn learn(&self, user_id: u16) {
        lock(&self.ledger).known.insert(user_id);
    }

    fn deliver(&self, segment: Segment) {
        let now = self.clock.now_ms();
        lock(&self.ledger).last_capture = Some((segment.capture_ts_ms, Instant::now()));
        lock(&self.arrivals).insert(segment.seq, now);
        if let SegmentBody::Text(t) = &segment.body {
            let _ = self.events.send(UiEvent::Echo {
                seq: segment.seq,
                text: t.clone(),
            });
        }
        if let Some(tx) = &lock(&self.feed).tx {
            let _ = tx.send(SourceItem::Segment(segment));
        }
    }

    /// No more input. With `clean` the trace ended in SESSION_END.
    fn end_input(&self, clean: bool) {
        {
            let mut ledger = lock(&self.ledger);
            if !ledger.ended {
                ledger.ended = clean;
            }
        }
        let started = {
            let mut feed = lock(&self.feed);
            if let Some(tx) = feed.tx.take() {
                let _ = tx.send(SourceItem::End);
            }
            feed.started
        };
        let mut state = lock(&self.state);
        if *state == SessionState::Open {
            *state = if started { SessionState::Draining } else { SessionState::Finished };
        }
        if !started {
            drop(state);
            if let Some(pb) = &self.playback {
                pb.close();
            }
            let _ = self.events.send(UiEvent::Ended {
                state: SessionState::Finished,
            });
        }
    }

    fn note_display(&self, seq: u32, display_at_ms: u64) {
        if let Some(arrived) = lock(&self.arrivals).remove(&seq) {
            self.last_latency.store(display_at_ms.saturating_sub(arrived), Ordering::Release);
            self.has_latency.store(true, Ordering::Release);
        }
    }

    fn finish(&self, result: Result<LatencyStats, String>) {
        let state = match result {
            Ok(stats) => {
                *lock(&self.latency) = stats;
                SessionState::Finished
            }
            Err(reason) => SessionState::Failed { reason },
        };
        match &state {
            SessionState::Failed { reason } => warn!(session = self.id, %reason, "session failed"),
            _ => info!(session = self.id, "session finished"),
        }
        *lock(&self.state) = state.clone();
        if let Some(pb) = &self.playback {
            pb.close();
        }
        let _ = self.events.send(UiEvent::Ended { state });
    }
}

fn accounting_context(ledger: &Ledger) -> AccountingContext {
    AccountingContext {
        known_profiles: ledger.known.clone(),
        open_end_ts_ms: match (ledger.ended, ledger.last_capture) {
            (false, Some((ts, at))) => Some(ts + at.elapsed().as_millis() as u64),
            _ => None,
        },
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// Shared state of the whole gateway.
pub struct Hub {
    pub config: GatewayConfig,
    pub store: Arc<ProfileStore>,
    ffmpeg: Option<PathBuf>,
    sessions: Mutex<HashMap<SessionId, Arc<Session>>>,
    next_ui_id: AtomicU32,
}

impl Hub {
    pub fn new(config: GatewayConfig, store: ProfileStore, ffmpeg: Option<PathBuf>) -> Self {
        Self {
            config,
            store: Arc::new(store),
            ffmpeg,
            sessions: Mutex::new(HashMap::new()),
            next_ui_id: AtomicU32::new(UI_SESSION_BASE),
        }
    }

    pub fn muxer_available(&self) -> bool {
        self.ffmpeg.is_some()
    }

    pub fn session(&self, id: SessionId) -> Option<Arc<Session>> {
        lock(&self.sessions).get(&id).cloned()
    }

    pub fn sessions(&self) -> Vec<Arc<Session>> {
        let mut v: Vec<_> = lock(&self.sessions).values().cloned().collect();
        v.sort_by_key(|s| s.id);
        v
    }

    /// Registers a session id. A finished session with the same id is
    /// replaced; a live one is not.
    fn create(&self, id: SessionId, origin: Origin) -> Result<Arc<Session>, ProtocolErrorPayload> {
        let mut sessions = lock(&self.sessions);
        if let Some(existing) = sessions.get(&id) {
            if !existing.state().is_done() {
                return Err(ProtocolErrorPayload::new(
                    ErrorCode::SessionMismatch,
                    format!("session {id} is already active"),
                ));
            }
        }
        let session = Arc::new(Session::new(id, origin, self.config.mode, self.ffmpeg.is_some()));
        sessions.insert(id, session.clone());
        info!(session = id, ?origin, "session opened");
        Ok(session)
    }

    fn next_ui_session_id(&self) -> SessionId {
        loop {
            let id = self.next_ui_id.fetch_add(1, Ordering::Relaxed);
            if self.session(id).is_none() {
                return id;
            }
        }
    }

    /// Starts the session's pipeline thread if it is not running yet.
    pub fn start_pipeline(self: &Arc<Self>, session: &Arc<Session>) {
        let (tx, rx) = crossbeam_channel::unbounded();
        let mode = {
            let mut feed = lock(&session.feed);
            if feed.started {
                return;
            }
            feed.started = true;
            feed.tx = Some(tx);
            feed.mode
        };
        let hub = self.clone();
        let session = session.clone();
        let spawned = std::thread::Builder::new()
            .name(format!("session-{}", session.id))
            .spawn({
                let session = session.clone();
                move || {
                    let result = std::panic::catch_unwind(AssertUnwindSafe(|| hub.run_pipeline(&session, mode, rx)))
                        .unwrap_or_else(|_| Err("pipeline panicked".into()));
                    session.finish(result);
                }
            });
        if let Err(e) = spawned {
            session.finish(Err(format!("cannot start pipeline thread: {e}")));
        }
    }

    fn run_pipeline(
        &self,
        session: &Arc<Session>,
        mode: Mode,
        rx: crossbeam_channel::Receiver<SourceItem>,
    ) -> Result<LatencyStats, String> {
        let inner = self
            .config
            .backend
            .connect()
            .map_err(|e| format!("backend unavailable: {e}"))?;
        let mut backend = StoreBackend::new(inner, self.store.clone());
        let config = PipelineConfig::for_mode(mode);
        let muxer = match (&self.ffmpeg, &session.playback) {
            (Some(ffmpeg), Some(pb)) => {
                let pb = pb.clone();
                let spec = MuxerSpec {
                    ffmpeg: ffmpeg.clone(),
                    container: "mpegts".into(),
                    fps: config.fps,
                    sample_rate: config.sample_rate,
                    target: MuxTarget::Stdout,
                };
                Some(FfmpegSink::new(spec).on_output(move |b| pb.push(Bytes::copy_from_slice(b))))
            }
            _ => None,
        };
        let sink = GatewaySink {
            session: session.clone(),
            muxer,
            fps: config.fps,
            frames: 0,
            frame_every: self.config.ui_frame_every,
        };
        let pipeline = Pipeline::new(config, session.clock.clone());
        let (_, stats) = pipeline
            .run_threaded(&mut ChannelSource::new(rx), &mut backend, sink)
            .map_err(|e| e.to_string())?;
        Ok(stats)
    }
}

/// Resolves voices and driving videos from the profile store, registering
/// a profile with the backend the first time it is used (and again when it
/// was replaced).
pub struct StoreBackend {
    inner: Box<dyn SynthesisBackend>,
    store: Arc<ProfileStore>,
    registered: HashMap<u16, String>,
}

impl StoreBackend {
    pub fn new(inner: Box<dyn SynthesisBackend>, store: Arc<ProfileStore>) -> Self {
        Self {
            inner,
            store,
            registered: HashMap::new(),
        }
    }

    fn ensure_registered(&mut self, user_id: u16) -> Result<(), BackendError> {
        let Some(entry) = self.store.get(user_id) else {
            return Err(BackendError::UnknownProfile(user_id));
        };
        if self.registered.get(&user_id) == Some(&entry.blob_sha256) {
            return Ok(());
        }
        let (entry, blob) = self
            .store
            .load(user_id)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let tag: [u8; 4] = entry
            .container_tag
            .as_bytes()
            .try_into()
            .map_err(|_| BackendError::BadRequest("stored container tag is not 4 bytes".into()))?;
        self.inner.register_profile(user_id, tag, &blob)?;
        self.registered.insert(user_id, entry.blob_sha256);
        Ok(())
    }
}

impl SynthesisBackend for StoreBackend {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn register_profile(&mut self, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Result<(), BackendError> {
        self.inner.register_profile(profile_id, container_tag, driving_video)
    }

    /// The pipeline names voices by user id; the stored voice reference is
    /// what the backend knows.
    fn tts(&mut self, voice_id: &str, text: &str) -> Result<PcmAudio, BackendError> {
        let voice = voice_id
            .parse::<u16>()
            .ok()
            .and_then(|id| self.store.get(id))
            .map(|e| e.voice_profile_ref);
        self.inner.tts(voice.as_deref().unwrap_or(voice_id), text)
    }

    fn lipsync(&mut self, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Result<Vec<VideoFrame>, BackendError> {
        self.ensure_registered(profile_id)?;
        self.inner.lipsync(profile_id, audio, fps, start_frame)
    }
}

/// Feeds the muxer (when present) and UI clients.
struct GatewaySink {
    session: Arc<Session>,
    muxer: Option<FfmpegSink>,
    fps: u32,
    frames: u64,
    frame_every: u32,
}

impl MediaSink for GatewaySink {
    fn write_chunk(&mut self, chunk: &MuxChunk) -> Result<(), SinkError> {
        if let Some(m) = self.muxer.as_mut() {
            if let Err(e) = m.write_chunk(chunk) {
                // Playback degrades; the UI path keeps going.
                warn!(session = self.session.id, "muxer failed: {e}");
                self.muxer = None;
                if let Some(pb) = &self.session.playback {
                    pb.close();
                }
            }
        }
        if chunk.segment_start && chunk.kind == txt2vid_core::media::ChunkKind::Speech {
            self.session.note_display(chunk.seq, chunk.display_at_ms);
        }
        let watching = self.session.events.receiver_count() > 0;
        for (i, f) in chunk.frames.iter().enumerate() {
            let index = self.frames;
            self.frames += 1;
            if !watching || self.frame_every == 0 || !index.is_multiple_of(self.frame_every as u64) {
                continue;
            }
            match encode_jpeg(f) {
                Ok(jpeg) => {
                    let _ = self.session.events.send(UiEvent::Frame {
                        index,
                        pts_ms: chunk.display_at_ms + i as u64 * 1000 / self.fps as u64,
                        jpeg_b64: B64.encode(jpeg),
                    });
                }
                Err(e) => warn!(session = self.session.id, "jpeg encode: {e}"),
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), SinkError> {
        if let Some(mut m) = self.muxer.take() {
            if let Err(e) = m.finish() {
                warn!(session = self.session.id, "muxer finish: {e}");
            }
        }
        Ok(())
    }
}

pub fn encode_jpeg(frame: &VideoFrame) -> Result<Vec<u8>, String> {
    let (w, h) = (
        u16::try_from(frame.width).map_err(|_| "frame too wide")?,
        u16::try_from(frame.height).map_err(|_| "frame too tall")?,
    );
    let mut out = Vec::new();
    jpeg_encoder::Encoder::new(&mut out, 75)
        .encode(&frame.data, w, h, jpeg_encoder::ColorType::Rgb)
        .map_err(|e| e.to_string())?;
    Ok(out)
}

/// What the transport should do after a frame was handled.
#[derive(Debug, Default)]
pub struct DriverOutput {
    pub replies: Vec<Frame>,
    pub close: bool,
}

/// Protocol state for one sender.
pub struct SessionDriver {
    hub: Arc<crate::session::Hub>,
    origin: Origin,
    machine: SessionMachine,
    /// Frames accepted before HELLO; they open the session's trace.
    pending: Vec<Frame>,
    session: Option<Arc<Session>>,
    ended: bool,
}

impl SessionDriver {
    /// Driver for a wire connection. Profiles already in the store are
    /// usable without re-registration.
    pub fn wire(hub: Arc<Hub>) -> Self {
        Self::with_origin(hub, Origin::Wire)
    }

    fn with_origin(hub: Arc<Hub>, origin: Origin) -> Self {
        let machine = SessionMachine::with_known_profiles(Role::Responder, hub.store.ids());
        Self {
            hub,
            origin,
            machine,
            pending: Vec::new(),
            session: None,
            ended: false,
        }
    }

    /// Driver for a UI client: the gateway plays the sender and opens the
    /// session with a HELLO of its own.
    pub fn ui(hub: Arc<Hub>) -> Self {
        let mut d = Self::with_origin(hub, Origin::Ui);
        let id = d.hub.next_ui_session_id();
        let out = d.handle(&HelloPayload { session_id: id, features: 0 }.into_frame());
        debug_assert!(!out.close);
        d
    }

    pub fn session(&self) -> Option<&Arc<Session>> {
        self.session.as_ref()
    }

    /// Makes a stored profile usable in this session.
    pub fn learn_profile(&mut self, user_id: u16) -> bool {
        if !self.hub.store.contains(user_id) {
            return false;
        }
        if !self.machine.is_registered(user_id) {
            self.machine.learn_profile(user_id);
        }
        if let Some(s) = &self.session {
            s.learn(user_id);
        }
        true
    }

    pub fn handle(&mut self, frame: &Frame) -> DriverOutput {
        let mut out = DriverOutput::default();
        if matches!(frame.msg_type, MessageType::TextSegment | MessageType::AudioSegment) {
            // Profiles registered by another session since this one began.
            if let Some(user) = segment_user(frame) {
                if !self.machine.is_registered(user) && self.hub.store.contains(user) {
                    self.machine.learn_profile(user);
                }
            }
        }
        let was_established = self.machine.state() == PeerState::Established;
        let actions = self.machine.step_frame(frame);
        if actions.iter().any(|a| matches!(a, Action::ProtocolError(_))) {
            for a in actions {
                if let Action::ProtocolError(p) = a {
                    warn!(session = self.machine.session_id(), code = ?p.code, "{}", p.message);
                    out.replies.push(p.to_frame());
                }
            }
            out.close = true;
            return out;
        }
        if !was_established && self.machine.state() == PeerState::Established {
            let id = self.machine.session_id().expect("established");
            match self.hub.create(id, self.origin) {
                Ok(s) => {
                    for f in self.pending.drain(..) {
                        s.record(&f);
                    }
                    for id in self.hub.store.ids() {
                        s.learn(id);
                    }
                    if self.origin == Origin::Wire {
                        self.hub.start_pipeline(&s);
                    }
                    self.session = Some(s);
                }
                Err(p) => {
                    out.replies.push(p.to_frame());
                    out.close = true;
                    return out;
                }
            }
        }
        match &self.session {
            Some(s) => s.record(frame),
            None => self.pending.push(frame.clone()),
        }
        for action in actions {
            match action {
                Action::Reply(f) => out.replies.push(f),
                Action::StoreProfile { profile, replaced } => match self.hub.store.put(&profile) {
                    Ok((entry, o)) => {
                        info!(
                            session = self.machine.session_id(),
                            user_id = profile.user_id,
                            replaced,
                            deduplicated = o.deduplicated,
                            blob = %entry.blob_sha256,
                            "profile stored"
                        );
                        if let Some(s) = &self.session {
                            // Registered in-trace now, so no longer out of band.
                            lock(&s.ledger).known.remove(&profile.user_id);
                        }
                    }
                    Err(e) => {
                        warn!("profile store: {e}");
                        out.replies.push(ProtocolErrorPayload::new(ErrorCode::Internal, e.to_string()).to_frame());
                        out.close = true;
                    }
                },
                Action::DeliverText { segment, text } => {
                    if let Some(s) = &self.session {
                        s.deliver(Segment {
                            seq: segment.seq,
                            capture_ts_ms: segment.capture_ts_ms,
                            user_id: segment.user_id,
                            body: SegmentBody::Text(text),
                        });
                    }
                }
                Action::DeliverAudio(a) => {
                    if let Some(s) = &self.session {
                        s.deliver(audio_segment(a));
                    }
                }
                Action::Account(ev) => info!(session = self.machine.session_id(), ?ev, "accounting event"),
                Action::Ended(_) => {
                    self.ended = true;
                    if let Some(s) = &self.session {
                        s.end_input(true);
                    }
                }
                Action::Close => out.close = true,
                Action::ProtocolError(_) | Action::ProfileAcked(_) => {}
            }
        }
        out
    }

    /// Ends a UI session with a SESSION_END at the current session time.
    pub fn end(&mut self) {
        if let Some(s) = self.session.clone() {
            if !self.ended {
                let end = SessionEndPayload {
                    session_id: s.id,
                    end_ts_ms: s.elapsed_ms(),
                };
                self.handle(&end.into_frame());
            }
        }
    }
}

impl Drop for SessionDriver {
    fn drop(&mut self) {
        if let (Some(s), false) = (&self.session, self.ended) {
            info!(session = s.id, "sender went away without SESSION_END");
            s.end_input(false);
        }
    }
}

fn segment_user(frame: &Frame) -> Option<u16> {
    match frame.msg_type {
        MessageType::TextSegment => TextSegmentPayload::decode(&frame.payload).ok().map(|s| s.user_id),
        MessageType::AudioSegment => AudioSegmentPayload::decode(&frame.payload).ok().map(|s| s.user_id),
        _ => None,
    }
}

fn audio_segment(a: AudioSegmentPayload) -> Segment {
    Segment {
        seq: a.seq,
        capture_ts_ms: a.capture_ts_ms,
        user_id: a.user_id,
        body: SegmentBody::Audio(PcmAudio::new(a.sample_rate, a.samples)),
    }
}
