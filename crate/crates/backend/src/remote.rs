use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use txt2vid_core::media::{PcmAudio, VideoFrame};
use txt2vid_core::synth::protocol::{BackendRequest, BackendResponse};
use txt2vid_core::synth::{BackendError, Capabilities, SynthesisBackend};

/// A blocking line-oriented connection to a backend process.
pub struct LineConn {
    writer: Box<dyn Write + Send>,
    reader: Box<dyn BufRead + Send>,
    child: Option<Child>,
}

impl LineConn {
    /// Starts `command` with piped stdin/stdout. Stderr is inherited.
    pub fn spawn(command: &mut Command) -> io::Result<Self> {
        let mut child = command.stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        Ok(Self {
            writer: Box::new(stdin),
            reader: Box::new(BufReader::new(stdout)),
            child: Some(child),
        })
    }

    pub fn connect(addr: SocketAddr, read_timeout: Option<Duration>) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(read_timeout)?;
        Ok(Self {
            writer: Box::new(stream.try_clone()?),
            reader: Box::new(BufReader::new(stream)),
            child: None,
        })
    }

    pub fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        if !line.ends_with('\n') {
            self.writer.write_all(b"\n")?;
        }
        self.writer.flush()
    }

    pub fn send(&mut self, request: &BackendRequest) -> io::Result<()> {
        self.send_line(&request.to_line())
    }

    /// None on EOF.
    pub fn recv_line(&mut self) -> io::Result<Option<String>> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end().to_string()))
    }

    pub fn recv(&mut self) -> io::Result<Option<BackendResponse>> {
        match self.recv_line()? {
            None => Ok(None),
            Some(line) => serde_json::from_str(&line)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("bad response line: {e}"))),
        }
    }

    /// Waits for the child process, if any, to exit.
    pub fn wait(&mut self) -> io::Result<Option<std::process::ExitStatus>> {
        match self.child.as_mut() {
            Some(c) => c.wait().map(Some),
            None => Ok(None),
        }
    }
}

impl Drop for LineConn {
    fn drop(&mut self) {
        if let Some(c) = self.child.as_mut() {
            if let Ok(None) = c.try_wait() {
                let _ = c.kill();
            }
            let _ = c.wait();
        }
    }
}

/// How to reach a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "snake_case")]
pub enum BackendSpec {
    /// A child process speaking the protocol on stdio.
    Stdio { program: String, args: Vec<String> },
    /// A server already listening on a local port.
    Tcp { addr: SocketAddr },
    /// The built-in mock, without any process boundary.
    InProcess,
}

impl BackendSpec {
    pub fn connect(&self) -> Result<Box<dyn SynthesisBackend>, BackendError> {
        let transport = |e: io::Error| BackendError::Transport(e.to_string());
        match self {
            BackendSpec::Stdio { program, args } => {
                let conn = LineConn::spawn(Command::new(program).args(args)).map_err(transport)?;
                Ok(Box::new(RemoteBackend::new(conn)?))
            }
            BackendSpec::Tcp { addr } => {
                let conn = LineConn::connect(*addr, None).map_err(transport)?;
                Ok(Box::new(RemoteBackend::new(conn)?))
            }
            BackendSpec::InProcess => Ok(Box::new(txt2vid_core::synth::MockBackend::default())),
        }
    }
}

/// [`SynthesisBackend`] over a [`LineConn`]. Calls are synchronous; replies
/// for other request ids are kept until asked for.
pub struct RemoteBackend {
    conn: LineConn,
    next_id: u64,
    stash: HashMap<u64, BackendResponse>,
    caps: Capabilities,
}

impl RemoteBackend {
    /// Performs the `hello` exchange.
    pub fn new(conn: LineConn) -> Result<Self, BackendError> {
        let mut b = Self {
            conn,
            next_id: 1,
            stash: HashMap::new(),
            caps: Capabilities {
                ops: Vec::new(),
                max_chunk_ms: 0,
                binary: false,
            },
        };
        b.caps = b.call(|id| BackendRequest::Hello { request_id: id })?.into_capabilities()?;
        Ok(b)
    }

    pub fn call(&mut self, build: impl FnOnce(u64) -> BackendRequest) -> Result<BackendResponse, BackendError> {
        let id = self.next_id;
        self.next_id += 1;
        self.conn.send(&build(id)).map_err(transport)?;
        self.wait_for(id)
    }

    fn wait_for(&mut self, id: u64) -> Result<BackendResponse, BackendError> {
        if let Some(r) = self.stash.remove(&id) {
            return Ok(r);
        }
        loop {
            let resp = self
                .conn
                .recv()
                .map_err(transport)?
                .ok_or_else(|| BackendError::Transport("backend closed the connection".into()))?;
            // Only one request is outstanding, so an id-0 parse error is ours.
            if resp.request_id == id || resp.request_id == 0 {
                return Ok(resp);
            }
            self.stash.insert(resp.request_id, resp);
        }
    }

    /// Sends `shutdown`, waits for the acknowledgement and the end of the
    /// stream.
    pub fn shutdown(mut self) -> Result<(), BackendError> {
        self.call(|id| BackendRequest::Shutdown { request_id: id })?.into_unit()?;
        while self.conn.recv_line().map_err(transport)?.is_some() {}
        self.conn.wait().map_err(transport)?;
        Ok(())
    }
}

fn transport(e: io::Error) -> BackendError {
    BackendError::Transport(e.to_string())
}

impl SynthesisBackend for RemoteBackend {
    fn capabilities(&self) -> Capabilities {
        self.caps.clone()
    }

    fn register_profile(&mut self, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Result<(), BackendError> {
        self.call(|id| BackendRequest::register_profile(id, profile_id, container_tag, driving_video))?
            .into_unit()
    }

    fn tts(&mut self, voice_id: &str, text: &str) -> Result<PcmAudio, BackendError> {
        self.call(|id| BackendRequest::Tts {
            request_id: id,
            voice_id: voice_id.to_string(),
            text: text.to_string(),
        })?
        .into_audio()
    }

    fn lipsync(&mut self, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Result<Vec<VideoFrame>, BackendError> {
        self.call(|id| BackendRequest::lipsync(id, profile_id, audio, fps, start_frame))?
            .into_frames()
    }
}
