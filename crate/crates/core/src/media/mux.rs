//! Container output through an external `ffmpeg` process.
//!
//! Raw RGB24 frames go to the muxer's stdin; PCM goes through a named pipe
//! so the two streams never block each other. Output is either a file or
//! the process's stdout, handed to a callback as it arrives.

use std::ffi::CString;
use std::io::{Read, Write};
use std::os::unix::ffi::OsStrExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, Sender};
use tracing::debug;

use super::pipeline::{MediaSink, MuxChunk, SinkError};
use super::types::VideoFrame;

/// Env var naming the transcoder binary.
pub const FFMPEG_ENV: &str = "TXT2VID_FFMPEG";

/// Finds an ffmpeg binary: `explicit`, then `$TXT2VID_FFMPEG`, then `ffmpeg`
/// on `PATH`, then the binary bundled with the `imageio-ffmpeg` Python
/// package.
pub fn locate_ffmpeg(explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return p.is_file().then(|| p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(FFMPEG_ENV) {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    if let Some(paths) = std::env::var_os("PATH") {
        for dir in std::env::split_paths(&paths) {
            let p = dir.join("ffmpeg");
            if p.is_file() {
                return Some(p);
            }
        }
    }
    let out = Command::new("python3")
        .args(["-c", "import imageio_ffmpeg; print(imageio_ffmpeg.get_ffmpeg_exe())"])
        .stderr(Stdio::null())
        .output()
        .ok()?;
    let p = PathBuf::from(String::from_utf8_lossy(&out.stdout).trim());
    (out.status.success() && p.is_file()).then_some(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MuxTarget {
    File(PathBuf),
    Stdout,
}

#[derive(Debug, Clone)]
pub struct MuxerSpec {
    pub ffmpeg: PathBuf,
    /// ffmpeg format name: `mp4`, `matroska`, `mpegts`.
    pub container: String,
    pub fps: u32,
    pub sample_rate: u32,
    pub target: MuxTarget,
}

impl MuxerSpec {
    /// Argument template. Input 0 is raw video on stdin, input 1 PCM from
    /// `audio_path`.
    pub fn args(&self, width: u32, height: u32, audio_path: &Path) -> Vec<String> {
        let mut a: Vec<String> = [
            "-hide_banner", "-loglevel", "error", "-nostdin",
            "-f", "rawvideo", "-pix_fmt", "rgb24",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        a.extend([
            "-s".into(),
            format!("{width}x{height}"),
            "-r".into(),
            self.fps.to_string(),
            "-i".into(),
            "pipe:0".into(),
            "-f".into(),
            "s16le".into(),
            "-ar".into(),
            self.sample_rate.to_string(),
            "-ac".into(),
            "1".into(),
            "-i".into(),
            audio_path.display().to_string(),
        ]);
        for s in [
            "-map", "0:v", "-map", "1:a", "-c:v", "libx264", "-preset", "ultrafast", "-tune", "zerolatency",
            "-pix_fmt", "yuv420p", "-c:a", "aac", "-b:a", "64k",
        ] {
            a.push(s.into());
        }
        if self.container == "mp4" && self.target == MuxTarget::Stdout {
            a.extend(["-movflags".into(), "frag_keyframe+empty_moov".into()]);
        }
        a.extend(["-f".into(), self.container.clone(), "-y".into()]);
        a.push(match &self.target {
            MuxTarget::File(p) => p.display().to_string(),
            MuxTarget::Stdout => "pipe:1".into(),
        });
        a
    }
}

type OutputFn = Box<dyn FnMut(&[u8]) + Send>;

struct Running {
    child: Child,
    size: (u32, u32),
    video_tx: Option<Sender<Vec<u8>>>,
    audio_tx: Option<Sender<Vec<u8>>>,
    writers: Vec<JoinHandle<std::io::Result<()>>>,
    stdout_reader: Option<JoinHandle<()>>,
    stderr_reader: Option<JoinHandle<String>>,
    fifo_dir: PathBuf,
}

/// [`MediaSink`] backed by an ffmpeg process, started on the first chunk
/// once the frame size is known.
pub struct FfmpegSink {
    spec: MuxerSpec,
    on_output: Option<OutputFn>,
    running: Option<Running>,
}

impl FfmpegSink {
    pub fn new(spec: MuxerSpec) -> Self {
        Self {
            spec,
            on_output: None,
            running: None,
        }
    }

    /// Receives container bytes when the target is stdout.
    pub fn on_output(mut self, f: impl FnMut(&[u8]) + Send + 'static) -> Self {
        self.on_output = Some(Box::new(f));
        self
    }

    fn start(&mut self, width: u32, height: u32) -> Result<(), SinkError> {
        let fifo_dir = unique_dir()?;
        let fifo = fifo_dir.join("audio.pcm");
        mkfifo(&fifo)?;
        let args = self.spec.args(width, height, &fifo);
        debug!(?args, "starting muxer");
        let mut child = Command::new(&self.spec.ffmpeg)
            .args(&args)
            .stdin(Stdio::piped())
            .stdout(if self.spec.target == MuxTarget::Stdout { Stdio::piped() } else { Stdio::null() })
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped");
        let (video_tx, video_rx) = bounded::<Vec<u8>>(64);
        let (audio_tx, audio_rx) = bounded::<Vec<u8>>(64);
        let video_writer = std::thread::spawn(move || {
            for buf in video_rx {
                stdin.write_all(&buf)?;
            }
            Ok(())
        });
        let audio_writer = std::thread::spawn(move || {
            let mut f = std::fs::OpenOptions::new().write(true).open(&fifo)?;
            for buf in audio_rx {
                f.write_all(&buf)?;
            }
            Ok(())
        });
        let stdout_reader = match (child.stdout.take(), self.on_output.take()) {
            (Some(mut out), Some(mut cb)) => Some(std::thread::spawn(move || {
                let mut buf = vec![0u8; 64 * 1024];
                while let Ok(n) = out.read(&mut buf) {
                    if n == 0 {
                        break;
                    }
                    cb(&buf[..n]);
                }
            })),
            (Some(mut out), None) => Some(std::thread::spawn(move || {
                let _ = std::io::copy(&mut out, &mut std::io::sink());
            })),
            _ => None,
        };
        let mut stderr = child.stderr.take().expect("piped");
        let stderr_reader = Some(std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        }));
        self.running = Some(Running {
            child,
            size: (width, height),
            video_tx: Some(video_tx),
            audio_tx: Some(audio_tx),
            writers: vec![video_writer, audio_writer],
            stdout_reader,
            stderr_reader,
            fifo_dir,
        });
        Ok(())
    }
}

impl MediaSink for FfmpegSink {
    fn write_chunk(&mut self, chunk: &MuxChunk) -> Result<(), SinkError> {
        if self.running.is_none() {
            let Some(first) = chunk.frames.first() else {
                // Nothing to size the video stream from yet.
                return Ok(());
            };
            self.start(first.width, first.height)?;
        }
        let run = self.running.as_mut().expect("started");
        let (w, h) = run.size;
        let video_tx = run.video_tx.as_ref().ok_or(SinkError::Closed)?;
        for f in &chunk.frames {
            let data = if (f.width, f.height) == (w, h) { f.data.clone() } else { rescale(f, w, h) };
            video_tx.send(data).map_err(|_| SinkError::Other("muxer stopped reading video".into()))?;
        }
        let audio_tx = run.audio_tx.as_ref().ok_or(SinkError::Closed)?;
        audio_tx
            .send(chunk.audio.to_le_bytes())
            .map_err(|_| SinkError::Other("muxer stopped reading audio".into()))?;
        Ok(())
    }

    fn finish(&mut self) -> Result<(), SinkError> {
        let Some(mut run) = self.running.take() else {
            return Ok(());
        };
        run.video_tx.take();
        run.audio_tx.take();
        let mut write_err = None;
        for w in run.writers.drain(..) {
            if let Err(e) = w.join().expect("writer panicked") {
                write_err.get_or_insert(e);
            }
        }
        let status = run.child.wait()?;
        if let Some(r) = run.stdout_reader.take() {
            let _ = r.join();
        }
        let stderr = run.stderr_reader.take().map(|r| r.join().unwrap_or_default()).unwrap_or_default();
        let _ = std::fs::remove_dir_all(&run.fifo_dir);
        if !status.success() {
            return Err(SinkError::Other(format!("muxer exited with {status}: {}", stderr.trim())));
        }
        if let Some(e) = write_err {
            return Err(SinkError::Io(e));
        }
        Ok(())
    }
}

impl Drop for FfmpegSink {
    fn drop(&mut self) {
        if let Some(mut run) = self.running.take() {
            let _ = run.child.kill();
            let _ = run.child.wait();
            let _ = std::fs::remove_dir_all(&run.fifo_dir);
        }
    }
}

/// Nearest-neighbour resize, for filler frames whose size differs from the
/// stream's.
fn rescale(f: &VideoFrame, w: u32, h: u32) -> Vec<u8> {
    let mut out = vec![0u8; super::types::frame_len(w, h)];
    if f.width == 0 || f.height == 0 {
        return out;
    }
    for y in 0..h {
        let sy = (y as u64 * f.height as u64 / h as u64) as u32;
        for x in 0..w {
            let sx = (x as u64 * f.width as u64 / w as u64) as u32;
            let o = ((y * w + x) * 3) as usize;
            out[o..o + 3].copy_from_slice(&f.pixel(sx, sy));
        }
    }
    out
}

fn unique_dir() -> std::io::Result<PathBuf> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("txt2vid-mux-{}-{n}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn mkfifo(path: &Path) -> std::io::Result<()> {
    let c = CString::new(path.as_os_str().as_bytes()).map_err(std::io::Error::other)?;
    // SAFETY: `c` is a valid NUL-terminated path.
    if unsafe { libc::mkfifo(c.as_ptr(), 0o600) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}
