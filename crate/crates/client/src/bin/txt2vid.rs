//! Command line for a running txt2vid gateway.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use txt2vid_client::{send_session, GatewayClient, SendOptions, DEFAULT_GATEWAY};
use txt2vid_core::api::{BitrateRequest, Segmentation, StudyRequest};
use txt2vid_core::bench::{load_matrix, write_rows, MatrixFormat};
use txt2vid_core::text::{AccountingPolicy, BitrateReport, CompressorId};
use txt2vid_core::wire::SessionProfile;

#[derive(Debug, Parser)]
#[command(version, about = "Talk to a txt2vid gateway")]
struct Cli {
    /// Gateway HTTP address.
    #[arg(long, global = true, env = "TXT2VID_GATEWAY", default_value = DEFAULT_GATEWAY)]
    gateway: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, clap::Args)]
struct TranscriptArgs {
    /// Plain-text transcript.
    transcript: PathBuf,
    /// Spread this much speech over the segments by character count.
    #[arg(long, conflicts_with = "timing")]
    duration_ms: Option<u64>,
    /// Per-segment timing CSV (`seq,start_ms,end_ms`).
    #[arg(long)]
    timing: Option<PathBuf>,
    /// `sentence`, or a maximum segment length in characters.
    #[arg(long, default_value = "sentence")]
    segment: String,
    #[arg(long, default_value = "bzip2", value_parser = parse_compressor)]
    compressor: CompressorId,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Payload bitrate of a transcript, under both accounting policies.
    Bitrate {
        #[command(flatten)]
        t: TranscriptArgs,
        /// Print the full reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Compression ratio of every row of a bench matrix.
    Ratios {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        txt2vid_bps: f64,
        /// Write the rows here (csv or json by extension) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preference curve and 50% crossings from a votes file.
    Study {
        #[arg(long)]
        votes: PathBuf,
        /// Bench matrix with per-content codec and txt2vid bitrates.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        original_audio_bps: Option<f64>,
        #[arg(long)]
        max_failed_sanity: Option<usize>,
        /// Write the full result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Send a transcript to the gateway's wire port as one session.
    Send {
        #[command(flatten)]
        t: TranscriptArgs,
        /// Wire protocol address of the gateway.
        #[arg(long, default_value = "127.0.0.1:7400")]
        wire: SocketAddr,
        #[arg(long, default_value_t = 1)]
        session_id: u32,
        #[arg(long, default_value_t = 1)]
        user_id: u16,
        /// Register this driving video first; omit when the gateway already
        /// has the user's profile.
        #[arg(long)]
        driving_video: Option<PathBuf>,
        /// Four-character container tag of the driving video.
        #[arg(long, default_value = "MP4 ")]
        container_tag: String,
        #[arg(long, default_value = "default")]
        voice: String,
        /// Pace segments at their capture times.
        #[arg(long)]
        realtime: bool,
    },
    /// List sessions.
    Sessions,
    /// Show one session.
    Session { id: u32 },
    /// List stored profiles.
    Profiles,
}

fn parse_compressor(s: &str) -> Result<CompressorId, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown compressor {s:?}"))
}

fn request(t: &TranscriptArgs, policy: AccountingPolicy) -> anyhow::Result<BitrateRequest> {
    let segmentation = match t.segment.as_str() {
        "sentence" => Segmentation::Sentence,
        n => Segmentation::Fixed(n.parse().with_context(|| format!("--segment {n:?}"))?),
    };
    let timing_csv = t.timing.as_deref().map(read).transpose()?;
    if timing_csv.is_none() && t.duration_ms.is_none() {
        bail!("give --duration-ms or --timing");
    }
    Ok(BitrateRequest {
        text: read(&t.transcript)?,
        segmentation,
        compressor: t.compressor,
        duration_ms: t.duration_ms,
        timing_csv,
        policy,
    })
}

fn read(p: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn print_report(label: &str, r: &BitrateReport) {
    println!(
        "{label:<18} {:>9.2} bps  ({} bits over {} ms, {} segments)",
        r.bps, r.payload_bits, r.accounted_duration_ms, r.segments
    );
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let client = GatewayClient::new(&cli.gateway)?;
    match cli.cmd {
        Cmd::Bitrate { t, json } => {
            let payload = client.bitrate(&request(&t, AccountingPolicy::PayloadOnly)?)?;
            let framed = client.bitrate(&request(&t, AccountingPolicy::PayloadAndFraming)?)?;
            if json {
                let v = serde_json::json!({
                    "payload_only": payload.report,
                    "payload_and_framing": framed.report,
                    "transcript": payload.transcript,
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                print_report("payload only", &payload.report);
                print_report("payload+framing", &framed.report);
            }
        }
        Cmd::Ratios { matrix, txt2vid_bps, out } => {
            let rows = load_matrix(&matrix).with_context(|| format!("loading {}", matrix.display()))?;
            let rows = client.ratios(rows, txt2vid_bps)?;
            match out {
                Some(p) => write_rows(&rows, MatrixFormat::from_path(&p), std::fs::File::create(&p)?)?,
                None => write_rows(&rows, MatrixFormat::Csv, std::io::stdout().lock())?,
            }
        }
        Cmd::Study {
            votes,
            matrix,
            original_audio_bps,
            max_failed_sanity,
            out,
        } => {
            let req = StudyRequest {
                votes_csv: read(&votes)?,
                matrix: load_matrix(&matrix)?,
                original_audio_bps,
                max_failed_sanity,
            };
            let res = client.study(&req)?;
            if let Some(w) = &res.warning {
                eprintln!("warning: {w}");
            }
            println!(
                "{} participants kept, {} excluded, {} curve points",
                res.kept_participants,
                res.excluded_participants.len(),
                res.points.len()
            );
            for c in &res.crossings {
                let r = c.ratio_at_50.map_or("none".to_string(), |r| format!("{r:.1}"));
                println!("{:<12} {:<5} {:<15} 50% at ratio {r}", c.content_id, c.video_codec.as_str(), c.txt2vid_arm);
            }
            if let Some(p) = out {
                std::fs::write(&p, serde_json::to_vec_pretty(&res)?)?;
            }
        }
        Cmd::Send {
            t,
            wire,
            session_id,
            user_id,
            driving_video,
            container_tag,
            voice,
            realtime,
        } => {
            // Segmentation and timing come from the gateway, so the trace
            // matches what `bitrate` reports.
            let transcript = client.bitrate(&request(&t, AccountingPolicy::PayloadOnly)?)?.transcript;
            let profile = match driving_video {
                Some(p) => {
                    let tag: [u8; 4] = container_tag
                        .as_bytes()
                        .try_into()
                        .map_err(|_| anyhow::anyhow!("--container-tag must be 4 bytes"))?;
                    Some(SessionProfile {
                        user_id,
                        voice_profile_ref: voice,
                        container_tag: tag,
                        driving_video: std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?,
                    })
                }
                None => None,
            };
            let trace = transcript.to_trace(session_id, user_id, t.compressor, profile.as_ref());
            send_session(
                wire,
                &trace,
                &SendOptions {
                    realtime,
                    ..Default::default()
                },
            )?;
            println!("sent session {session_id}: {} segments", transcript.segments.len());
        }
        Cmd::Sessions => {
            for s in client.sessions()? {
                println!(
                    "{:>10}  {:<4} {:<6} {:<9} {:>9.2} bps  {} segments",
                    s.id,
                    format!("{:?}", s.origin).to_lowercase(),
                    s.mode,
                    state_name(&s.state),
                    s.stats.bps_payload,
                    s.stats.segments
                );
            }
        }
        Cmd::Session { id } => println!("{}", serde_json::to_string_pretty(&client.session(id)?)?),
        Cmd::Profiles => {
            for p in client.profiles()? {
                println!("{:>5}  {}  {:>9} bytes  {}", p.user_id, p.container_tag, p.blob_len, p.voice_profile_ref);
            }
        }
    }
    Ok(())
}

fn state_name(s: &txt2vid_core::api::SessionState) -> String {
    serde_json::to_value(s).ok().and_then(|v| v["state"].as_str().map(str::to_string)).unwrap_or_default()
}
