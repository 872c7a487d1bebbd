use std::path::{Path, PathBuf};

use crossbeam_channel::unbounded;
use tracing::{info, warn};

use super::grid::{CodecParams, VideoCodec};
use super::matrix::{BenchmarkMatrix, EncodeResult, MatrixEntry, Outcome};
use super::transcoder::{
    audio_args, merge_args, normalize_args, playback_args, video_args, Transcoder, AOM_CPU_USED, X264_PRESET,
};
use super::BenchError;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub workdir: PathBuf,
    pub jobs: usize,
    /// Also write an upsampled 720p copy of each encode for viewing.
    pub playback: bool,
}

/// Steps 1 and 3 for one content; returns the intermediate file.
pub fn prepare_content(t: &Transcoder, input: &Path, content_id: &str, workdir: &Path) -> Result<PathBuf, BenchError> {
    let meta = std::fs::metadata(input).map_err(|e| BenchError::EncodeFailed {
        stage: "normalize".into(),
        stderr: format!("{}: {e}", input.display()),
    })?;
    if meta.len() == 0 {
        return Err(BenchError::EncodeFailed {
            stage: "normalize".into(),
            stderr: format!("{} is empty", input.display()),
        });
    }
    let out = workdir.join(format!("{content_id}.norm.mkv"));
    t.run("normalize", &normalize_args(input, &out))?;
    Ok(out)
}

/// Steps 2, 4 and 5 for one grid row, then measures the result.
pub fn encode_benchmark(
    t: &Transcoder,
    normalized: &Path,
    content_id: &str,
    params: &CodecParams,
    workdir: &Path,
    playback: bool,
) -> Result<EncodeResult, BenchError> {
    params.validate().map_err(BenchError::BadInput)?;
    if !t.supports(params.video_codec) {
        return Err(BenchError::CodecUnsupported(params.video_codec.encoder().into()));
    }
    let aac = t.aac_encoder().ok_or_else(|| BenchError::CodecUnsupported("aac".into()))?;
    let stem = format!("{content_id}.{}", params.label());
    let video = workdir.join(format!("{stem}.video.mp4"));
    let audio = workdir.join(format!("{stem}.audio.m4a"));
    let merged = workdir.join(format!("{stem}.mp4"));
    t.run("video", &video_args(params, normalized, &video))?;
    t.run("audio", &audio_args(params, aac, normalized, &audio))?;
    t.run("merge", &merge_args(&video, &audio, &merged))?;
    if playback {
        t.run("playback", &playback_args(&merged, &workdir.join(format!("{stem}.play.mp4"))))?;
    }
    let _ = std::fs::remove_file(&video);
    let _ = std::fs::remove_file(&audio);
    measure(t, &merged, content_id, params)
}

/// Bitrates of an encoded file: per stream from packet sizes, total from
/// the file size, all over the longest stream's duration.
pub fn measure(t: &Transcoder, file: &Path, content_id: &str, params: &CodecParams) -> Result<EncodeResult, BenchError> {
    let file_bytes = std::fs::metadata(file)?.len();
    let probe = t.probe_streams(file)?;
    let duration = probe.duration_ms();
    if duration <= 0.0 {
        return Err(BenchError::Probe(format!("{} has no timed packets", file.display())));
    }
    let bps = |bytes: u64| bytes as f64 * 8000.0 / duration;
    Ok(EncodeResult {
        content_id: content_id.to_string(),
        params: *params,
        video_bps: bps(probe.bytes_of("video")),
        audio_bps: bps(probe.bytes_of("audio")),
        total_bps: bps(file_bytes),
        file_bytes,
        duration_ms: duration.round() as u64,
    })
}

/// Encodes every (content, params) pair on a pool of `opts.jobs` workers.
/// Rows whose codec the transcoder lacks are kept as skipped.
pub fn run_grid(
    t: &Transcoder,
    contents: &[(String, PathBuf)],
    grid: &[CodecParams],
    opts: &BenchOptions,
) -> Result<BenchmarkMatrix, BenchError> {
    std::fs::create_dir_all(&opts.workdir)?;
    let mut matrix = BenchmarkMatrix {
        metadata: metadata(t),
        ..Default::default()
    };
    let mut jobs = Vec::new();
    for (id, input) in contents {
        let normalized = prepare_content(t, input, id, &opts.workdir)?;
        for p in grid {
            jobs.push((id.clone(), normalized.clone(), *p));
        }
    }
    let (job_tx, job_rx) = unbounded();
    for (i, job) in jobs.iter().enumerate() {
        job_tx.send((i, job)).expect("receiver alive");
    }
    drop(job_tx);
    let (res_tx, res_rx) = unbounded();
    std::thread::scope(|s| {
        for _ in 0..opts.jobs.max(1) {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            s.spawn(move || {
                for (i, (id, normalized, p)) in job_rx {
                    let r = encode_benchmark(t, normalized, id, p, &opts.workdir, opts.playback);
                    let _ = res_tx.send((i, r));
                }
            });
        }
    });
    drop(res_tx);
    let mut results: Vec<_> = res_rx.iter().collect();
    results.sort_by_key(|(i, _)| *i);
    for (i, r) in results {
        let (id, _, p) = &jobs[i];
        let outcome = match r {
            Ok(r) => {
                info!(content = %id, params = %p.label(), total_bps = r.total_bps, "encoded");
                Outcome::Ok(r)
            }
            Err(BenchError::CodecUnsupported(codec)) => {
                warn!(content = %id, params = %p.label(), "skipping: transcoder lacks {codec}");
                Outcome::Skipped {
                    reason: format!("{codec} unavailable"),
                }
            }
            Err(e) => return Err(e),
        };
        matrix.entries.push(MatrixEntry {
            content_id: id.clone(),
            params: *p,
            outcome,
        });
    }
    Ok(matrix)
}

fn metadata(t: &Transcoder) -> std::collections::BTreeMap<String, String> {
    use std::path::Path as P;
    let (n, o) = (P::new("<normalized>"), P::new("<out>"));
    let mut m = std::collections::BTreeMap::new();
    m.insert("transcoder".into(), t.path.display().to_string());
    m.insert("transcoder_version".into(), t.version.clone());
    m.insert("aac_encoder".into(), t.aac_encoder().unwrap_or("none").into());
    m.insert("x264_preset".into(), X264_PRESET.into());
    m.insert("aom_cpu_used".into(), AOM_CPU_USED.to_string());
    m.insert("normalize_args".into(), normalize_args(P::new("<input>"), o).join(" "));
    for codec in [VideoCodec::H264, VideoCodec::Av1] {
        let p = CodecParams::new(codec, 0, 1, 5);
        m.insert(format!("video_args.{codec}"), video_args(&p, n, o).join(" "));
    }
    m.insert(
        "audio_args".into(),
        audio_args(&CodecParams::new(VideoCodec::H264, 0, 1, 5), t.aac_encoder().unwrap_or("aac"), n, o).join(" "),
    );
    m.insert("merge_args".into(), merge_args(P::new("<video>"), P::new("<audio>"), o).join(" "));
    m
}
