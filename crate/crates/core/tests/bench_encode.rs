use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use txt2vid_core::bench::{
    encode_benchmark, make_synthetic_clip, prepare_content, run_grid, table1_grid, BenchError, BenchOptions, Outcome,
    Transcoder, VideoCodec,
};

fn transcoder() -> Option<Transcoder> {
    match Transcoder::locate(None) {
        Ok(t) => Some(t),
        Err(e) => {
            eprintln!("skipping: {e}");
            None
        }
    }
}

/// A wrapper that runs `real` but hides `encoder` from `-encoders`.
fn hiding_wrapper(dir: &Path, real: &Path, encoder: &str) -> PathBuf {
    let p = dir.join("ffmpeg-wrapped");
    let script = format!(
        "#!/bin/sh\nfor a in \"$@\"; do\n  if [ \"$a\" = \"-encoders\" ]; then\n    \"{real}\" \"$@\" | grep -v ' {encoder} '\n    exit 0\n  fi\ndone\nexec \"{real}\" \"$@\"\n",
        real = real.display()
    );
    std::fs::write(&p, script).unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}

#[test]
fn h264_row_measures_consistently() {
    let Some(t) = transcoder() else { return };
    let dir = tempfile::tempdir().unwrap();
    let clip = dir.path().join("clip.mp4");
    make_synthetic_clip(&t, 3, &clip).unwrap();
    let norm = prepare_content(&t, &clip, "syn", dir.path()).unwrap();
    let r = encode_benchmark(&t, &norm, "syn", &table1_grid()[0], dir.path(), true).unwrap();
    assert!((r.duration_ms as i64 - 3000).abs() <= 80, "{r:?}");
    assert!(r.container_overhead() <= 0.15, "{r:?}");
    assert!(r.audio_bps > 0.0 && r.video_bps > r.audio_bps);
    assert!(dir.path().join(format!("syn.{}.play.mp4", table1_grid()[0].label())).exists());
}

#[test]
fn empty_input_fails() {
    let Some(t) = transcoder() else { return };
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.mp4");
    std::fs::write(&empty, b"").unwrap();
    let err = prepare_content(&t, &empty, "e", dir.path()).unwrap_err();
    assert!(matches!(err, BenchError::EncodeFailed { .. }));
    let garbage = dir.path().join("garbage.mp4");
    std::fs::write(&garbage, b"not a video").unwrap();
    assert!(matches!(prepare_content(&t, &garbage, "g", dir.path()), Err(BenchError::EncodeFailed { .. })));
}

#[test]
fn missing_av1_rows_are_skipped() {
    let Some(real) = transcoder() else { return };
    let dir = tempfile::tempdir().unwrap();
    let wrapped = Transcoder::probe(&hiding_wrapper(dir.path(), &real.path, "libaom-av1")).unwrap();
    assert!(!wrapped.supports(VideoCodec::Av1));
    let clip = dir.path().join("clip.mp4");
    make_synthetic_clip(&wrapped, 1, &clip).unwrap();
    let grid = table1_grid();
    let subset = [grid[0], grid[8]];
    let opts = BenchOptions {
        workdir: dir.path().join("work"),
        jobs: 2,
        playback: false,
    };
    let m = run_grid(&wrapped, &[("syn".into(), clip)], &subset, &opts).unwrap();
    assert_eq!(m.entries.len(), 2);
    assert!(matches!(m.entries[0].outcome, Outcome::Ok(_)));
    assert!(matches!(m.entries[1].outcome, Outcome::Skipped { .. }));
    assert_eq!(m.skipped(), 1);
}

#[test]
fn missing_transcoder() {
    let err = Transcoder::locate(Some(Path::new("/nonexistent/ffmpeg"))).unwrap_err();
    assert!(matches!(err, BenchError::TranscoderMissing(_)));
}
