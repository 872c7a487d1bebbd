mod common;

use std::sync::{Arc, Mutex};

use common::*;
use serde_json::Value;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpListener;
use txt2vid_backend::{serve_backend, BackendSpec, ServeOptions};
use txt2vid_core::api::{BitrateRequest, BitrateResponse, RatiosRequest, Segmentation, StudyRequest, StudyResponse};
use txt2vid_core::bench::{table1_reference_rows, MatrixRow};
use txt2vid_core::study::{synthetic_study, write_votes, SyntheticStudy};
use txt2vid_core::synth::protocol::{parse_request, BackendResponse};
use txt2vid_core::synth::{MockBackend, SynthesisBackend};
use txt2vid_core::text::{CompressorId, SegmentationStrategy};
use txt2vid_gateway::{Gateway, SessionState};

fn url(gw: &Gateway, path: &str) -> String {
    format!("http://{}{path}", gw.http_addr)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_is_503_without_a_muxer_and_404_for_unknown_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let gw = start(dir.path()).await;
    WireClient::connect(gw.wire_addr).await.run(&trace(3, 600, true)).await;
    let http = reqwest::Client::new();
    assert_eq!(http.get(url(&gw, "/session/3/stream")).send().await.unwrap().status(), 503);
    assert_eq!(http.get(url(&gw, "/session/4/stream")).send().await.unwrap().status(), 404);
    assert_eq!(http.get(url(&gw, "/healthz")).send().await.unwrap().text().await.unwrap(), "ok");
    wait_done(&gw, 3).await;

    let sessions: Value = http.get(url(&gw, "/api/sessions")).send().await.unwrap().json().await.unwrap();
    assert_eq!(sessions[0]["id"], 3);
    assert_eq!(sessions[0]["state"], "finished");
    assert_eq!(sessions[0]["origin"], "wire");
    let one: Value = http.get(url(&gw, "/api/sessions/3")).send().await.unwrap().json().await.unwrap();
    assert_eq!(one["report"]["segments"], 3);
    assert_eq!(http.get(url(&gw, "/api/sessions/8")).send().await.unwrap().status(), 404);
    let profiles: Value = http.get(url(&gw, "/api/profiles")).send().await.unwrap().json().await.unwrap();
    assert_eq!(profiles[0]["user_id"], USER);
    gw.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_viewers_receive_identical_streams() {
    if txt2vid_core::media::mux::locate_ffmpeg(None).is_none() {
        eprintln!("no transcoder on this machine; playback not exercised");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut config = config(dir.path());
    config.muxer = true;
    let gw = Gateway::start(config).await.unwrap();
    assert!(gw.hub.muxer_available());
    let t = trace(12, 1200, true);
    let mut c = WireClient::connect(gw.wire_addr).await;
    c.run(&t[..2]).await;

    let http = reqwest::Client::new();
    let a = http.get(url(&gw, "/session/12/stream")).send().await.unwrap();
    let b = http.get(url(&gw, "/session/12/stream")).send().await.unwrap();
    assert_eq!(a.headers()["content-type"], "video/mp2t");
    c.run(&t[2..]).await;
    let (a, b) = tokio::join!(a.bytes(), b.bytes());
    let (a, b) = (a.unwrap(), b.unwrap());
    assert!(a.len() > 1000, "stream has {} bytes", a.len());
    assert_eq!(a[0], 0x47, "MPEG-TS sync byte");
    assert_eq!(a, b);

    assert_finished(&wait_done(&gw, 12).await);
    let late = http.get(url(&gw, "/session/12/stream")).send().await.unwrap().bytes().await.unwrap();
    assert_eq!(late, a, "late viewers get the whole stream");
    gw.stop().await;
}

/// Backend server whose first connection dies right after the handshake.
async fn flaky_backend() -> (std::net::SocketAddr, tokio::sync::oneshot::Receiver<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (crashed_tx, crashed_rx) = tokio::sync::oneshot::channel();
    tokio::spawn(async move {
        let (first, _) = listener.accept().await.unwrap();
        let (r, mut w) = first.into_split();
        let mut line = String::new();
        BufReader::new(r).read_line(&mut line).await.unwrap();
        let id = parse_request(&line).unwrap().request_id();
        let caps = MockBackend::default().capabilities();
        w.write_all(format!("{}\n", BackendResponse::hello(id, &caps).to_line()).as_bytes()).await.unwrap();
        drop(w);
        let _ = crashed_tx.send(());
        let shared = Arc::new(Mutex::new(MockBackend::default()));
        loop {
            let (conn, _) = listener.accept().await.unwrap();
            let shared = shared.clone();
            tokio::spawn(async move {
                let (r, w) = conn.into_split();
                let _ = serve_backend(BufReader::new(r), w, shared, &ServeOptions::default()).await;
            });
        }
    });
    (addr, crashed_rx)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn a_dying_backend_fails_only_its_own_session() {
    let (backend, crashed) = flaky_backend().await;
    let dir = tempfile::tempdir().unwrap();
    let mut config = config(dir.path());
    config.backend = BackendSpec::Tcp { addr: backend };
    let gw = Gateway::start(config).await.unwrap();

    let long = txt2vid_core::text::segment_transcript(
        "One. Two. Three. Four. Five. Six. Seven.",
        SegmentationStrategy::Sentence,
    )
    .with_nominal_duration(1400);
    let p = profile();
    let doomed = long.to_trace(100, USER, CompressorId::Bzip2, Some(&p));
    let mut a = WireClient::connect(gw.wire_addr).await;
    a.run(&doomed[..2]).await;
    crashed.await.unwrap();

    let mut b = WireClient::connect(gw.wire_addr).await;
    b.run(&trace(200, 600, false)).await;
    a.run(&doomed[2..]).await;

    let sa = wait_done(&gw, 100).await;
    assert!(matches!(sa.state(), SessionState::Failed { .. }), "{:?}", sa.state());
    let sb = wait_done(&gw, 200).await;
    assert_finished(&sb);
    assert_eq!(sb.info().latency.unwrap().per_segment.len(), 3);

    // The service carries on.
    let c = reqwest::get(url(&gw, "/healthz")).await.unwrap();
    assert_eq!(c.status(), 200);
    WireClient::connect(gw.wire_addr).await.run(&trace(300, 600, false)).await;
    assert_finished(&wait_done(&gw, 300).await);
    gw.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn json_operations() {
    let dir = tempfile::tempdir().unwrap();
    let gw = start(dir.path()).await;
    let http = reqwest::Client::new();

    let req = BitrateRequest {
        text: "Four score and seven years ago. Our fathers brought forth.".into(),
        segmentation: Segmentation::Sentence,
        compressor: CompressorId::Bzip2,
        duration_ms: Some(5000),
        timing_csv: None,
        policy: Default::default(),
    };
    let resp: BitrateResponse = http.post(url(&gw, "/api/bitrate")).json(&req).send().await.unwrap().json().await.unwrap();
    assert_eq!(resp.report.segments, 2);
    assert_eq!(resp.report.accounted_duration_ms, 5000);
    assert_eq!(resp.report.bps, resp.report.payload_bits as f64 / 5.0);

    let bad = BitrateRequest { duration_ms: None, ..req };
    let r = http.post(url(&gw, "/api/bitrate")).json(&bad).send().await.unwrap();
    assert_eq!(r.status(), 400);
    assert!(r.json::<Value>().await.unwrap()["error"].is_string());

    let rows: Vec<MatrixRow> = http
        .post(url(&gw, "/api/ratios"))
        .json(&RatiosRequest {
            rows: table1_reference_rows(),
            txt2vid_bps: 100.0,
        })
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(rows.len(), table1_reference_rows().len());
    for r in &rows {
        assert_eq!(r.ratio, Some(r.total_bps.unwrap() / 100.0));
    }

    let data = synthetic_study(&SyntheticStudy::default());
    let mut votes = Vec::new();
    write_votes(&data.records, &mut votes).unwrap();
    let study: StudyResponse = http
        .post(url(&gw, "/api/study"))
        .json(&StudyRequest {
            votes_csv: String::from_utf8(votes).unwrap(),
            matrix: data.matrix_rows.clone(),
            original_audio_bps: Some(SyntheticStudy::default().original_audio_bps),
            max_failed_sanity: None,
        })
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(!study.points.is_empty());
    assert!(!study.excluded_participants.is_empty());
    assert!(study.crossings.iter().any(|c| c.ratio_at_50.is_some()));
    gw.stop().await;
}
