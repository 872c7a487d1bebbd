mod common;

use std::process::{Command, Output};

use common::*;
use txt2vid_client::GatewayClient;

fn txt2vid(gateway: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_txt2vid"))
        .arg("--gateway")
        .arg(gateway)
        .args(args)
        .output()
        .unwrap()
}

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn txt2vid_commands_go_through_the_gateway() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Running::start(dir.path());
    let transcript = dir.path().join("speech.txt");
    std::fs::write(&transcript, TEXT).unwrap();
    let t = transcript.to_str().unwrap();

    let out = stdout(&txt2vid(&gw.http(), &["bitrate", t, "--duration-ms", "6000"]));
    assert!(out.contains("payload only"), "{out}");
    assert!(out.contains("payload+framing"), "{out}");

    let json: serde_json::Value =
        serde_json::from_str(&stdout(&txt2vid(&gw.http(), &["bitrate", t, "--duration-ms", "6000", "--json"]))).unwrap();
    assert_eq!(json["payload_only"]["segments"], 3);
    assert_eq!(json["payload_and_framing"]["policy"], "payload_and_framing");

    let wire = gw.gateway.wire_addr.to_string();
    let video = dir.path().join("face.mp4");
    std::fs::write(&video, b"fake video bytes").unwrap();
    let out = stdout(&txt2vid(
        &gw.http(),
        &["send", t, "--duration-ms", "3000", "--wire", &wire, "--session-id", "5", "--user-id", "2", "--driving-video", video.to_str().unwrap()],
    ));
    assert!(out.contains("3 segments"), "{out}");
    let client = GatewayClient::new(&gw.http()).unwrap();
    wait_done(&client, 5);
    // Second session reuses the stored profile.
    stdout(&txt2vid(
        &gw.http(),
        &["send", t, "--duration-ms", "3000", "--wire", &wire, "--session-id", "6", "--user-id", "2"],
    ));
    wait_done(&client, 6);

    let out = stdout(&txt2vid(&gw.http(), &["sessions"]));
    assert_eq!(out.lines().count(), 2, "{out}");
    assert!(out.contains("finished"), "{out}");
    let out = stdout(&txt2vid(&gw.http(), &["profiles"]));
    assert!(out.contains("MP4"), "{out}");
    let one: serde_json::Value = serde_json::from_str(&stdout(&txt2vid(&gw.http(), &["session", "6"]))).unwrap();
    assert_eq!(one["id"], 6);

    let bad = txt2vid(&gw.http(), &["bitrate", t]);
    assert!(!bad.status.success());
}

#[test]
fn txt2vid_ratios_and_study_use_the_service() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Running::start(dir.path());
    let reference = dir.path().join("t1.csv");
    stdout(&bench(&["reference", "--out", reference.to_str().unwrap()]));
    let out = stdout(&txt2vid(&gw.http(), &["ratios", "--matrix", reference.to_str().unwrap(), "--txt2vid-bps", "85"]));
    assert!(out.starts_with("content_id,"), "{out}");
    assert_eq!(out.lines().count(), 15);

    let data = txt2vid_core::study::synthetic_study(&Default::default());
    let votes = dir.path().join("votes.csv");
    txt2vid_core::study::write_votes(&data.records, std::fs::File::create(&votes).unwrap()).unwrap();
    let matrix = dir.path().join("matrix.json");
    txt2vid_core::bench::write_rows(
        &data.matrix_rows,
        txt2vid_core::bench::MatrixFormat::Json,
        std::fs::File::create(&matrix).unwrap(),
    )
    .unwrap();
    let result = dir.path().join("curve.json");
    let out = stdout(&txt2vid(
        &gw.http(),
        &[
            "study",
            "--votes",
            votes.to_str().unwrap(),
            "--matrix",
            matrix.to_str().unwrap(),
            "--original-audio-bps",
            "10000",
            "--out",
            result.to_str().unwrap(),
        ],
    ));
    assert!(out.contains("50% at ratio"), "{out}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(result).unwrap()).unwrap();
    assert!(v["points"].as_array().unwrap().len() > 10);
}

#[test]
fn bench_ratios_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("t1.json");
    stdout(&bench(&["reference", "--out", reference.to_str().unwrap()]));
    let out = stdout(&bench(&["ratios", "--matrix", reference.to_str().unwrap(), "--txt2vid-bps", "85"]));
    assert!(out.contains(" 206\n") && out.contains(" 1519\n"), "{out}");

    let missing = bench(&["ratios", "--matrix", "/nonexistent.csv", "--txt2vid-bps", "85"]);
    assert_eq!(missing.status.code(), Some(1));
    let zero = bench(&["ratios", "--matrix", reference.to_str().unwrap(), "--txt2vid-bps", "0"]);
    assert_eq!(zero.status.code(), Some(1));
    let no_tool = bench(&[
        "run",
        "--input",
        "synthetic",
        "--out",
        dir.path().join("m.csv").to_str().unwrap(),
        "--transcoder-path",
        "/nonexistent/ffmpeg",
        "--workdir",
        dir.path().join("w").to_str().unwrap(),
    ]);
    assert_eq!(no_tool.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_tool.stderr).contains("transcoder"));
}
