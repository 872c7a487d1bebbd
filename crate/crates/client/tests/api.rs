mod common;

use common::*;
use txt2vid_client::{send_session, ClientError, GatewayClient, SendError, SendOptions};
use txt2vid_core::api::{BitrateRequest, Segmentation, SessionState};
use txt2vid_core::bench::table1_reference_rows;
use txt2vid_core::text::{payload_bitrate, AccountingPolicy, CompressorId};
use txt2vid_core::wire::{ErrorCode, SessionProfile};

fn request(policy: AccountingPolicy) -> BitrateRequest {
    BitrateRequest {
        text: TEXT.into(),
        segmentation: Segmentation::Sentence,
        compressor: CompressorId::Bzip2,
        duration_ms: Some(6000),
        timing_csv: None,
        policy,
    }
}

#[test]
fn operations_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Running::start(dir.path());
    let c = GatewayClient::new(&format!("{}/", gw.http())).unwrap();
    c.health().unwrap();

    let r = c.bitrate(&request(AccountingPolicy::PayloadOnly)).unwrap();
    let framed = c.bitrate(&request(AccountingPolicy::PayloadAndFraming)).unwrap();
    assert_eq!(r.transcript.segments.len(), 3);
    assert_eq!(r.report.accounted_duration_ms, 6000);
    assert_eq!(framed.report.overhead_bits, 3 * 13 * 8);
    let seconds = 6.0;
    assert_eq!(framed.report.bps, (r.report.payload_bits + 3 * 13 * 8) as f64 / seconds);

    let rows = c.ratios(table1_reference_rows(), 85.0).unwrap();
    assert!(rows.iter().all(|r| r.ratio.is_some()));

    let err = c.ratios(table1_reference_rows(), 0.0).unwrap_err();
    assert!(matches!(err, ClientError::Api { status: 400, .. }), "{err}");
    assert!(matches!(c.session(5).unwrap_err(), ClientError::Api { status: 404, .. }));
}

#[test]
fn sent_sessions_show_up_with_matching_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Running::start(dir.path());
    let c = GatewayClient::new(&gw.http()).unwrap();
    let transcript = c.bitrate(&request(AccountingPolicy::PayloadOnly)).unwrap().transcript;
    let profile = SessionProfile {
        user_id: 3,
        voice_profile_ref: "narrator".into(),
        container_tag: *b"MP4 ",
        driving_video: b"not really an mp4".to_vec(),
    };
    let trace = transcript.to_trace(21, 3, CompressorId::Bzip2, Some(&profile));
    send_session(gw.gateway.wire_addr, &trace, &SendOptions::default()).unwrap();
    let info = wait_done(&c, 21);
    assert_eq!(info.state, SessionState::Finished);
    assert_eq!(info.report.unwrap(), payload_bitrate(&trace, AccountingPolicy::PayloadOnly).unwrap());
    assert_eq!(info.stats.segments, 3);
    assert_eq!(c.sessions().unwrap().len(), 1);
    let profiles = c.profiles().unwrap();
    assert_eq!(profiles[0].user_id, 3);
    assert_eq!(profiles[0].container_tag, "MP4 ");

    // Unknown user without a profile is refused by the receiver.
    let orphan = transcript.to_trace(22, 40, CompressorId::Bzip2, None);
    let err = send_session(gw.gateway.wire_addr, &orphan, &SendOptions::default());
    // The segment is rejected after HELLO; the sender may only notice the
    // close when it next writes or reads.
    if let Err(SendError::Rejected(p)) = &err {
        assert_eq!(p.code, ErrorCode::UnknownProfile);
    }
    let info = wait_done(&c, 22);
    assert_eq!(info.stats.segments, 0);
}

#[test]
fn unreachable_gateway_is_an_http_error() {
    let c = GatewayClient::new("http://127.0.0.1:1").unwrap();
    assert!(matches!(c.health().unwrap_err(), ClientError::Http(_)));
}
