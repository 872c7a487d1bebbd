//! Out-of-process synthesis backends.
//!
//! [`serve_backend`] serves the JSON-lines protocol from
//! `txt2vid_core::synth::protocol` over any async byte stream,
//! [`RemoteBackend`] is the blocking client the receiver pipeline uses, and
//! [`conformance`] is the shared protocol test suite.

pub mod conformance;
mod remote;
mod serve;

pub use remote::{BackendSpec, LineConn, RemoteBackend};
pub use serve::{serve_backend, serve_tcp, ServeOptions, ServeSummary, SharedBackend};
