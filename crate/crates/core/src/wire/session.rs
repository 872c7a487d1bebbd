//! Per-peer session state machine.
//!
//! The responder (receiver) accepts HELLO in `Idle` and answers HELLO_ACK,
//! which establishes the session. The initiator moves to `HelloSent` when it
//! sends HELLO and to `Established` on HELLO_ACK. Profiles may be registered
//! in any state but `Closed`, since the driving video can be delivered before
//! the session proper. Segments are only legal once established.
//!
//! Illegal input never changes the state; it yields a
//! [`Action::ProtocolError`] that the caller sends to the peer.

use std::collections::BTreeSet;

use super::{
    AudioSegmentPayload, ErrorCode, Frame, HelloAckPayload, HelloPayload, MessageType,
    ProfileAckPayload, ProtocolErrorPayload, SessionEndPayload, SessionProfile, TextSegmentPayload,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Initiator,
    Responder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PeerState {
    Idle,
    HelloSent,
    Established,
    Closed,
}

impl PeerState {
    pub const ALL: [PeerState; 4] = [
        PeerState::Idle,
        PeerState::HelloSent,
        PeerState::Established,
        PeerState::Closed,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccountingEvent {
    /// A REGISTER_PROFILE for an already registered user id.
    ProfileReplaced { user_id: u16 },
    /// Text and audio segments both appeared in one session.
    MixedModes,
    /// A segment arrived with a seq at or below one already seen.
    SeqRegression { seq: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Frame to send back to the peer.
    Reply(Frame),
    /// Frame the peer should receive as PROTOCOL_ERROR.
    ProtocolError(ProtocolErrorPayload),
    StoreProfile { profile: SessionProfile, replaced: bool },
    DeliverText { segment: TextSegmentPayload, text: String },
    DeliverAudio(AudioSegmentPayload),
    ProfileAcked(ProfileAckPayload),
    Account(AccountingEvent),
    Ended(SessionEndPayload),
    /// Session is over; the transport may be closed.
    Close,
}

#[derive(Debug, Clone)]
pub struct SessionMachine {
    role: Role,
    state: PeerState,
    session_id: Option<u32>,
    profiles: BTreeSet<u16>,
    last_seq: Option<u32>,
    saw_text: bool,
    saw_audio: bool,
    profile_replacements: u32,
}

impl SessionMachine {
    pub fn new(role: Role) -> Self {
        Self {
            role,
            state: PeerState::Idle,
            session_id: None,
            profiles: BTreeSet::new(),
            last_seq: None,
            saw_text: false,
            saw_audio: false,
            profile_replacements: 0,
        }
    }

    /// Responder that already holds profiles from an earlier session.
    pub fn with_known_profiles(role: Role, known: impl IntoIterator<Item = u16>) -> Self {
        let mut m = Self::new(role);
        m.profiles.extend(known);
        m
    }

    /// Forces a state; used when enumerating the transition table.
    pub fn with_state(mut self, state: PeerState) -> Self {
        self.state = state;
        self
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn state(&self) -> PeerState {
        self.state
    }

    pub fn session_id(&self) -> Option<u32> {
        self.session_id
    }

    /// Marks a profile as registered out of band (e.g. loaded from storage).
    pub fn learn_profile(&mut self, user_id: u16) {
        self.profiles.insert(user_id);
    }

    pub fn is_registered(&self, user_id: u16) -> bool {
        self.profiles.contains(&user_id)
    }

    pub fn profile_replacements(&self) -> u32 {
        self.profile_replacements
    }

    pub fn mixed_modes(&self) -> bool {
        self.saw_text && self.saw_audio
    }

    /// Initiator side: produce the HELLO to send.
    pub fn begin(&mut self, hello: HelloPayload) -> Result<Frame, ProtocolErrorPayload> {
        if self.role != Role::Initiator || self.state != PeerState::Idle {
            return Err(ProtocolErrorPayload::new(ErrorCode::IllegalState, "HELLO only from an idle initiator"));
        }
        self.session_id = Some(hello.session_id);
        self.state = PeerState::HelloSent;
        Ok(hello.into_frame())
    }

    /// Feeds one incoming message.
    pub fn step(&mut self, msg_type: MessageType, payload: &[u8]) -> Vec<Action> {
        if self.state == PeerState::Closed {
            return vec![illegal(msg_type, self.state)];
        }
        match self.role {
            Role::Responder => self.step_responder(msg_type, payload),
            Role::Initiator => self.step_initiator(msg_type, payload),
        }
    }

    pub fn step_frame(&mut self, frame: &Frame) -> Vec<Action> {
        self.step(frame.msg_type, &frame.payload)
    }

    fn step_responder(&mut self, msg_type: MessageType, payload: &[u8]) -> Vec<Action> {
        use MessageType::*;
        match (self.state, msg_type) {
            (PeerState::Idle, Hello) => match HelloPayload::decode(payload) {
                Ok(h) => {
                    self.session_id = Some(h.session_id);
                    self.state = PeerState::Established;
                    let ack = HelloAckPayload { session_id: h.session_id };
                    vec![Action::Reply(Frame::new(HelloAck, ack.encode()))]
                }
                Err(e) => vec![malformed(msg_type, e)],
            },
            (_, RegisterProfile) => match SessionProfile::decode(payload) {
                Ok(profile) => {
                    let replaced = !self.profiles.insert(profile.user_id);
                    let ack = ProfileAckPayload {
                        user_id: profile.user_id,
                        replaced,
                    };
                    let mut actions = vec![Action::Reply(Frame::new(ProfileAck, ack.encode()))];
                    if replaced {
                        self.profile_replacements += 1;
                        actions.push(Action::Account(AccountingEvent::ProfileReplaced {
                            user_id: profile.user_id,
                        }));
                    }
                    actions.insert(0, Action::StoreProfile { profile, replaced });
                    actions
                }
                Err(e) => vec![malformed(msg_type, e)],
            },
            (PeerState::Established, TextSegment) => {
                let segment = match TextSegmentPayload::decode(payload) {
                    Ok(s) => s,
                    Err(e) => return vec![malformed(msg_type, e)],
                };
                if let Some(err) = self.check_segment(segment.session_id, segment.user_id) {
                    return vec![err];
                }
                let text = match segment.text() {
                    Ok(t) => t,
                    Err(e) => return vec![malformed(msg_type, e)],
                };
                let mut actions = self.note_segment(segment.seq, true);
                actions.push(Action::DeliverText { segment, text });
                actions
            }
            (PeerState::Established, AudioSegment) => {
                let segment = match AudioSegmentPayload::decode(payload) {
                    Ok(s) => s,
                    Err(e) => return vec![malformed(msg_type, e)],
                };
                if let Some(err) = self.check_segment(segment.session_id, segment.user_id) {
                    return vec![err];
                }
                let mut actions = self.note_segment(segment.seq, false);
                actions.push(Action::DeliverAudio(segment));
                actions
            }
            (PeerState::Idle | PeerState::Established, SessionEnd) => match SessionEndPayload::decode(payload) {
                Ok(end) => {
                    if self.session_id.is_some_and(|id| id != end.session_id) {
                        return vec![mismatch(end.session_id)];
                    }
                    self.state = PeerState::Closed;
                    vec![Action::Ended(end), Action::Close]
                }
                Err(e) => vec![malformed(msg_type, e)],
            },
            (_, ProtocolError) => {
                self.state = PeerState::Closed;
                vec![Action::Close]
            }
            (state, t) => vec![illegal(t, state)],
        }
    }

    fn step_initiator(&mut self, msg_type: MessageType, payload: &[u8]) -> Vec<Action> {
        use MessageType::*;
        match (self.state, msg_type) {
            (PeerState::HelloSent, HelloAck) => match HelloAckPayload::decode(payload) {
                Ok(ack) if Some(ack.session_id) == self.session_id => {
                    self.state = PeerState::Established;
                    vec![]
                }
                Ok(ack) => vec![mismatch(ack.session_id)],
                Err(e) => vec![malformed(msg_type, e)],
            },
            (PeerState::HelloSent | PeerState::Established | PeerState::Idle, ProfileAck) => {
                match ProfileAckPayload::decode(payload) {
                    Ok(ack) => {
                        self.profiles.insert(ack.user_id);
                        vec![Action::ProfileAcked(ack)]
                    }
                    Err(e) => vec![malformed(msg_type, e)],
                }
            }
            (_, ProtocolError) => {
                self.state = PeerState::Closed;
                vec![Action::Close]
            }
            (state, t) => vec![illegal(t, state)],
        }
    }

    fn check_segment(&self, session_id: u32, user_id: u16) -> Option<Action> {
        if self.session_id != Some(session_id) {
            return Some(mismatch(session_id));
        }
        if !self.profiles.contains(&user_id) {
            return Some(Action::ProtocolError(ProtocolErrorPayload::new(
                ErrorCode::UnknownProfile,
                format!("unknown profile {user_id}"),
            )));
        }
        None
    }

    fn note_segment(&mut self, seq: u32, is_text: bool) -> Vec<Action> {
        let mut actions = Vec::new();
        let had_mixed = self.mixed_modes();
        if is_text {
            self.saw_text = true;
        } else {
            self.saw_audio = true;
        }
        if !had_mixed && self.mixed_modes() {
            actions.push(Action::Account(AccountingEvent::MixedModes));
        }
        match self.last_seq {
            Some(last) if seq <= last => actions.push(Action::Account(AccountingEvent::SeqRegression { seq })),
            _ => self.last_seq = Some(seq),
        }
        actions
    }
}

fn illegal(t: MessageType, state: PeerState) -> Action {
    Action::ProtocolError(ProtocolErrorPayload::new(
        ErrorCode::IllegalState,
        format!("{t} not allowed in {state:?}"),
    ))
}

fn malformed(t: MessageType, e: impl std::fmt::Display) -> Action {
    Action::ProtocolError(ProtocolErrorPayload::new(ErrorCode::Malformed, format!("malformed {t}: {e}")))
}

fn mismatch(got: u32) -> Action {
    Action::ProtocolError(ProtocolErrorPayload::new(
        ErrorCode::SessionMismatch,
        format!("session id {got} does not match this session"),
    ))
}
