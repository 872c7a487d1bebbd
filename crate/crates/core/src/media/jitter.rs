//! Receiver-side jitter buffer.
//!
//! A segment captured at sender time `c` plays out at receiver time
//! `epoch + c + buffer_ms`, or on arrival if it shows up later than that.
//! Segments leave in seq order. When the next expected seq is missing and
//! its successor's playout time has passed, the missing seq is given up and
//! a gap marker is emitted in its place.

use std::collections::BTreeMap;

use super::types::PcmAudio;

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentBody {
    Text(String),
    Audio(PcmAudio),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub seq: u32,
    pub capture_ts_ms: u64,
    pub user_id: u16,
    pub body: SegmentBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Released {
    Segment {
        segment: Segment,
        /// Receiver time of the segment's capture.
        capture_at_ms: u64,
    },
    Gap {
        seq: u32,
        fill_ms: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    /// Already held, or its seq was released or given up.
    Duplicate,
}

#[derive(Debug, Clone)]
pub struct JitterBuffer {
    buffer_ms: u64,
    epoch_ms: u64,
    /// Release on arrival, ignoring capture timing (offline decode).
    immediate: bool,
    gap_fill_ms: u32,
    next_seq: u32,
    held: BTreeMap<u32, (Segment, u64)>,
    duplicates: u64,
    gaps: u64,
}

impl JitterBuffer {
    /// `epoch_ms` is the receiver time that corresponds to sender time 0.
    pub fn new(buffer_ms: u32, epoch_ms: u64, gap_fill_ms: u32) -> Self {
        Self {
            buffer_ms: buffer_ms as u64,
            epoch_ms,
            immediate: false,
            gap_fill_ms,
            next_seq: 0,
            held: BTreeMap::new(),
            duplicates: 0,
            gaps: 0,
        }
    }

    /// Buffer that releases segments as soon as they are next in order.
    pub fn immediate(gap_fill_ms: u32) -> Self {
        Self {
            immediate: true,
            ..Self::new(0, 0, gap_fill_ms)
        }
    }

    pub fn set_epoch(&mut self, epoch_ms: u64) {
        self.epoch_ms = epoch_ms;
    }

    pub fn is_empty(&self) -> bool {
        self.held.is_empty()
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn gaps(&self) -> u64 {
        self.gaps
    }

    pub fn next_seq(&self) -> u32 {
        self.next_seq
    }

    fn capture_at(&self, seg: &Segment) -> u64 {
        self.epoch_ms + seg.capture_ts_ms
    }

    pub fn push(&mut self, segment: Segment, now_ms: u64) -> PushOutcome {
        if segment.seq < self.next_seq || self.held.contains_key(&segment.seq) {
            self.duplicates += 1;
            return PushOutcome::Duplicate;
        }
        let release_at = if self.immediate {
            now_ms
        } else {
            (self.capture_at(&segment) + self.buffer_ms).max(now_ms)
        };
        self.held.insert(segment.seq, (segment, release_at));
        PushOutcome::Accepted
    }

    /// Earliest time at which [`JitterBuffer::poll`] can make progress.
    pub fn next_deadline(&self) -> Option<u64> {
        // The lowest held seq gates everything behind it.
        self.held.values().next().map(|(_, t)| *t)
    }

    pub fn poll(&mut self, now_ms: u64) -> Vec<Released> {
        let mut out = Vec::new();
        while let Some((&lowest, &(_, release_at))) = self.held.first_key_value() {
            if release_at > now_ms {
                break;
            }
            while self.next_seq < lowest {
                out.push(self.gap());
            }
            let (segment, _) = self.held.remove(&lowest).expect("present");
            self.next_seq = lowest + 1;
            let capture_at_ms = self.capture_at(&segment);
            out.push(Released::Segment { segment, capture_at_ms });
        }
        out
    }

    /// End of stream: releases everything still held, in order, with gaps
    /// for any seq that never arrived.
    pub fn flush(&mut self) -> Vec<Released> {
        let mut out = Vec::new();
        while let Some((&lowest, _)) = self.held.iter().next() {
            while self.next_seq < lowest {
                out.push(self.gap());
            }
            let (segment, _) = self.held.remove(&lowest).expect("present");
            self.next_seq = lowest + 1;
            let capture_at_ms = self.capture_at(&segment);
            out.push(Released::Segment { segment, capture_at_ms });
        }
        out
    }

    fn gap(&mut self) -> Released {
        let r = Released::Gap {
            seq: self.next_seq,
            fill_ms: self.gap_fill_ms,
        };
        self.next_seq += 1;
        self.gaps += 1;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(seq: u32, capture: u64) -> Segment {
        Segment {
            seq,
            capture_ts_ms: capture,
            user_id: 1,
            body: SegmentBody::Text(format!("s{seq}")),
        }
    }

    fn seqs(r: &[Released]) -> Vec<i64> {
        r.iter()
            .map(|x| match x {
                Released::Segment { segment, .. } => segment.seq as i64,
                Released::Gap { seq, .. } => -(*seq as i64) - 1,
            })
            .collect()
    }

    #[test]
    fn in_order_passes_through_after_buffer() {
        let mut jb = JitterBuffer::new(500, 0, 1000);
        jb.push(seg(0, 0), 10);
        assert!(jb.poll(499).is_empty());
        assert_eq!(jb.next_deadline(), Some(500));
        let out = jb.poll(500);
        assert_eq!(seqs(&out), [0]);
    }

    #[test]
    fn added_delay_bounded_by_buffer() {
        let mut jb = JitterBuffer::new(500, 0, 1000);
        for (i, arrival) in [(0u32, 0u64), (1, 1200), (2, 2100)] {
            jb.push(seg(i, i as u64 * 1000), arrival);
            let release = jb.next_deadline().unwrap();
            assert!(release - arrival <= 500);
            assert_eq!(seqs(&jb.poll(release)), [i as i64]);
        }
    }

    #[test]
    fn reorders() {
        let mut jb = JitterBuffer::new(100, 0, 1000);
        jb.push(seg(0, 0), 0);
        jb.push(seg(2, 20), 5);
        jb.push(seg(1, 10), 8);
        assert_eq!(seqs(&jb.poll(1000)), [0, 1, 2]);
    }

    #[test]
    fn duplicates_dropped() {
        let mut jb = JitterBuffer::new(0, 0, 1000);
        assert_eq!(jb.push(seg(0, 0), 0), PushOutcome::Accepted);
        assert_eq!(jb.push(seg(0, 0), 0), PushOutcome::Duplicate);
        jb.poll(0);
        assert_eq!(jb.push(seg(0, 0), 1), PushOutcome::Duplicate);
        assert_eq!(jb.duplicates(), 2);
    }

    #[test]
    fn missing_seq_becomes_gap_on_timeout() {
        // seq 1 never arrives; seq 2 (captured at 2000) plays out at 2500.
        let mut jb = JitterBuffer::new(500, 0, 750);
        jb.push(seg(0, 0), 0);
        assert_eq!(seqs(&jb.poll(500)), [0]);
        jb.push(seg(2, 2000), 2100);
        assert!(jb.poll(2499).is_empty());
        assert_eq!(jb.next_deadline(), Some(2500));
        let out = jb.poll(2500);
        assert_eq!(out[0], Released::Gap { seq: 1, fill_ms: 750 });
        assert_eq!(seqs(&out), [0 - 2, 2]);
        assert_eq!(jb.gaps(), 1);
        // The straggler is now a duplicate.
        assert_eq!(jb.push(seg(1, 1000), 2600), PushOutcome::Duplicate);
    }

    #[test]
    fn late_segment_released_on_arrival() {
        let mut jb = JitterBuffer::new(500, 0, 1000);
        jb.push(seg(0, 0), 900);
        assert_eq!(jb.next_deadline(), Some(900));
    }

    #[test]
    fn epoch_shifts_playout() {
        let mut jb = JitterBuffer::new(500, 10_000, 1000);
        jb.push(seg(0, 0), 10_000);
        assert_eq!(jb.next_deadline(), Some(10_500));
        let out = jb.poll(10_500);
        assert!(matches!(out[0], Released::Segment { capture_at_ms: 10_000, .. }));
    }

    #[test]
    fn flush_fills_gaps() {
        let mut jb = JitterBuffer::new(5000, 0, 1000);
        jb.push(seg(1, 0), 0);
        jb.push(seg(3, 0), 0);
        assert_eq!(seqs(&jb.flush()), [-1, 1, -3, 3]);
        assert!(jb.is_empty());
    }

    #[test]
    fn immediate_mode_ignores_capture_time() {
        let mut jb = JitterBuffer::immediate(1000);
        jb.push(seg(0, 30_000), 0);
        assert_eq!(seqs(&jb.poll(0)), [0]);
    }
}
