use std::collections::{BTreeMap, BTreeSet};

use tracing::warn;

use super::PreferenceRecord;

/// Participants who fail more than this many sanity checks are dropped.
pub const DEFAULT_MAX_FAILED_SANITY: usize = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SanityReport {
    /// Non-sanity votes of the participants that were kept.
    pub kept: Vec<PreferenceRecord>,
    pub kept_participants: BTreeSet<String>,
    /// Excluded participant -> (failed, checked).
    pub excluded: BTreeMap<String, (usize, usize)>,
    /// Set when there was nothing to check against.
    pub warning: Option<String>,
}

/// Drops every participant failing more than `max_failed` of their sanity
/// pairs. Sanity pairs without an expected answer are not counted.
pub fn filter_sanity(records: &[PreferenceRecord], max_failed: usize) -> SanityReport {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut checkable = 0;
    for r in records {
        tally.entry(&r.participant_id).or_default();
        if let (true, Some(expected)) = (r.is_sanity_check, r.expected) {
            checkable += 1;
            let t = tally.get_mut(r.participant_id.as_str()).expect("inserted");
            t.1 += 1;
            if r.vote != expected {
                t.0 += 1;
            }
        }
    }
    let mut report = SanityReport::default();
    if checkable == 0 {
        let msg = "no sanity-check answers in the votes; keeping every participant".to_string();
        warn!("{msg}");
        report.warning = Some(msg);
    }
    for (p, (failed, checked)) in &tally {
        if *failed > max_failed {
            report.excluded.insert(p.to_string(), (*failed, *checked));
        } else {
            report.kept_participants.insert(p.to_string());
        }
    }
    report.kept = records
        .iter()
        .filter(|r| !r.is_sanity_check && report.kept_participants.contains(&r.participant_id))
        .cloned()
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::{Txt2VidArm, Vote};

    fn sanity(p: &str, i: usize, pass: bool) -> PreferenceRecord {
        PreferenceRecord {
            participant_id: p.into(),
            content_id: "c".into(),
            pair_id: format!("s{i}"),
            codec_arm: None,
            txt2vid_arm: Txt2VidArm::ResembleAudio,
            vote: if pass { Vote::Codec } else { Vote::Txt2vid },
            is_sanity_check: true,
            expected: Some(Vote::Codec),
        }
    }

    fn vote(p: &str) -> PreferenceRecord {
        PreferenceRecord {
            pair_id: "x".into(),
            codec_arm: Some(crate::bench::table1_grid()[0]),
            is_sanity_check: false,
            expected: None,
            ..sanity(p, 0, true)
        }
    }

    #[test]
    fn threshold_rule() {
        let mut records = vec![vote("good"), vote("meh"), vote("bad")];
        for i in 0..3 {
            records.push(sanity("good", i, true));
            records.push(sanity("meh", i, i != 0));
            records.push(sanity("bad", i, i == 0));
        }
        let r = filter_sanity(&records, DEFAULT_MAX_FAILED_SANITY);
        assert_eq!(r.kept_participants, ["good".to_string(), "meh".to_string()].into());
        assert_eq!(r.excluded["bad"], (2, 3));
        assert_eq!(r.kept.len(), 2);
        assert!(r.kept.iter().all(|k| !k.is_sanity_check));
        assert!(r.warning.is_none());
    }

    #[test]
    fn no_metadata_passes_through() {
        let records = vec![vote("a"), vote("b")];
        let r = filter_sanity(&records, 1);
        assert_eq!(r.kept, records);
        assert!(r.warning.is_some());
    }
}
