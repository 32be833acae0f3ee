use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::validator::{OutcomeKind, ValidationOutcome};

static PATH_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\S*[/\\]\S*").unwrap());
static HEX_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"0[xX][0-9a-fA-F]+").unwrap());
static DIGITS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("outcome `{0}` is not a crash or timeout")]
pub struct NotACrash(pub OutcomeKind);

/// Masks paths, hex literals and remaining digit runs, then collapses
/// whitespace.
pub fn normalize_diagnostic(excerpt: &str) -> String {
    let s = PATH_RE.replace_all(excerpt, "<path>");
    let s = HEX_RE.replace_all(&s, "<hex>");
    let s = DIGITS_RE.replace_all(&s, "<n>");
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Signature from the stored fields of an outcome record.
pub fn signature_of(kind: OutcomeKind, exit: &str, excerpt: &str) -> Result<String, NotACrash> {
    if !matches!(kind, OutcomeKind::Crash | OutcomeKind::Timeout) {
        return Err(NotACrash(kind));
    }
    let mut h = Sha256::new();
    for part in [kind.to_string().as_str(), exit, &normalize_diagnostic(excerpt)] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    Ok(hex::encode(&h.finalize()[..8]))
}

/// Stable 16-hex-digit hash of termination kind, exit detail and the
/// normalized diagnostic excerpt.
pub fn crash_signature(outcome: &ValidationOutcome) -> Result<String, NotACrash> {
    signature_of(outcome.kind, &outcome.exit.to_string(), &outcome.excerpt)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashBucket {
    pub signature: String,
    pub kind: OutcomeKind,
    /// Normalized excerpt shared by every member.
    pub diagnostic: String,
    pub members: Vec<String>,
    /// Ordinal of the first member in the outcome log.
    pub first_seen: u64,
}

/// Crash buckets in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Triage {
    buckets: Vec<CrashBucket>,
    by_sig: HashMap<String, usize>,
}

impl Triage {
    pub fn add(&mut self, signature: &str, kind: OutcomeKind, excerpt: &str, model: &str, ordinal: u64) {
        match self.by_sig.get(signature) {
            Some(&i) => self.buckets[i].members.push(model.to_string()),
            None => {
                self.by_sig.insert(signature.to_string(), self.buckets.len());
                self.buckets.push(CrashBucket {
                    signature: signature.to_string(),
                    kind,
                    diagnostic: normalize_diagnostic(excerpt),
                    members: vec![model.to_string()],
                    first_seen: ordinal,
                });
            }
        }
    }

    pub fn buckets(&self) -> &[CrashBucket] {
        &self.buckets
    }

    pub fn into_buckets(self) -> Vec<CrashBucket> {
        self.buckets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::validator::ExitDetail;
    use std::time::Duration;

    fn outcome(kind: OutcomeKind, exit: ExitDetail, excerpt: &str) -> ValidationOutcome {
        ValidationOutcome {
            kind,
            exit,
            excerpt: excerpt.into(),
            wall_time: Duration::ZERO,
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_diagnostic("abort in /tmp/run 3/m_17.mdl at 0xDEADbeef line 42"),
            "abort in <path> <path> at <hex> line <n>"
        );
        assert_eq!(normalize_diagnostic(r"Fatal  C:\x\y.mdl  "), "Fatal <path>");
    }

    #[test]
    fn paths_do_not_split_buckets() {
        let a = outcome(OutcomeKind::Crash, ExitDetail::Signal(6), "Assertion failed in /a/b/model_1.mdl");
        let b = outcome(OutcomeKind::Crash, ExitDetail::Signal(6), "Assertion failed in /c/model_99.mdl");
        assert_eq!(crash_signature(&a).unwrap(), crash_signature(&b).unwrap());
        assert_eq!(crash_signature(&a).unwrap().len(), 16);
    }

    #[test]
    fn distinct_modes_separate() {
        let crash = outcome(OutcomeKind::Crash, ExitDetail::Signal(6), "hang");
        let segv = outcome(OutcomeKind::Crash, ExitDetail::Signal(11), "hang");
        let timeout = outcome(OutcomeKind::Timeout, ExitDetail::Deadline, "hang");
        let other = outcome(OutcomeKind::Crash, ExitDetail::Signal(6), "different");
        let sigs: Vec<_> = [&crash, &segv, &timeout, &other]
            .iter()
            .map(|o| crash_signature(o).unwrap())
            .collect();
        for i in 0..sigs.len() {
            for j in i + 1..sigs.len() {
                assert_ne!(sigs[i], sigs[j]);
            }
        }
    }

    #[test]
    fn valid_is_not_a_crash() {
        let v = outcome(OutcomeKind::Valid, ExitDetail::Code(0), "");
        assert_eq!(crash_signature(&v), Err(NotACrash(OutcomeKind::Valid)));
        let r = outcome(OutcomeKind::Rejected, ExitDetail::Code(1), "");
        assert!(crash_signature(&r).is_err());
    }

    #[test]
    fn buckets_group_by_signature() {
        let mut t = Triage::default();
        t.add("s1", OutcomeKind::Crash, "x 1", "m0", 0);
        t.add("s2", OutcomeKind::Timeout, "", "m1", 1);
        t.add("s1", OutcomeKind::Crash, "x 2", "m2", 2);
        let b = t.buckets();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].members, ["m0", "m2"]);
        assert_eq!(b[0].diagnostic, "x <n>");
        assert_eq!(b[1].first_seen, 1);
    }
}
