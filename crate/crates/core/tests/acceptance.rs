//! Acceptance suite: one pass/fail line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINED` are computed faithfully and fail at
//! their pinned tolerances; they are reported as documented failures and the
//! test asserts that they still fail, so a silent change in either direction
//! is caught.

use anderson_core::io::ArtifactSink;
use anderson_core::verify::{run_suite, VerifySettings, CRITERIA};

/// Renormalized drift of the lowest eigenvalue is not monotone in `ε` for
/// seed 1 at the mandated resolution.
const KNOWN_UNATTAINED: [usize; 1] = [3];

fn main() {
    let settings = VerifySettings::default();
    let mut sink = ArtifactSink::in_memory();
    let report = run_suite(&settings, &mut sink, |r| {
        let tag = match (r.passed(), KNOWN_UNATTAINED.contains(&r.id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented)",
            (false, false) => "FAIL",
        };
        println!(
            "criterion {:02} {tag} {}: {} ({:.1}s / {:.0}s)",
            r.id, r.title, r.summary, r.elapsed_s, r.budget_s
        );
    })
    .expect("suite runs");
    assert_eq!(report.criteria.len(), CRITERIA.len());
    let unexpected: Vec<usize> = report
        .criteria
        .iter()
        .filter(|r| r.passed() == KNOWN_UNATTAINED.contains(&r.id))
        .map(|r| r.id)
        .collect();
    let passed = report.criteria.iter().filter(|r| r.passed()).count();
    println!(
        "acceptance: {passed} passed, {} documented failures, {} unexpected",
        KNOWN_UNATTAINED.len(),
        unexpected.len()
    );
    assert!(unexpected.is_empty(), "criteria with an unexpected verdict: {unexpected:?}");
}
