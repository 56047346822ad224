//! The full acceptance batch, one line per criterion.
//!
//! Lines go straight to stderr so they appear whether or not the harness
//! captures output.

use std::collections::BTreeMap;
use std::io::Write;

use bdenet_cli::validate::{validate_suite, validate_suite_with, Check, CriterionReport, ValidateOptions};

fn without_runtime(report: &CriterionReport) -> Vec<Check> {
    report.checks.iter().filter(|c| c.name != "runtime").cloned().collect()
}

#[test]
fn acceptance_criteria() {
    // Start below the harness's own `test ... ` prefix.
    let _ = writeln!(std::io::stderr());
    let report = validate_suite_with(&ValidateOptions::default(), |c| {
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{}", c.headline());
        let _ = write!(err, "{}", c.details());
    });
    let failed: Vec<&str> = report
        .criteria
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.id.as_str())
        .collect();
    let _ = writeln!(
        std::io::stderr(),
        "{}/{} criteria passed",
        report.criteria.len() - failed.len(),
        report.criteria.len()
    );
    assert_eq!(report.criteria.len(), 13);
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

#[test]
fn tolerance_scale_touches_one_criterion() {
    let only = Some(vec!["1".to_string(), "11".to_string(), "12".to_string()]);
    let base = validate_suite(&ValidateOptions {
        only: only.clone(),
        ..ValidateOptions::default()
    });
    let tightened = validate_suite(&ValidateOptions {
        only,
        tolerance_scale: BTreeMap::from([("11".to_string(), 0.0)]),
        ..ValidateOptions::default()
    });
    assert!(base.get("11").unwrap().passed);
    assert!(!tightened.get("11").unwrap().passed);
    for id in ["1", "12"] {
        let (a, b) = (base.get(id).unwrap(), tightened.get(id).unwrap());
        assert!(a.passed && b.passed, "criterion {id}");
        assert_eq!(without_runtime(a), without_runtime(b), "criterion {id}");
    }
}
