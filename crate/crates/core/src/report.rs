//! Verification reports.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Short label of the statement being exercised.
    pub anchor: String,
    pub status: Status,
    /// Positive when the inequality holds with room to spare.
    pub margin: f64,
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Times `body`, which returns `(pass, margin, detail)`; errors become failures.
    pub fn run<F>(name: &str, anchor: &str, body: F) -> Self
    where
        F: FnOnce() -> Result<(bool, f64, Option<String>)>,
    {
        let start = Instant::now();
        let outcome = body();
        let runtime_ms = start.elapsed().as_millis() as u64;
        let (status, margin, detail) = match outcome {
            Ok((pass, margin, detail)) => (
                if pass { Status::Pass } else { Status::Fail },
                margin,
                detail,
            ),
            Err(e) => (Status::Fail, f64::NAN, Some(e.to_string())),
        };
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            status,
            margin,
            runtime_ms,
            detail,
        }
    }

    pub fn skip(name: &str, anchor: &str, reason: &str) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            status: Status::Skip,
            margin: 0.0,
            runtime_ms: 0,
            detail: Some(reason.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub config_echo: serde_json::Value,
    pub version: String,
}

impl VerificationReport {
    /// Sorts checks by name and rejects duplicates.
    pub fn new(mut checks: Vec<Check>, config_echo: serde_json::Value) -> Result<Self> {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let mut seen = BTreeSet::new();
        for c in &checks {
            if !seen.insert(c.name.as_str()) {
                return Err(LabError::Precondition(format!(
                    "duplicate check name {:?}",
                    c.name
                )));
            }
        }
        Ok(Self {
            checks,
            config_echo,
            version: crate::VERSION.to_string(),
        })
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_duplicates() {
        let a = Check::run("b", "x", || Ok((true, 1.0, None)));
        let b = Check::run("a", "x", || Ok((false, -1.0, None)));
        let rep = VerificationReport::new(vec![a.clone(), b], serde_json::json!({})).unwrap();
        assert_eq!(rep.checks[0].name, "a");
        assert_eq!(rep.exit_code(), 1);
        assert!(VerificationReport::new(vec![a.clone(), a], serde_json::json!({})).is_err());
    }

    #[test]
    fn errors_fail_and_skips_do_not() {
        let e = Check::run("e", "x", || Err(LabError::Domain("boom".into())));
        assert_eq!(e.status, Status::Fail);
        assert!(e.detail.unwrap().contains("boom"));
        let s = Check::skip("s", "x", "not applicable");
        let rep = VerificationReport::new(vec![s], serde_json::Value::Null).unwrap();
        assert!(rep.all_passed());
    }
}
