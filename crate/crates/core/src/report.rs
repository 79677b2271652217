//! Machine-readable check and suite reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::action::GrassmannAction;
use crate::error::{Error, Result};
use crate::target::TargetSpec;
use crate::worldsheet::{GridSpec, LambdaSpec, Scheme};

/// The verification checks the suite knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    ClassicalIdentity,
    LagrangianA1,
    SuperIdentity,
    Construction,
    ElExtremality,
    Equivalence,
    NijenhuisContraction,
    OperatorEquivalence,
    A1A2,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::ClassicalIdentity,
        Check::LagrangianA1,
        Check::SuperIdentity,
        Check::Construction,
        Check::ElExtremality,
        Check::Equivalence,
        Check::NijenhuisContraction,
        Check::OperatorEquivalence,
        Check::A1A2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::ClassicalIdentity => "classical_identity",
            Check::LagrangianA1 => "lagrangian_a1",
            Check::SuperIdentity => "super_identity",
            Check::Construction => "construction",
            Check::ElExtremality => "el_extremality",
            Check::Equivalence => "equivalence",
            Check::NijenhuisContraction => "nijenhuis_contraction",
            Check::OperatorEquivalence => "operator_equivalence",
            Check::A1A2 => "a1_a2",
        }
    }

    /// Parses a comma-separated list; duplicates are dropped, order kept.
    pub fn parse_list(s: &str) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let c: Check = part.parse()?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty check list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

/// One evaluated identity or residual bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    /// which field the check ran on, e.g. `constructed` or `random/3`
    pub case: String,
    pub lhs: Value,
    pub rhs_terms: Vec<Value>,
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub grid: GridSpec,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    /// `pass` is `defect ≤ tolerance`; NaN defects fail.
    pub fn new(check: Check, case: impl Into<String>, grid: GridSpec, lhs: Value, rhs_terms: Vec<Value>, defect: f64, tolerance: f64) -> Self {
        Self {
            check: check.name().to_string(),
            case: case.into(),
            lhs,
            rhs_terms,
            defect,
            tolerance,
            pass: defect <= tolerance,
            grid,
            scheme: grid.scheme,
            skipped: None,
            note: None,
        }
    }

    pub fn skipped(check: Check, case: impl Into<String>, grid: GridSpec, reason: impl Into<String>) -> Self {
        Self {
            check: check.name().to_string(),
            case: case.into(),
            lhs: Value::Null,
            rhs_terms: Vec::new(),
            defect: 0.0,
            tolerance: 0.0,
            pass: true,
            grid,
            scheme: grid.scheme,
            skipped: Some(reason.into()),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Extra condition on top of the defect bound.
    pub fn require(mut self, ok: bool, why: &str) -> Self {
        if !ok {
            self.pass = false;
            self.note = Some(match self.note.take() {
                Some(n) => format!("{n}; {why}"),
                None => why.to_string(),
            });
        }
        self
    }
}

/// JSON form of a Grassmann-valued action.
pub fn grassmann_value(a: &GrassmannAction) -> Value {
    serde_json::json!({"body": a.body, "soul": {"re": a.soul.re, "im": a.soul.im}})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub grid: GridSpec,
    pub scheme: Scheme,
    pub target: TargetSpec,
    pub lambda: LambdaSpec,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub summary: Summary,
    pub environment: Environment,
    pub checks: Vec<CheckReport>,
}

impl SuiteReport {
    pub fn new(environment: Environment, checks: Vec<CheckReport>) -> Self {
        let skipped = checks.iter().filter(|c| c.skipped.is_some()).count();
        let passed = checks.iter().filter(|c| c.pass && c.skipped.is_none()).count();
        let failed = checks.iter().filter(|c| !c.pass).count();
        Self {
            pass: failed == 0,
            summary: Summary {
                total: checks.len(),
                passed,
                failed,
                skipped,
            },
            environment,
            checks,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Environment {
        Environment {
            grid: GridSpec::default(),
            scheme: Scheme::Spectral,
            target: TargetSpec::default(),
            lambda: LambdaSpec::default(),
            seed: 1,
            version: "test".into(),
        }
    }

    #[test]
    fn names_round_trip() {
        for c in Check::ALL {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
            assert_eq!(serde_json::to_value(c).unwrap(), Value::String(c.name().into()));
        }
        assert!(matches!("bogus".parse::<Check>(), Err(Error::UnknownCheck(_))));
    }

    #[test]
    fn list_parsing() {
        let l = Check::parse_list("equivalence, a1_a2,equivalence").unwrap();
        assert_eq!(l, vec![Check::Equivalence, Check::A1A2]);
        assert!(Check::parse_list(" , ").is_err());
        assert!(Check::parse_list("equivalence,nope").is_err());
    }

    #[test]
    fn report_fields() {
        let r = CheckReport::new(Check::ClassicalIdentity, "hand", GridSpec::default(), 1.0.into(), vec![1.0.into(), 0.0.into()], 0.0, 1e-9);
        let v = serde_json::to_value(&r).unwrap();
        for key in ["check", "lhs", "rhs_terms", "defect", "tolerance", "pass", "grid", "scheme"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v.get("note").is_none());
        assert_eq!(v["check"], "classical_identity");
        assert_eq!(v["scheme"], "spectral");
    }

    #[test]
    fn nan_defect_fails() {
        let r = CheckReport::new(Check::Equivalence, "x", GridSpec::default(), Value::Null, vec![], f64::NAN, 1.0);
        assert!(!r.pass);
    }

    #[test]
    fn suite_pass_iff_all_pass() {
        let g = GridSpec::default();
        let ok = CheckReport::new(Check::A1A2, "a", g, Value::Null, vec![], 0.0, 1.0);
        let bad = CheckReport::new(Check::A1A2, "b", g, Value::Null, vec![], 2.0, 1.0);
        let skip = CheckReport::skipped(Check::Construction, "c", g, "curved target");
        let s = SuiteReport::new(env(), vec![ok.clone(), skip.clone()]);
        assert!(s.pass);
        assert_eq!(s.summary, Summary { total: 2, passed: 1, failed: 0, skipped: 1 });
        let s = SuiteReport::new(env(), vec![ok, bad, skip]);
        assert!(!s.pass);
        assert_eq!(s.failures().count(), 1);
        let back: SuiteReport = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn require_appends_reason() {
        let r = CheckReport::new(Check::A1A2, "a", GridSpec::default(), Value::Null, vec![], 0.0, 1.0)
            .with_note("first")
            .require(false, "second");
        assert!(!r.pass);
        assert_eq!(r.note.as_deref(), Some("first; second"));
    }
}
