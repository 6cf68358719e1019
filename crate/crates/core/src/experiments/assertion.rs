use serde::Serialize;

/// A declared pass/fail check recorded in a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// Passes when at least `fraction` of `total` items passed.
    pub fn fraction(name: impl Into<String>, passed: usize, total: usize, fraction: f64) -> Self {
        let ok = total > 0 && passed as f64 >= fraction * total as f64;
        Self::new(name, ok, format!("{passed}/{total} passed, need {:.0}%", 100.0 * fraction))
    }

    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn all_passed(assertions: &[Assertion]) -> bool {
    assertions.iter().all(|a| a.passed)
}
