use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// Outcome of one experiment. Every verdict is paired with the tolerance it
/// was judged against; output is a pure function of seed and parameters.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub parameters: BTreeMap<String, Value>,
    pub statistics: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64, trials: usize) -> Self {
        Self {
            name: name.to_string(),
            seed,
            trials,
            passed: true,
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_string(), v);
        self
    }

    pub fn stat(&mut self, key: &str, value: f64) -> &mut Self {
        self.statistics.insert(key.to_string(), value);
        self
    }

    /// Record a verdict: `ok` judged against tolerance `tol` named `key`.
    pub fn verdict(&mut self, key: &str, tol: f64, ok: bool) -> &mut Self {
        self.tolerances.insert(key.to_string(), tol);
        self.verdicts.insert(key.to_string(), ok);
        self.passed = self.verdicts.values().all(|&v| v);
        self
    }

    /// `value < tol` as a verdict, with the value stored as a statistic.
    pub fn below(&mut self, key: &str, value: f64, tol: f64) -> &mut Self {
        self.stat(key, value);
        self.verdict(key, tol, value < tol)
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_drive_passed() {
        let mut r = ExperimentReport::new("x", 1, 10);
        r.below("err", 1e-10, 1e-8);
        assert!(r.passed);
        r.below("other", 2.0, 1.0);
        assert!(!r.passed);
        assert_eq!(r.tolerances["other"], 1.0);
    }

    #[test]
    fn non_finite_statistics_serialize() {
        let mut r = ExperimentReport::new("x", 1, 0);
        r.stat("inf", f64::INFINITY);
        assert!(r.to_json().contains("\"inf\": null"));
    }
}
