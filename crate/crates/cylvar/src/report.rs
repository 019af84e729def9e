//! Deterministic text reports: key-sorted `key = value` blocks and a single
//! canonical float formatter shared by every CSV and report writer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Format a float deterministically: shortest round-trip decimal for
/// moderate magnitudes, shortest round-trip scientific otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let a = x.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// An ordered `key = value` report. Keys are emitted in sorted order so the
/// same inputs always produce byte-identical text.
#[derive(Debug, Default, Clone)]
pub struct TextReport {
    entries: BTreeMap<String, String>,
}

impl TextReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.entries.insert(key.to_string(), fmt_f64(value));
    }

    pub fn set_bool(&mut self, key: &str, value: bool) {
        self.set(key, if value { "true" } else { "false" });
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn merge_prefixed(&mut self, prefix: &str, other: &TextReport) {
        for (k, v) in &other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v.clone());
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for &x in &[
            0.0,
            1.0,
            -1.5,
            0.1,
            1.0 / 3.0,
            6.571e-3,
            5.718428e-19,
            1.52e-60,
            -9.0 / 112.0,
            3.0e22,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s} did not round-trip");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn report_is_sorted_and_stable() {
        let mut r = TextReport::new();
        r.set("zeta", 1);
        r.set_f64("alpha", 0.125);
        r.set_bool("pass", true);
        assert_eq!(r.render(), "alpha = 0.125\npass = true\nzeta = 1\n");
        let mut outer = TextReport::new();
        outer.merge_prefixed("convexity", &r);
        assert!(outer.render().starts_with("convexity.alpha = 0.125\n"));
    }
}
