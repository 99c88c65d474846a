use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{BanditError, Result};

/// One point of an empirical-vs-bound series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub series: String,
    pub t: u64,
    pub empirical: f64,
    pub bound: f64,
}

/// Outcome of one diagnostic check.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// The largest violation rate (or other statistic) the check tolerates.
    pub threshold: f64,
    /// The statistic compared against `threshold`.
    pub statistic: f64,
    pub ci: (f64, f64),
    pub passed: bool,
    /// Named effect sizes, in insertion order.
    pub metrics: Vec<(String, f64)>,
    pub series: Vec<SeriesPoint>,
    pub notes: Vec<String>,
}

impl DiagnosticReport {
    pub fn new(name: &str, trials: usize) -> Self {
        Self {
            name: name.to_string(),
            trials,
            violations: 0,
            threshold: f64::NAN,
            statistic: f64::NAN,
            ci: (f64::NAN, f64::NAN),
            passed: false,
            metrics: Vec::new(),
            series: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn violation_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.violations as f64 / self.trials as f64
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub(crate) fn push_metric(&mut self, key: &str, value: f64) {
        self.metrics.push((key.to_string(), value));
    }

    pub(crate) fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("{}: {msg}", self.name);
        self.notes.push(msg);
    }

    /// One-line verdict, e.g. for console output.
    pub fn verdict(&self) -> String {
        format!(
            "{} {}: statistic={} threshold={} violations={}/{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt(self.statistic),
            fmt(self.threshold),
            self.violations,
            self.trials
        )
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.verdict());
        let _ = writeln!(s, "violation rate: {}", fmt(self.violation_rate()));
        let _ = writeln!(s, "interval: [{}, {}]", fmt(self.ci.0), fmt(self.ci.1));
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k}: {}", fmt(*v));
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }

    /// `key,value` rows: the scalar fields followed by every metric.
    pub fn summary_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("check".to_string(), self.name.clone()),
            ("passed".to_string(), self.passed.to_string()),
            ("trials".to_string(), self.trials.to_string()),
            ("violations".to_string(), self.violations.to_string()),
            ("violation_rate".to_string(), fmt(self.violation_rate())),
            ("statistic".to_string(), fmt(self.statistic)),
            ("threshold".to_string(), fmt(self.threshold)),
            ("ci_low".to_string(), fmt(self.ci.0)),
            ("ci_high".to_string(), fmt(self.ci.1)),
        ];
        rows.extend(self.metrics.iter().map(|(k, v)| (k.clone(), fmt(*v))));
        rows
    }

    /// Writes `<name>_summary.csv`, `<name>_series.csv` and `<name>.txt`
    /// into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| BanditError::io(dir, e))?;
        let summary = dir.join(format!("{}_summary.csv", self.name));
        let mut w = csv::Writer::from_path(&summary).map_err(|e| BanditError::csv(&summary, e))?;
        w.write_record(["key", "value"]).map_err(|e| BanditError::csv(&summary, e))?;
        for (k, v) in self.summary_rows() {
            w.write_record([k, v]).map_err(|e| BanditError::csv(&summary, e))?;
        }
        w.flush().map_err(|e| BanditError::io(&summary, e))?;

        let series = dir.join(format!("{}_series.csv", self.name));
        let mut w = csv::Writer::from_path(&series).map_err(|e| BanditError::csv(&series, e))?;
        w.write_record(["series", "t", "empirical", "bound"])
            .map_err(|e| BanditError::csv(&series, e))?;
        for p in &self.series {
            w.write_record([p.series.clone(), p.t.to_string(), fmt(p.empirical), fmt(p.bound)])
                .map_err(|e| BanditError::csv(&series, e))?;
        }
        w.flush().map_err(|e| BanditError::io(&series, e))?;

        let text = dir.join(format!("{}.txt", self.name));
        std::fs::write(&text, self.summary_text()).map_err(|e| BanditError::io(&text, e))?;
        Ok(vec![summary, series, text])
    }
}

/// Shortest round-trip formatting, so output is reproducible.
fn fmt(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = DiagnosticReport::new("demo", 4);
        r.violations = 1;
        r.push_metric("effect", 0.25);
        r.series.push(SeriesPoint {
            series: "ratio".into(),
            t: 3,
            empirical: 0.5,
            bound: 1.0,
        });
        let paths = r.write(dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let summary = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(summary.starts_with("key,value\ncheck,demo\npassed,false\n"));
        assert!(summary.contains("violation_rate,0.25\n"));
        assert!(summary.contains("effect,0.25\n"));
        let series = std::fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(series, "series,t,empirical,bound\nratio,3,0.5,1\n");
        assert_eq!(r.metric("effect"), Some(0.25));
    }
}
