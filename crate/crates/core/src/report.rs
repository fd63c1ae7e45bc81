//! Repeated-run measurement, result checksums and CSV/JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exec::{PipelineRun, Predictions};
use crate::laqops::ResultRow;
use crate::timing::{Stage, StageTimes};
use crate::Result;

/// Wall times over the measured repetitions of one run.
#[derive(Debug, Clone, Default)]
pub struct Measured {
    pub totals_s: Vec<f64>,
    pub stage_sums: StageTimes,
}

impl Measured {
    pub fn repetitions(&self) -> usize {
        self.totals_s.len()
    }

    pub fn mean_s(&self) -> f64 {
        if self.totals_s.is_empty() {
            return 0.0;
        }
        self.totals_s.iter().sum::<f64>() / self.totals_s.len() as f64
    }

    /// Standard error of the mean from the sample standard deviation.
    pub fn stderr_s(&self) -> f64 {
        let n = self.totals_s.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_s();
        let var = self.totals_s.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    pub fn stage_mean_s(&self, stage: Stage) -> f64 {
        if self.totals_s.is_empty() {
            return 0.0;
        }
        self.stage_sums.get(stage).as_secs_f64() / self.totals_s.len() as f64
    }
}

/// Runs `f` once as warm-up, then `repeats` more times under the clock.
/// Returns the output of the last run.
pub fn measure<T>(
    repeats: usize,
    mut f: impl FnMut(&mut StageTimes) -> Result<T>,
) -> Result<(T, Measured)> {
    let mut out = f(&mut StageTimes::new())?;
    let mut m = Measured::default();
    for _ in 0..repeats {
        let mut st = StageTimes::new();
        let start = Instant::now();
        out = f(&mut st)?;
        m.totals_s.push(start.elapsed().as_secs_f64());
        for (stage, d) in st.iter() {
            m.stage_sums.add(stage, d);
        }
    }
    Ok((out, m))
}

fn multiset_digest(mut lines: Vec<String>) -> String {
    lines.sort_unstable();
    let mut h = Sha256::new();
    for l in &lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    h.finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn canonical(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.9e}")
    }
}

/// Order-independent hash of query result rows. Non-integral sums are
/// rounded to ten significant digits first.
pub fn checksum_rows(rows: &[ResultRow]) -> String {
    multiset_digest(
        rows.iter()
            .map(|r| {
                let g: Vec<String> = r.group.iter().map(i64::to_string).collect();
                format!("{}|{}", g.join(","), canonical(r.sum))
            })
            .collect(),
    )
}

/// Order-independent hash of `(fact row, prediction)` pairs. Linear outputs
/// are rounded to six significant digits.
pub fn checksum_run(run: &PipelineRun) -> String {
    let lines = match &run.predictions {
        Predictions::Tree(labels) => run
            .fact_rows
            .iter()
            .zip(labels)
            .map(|(f, l)| format!("{f}|{l}"))
            .collect(),
        Predictions::Linear(out) => run
            .fact_rows
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let v: Vec<String> = out.row(i).iter().map(|x| format!("{x:.5e}")).collect();
                format!("{f}|{}", v.join(","))
            })
            .collect(),
    };
    multiset_digest(lines)
}

/// One row of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mode: String,
    pub id: String,
    pub repetitions: usize,
    pub mean_s: f64,
    pub stderr_s: f64,
    /// Mean seconds per stage, keyed by stage name.
    pub stages: BTreeMap<String, f64>,
    pub checksum: String,
    /// `Some(true)` once compared against the reference engine.
    pub verified: Option<bool>,
}

impl RunRecord {
    pub fn new(
        mode: &str,
        id: &str,
        m: &Measured,
        checksum: String,
        verified: Option<bool>,
    ) -> Self {
        Self {
            mode: mode.to_string(),
            id: id.to_string(),
            repetitions: m.repetitions(),
            mean_s: m.mean_s(),
            stderr_s: m.stderr_s(),
            stages: Stage::ALL
                .iter()
                .map(|&s| (s.name().to_string(), m.stage_mean_s(s)))
                .collect(),
            checksum,
            verified,
        }
    }

    pub fn stage_s(&self, stage: Stage) -> f64 {
        self.stages.get(stage.name()).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<RunRecord>,
}

impl RunReport {
    pub fn csv_header() -> String {
        let mut cols = vec!["mode", "id", "repetitions", "mean_s", "stderr_s"];
        let stage_cols: Vec<String> = Stage::ALL
            .iter()
            .map(|s| format!("{}_s", s.name().replace('-', "_")))
            .collect();
        cols.extend(stage_cols.iter().map(String::as_str));
        cols.extend(["checksum", "verified"]);
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header();
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{:.9},{:.9}",
                r.mode, r.id, r.repetitions, r.mean_s, r.stderr_s
            );
            for s in Stage::ALL {
                let _ = write!(out, ",{:.9}", r.stage_s(s));
            }
            let verified = r.verified.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(out, ",{},{verified}", r.checksum);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes JSON when the extension is `.json`, CSV otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        let body = if path.extension().is_some_and(|e| e == "json") {
            self.to_json()
        } else {
            self.to_csv()
        };
        std::fs::write(path, body)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMat;

    #[test]
    fn measure_counts_and_stats() {
        let mut calls = 0;
        let (_, m) = measure(4, |st| {
            calls += 1;
            st.time(Stage::Spmm, || std::hint::black_box((0..1000).sum::<u64>()));
            Ok(calls)
        })
        .unwrap();
        assert_eq!(calls, 5);
        assert_eq!(m.repetitions(), 4);
        assert!(m.stage_mean_s(Stage::Spmm) <= m.mean_s());

        let fixed = Measured {
            totals_s: vec![1.0, 2.0, 3.0, 4.0],
            stage_sums: StageTimes::new(),
        };
        assert_eq!(fixed.mean_s(), 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((fixed.stderr_s() - sd / 2.0).abs() < 1e-12);
    }

    #[test]
    fn checksums_ignore_order() {
        let r = |g: i64, s: f64| ResultRow {
            group: vec![g],
            sum: s,
        };
        let a = checksum_rows(&[r(1, 2.0), r(2, 0.1 + 0.2)]);
        assert_eq!(a, checksum_rows(&[r(2, 0.3), r(1, 2.0)]));
        assert_ne!(a, checksum_rows(&[r(1, 2.0), r(2, 0.4)]));

        let run = |rows: Vec<usize>, labels: Vec<i64>| PipelineRun {
            fact_rows: rows,
            predictions: Predictions::Tree(labels),
        };
        assert_eq!(
            checksum_run(&run(vec![0, 1], vec![5, 6])),
            checksum_run(&run(vec![1, 0], vec![6, 5]))
        );
        assert_ne!(
            checksum_run(&run(vec![0, 1], vec![5, 6])),
            checksum_run(&run(vec![0, 1], vec![6, 5]))
        );
        let lin = PipelineRun {
            fact_rows: vec![3],
            predictions: Predictions::Linear(DenseMat::new(1, 2, vec![1.0, -0.5]).unwrap()),
        };
        assert_eq!(checksum_run(&lin).len(), 64);
    }

    #[test]
    fn csv_has_fixed_header() {
        let m = Measured {
            totals_s: vec![0.5],
            stage_sums: StageTimes::new(),
        };
        let rep = RunReport {
            records: vec![RunRecord::new("laq", "Q11", &m, "ab".into(), Some(true))],
        };
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("mode,id,repetitions,mean_s,stderr_s,domain_gen_s"));
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        let back: RunReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }
}
