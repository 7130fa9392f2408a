//! Summaries of run records grouped by anchor, plus plot-ready CSV files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::record::{ResultRow, RunRecord, ARTIFACT_VERSION};

/// Every anchor a row can carry, with a one-line description.
pub const ANCHORS: &[(&str, &str)] = &[
    ("rc-representation", "random-current representation of Z and of one- and two-point functions"),
    ("switching-identity", "source-switching identity"),
    ("correlation-inequality", "finite-volume correlation inequality for <σ_o>"),
    ("second-moment-currents", "first and second moments of the boundary connection count"),
    ("finite-volume-expectations", "sampled finite-volume expectations against enumeration"),
    ("one-arm-exponent", "decay of <σ_o>^+_r and the fitted one-arm slope"),
    ("two-point-decay", "decay of the critical two-point function"),
    ("tasaki", "Tasaki comparison <σ_o>^+_{|x|/3} >= sqrt(<σ_oσ_x>)"),
    ("perc-correlation", "percolation second-moment and tree-graph inequalities"),
    ("lattice-sums", "power-law lattice sums: numerator, term1 and the three u cases"),
    ("mean-field-bound", "assembled lower bound on <σ_o>^+_r from the lattice sums"),
    ("plumbing", "harness bookkeeping"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub anchor: String,
    pub description: String,
    pub rows: usize,
    pub checked: usize,
    pub passed: usize,
    pub fits: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub sections: Vec<Section>,
    pub warnings: Vec<String>,
    pub records: usize,
    /// `(file name, CSV contents)`.
    pub files: Vec<(String, String)>,
}

impl Report {
    pub fn checked(&self) -> (usize, usize) {
        self.sections
            .iter()
            .fold((0, 0), |(p, c), s| (p + s.passed, c + s.checked))
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "onearm report, version {ARTIFACT_VERSION}, {} records", self.records);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}] {}", s.anchor, s.description);
            if s.rows == 0 {
                let _ = writeln!(out, "  no rows");
                continue;
            }
            if s.checked > 0 {
                let _ = writeln!(out, "  {}: {}/{} pass", s.anchor, s.passed, s.checked);
            }
            let _ = writeln!(out, "  rows: {}", s.rows);
            for f in &s.fits {
                let _ = writeln!(out, "  {f}");
            }
        }
        out
    }
}

pub fn build_report(records: &[RunRecord]) -> Report {
    let mut warnings = Vec::new();
    let versions: BTreeSet<&str> = records.iter().map(|r| r.version.as_str()).collect();
    if versions.len() > 1 || versions.iter().any(|v| *v != ARTIFACT_VERSION) {
        let w = format!("records come from versions {versions:?}; this is {ARTIFACT_VERSION}");
        log::warn!("{w}");
        warnings.push(w);
    }
    let rows: Vec<&ResultRow> = records.iter().flat_map(|r| &r.rows).collect();
    let known: BTreeSet<&str> = ANCHORS.iter().map(|a| a.0).collect();
    let mut anchors: Vec<(String, String)> = ANCHORS.iter().map(|(a, d)| (a.to_string(), d.to_string())).collect();
    let extra: BTreeSet<&str> = rows
        .iter()
        .map(|r| r.anchor.as_str())
        .filter(|a| !known.contains(a))
        .collect();
    anchors.extend(extra.into_iter().map(|a| (a.to_string(), "unregistered anchor".to_string())));
    let sections = anchors
        .into_iter()
        .map(|(anchor, description)| {
            let mine: Vec<&&ResultRow> = rows.iter().filter(|r| r.anchor == anchor).collect();
            let fits = mine
                .iter()
                .filter_map(|r| {
                    let slope = r.number("slope")?;
                    let se = r.number("slope_stderr").unwrap_or(f64::NAN);
                    let verdict = match r.passed {
                        Some(true) => " pass",
                        Some(false) => " FAIL",
                        None => "",
                    };
                    let target = match (r.number("target"), r.number("tolerance")) {
                        (Some(t), Some(tol)) => format!(" target {t} ± {tol}"),
                        _ => match (r.number("slope_min"), r.number("slope_max")) {
                            (Some(a), Some(b)) => format!(" window [{a}, {b}]"),
                            _ => String::new(),
                        },
                    };
                    Some(format!("{}: slope {slope:.4} ± {se:.4}{target}{verdict}", r.label))
                })
                .collect();
            Section {
                description,
                rows: mine.len(),
                checked: mine.iter().filter(|r| r.passed.is_some()).count(),
                passed: mine.iter().filter(|r| r.passed == Some(true)).count(),
                fits,
                anchor,
            }
        })
        .collect();
    Report {
        sections,
        warnings,
        records: records.len(),
        files: data_files(&rows),
    }
}

fn csv_of(header: &[&str], rows: &[&ResultRow], keep: impl Fn(&ResultRow) -> bool) -> Option<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).ok()?;
    let mut any = false;
    for r in rows.iter().filter(|r| keep(r)) {
        any = true;
        let fields: Vec<String> = header
            .iter()
            .map(|h| match *h {
                "anchor" => r.anchor.clone(),
                "label" => r.label.clone(),
                "passed" => r.passed.map(|p| p.to_string()).unwrap_or_default(),
                key => r.text(key).unwrap_or_default(),
            })
            .collect();
        w.write_record(&fields).ok()?;
    }
    if !any {
        return None;
    }
    String::from_utf8(w.into_inner().ok()?).ok()
}

fn data_files(rows: &[&ResultRow]) -> Vec<(String, String)> {
    let has = |r: &ResultRow, k: &str| r.values.contains_key(k);
    let specs: Vec<(&str, Vec<&str>, Box<dyn Fn(&ResultRow) -> bool>)> = vec![
        (
            "one_arm.csv",
            vec!["d", "r", "value", "stderr"],
            Box::new(move |r: &ResultRow| r.anchor == "one-arm-exponent" && has(r, "r") && has(r, "value")),
        ),
        (
            "two_point.csv",
            vec!["d", "x", "value", "stderr"],
            Box::new(move |r: &ResultRow| r.anchor == "two-point-decay" && has(r, "x") && has(r, "value")),
        ),
        (
            "scaling.csv",
            vec!["d", "r", "term", "mode", "value", "stderr", "tail_bound"],
            Box::new(move |r: &ResultRow| has(r, "term") && has(r, "r") && has(r, "value")),
        ),
        (
            "percolation.csv",
            vec!["d", "r", "lhs", "lhs_stderr", "rhs", "rhs_stderr"],
            Box::new(move |r: &ResultRow| r.anchor == "perc-correlation" && has(r, "r")),
        ),
        (
            "slopes.csv",
            vec!["anchor", "label", "slope", "slope_stderr", "target", "tolerance", "passed"],
            Box::new(move |r: &ResultRow| has(r, "slope")),
        ),
    ];
    specs
        .into_iter()
        .filter_map(|(name, header, keep)| csv_of(&header, rows, keep).map(|c| (name.to_string(), c)))
        .collect()
}

/// Writes `summary.txt` and the CSV files into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join("summary.txt");
    std::fs::write(&path, report.summary()).map_err(|e| HarnessError::io(&path, e))?;
    for (name, body) in &report.files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;

    fn record(rows: Vec<ResultRow>) -> RunRecord {
        RunRecord {
            config_hash: "x".into(),
            kind: ExperimentKind::Fit,
            config: Default::default(),
            started: 0.0,
            finished: 0.0,
            version: ARTIFACT_VERSION.into(),
            rows,
        }
    }

    #[test]
    fn empty_report_lists_every_anchor() {
        let rep = build_report(&[]);
        assert_eq!(rep.sections.len(), ANCHORS.len());
        assert!(rep.files.is_empty());
        assert_eq!(rep.checked(), (0, 0));
        assert!(rep.summary().contains("no rows"));
    }

    #[test]
    fn counts_match_row_flags() {
        let rows = vec![
            ResultRow::new("switching-identity", "a").check(true),
            ResultRow::new("switching-identity", "b").check(false),
            ResultRow::new("switching-identity", "c").check(true),
            ResultRow::new("lattice-sums", "t").with("d", 5).num("r", 8.0).with("term", "term1").with("mode", "exact").num("value", 1.0).num("stderr", 0.0).num("tail_bound", 0.0),
            ResultRow::new("custom-tag", "z"),
        ];
        let mut old = record(rows.clone());
        old.version = "0.0.0".into();
        let rep = build_report(&[record(rows), old]);
        let s = rep.sections.iter().find(|s| s.anchor == "switching-identity").unwrap();
        assert_eq!((s.passed, s.checked, s.rows), (4, 6, 6));
        assert!(rep.summary().contains("switching-identity: 4/6 pass"));
        assert!(rep.sections.iter().any(|s| s.anchor == "custom-tag"));
        assert_eq!(rep.warnings.len(), 1);
        let scaling = &rep.files.iter().find(|f| f.0 == "scaling.csv").unwrap().1;
        assert!(scaling.starts_with("d,r,term,mode,value,stderr,tail_bound\n5,8.0,term1,exact,1.0,0.0,0.0\n"), "{scaling}");
    }
}
