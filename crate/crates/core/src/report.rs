//! Serializable result artifacts: a JSON report of a classification run and
//! the CSV rows used by bound sweeps.

use serde::{Deserialize, Serialize};

use crate::classify::{ClassificationMap, Options, RequirementClassification};
use crate::coverage::RequirementCoverage;
use crate::witness::Witness;

pub const CSV_HEADER: &str = "Steps,ms,#C.,#Min.,#SAT,#C./Min.,Cov.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    /// Name of the input file, when the run came from one.
    pub input: Option<String>,
    pub options: Options,
    pub universe: Vec<String>,
    pub requirements: Vec<RequirementReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementReport {
    pub index: usize,
    pub name: String,
    pub minimal_attackers: Vec<Vec<String>>,
    pub safe_sets: Vec<Vec<String>>,
    pub relevant: Vec<String>,
    pub unbreakable: bool,
    pub broken_by_empty: bool,
    pub complete: bool,
    pub candidates_checked: u64,
    pub sat_calls: u64,
    pub millis: u64,
    /// Decimal digit strings; the counts outgrow every integer type.
    pub breaking_count: String,
    pub safe_count: String,
    pub coverage: f64,
    pub coverage_estimated: bool,
    pub witnesses: Vec<Witness>,
}

fn names(rc: &RequirementClassification) -> RequirementReport {
    let render = |set: &crate::analysis::ComponentSet| -> Vec<String> {
        set.iter().map(|c| c.to_string()).collect()
    };
    RequirementReport {
        index: rc.requirement,
        name: rc.name.clone(),
        minimal_attackers: rc.minimal_attackers.iter().map(&render).collect(),
        safe_sets: rc.safe_sets.iter().map(&render).collect(),
        relevant: render(&rc.relevant),
        unbreakable: rc.unbreakable,
        broken_by_empty: rc.broken_by_empty,
        complete: rc.complete,
        candidates_checked: rc.candidates_checked,
        sat_calls: rc.sat_calls,
        millis: rc.millis,
        breaking_count: String::new(),
        safe_count: String::new(),
        coverage: 0.0,
        coverage_estimated: false,
        witnesses: rc.witnesses.clone(),
    }
}

pub fn build(
    input: Option<String>,
    map: &ClassificationMap,
    cov: &[RequirementCoverage],
) -> Report {
    let requirements = map
        .requirements
        .iter()
        .map(|rc| {
            let mut report = names(rc);
            if let Some(c) = cov.iter().find(|c| c.requirement == rc.requirement) {
                report.breaking_count = c.breaking.to_string();
                report.safe_count = c.safe.to_string();
                report.coverage = c.coverage;
                report.coverage_estimated = c.estimated;
            }
            report
        })
        .collect();
    Report {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        input,
        options: map.options.clone(),
        universe: map
            .universe_components
            .iter()
            .map(|c| c.to_string())
            .collect(),
        requirements,
    }
}

fn fmt_cov(cov: f64) -> String {
    if cov == 0.0 || cov >= 1e-3 {
        format!("{cov:.6}")
    } else {
        format!("{cov:.2E}")
    }
}

fn avg_min_size(rc: &RequirementClassification) -> Option<f64> {
    if rc.minimal_attackers.is_empty() {
        return None;
    }
    let total: usize = rc.minimal_attackers.iter().map(|m| m.len()).sum();
    Some(total as f64 / rc.minimal_attackers.len() as f64)
}

/// One metrics row per requirement: bound, wall time, source-set size,
/// minimal attackers found, SAT calls, average components per minimal
/// attacker ("--" when none were found), and coverage.
pub fn csv_requirement_rows(
    map: &ClassificationMap,
    cov: &[RequirementCoverage],
) -> Vec<String> {
    map.requirements
        .iter()
        .map(|rc| {
            let coverage = cov
                .iter()
                .find(|c| c.requirement == rc.requirement)
                .map(|c| c.coverage)
                .unwrap_or(0.0);
            let ratio = avg_min_size(rc)
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "--".to_string());
            format!(
                "{},{},{},{},{},{},{}",
                map.options.bound,
                rc.millis,
                rc.relevant.len(),
                rc.minimal_attackers.len(),
                rc.sat_calls,
                ratio,
                fmt_cov(coverage)
            )
        })
        .collect()
}

/// The averages row over all requirements of one run.
pub fn csv_average_row(map: &ClassificationMap, cov: &[RequirementCoverage]) -> String {
    let n = map.requirements.len().max(1) as f64;
    let avg = |f: &dyn Fn(&RequirementClassification) -> f64| -> f64 {
        map.requirements.iter().map(|r| f(r)).sum::<f64>() / n
    };
    let sizes: Vec<f64> = map.requirements.iter().filter_map(avg_min_size).collect();
    let ratio = if sizes.is_empty() {
        "--".to_string()
    } else {
        format!("{:.2}", sizes.iter().sum::<f64>() / sizes.len() as f64)
    };
    let avg_cov = if cov.is_empty() {
        0.0
    } else {
        cov.iter().map(|c| c.coverage).sum::<f64>() / cov.len() as f64
    };
    format!(
        "{},{:.2},{:.2},{:.2},{:.2},{},{}",
        map.options.bound,
        avg(&|r| r.millis as f64),
        avg(&|r| r.relevant.len() as f64),
        avg(&|r| r.minimal_attackers.len() as f64),
        avg(&|r| r.sat_calls as f64),
        ratio,
        fmt_cov(avg_cov)
    )
}
