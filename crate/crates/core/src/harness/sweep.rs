//! Cartesian parameter sweeps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{axis_path, run_case, CaseConfig, Mode, VerificationReport};
use crate::bounds::{ENERGY_B0, ENERGY_L2, L1_DATA};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    /// Shorthand or dotted config path.
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    /// Parses `key=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis `{spec}` is not of the form key=v1,v2,...")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if key.trim().is_empty() || values.is_empty() {
            return Err(Error::Config(format!("axis `{spec}` has no key or no values")));
        }
        Ok(Axis {
            key: key.trim().to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCase {
    pub label: String,
    pub params: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<VerificationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub params: BTreeMap<String, String>,
    pub exit_code: i32,
    pub q: Option<f64>,
    pub b0: Option<f64>,
    pub z: Option<f64>,
    pub worst: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cases: Vec<SweepCase>,
    pub summary: Vec<SummaryRow>,
    /// Worst ratio of each source over the sweep.
    pub worst: BTreeMap<String, f64>,
}

impl SweepResult {
    pub fn exit_code(&self) -> i32 {
        self.summary.iter().map(|r| r.exit_code).max().unwrap_or(0)
    }

    pub fn summary_csv(&self, keys: &[String]) -> String {
        let sources: Vec<&String> = self.worst.keys().collect();
        let mut out = String::from("label");
        for k in keys {
            out.push_str(&format!(",{k}"));
        }
        out.push_str(",exit_code,Q,B0,Z");
        for s in &sources {
            out.push_str(&format!(",worst:{s}"));
        }
        out.push('\n');
        let f = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        for r in &self.summary {
            out.push_str(&r.label);
            for k in keys {
                out.push_str(&format!(",{}", r.params.get(k).cloned().unwrap_or_default()));
            }
            out.push_str(&format!(",{},{},{},{}", r.exit_code, f(r.q), f(r.b0), f(r.z)));
            for s in &sources {
                out.push_str(&format!(",{}", f(r.worst.get(*s).copied())));
            }
            out.push('\n');
        }
        out
    }
}

fn product(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                a.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((a.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

/// Runs every combination of axis values; cases run in parallel and a
/// failing case does not stop the others.
pub fn run_sweep(template: &CaseConfig, axes: &[Axis], mode: Mode) -> SweepResult {
    let combos = product(axes);
    let cases: Vec<SweepCase> = template.exec.map(&combos, |combo| {
        let params: BTreeMap<String, String> = combo.iter().cloned().collect();
        let label = combo.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("_");
        let label = if label.is_empty() { template.name.clone() } else { format!("{}_{}", template.name, label) };
        let cfg = combo.iter().try_fold(template.clone(), |c, (k, v)| c.with_override(axis_path(k), v));
        match cfg {
            Ok(mut cfg) => {
                cfg.name = label.clone();
                let report = run_case(&cfg, mode).report;
                SweepCase {
                    label,
                    params,
                    error: report.failed_stage().and_then(|s| s.error.clone()),
                    report: Some(report),
                }
            }
            Err(e) => SweepCase {
                label,
                params,
                error: Some(e.to_string()),
                report: None,
            },
        }
    });
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let summary = cases
        .iter()
        .map(|c| {
            let (exit_code, q, b0, z, w) = match &c.report {
                Some(r) => {
                    let q = r.bound_value(ENERGY_L2, "Q").or_else(|| r.bound_value(ENERGY_B0, "Q"));
                    (r.exit_code(), q, r.bound_value(ENERGY_L2, "B0"), r.bound_value(L1_DATA, "Z"), r.worst_ratios())
                }
                None => (2, None, None, None, BTreeMap::new()),
            };
            for (k, v) in &w {
                let e = worst.entry(k.clone()).or_insert(f64::NEG_INFINITY);
                *e = e.max(*v);
            }
            SummaryRow {
                label: c.label.clone(),
                params: c.params.clone(),
                exit_code,
                q,
                b0,
                z,
                worst: w,
            }
        })
        .collect();
    SweepResult { cases, summary, worst }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_axes() {
        let a = Axis::parse("bsharp=0.1, 1,10").unwrap();
        assert_eq!(a.key, "bsharp");
        assert_eq!(a.values, vec!["0.1", "1", "10"]);
        assert!(Axis::parse("bsharp").is_err());
        assert!(Axis::parse("=1").is_err());
    }

    #[test]
    fn product_enumerates_all_combinations() {
        let axes = [Axis::parse("a=1,2").unwrap(), Axis::parse("b=x,y,z").unwrap()];
        let p = product(&axes);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![("a".into(), "1".into()), ("b".into(), "x".into())]);
        assert_eq!(product(&[]).len(), 1);
    }
}
