//! Files written under `--out`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{CaseOutcome, CheckRow, Format, VerificationReport};
use crate::error::Result;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn rows_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from("id,source,quantity,measured,bound,ratio,tolerance,verdict,refined_ratio\n");
    for r in rows {
        let verdict = serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3e},{},{}\n",
            quote(&r.id),
            quote(&r.source),
            quote(&r.quantity),
            opt(r.measured),
            opt(r.bound),
            opt(r.ratio),
            r.tolerance,
            verdict,
            opt(r.refined_ratio)
        ));
    }
    out
}

/// `report.json` (or `rows.csv`), `metadata.json`, and optionally the mesh,
/// per-step fields and a line-delimited diagnostics stream.
pub fn write_case(dir: &Path, outcome: &CaseOutcome, format: Format, fields: bool, mesh: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_report(dir, &outcome.report, format)?;
    write_json(&dir.join("metadata.json"), &outcome.metadata)?;
    if let (true, Some(m)) = (mesh, &outcome.mesh) {
        let f = fs::File::create(dir.join("mesh.txt"))?;
        m.write_text(BufWriter::new(f))?;
    }
    if let Some(sol) = &outcome.solution {
        let mut w = BufWriter::new(fs::File::create(dir.join("diagnostics.jsonl"))?);
        for (k, s) in sol.steps.iter().enumerate() {
            let rec = serde_json::json!({
                "step": k + 1,
                "t": sol.times[k + 1],
                "iterations": s.iterations,
                "residual": s.residual,
            });
            writeln!(w, "{rec}")?;
        }
        if fields {
            let fdir = dir.join("fields");
            fs::create_dir_all(&fdir)?;
            for (k, u) in sol.states.iter().enumerate() {
                let mut w = BufWriter::new(fs::File::create(fdir.join(format!("step_{k:05}.txt")))?);
                writeln!(w, "# t = {:.12e}", sol.times[k])?;
                for v in u {
                    writeln!(w, "{v:.15e}")?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_report(dir: &Path, report: &VerificationReport, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(&dir.join("report.json"), report),
        Format::Csv => {
            fs::write(dir.join("rows.csv"), rows_csv(&report.rows))?;
            Ok(())
        }
    }
}
