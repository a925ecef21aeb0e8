//! Report files: `report.json`, `curves.csv`, `validation.csv`. Floats use
//! shortest round-trip formatting.

use std::io::Write;

use super::engine::{ExperimentReport, ValidationRow};
use crate::error::{Error, Result};

pub fn write_curves_csv<W: Write>(out: &mut W, report: &ExperimentReport) -> Result<()> {
    writeln!(out, "policy,N_target,mean_hit,ci_lo,ci_hi,mean_C,p95_C")?;
    for p in &report.points {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            p.policy, p.n_target, p.mean_hit, p.ci_lo, p.ci_hi, p.mean_c, p.p95_c
        )?;
    }
    Ok(())
}

pub fn write_validation_csv<W: Write>(out: &mut W, rows: &[ValidationRow]) -> Result<()> {
    writeln!(out, "check,measured,bound,margin,pass,gating")?;
    for r in rows {
        writeln!(out, "{},{:?},{:?},{:?},{},{}", r.check, r.measured, r.bound, r.margin, r.pass, r.gating)?;
    }
    Ok(())
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("json encoding: {e}")))
}
