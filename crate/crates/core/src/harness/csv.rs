//! Trajectory CSV output.
//!
//! Columns: `step, loss, B, C, gx_norm, gy_norm, dbdt_pred, b_bar, flags`,
//! then `B_l, C_l` for every layer `l` of a layered run. Reals use 17
//! significant digits so values round-trip exactly; missing values are empty.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::diagnostics::TrajectoryRecord;
use crate::error::Result;

pub const BASE_COLUMNS: [&str; 9] = ["step", "loss", "B", "C", "gx_norm", "gy_norm", "dbdt_pred", "b_bar", "flags"];

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

pub fn header(layers: usize) -> String {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for l in 0..layers {
        cols.push(format!("B_{l}"));
        cols.push(format!("C_{l}"));
    }
    cols.join(",")
}

pub fn to_csv(records: &[TrajectoryRecord]) -> String {
    let layers = records.first().map_or(0, |r| r.layers.len());
    let mut out = header(layers);
    out.push('\n');
    for r in records {
        let mut flags = Vec::new();
        if r.flags.fallback {
            flags.push("fallback");
        }
        if r.flags.guard {
            flags.push("guard");
        }
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt_real(r.loss),
            fmt_real(r.b),
            fmt_real(r.c),
            fmt_real(r.gx_norm),
            fmt_real(r.gy_norm),
            fmt_opt(r.dbdt_pred),
            fmt_opt(r.b_bar),
            flags.join("|")
        )
        .expect("writing to a String");
        for l in &r.layers {
            write!(out, ",{},{}", fmt_real(l.b), fmt_real(l.c)).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` to a sibling temp file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("csv.partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
