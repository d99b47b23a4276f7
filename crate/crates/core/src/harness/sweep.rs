use std::path::Path;

use rayon::prelude::*;

use crate::diagnostics::tail_mean;
use crate::error::Result;

use super::config::{SweepConfig, SweepValue};
use super::csv::{fmt_real, to_csv, write_atomic};
use super::run::{run_experiment, RunOutput};

pub struct SweepMember {
    pub value: SweepValue,
    pub result: Result<RunOutput>,
}

/// Runs every sweep member, concurrently when `parallel` is set. Results come
/// back in value order either way, and a failed member does not stop the rest.
pub fn run_sweep(config: &SweepConfig, parallel: bool) -> Vec<SweepMember> {
    let one = |v: &SweepValue| SweepMember {
        value: v.clone(),
        result: config.member(v).and_then(|c| run_experiment(&c)),
    };
    if parallel {
        config.values.par_iter().map(one).collect()
    } else {
        config.values.iter().map(one).collect()
    }
}

pub const SUMMARY_COLUMNS: &str = "axis,value,status,final_B,final_abs_B,first_passage_step,tail_mean_abs_B,error";

/// Summary table: final balancedness, first recorded step with
/// `|B| <= |B_0| / 2`, and the mean `|B|` over the last 1% of rows.
pub fn summary_csv(config: &SweepConfig, members: &[SweepMember]) -> String {
    let mut out = String::from(SUMMARY_COLUMNS);
    out.push('\n');
    for m in members {
        let row = match &m.result {
            Ok(run) => {
                let abs: Vec<f64> = run.records.iter().map(|r| r.b.abs()).collect();
                let b0 = abs.first().copied();
                let passage = b0.and_then(|b0| {
                    run.records.iter().find(|r| r.b.abs() <= 0.5 * b0).map(|r| r.step.to_string())
                });
                let last = run.records.last().map(|r| r.b);
                format!(
                    "{},{},ok,{},{},{},{},",
                    config.axis.name(),
                    m.value.label(),
                    last.map(fmt_real).unwrap_or_default(),
                    last.map(|b| fmt_real(b.abs())).unwrap_or_default(),
                    passage.unwrap_or_default(),
                    tail_mean(&abs, 0.01).map(fmt_real).unwrap_or_default(),
                )
            }
            Err(e) => format!(
                "{},{},error,,,,,\"{}\"",
                config.axis.name(),
                m.value.label(),
                e.to_string().replace('"', "'")
            ),
        };
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn member_file_name(config: &SweepConfig, value: &SweepValue) -> String {
    format!("{}_{}.csv", config.axis.name(), value.label())
}

/// Writes one CSV per successful member plus `summary.csv` into `dir`.
/// Returns how many members failed.
pub fn write_sweep(dir: &Path, config: &SweepConfig, members: &[SweepMember]) -> Result<usize> {
    std::fs::create_dir_all(dir)?;
    for m in members {
        if let Ok(run) = &m.result {
            write_atomic(&dir.join(member_file_name(config, &m.value)), &to_csv(&run.records))?;
        }
    }
    write_atomic(&dir.join("summary.csv"), &summary_csv(config, members))?;
    Ok(members.iter().filter(|m| m.result.is_err()).count())
}
