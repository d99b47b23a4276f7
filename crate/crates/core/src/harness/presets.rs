//! Built-in experiment presets. Each member is an ordinary run config shipped
//! under `presets/<name>/<member>.json`, so `run --config` on the file gives
//! the same CSV as `preset <name>`.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::csv::{to_csv, write_atomic};
use super::run::run_experiment;

macro_rules! member {
    ($preset:literal, $member:literal) => {
        ($preset, $member, include_str!(concat!("../../presets/", $preset, "/", $member, ".json")))
    };
}

const MEMBERS: &[(&str, &str, &str)] = &[
    member!("fig1a", "sgd"),
    member!("fig1a", "sam"),
    member!("fig1a", "sam_alpha0.5"),
    member!("fig1a", "sam_alpha1.0"),
    member!("fig1a", "sam_alpha2.0"),
    member!("fig1b", "sgd"),
    member!("fig1b", "sam"),
    member!("fig1b", "sam_alpha0.5"),
    member!("fig1b", "sam_alpha2.0"),
    member!("fig2a", "sam"),
    member!("fig2a", "sam_alpha0.5"),
    member!("fig2a", "sam_alpha1.0"),
    member!("fig2a", "sam_alpha2.0"),
    member!("fig2b", "sam"),
    member!("fig2b", "nbar_mimic"),
    member!("fig2b", "nbar_linear"),
    member!("msharp", "msam_m1"),
    member!("msharp", "msam_m2"),
    member!("msharp", "msam_m4"),
    member!("multilayer", "sam"),
    member!("multilayer", "sgd"),
    member!("saddle", "sgd"),
    member!("saddle", "obar"),
];

pub const PRESET_NAMES: [&str; 7] = ["fig1a", "fig1b", "fig2a", "fig2b", "msharp", "multilayer", "saddle"];

/// Member names and configs of preset `name`, in file order.
pub fn preset(name: &str) -> Result<Vec<(String, RunConfig)>> {
    let members: Vec<_> = MEMBERS.iter().filter(|(p, _, _)| *p == name).collect();
    if members.is_empty() {
        return Err(Error::Config(format!("unknown preset `{name}`; expected one of {}", PRESET_NAMES.join(", "))));
    }
    members.into_iter().map(|(_, m, text)| Ok((m.to_string(), RunConfig::from_json(text)?))).collect()
}

pub fn preset_member(name: &str, member: &str) -> Result<RunConfig> {
    preset(name)?
        .into_iter()
        .find(|(m, _)| m == member)
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Config(format!("preset `{name}` has no member `{member}`")))
}

/// Runs all members of a preset and, only if every run succeeds, writes
/// `<member>.csv` for each into `dir`. Returns the written file names.
pub fn run_preset(name: &str, dir: &Path, parallel: bool) -> Result<Vec<String>> {
    let members = preset(name)?;
    let run = |(m, c): &(String, RunConfig)| run_experiment(c).map(|out| (format!("{m}.csv"), to_csv(&out.records)));
    let outputs: Vec<(String, String)> = if parallel {
        members.par_iter().map(run).collect::<Result<_>>()?
    } else {
        members.iter().map(run).collect::<Result<_>>()?
    };
    std::fs::create_dir_all(dir)?;
    for (file, csv) in &outputs {
        write_atomic(&dir.join(file), csv)?;
    }
    Ok(outputs.into_iter().map(|(f, _)| f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_is_labeled() {
        for name in PRESET_NAMES {
            let members = preset(name).unwrap();
            assert!(!members.is_empty());
            for (_, c) in members {
                assert_eq!(c.preset_name.as_deref(), Some(name));
            }
        }
        assert!(preset("fig9").is_err());
    }
}
