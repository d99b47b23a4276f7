use crate::diagnostics::{balancedness, TrajectoryRecord};
use crate::error::Result;
use crate::optimizers::{step, ParamState, StepInfo, DEFAULT_DIVERGENCE_LIMIT};
use crate::problems::sample_batch;
use crate::rng::RngStream;

use super::config::RunConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: ParamState,
}

/// Runs `config.steps` steps and records a row every `record_every` steps.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutput> {
    run_observed(config, |_, _, _, _| {})
}

/// Like [`run_experiment`], calling `observe(t, before, info, after)` after
/// every step.
pub fn run_observed<F>(config: &RunConfig, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(u64, &ParamState, &StepInfo, &ParamState),
{
    config.validate()?;
    let mut rng = RngStream::new(config.seed);
    let mut state = config.init.clone();
    let mut records = Vec::with_capacity((config.steps / config.record_every + 1) as usize);
    for t in 0..config.steps {
        let batch = sample_batch(&config.problem, &mut rng);
        let (next, info) = step(&state, &config.problem, &batch, &config.rule, t, config.steps)?;
        if t % config.record_every == 0 {
            records.push(TrajectoryRecord::from_step(t, &state, &info, &config.rule));
        }
        observe(t, &state, &info, &next);
        next.check_divergence(t + 1, DEFAULT_DIVERGENCE_LIMIT)?;
        state = next;
    }
    Ok(RunOutput { records, final_state: state })
}

/// Per-step balancedness of the first pair, `B_0 .. B_T`.
pub fn balancedness_path(config: &RunConfig) -> Result<Vec<f64>> {
    let p = config.init.pair();
    let mut path = vec![balancedness(&p.x, &p.y)];
    path.reserve(config.steps as usize);
    run_observed(config, |_, _, _, after| {
        let q = after.pair();
        path.push(balancedness(&q.x, &q.y));
    })?;
    Ok(path)
}

/// First step at which `|B_t| <= fraction |B_0|` (summed over layers), or
/// `config.steps` if that never happens.
pub fn first_passage(config: &RunConfig, fraction: f64) -> Result<u64> {
    let b0: f64 = config.init.pairs.iter().map(|p| balancedness(&p.x, &p.y)).sum();
    let level = fraction * b0.abs();
    if b0.abs() <= level {
        return Ok(0);
    }
    let mut hit: Option<u64> = None;
    run_observed(config, |t, _, _, after| {
        if hit.is_none() {
            let b: f64 = after.pairs.iter().map(|p| balancedness(&p.x, &p.y)).sum();
            if b.abs() <= level {
                hit = Some(t + 1);
            }
        }
    })?;
    Ok(hit.unwrap_or(config.steps))
}

/// One pre/post pair for every step, for identity checks.
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub before: ParamState,
    pub info: StepInfo,
    pub after: ParamState,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub config: RunConfig,
    pub steps: Vec<TraceStep>,
}

pub fn record_trace(config: &RunConfig) -> Result<Trace> {
    let mut steps = Vec::with_capacity(config.steps as usize);
    run_observed(config, |_, before, info, after| {
        steps.push(TraceStep { before: before.clone(), info: info.clone(), after: after.clone() });
    })?;
    Ok(Trace { config: config.clone(), steps })
}
