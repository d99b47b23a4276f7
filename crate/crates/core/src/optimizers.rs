//! Discrete update rules: SGD, SNGD, SAM (NOP, OP, layered), m-sharpness SAM
//! on OP, and the nBAR/oBAR multiplicative balancedness regularizers.
//!
//! Every rule takes the current [`ParamState`] and one step's [`Batch`] and
//! returns the next state plus a [`StepInfo`] describing what happened. SAM
//! evaluates both of its gradients on the same batch.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problems::{
    ml_eval, nop_eval, op_eval, op_eval_samples, Batch, MultiNopProblem, NopProblem, OpProblem, Pair, ProblemSpec,
};

pub const DEFAULT_GRAD_EPS: f64 = 1e-12;
pub const DEFAULT_DIVERGENCE_LIMIT: f64 = 1e6;

/// Optimization variables: one `(x, y)` pair, or one pair per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamState {
    pub pairs: Vec<Pair>,
}

impl ParamState {
    pub fn single(x: Vector, y: Vector) -> Self {
        Self { pairs: vec![Pair::new(x, y)] }
    }

    pub fn layered(pairs: Vec<Pair>) -> Self {
        Self { pairs }
    }

    pub fn depth(&self) -> usize {
        self.pairs.len()
    }

    /// The first (for two-variable problems, the only) pair.
    pub fn pair(&self) -> &Pair {
        &self.pairs[0]
    }

    /// Largest block norm across all pairs.
    pub fn max_norm(&self) -> f64 {
        self.pairs.iter().flat_map(|p| [p.x.norm(), p.y.norm()]).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.pairs.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }

    /// Fails with [`Error::Divergence`] when any block norm exceeds `limit`
    /// or any entry is non-finite.
    pub fn check_divergence(&self, step: u64, limit: f64) -> Result<()> {
        let norm = self.max_norm();
        if !self.is_finite() || !norm.is_finite() || norm > limit {
            return Err(Error::Divergence { step, norm: if norm.is_nan() { f64::INFINITY } else { norm }, limit });
        }
        Ok(())
    }

    /// Checks that the state has the shape `problem` expects.
    pub fn check_against(&self, problem: &ProblemSpec) -> Result<()> {
        let dims: Vec<(usize, usize)> = match problem {
            ProblemSpec::Nop(p) => vec![(p.x_dim(), p.y_dim())],
            ProblemSpec::Op(_) => {
                let p = self.pairs.first().ok_or(Error::LayerMismatch { expected: 1, got: 0 })?;
                vec![(p.x.dim(), p.x.dim())]
            }
            ProblemSpec::MultiNop(m) => m.layers.iter().map(|l| (l.x_dim(), l.y_dim())).collect(),
        };
        if dims.len() != self.depth() {
            return Err(Error::LayerMismatch { expected: dims.len(), got: self.depth() });
        }
        for (p, (dx, dy)) in self.pairs.iter().zip(dims) {
            if p.x.dim() != dx || p.y.dim() != dy || dx == 0 {
                return Err(Error::Dimension(format!(
                    "initial point is {}/{}, problem expects {dx}/{dy}",
                    p.x.dim(),
                    p.y.dim()
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::Config("initial point must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Sgd,
    Sngd,
    Sam,
    Msam,
    Nbar,
    Obar,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Sgd => "sgd",
            RuleKind::Sngd => "sngd",
            RuleKind::Sam => "sam",
            RuleKind::Msam => "msam",
            RuleKind::Nbar => "nbar",
            RuleKind::Obar => "obar",
        }
    }
}

impl std::str::FromStr for RuleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sgd" => RuleKind::Sgd,
            "sngd" => RuleKind::Sngd,
            "sam" => RuleKind::Sam,
            "msam" => RuleKind::Msam,
            "nbar" => RuleKind::Nbar,
            "obar" => RuleKind::Obar,
            other => return Err(Error::Config(format!("unknown rule kind `{other}`"))),
        })
    }
}

/// How the BAR coefficient `alpha_t` evolves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Constant,
    Linear,
    Cosine,
    /// `alpha_t` is recomputed every step so that the scale step moves each
    /// pair's balancedness by SAM's leading-order amount at radius `rho`.
    Mimic,
}

impl std::str::FromStr for Schedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "constant" => Schedule::Constant,
            "linear" => Schedule::Linear,
            "cosine" => Schedule::Cosine,
            "mimic" => Schedule::Mimic,
            other => return Err(Error::Config(format!("unknown schedule `{other}`"))),
        })
    }
}

fn default_m() -> usize {
    1
}

fn default_grad_eps() -> f64 {
    DEFAULT_GRAD_EPS
}

/// A tagged optimizer configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRule {
    pub kind: RuleKind,
    pub eta: f64,
    #[serde(default)]
    pub rho: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub alpha0: f64,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default = "default_grad_eps")]
    pub grad_eps: f64,
}

impl StepRule {
    pub fn new(kind: RuleKind, eta: f64) -> Self {
        Self { kind, eta, rho: 0.0, m: 1, alpha0: 0.0, schedule: Schedule::Constant, grad_eps: DEFAULT_GRAD_EPS }
    }

    pub fn sgd(eta: f64) -> Self {
        Self::new(RuleKind::Sgd, eta)
    }

    pub fn sam(eta: f64, rho: f64) -> Self {
        Self { rho, ..Self::new(RuleKind::Sam, eta) }
    }

    pub fn validate(&self, problem: &ProblemSpec) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::Config(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !(self.alpha0.is_finite() && self.alpha0 >= 0.0) {
            return Err(Error::Config(format!("alpha0 must be >= 0, got {}", self.alpha0)));
        }
        if !(self.grad_eps.is_finite() && self.grad_eps > 0.0) {
            return Err(Error::Config("grad_eps must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if self.kind == RuleKind::Msam {
            if !matches!(problem, ProblemSpec::Op(_)) {
                return Err(Error::Config("msam is defined for the OP problem only".into()));
            }
            if !problem.batch_size().is_multiple_of(self.m) {
                return Err(Error::Config(format!(
                    "m = {} does not divide batch_size = {}",
                    self.m,
                    problem.batch_size()
                )));
            }
        }
        if self.schedule == Schedule::Mimic && !matches!(self.kind, RuleKind::Nbar | RuleKind::Obar) {
            return Err(Error::Config("mimic schedule applies to nbar/obar only".into()));
        }
        Ok(())
    }
}

/// Per-row flags: `fallback` when SAM degenerated to SGD, `guard` when SNGD
/// skipped a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepFlags {
    pub fallback: bool,
    pub guard: bool,
}

impl StepFlags {
    pub fn merge(&mut self, other: StepFlags) {
        self.fallback |= other.fallback;
        self.guard |= other.guard;
    }

    pub fn any(&self) -> bool {
        self.fallback || self.guard
    }
}

/// Loss and gradients at the current point, for any problem class.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// `(g_x, g_y)` per pair.
    pub grads: Vec<(Vector, Vector)>,
    /// NOP gradient in `W` per pair; empty for OP.
    pub grad_w: Vec<Matrix>,
    /// OP scalar derivative.
    pub fprime: Option<f64>,
}

impl Evaluation {
    pub fn joint_grad_sq(&self) -> f64 {
        self.grads.iter().map(|(gx, gy)| gx.norm_sq() + gy.norm_sq()).sum()
    }
}

pub fn evaluate(state: &ParamState, problem: &ProblemSpec, batch: &Batch) -> Result<Evaluation> {
    match problem {
        ProblemSpec::Nop(p) => {
            let pair = single_pair(state)?;
            let e = nop_eval(&pair.x, &pair.y, p, batch)?;
            Ok(Evaluation { loss: e.loss, grads: vec![(e.gx, e.gy)], grad_w: vec![e.grad_w], fprime: None })
        }
        ProblemSpec::Op(p) => {
            let pair = single_pair(state)?;
            let e = op_eval(&pair.x, &pair.y, p, batch)?;
            Ok(Evaluation { loss: e.loss, grads: vec![(e.gx, e.gy)], grad_w: vec![], fprime: Some(e.fprime) })
        }
        ProblemSpec::MultiNop(p) => {
            let (loss, evals) = ml_eval(&state.pairs, p, batch)?;
            let (grads, grad_w) = evals.into_iter().map(|e| ((e.gx, e.gy), e.grad_w)).unzip();
            Ok(Evaluation { loss, grads, grad_w, fprime: None })
        }
    }
}

fn single_pair(state: &ParamState) -> Result<&Pair> {
    if state.depth() != 1 {
        return Err(Error::LayerMismatch { expected: 1, got: state.depth() });
    }
    Ok(state.pair())
}

/// Record of the multiplicative BAR scale applied before the base update.
#[derive(Clone, Debug, PartialEq)]
pub struct BarInfo {
    /// `s = alpha_t * eta` per pair.
    pub s: Vec<f64>,
    /// Whether `x` was grown (and `y` shrunk) per pair.
    pub grow_x: Vec<bool>,
    /// State right after scaling, before the gradient step.
    pub scaled: ParamState,
}

/// Everything a step computed that diagnostics or verification may need.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// Evaluation at the pre-step point.
    pub eval: Evaluation,
    /// The direction actually subtracted (times `eta`) per pair.
    pub applied: Vec<(Vector, Vector)>,
    /// OP derivative at the perturbed point (SAM on OP).
    pub perturbed_fprime: Option<f64>,
    /// Per-subset `f'_i` at the unperturbed point (m-sharpness).
    pub subset_fprimes: Vec<f64>,
    pub bar: Option<BarInfo>,
    pub flags: StepFlags,
}

impl StepInfo {
    fn plain(eval: Evaluation, applied: Vec<(Vector, Vector)>, flags: StepFlags) -> Self {
        Self { eval, applied, perturbed_fprime: None, subset_fprimes: vec![], bar: None, flags }
    }
}

/// `x' = x - eta g_x`, `y' = y - eta g_y` for every pair.
pub fn sgd_step(state: &ParamState, grads: &[(Vector, Vector)], eta: f64) -> Result<ParamState> {
    if grads.len() != state.depth() {
        return Err(Error::LayerMismatch { expected: state.depth(), got: grads.len() });
    }
    Ok(ParamState {
        pairs: state
            .pairs
            .iter()
            .zip(grads)
            .map(|(p, (gx, gy))| Pair::new(p.x.sub_scaled(eta, gx), p.y.sub_scaled(eta, gy)))
            .collect(),
    })
}

/// Normalized SGD: every block moves by `eta g / sqrt(sum ||g||^2)`. When the
/// joint norm is at most `grad_eps` the state is returned unchanged and the
/// second value is `true`.
pub fn sngd_step(state: &ParamState, grads: &[(Vector, Vector)], eta: f64, grad_eps: f64) -> Result<(ParamState, bool)> {
    let joint: f64 = grads.iter().map(|(gx, gy)| gx.norm_sq() + gy.norm_sq()).sum::<f64>().sqrt();
    if joint <= grad_eps {
        return Ok((state.clone(), true));
    }
    let normalized: Vec<(Vector, Vector)> =
        grads.iter().map(|(gx, gy)| (gx.scaled(1.0 / joint), gy.scaled(1.0 / joint))).collect();
    Ok((sgd_step(state, &normalized, eta)?, false))
}

/// SAM on the two-variable NOP problem.
pub fn sam_nop_step(
    state: &ParamState,
    problem: &NopProblem,
    batch: &Batch,
    eta: f64,
    rho: f64,
    grad_eps: f64,
) -> Result<(ParamState, StepInfo)> {
    let pair = single_pair(state)?;
    let e = nop_eval(&pair.x, &pair.y, problem, batch)?;
    let eval = Evaluation { loss: e.loss, grads: vec![(e.gx, e.gy)], grad_w: vec![e.grad_w], fprime: None };
    let joint = eval.joint_grad_sq().sqrt();
    if joint <= grad_eps {
        return fallback(state, eval, eta);
    }
    let u = 1.0 / joint;
    let (gx, gy) = &eval.grads[0];
    let xt = pair.x.add_scaled(rho * u, gx);
    let yt = pair.y.add_scaled(rho * u, gy);
    let pe = nop_eval(&xt, &yt, problem, batch)?;
    let next = ParamState::single(pair.x.sub_scaled(eta, &pe.gx), pair.y.sub_scaled(eta, &pe.gy));
    Ok((next, StepInfo::plain(eval, vec![(pe.gx, pe.gy)], StepFlags::default())))
}

/// SAM on the layered NOP problem with one perturbation normalized jointly
/// over all layers.
pub fn sam_ml_step(
    state: &ParamState,
    problem: &MultiNopProblem,
    batch: &Batch,
    eta: f64,
    rho: f64,
    grad_eps: f64,
) -> Result<(ParamState, StepInfo)> {
    let (loss, evals) = ml_eval(&state.pairs, problem, batch)?;
    let (grads, grad_w) = evals.into_iter().map(|e| ((e.gx, e.gy), e.grad_w)).unzip();
    let eval = Evaluation { loss, grads, grad_w, fprime: None };
    let joint = eval.joint_grad_sq().sqrt();
    if joint <= grad_eps {
        return fallback(state, eval, eta);
    }
    let u = 1.0 / joint;
    let perturbed: Vec<Pair> = state
        .pairs
        .iter()
        .zip(&eval.grads)
        .map(|(p, (gx, gy))| Pair::new(p.x.add_scaled(rho * u, gx), p.y.add_scaled(rho * u, gy)))
        .collect();
    let (_, pevals) = ml_eval(&perturbed, problem, batch)?;
    let applied: Vec<(Vector, Vector)> = pevals.into_iter().map(|e| (e.gx, e.gy)).collect();
    let next = sgd_step(state, &applied, eta)?;
    Ok((next, StepInfo::plain(eval, applied, StepFlags::default())))
}

/// SAM on the OP problem: the perturbation is along `(y, x)` with sign of `f'`.
pub fn sam_op_step(
    state: &ParamState,
    problem: &OpProblem,
    batch: &Batch,
    eta: f64,
    rho: f64,
    grad_eps: f64,
) -> Result<(ParamState, StepInfo)> {
    let pair = single_pair(state)?;
    let e = op_eval(&pair.x, &pair.y, problem, batch)?;
    let fprime = e.fprime;
    let eval = Evaluation { loss: e.loss, grads: vec![(e.gx, e.gy)], grad_w: vec![], fprime: Some(fprime) };
    let norm = (pair.x.norm_sq() + pair.y.norm_sq()).sqrt();
    if fprime.abs() <= grad_eps || norm == 0.0 {
        return fallback(state, eval, eta);
    }
    let u = fprime.signum() / norm;
    let xt = pair.x.add_scaled(rho * u, &pair.y);
    let yt = pair.y.add_scaled(rho * u, &pair.x);
    let pe = op_eval(&xt, &yt, problem, batch)?;
    let next = ParamState::single(pair.x.sub_scaled(eta, &pe.gx), pair.y.sub_scaled(eta, &pe.gy));
    let mut info = StepInfo::plain(eval, vec![(pe.gx, pe.gy)], StepFlags::default());
    info.perturbed_fprime = Some(pe.fprime);
    Ok((next, info))
}

/// m-sharpness SAM on OP: the batch is cut into `m` contiguous subsets, each
/// gets its own perturbation, and the perturbed gradients are averaged.
pub fn msharp_sam_op_step(
    state: &ParamState,
    problem: &OpProblem,
    batch: &Batch,
    eta: f64,
    rho: f64,
    m: usize,
    grad_eps: f64,
) -> Result<(ParamState, StepInfo)> {
    let pair = single_pair(state)?;
    let Batch::Op(samples) = batch else {
        return Err(Error::Dimension("m-sharpness needs an OP batch".into()));
    };
    if m == 0 || samples.len() % m != 0 {
        return Err(Error::Config(format!("m = {m} does not divide batch size {}", samples.len())));
    }
    let e = op_eval_samples(&pair.x, &pair.y, problem, samples)?;
    let eval = Evaluation { loss: e.loss, grads: vec![(e.gx, e.gy)], grad_w: vec![], fprime: Some(e.fprime) };
    let norm = (pair.x.norm_sq() + pair.y.norm_sq()).sqrt();

    let mut flags = StepFlags::default();
    let mut subset_fprimes = Vec::with_capacity(m);
    let mut acc: Option<(Vector, Vector)> = None;
    for chunk in samples.chunks(samples.len() / m) {
        let sub = op_eval_samples(&pair.x, &pair.y, problem, chunk)?;
        subset_fprimes.push(sub.fprime);
        let (gx, gy) = if sub.fprime.abs() <= grad_eps || norm == 0.0 {
            flags.fallback = true;
            (sub.gx, sub.gy)
        } else {
            let u = sub.fprime.signum() / norm;
            let xt = pair.x.add_scaled(rho * u, &pair.y);
            let yt = pair.y.add_scaled(rho * u, &pair.x);
            let pe = op_eval_samples(&xt, &yt, problem, chunk)?;
            (pe.gx, pe.gy)
        };
        acc = Some(match acc {
            None => (gx, gy),
            Some((ax, ay)) => (ax.add_scaled(1.0, &gx), ay.add_scaled(1.0, &gy)),
        });
    }
    let (sx, sy) = acc.expect("m >= 1");
    let mf = m as f64;
    let gx = Vector::from_vec(sx.iter().map(|v| v / mf).collect());
    let gy = Vector::from_vec(sy.iter().map(|v| v / mf).collect());
    let next = ParamState::single(pair.x.sub_scaled(eta, &gx), pair.y.sub_scaled(eta, &gy));
    let mut info = StepInfo::plain(eval, vec![(gx, gy)], flags);
    info.subset_fprimes = subset_fprimes;
    Ok((next, info))
}

fn fallback(state: &ParamState, eval: Evaluation, eta: f64) -> Result<(ParamState, StepInfo)> {
    let next = sgd_step(state, &eval.grads, eta)?;
    let applied = eval.grads.clone();
    Ok((next, StepInfo::plain(eval, applied, StepFlags { fallback: true, guard: false })))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarMode {
    /// Keyed on gradient norms.
    Nbar,
    /// Keyed on parameter norms.
    Obar,
}

/// Multiplicative BAR scale with factor `s`, applied to each pair
/// independently. Returns the scaled state and, per pair, whether `x` grew.
///
/// nBAR grows `x` when `||g_x|| >= ||g_y||`; oBAR shrinks `x` when
/// `||x|| >= ||y||`.
pub fn bar_scale(state: &ParamState, grads: &[(Vector, Vector)], mode: BarMode, s: &[f64]) -> Result<(ParamState, Vec<bool>)> {
    if grads.len() != state.depth() || s.len() != state.depth() {
        return Err(Error::LayerMismatch { expected: state.depth(), got: grads.len().min(s.len()) });
    }
    let mut grow = Vec::with_capacity(state.depth());
    let mut pairs = Vec::with_capacity(state.depth());
    for ((p, (gx, gy)), &s) in state.pairs.iter().zip(grads).zip(s) {
        if !(s.is_finite() && (0.0..1.0).contains(&s)) {
            return Err(Error::Config(format!("BAR scale s = alpha_t * eta must lie in [0, 1), got {s}")));
        }
        let grow_x = match mode {
            BarMode::Nbar => gx.norm() >= gy.norm(),
            BarMode::Obar => p.x.norm() < p.y.norm(),
        };
        let (fx, fy) = if grow_x { (1.0 + s, 1.0 - s) } else { (1.0 - s, 1.0 + s) };
        pairs.push(Pair::new(p.x.scaled(fx), p.y.scaled(fy)));
        grow.push(grow_x);
    }
    Ok((ParamState { pairs }, grow))
}

/// Time schedule for the BAR coefficient.
pub fn alpha_schedule(t: u64, total: u64, alpha0: f64, kind: Schedule) -> Result<f64> {
    if t > total {
        return Err(Error::Config(format!("schedule step {t} beyond horizon {total}")));
    }
    let frac = if total == 0 { 0.0 } else { t as f64 / total as f64 };
    match kind {
        Schedule::Constant => Ok(alpha0),
        Schedule::Linear => Ok(alpha0 * (1.0 - frac)),
        Schedule::Cosine => Ok(alpha0 * 0.5 * (1.0 + (PI * frac).cos())),
        Schedule::Mimic => Err(Error::Config("mimic coefficients depend on the state, not on time".into())),
    }
}

/// Leading-order SAM rate `dB_l/dt` for each pair at the current point. This is
/// what mimic-mode BAR reproduces.
fn sam_leading_rates(state: &ParamState, eval: &Evaluation, rho: f64) -> Vec<f64> {
    if let Some(fp) = eval.fprime {
        let p = state.pair();
        let n = p.x.norm_sq() + p.y.norm_sq();
        let b = 0.5 * (p.x.norm_sq() - p.y.norm_sq());
        return vec![if n > 0.0 { -2.0 * rho * fp.abs() * b / n.sqrt() } else { 0.0 }];
    }
    let joint = eval.joint_grad_sq().sqrt();
    eval.grads
        .iter()
        .map(|(gx, gy)| if joint > 0.0 { rho * (gx.norm_sq() - gy.norm_sq()) / joint } else { 0.0 })
        .collect()
}

/// One BAR iteration: gradients at the current point, multiplicative scale
/// with `s = alpha_t eta`, then an SGD step with the original gradients.
pub fn bar_step(
    state: &ParamState,
    problem: &ProblemSpec,
    batch: &Batch,
    rule: &StepRule,
    t: u64,
    total: u64,
) -> Result<(ParamState, StepInfo)> {
    let mode = match rule.kind {
        RuleKind::Nbar => BarMode::Nbar,
        RuleKind::Obar => BarMode::Obar,
        other => return Err(Error::Config(format!("bar_step called with rule kind {}", other.name()))),
    };
    let eval = evaluate(state, problem, batch)?;
    let s: Vec<f64> = match rule.schedule {
        Schedule::Mimic => sam_leading_rates(state, &eval, rule.rho)
            .iter()
            .zip(&state.pairs)
            .map(|(rate, p)| {
                let n = p.x.norm_sq() + p.y.norm_sq();
                if n > 0.0 { rule.eta * rate.abs() / n } else { 0.0 }
            })
            .collect(),
        kind => vec![rule.eta * alpha_schedule(t, total, rule.alpha0, kind)?; state.depth()],
    };
    let (scaled, grow_x) = bar_scale(state, &eval.grads, mode, &s)?;
    let next = sgd_step(&scaled, &eval.grads, rule.eta)?;
    let applied = eval.grads.clone();
    let mut info = StepInfo::plain(eval, applied, StepFlags::default());
    info.bar = Some(BarInfo { s, grow_x, scaled });
    Ok((next, info))
}

/// Dispatches one step of `rule`. `t` and `total` feed the BAR schedule.
pub fn step(
    state: &ParamState,
    problem: &ProblemSpec,
    batch: &Batch,
    rule: &StepRule,
    t: u64,
    total: u64,
) -> Result<(ParamState, StepInfo)> {
    match (rule.kind, problem) {
        (RuleKind::Sgd, _) => {
            let eval = evaluate(state, problem, batch)?;
            let next = sgd_step(state, &eval.grads, rule.eta)?;
            let applied = eval.grads.clone();
            Ok((next, StepInfo::plain(eval, applied, StepFlags::default())))
        }
        (RuleKind::Sngd, _) => {
            let eval = evaluate(state, problem, batch)?;
            let (next, guarded) = sngd_step(state, &eval.grads, rule.eta, rule.grad_eps)?;
            let joint = eval.joint_grad_sq().sqrt();
            let applied = if guarded {
                eval.grads.iter().map(|(gx, gy)| (Vector::zeros(gx.dim()), Vector::zeros(gy.dim()))).collect()
            } else {
                eval.grads.iter().map(|(gx, gy)| (gx.scaled(1.0 / joint), gy.scaled(1.0 / joint))).collect()
            };
            Ok((next, StepInfo::plain(eval, applied, StepFlags { fallback: false, guard: guarded })))
        }
        (RuleKind::Sam, ProblemSpec::Nop(p)) => sam_nop_step(state, p, batch, rule.eta, rule.rho, rule.grad_eps),
        (RuleKind::Sam, ProblemSpec::Op(p)) => sam_op_step(state, p, batch, rule.eta, rule.rho, rule.grad_eps),
        (RuleKind::Sam, ProblemSpec::MultiNop(p)) => sam_ml_step(state, p, batch, rule.eta, rule.rho, rule.grad_eps),
        (RuleKind::Msam, ProblemSpec::Op(p)) => {
            msharp_sam_op_step(state, p, batch, rule.eta, rule.rho, rule.m, rule.grad_eps)
        }
        (RuleKind::Msam, _) => Err(Error::Config("msam is defined for the OP problem only".into())),
        (RuleKind::Nbar | RuleKind::Obar, _) => bar_step(state, problem, batch, rule, t, total),
    }
}
