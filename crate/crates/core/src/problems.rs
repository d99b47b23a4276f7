//! Synthetic scale-invariant objectives.
//!
//! * NOP: `E ||x y^T - (A + alpha N)||^2` with `N = diag(d) U`, `U` standard normal.
//! * OP: `E w (x^T y - (a + alpha n))^2` with `n` standard normal.
//! * Multi-layer NOP: a sum of independent NOP terms, one per `(x_l, y_l)`.
//!
//! Losses carry no 1/2 factor, so gradients carry a factor 2 and the
//! gradient of each per-sample loss is exactly 2-Lipschitz in the product
//! variable (`LIPSCHITZ`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::RngStream;

/// Lipschitz constant of the per-sample gradient in `W = x y^T` (or `w = x^T y`)
/// for the unit-weight quadratic losses.
pub const LIPSCHITZ: f64 = 2.0;

fn default_batch() -> usize {
    1
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NopProblem {
    pub target: Matrix,
    pub noise_diag: Vector,
    pub snr_alpha: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl NopProblem {
    pub fn new(target: Matrix, noise_diag: Vector, snr_alpha: f64, batch_size: usize) -> Result<Self> {
        let p = Self { target, noise_diag, snr_alpha, batch_size };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_diag.dim() != self.target.rows() {
            return Err(Error::Config(format!(
                "noise_diag has {} entries but target has {} rows",
                self.noise_diag.dim(),
                self.target.rows()
            )));
        }
        if !self.noise_diag.is_finite() {
            return Err(Error::Config("noise_diag must be finite".into()));
        }
        check_common(self.snr_alpha, self.batch_size)
    }

    pub fn x_dim(&self) -> usize {
        self.target.rows()
    }

    pub fn y_dim(&self) -> usize {
        self.target.cols()
    }

    fn sample_into(&self, rng: &mut crate::rng::StepRng) -> Vec<Matrix> {
        (0..self.batch_size)
            .map(|_| {
                let mut n = Matrix::zeros(self.x_dim(), self.y_dim());
                n.data_mut().iter_mut().for_each(|v| *v = rng.standard_normal());
                n.scale_rows(self.noise_diag.as_slice());
                n
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpProblem {
    pub target: f64,
    pub snr_alpha: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Multiplier on the squared residual; 1 for the standard problem.
    #[serde(default = "default_weight")]
    pub loss_weight: f64,
}

impl OpProblem {
    pub fn new(target: f64, snr_alpha: f64, batch_size: usize) -> Result<Self> {
        let p = Self { target, snr_alpha, batch_size, loss_weight: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.target.is_finite() {
            return Err(Error::Config("OP target must be finite".into()));
        }
        if !(self.loss_weight.is_finite() && self.loss_weight > 0.0) {
            return Err(Error::Config("loss_weight must be positive".into()));
        }
        check_common(self.snr_alpha, self.batch_size)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiNopProblem {
    pub layers: Vec<NopProblem>,
}

impl MultiNopProblem {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("multi-layer problem needs at least one layer".into()));
        }
        self.layers.iter().try_for_each(NopProblem::validate)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

fn check_common(snr_alpha: f64, batch_size: usize) -> Result<()> {
    if !(snr_alpha.is_finite() && snr_alpha >= 0.0) {
        return Err(Error::Config(format!("snr_alpha must be finite and >= 0, got {snr_alpha}")));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    Ok(())
}

/// One scale-invariant variable pair `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair {
    pub x: Vector,
    pub y: Vector,
}

impl Pair {
    pub fn new(x: Vector, y: Vector) -> Self {
        Self { x, y }
    }
}

/// Any of the built-in problem classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Nop(NopProblem),
    Op(OpProblem),
    MultiNop(MultiNopProblem),
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemSpec::Nop(p) => p.validate(),
            ProblemSpec::Op(p) => p.validate(),
            ProblemSpec::MultiNop(p) => p.validate(),
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            ProblemSpec::Nop(p) => p.batch_size,
            ProblemSpec::Op(p) => p.batch_size,
            ProblemSpec::MultiNop(p) => p.layers[0].batch_size,
        }
    }

    pub fn set_snr_alpha(&mut self, alpha: f64) {
        match self {
            ProblemSpec::Nop(p) => p.snr_alpha = alpha,
            ProblemSpec::Op(p) => p.snr_alpha = alpha,
            ProblemSpec::MultiNop(p) => p.layers.iter_mut().for_each(|l| l.snr_alpha = alpha),
        }
    }

    pub fn set_batch_size(&mut self, b: usize) {
        match self {
            ProblemSpec::Nop(p) => p.batch_size = b,
            ProblemSpec::Op(p) => p.batch_size = b,
            ProblemSpec::MultiNop(p) => p.layers.iter_mut().for_each(|l| l.batch_size = b),
        }
    }
}

/// Noise draws for one optimizer step.
#[derive(Clone, Debug, PartialEq)]
pub enum Batch {
    /// `N_xi = diag(d) U_xi`, one matrix per sample.
    Nop(Vec<Matrix>),
    /// `n_xi`, one scalar per sample.
    Op(Vec<f64>),
    /// Per layer, per sample.
    MultiNop(Vec<Vec<Matrix>>),
}

impl Batch {
    pub fn len(&self) -> usize {
        match self {
            Batch::Nop(s) => s.len(),
            Batch::Op(s) => s.len(),
            Batch::MultiNop(l) => l.first().map_or(0, Vec::len),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws a fresh batch and advances `rng` by one step.
pub fn sample_batch(problem: &ProblemSpec, rng: &mut RngStream) -> Batch {
    let mut r = rng.next_step();
    match problem {
        ProblemSpec::Nop(p) => Batch::Nop(p.sample_into(&mut r)),
        ProblemSpec::Op(p) => Batch::Op((0..p.batch_size).map(|_| r.standard_normal()).collect()),
        ProblemSpec::MultiNop(p) => Batch::MultiNop(p.layers.iter().map(|l| l.sample_into(&mut r)).collect()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NopEval {
    pub loss: f64,
    /// Batch gradient with respect to `W = x y^T`.
    pub grad_w: Matrix,
    pub gx: Vector,
    pub gy: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpEval {
    pub loss: f64,
    pub fprime: f64,
    pub gx: Vector,
    pub gy: Vector,
}

/// NOP loss and gradients on the given noise samples.
pub fn nop_eval_samples(x: &Vector, y: &Vector, problem: &NopProblem, samples: &[Matrix]) -> Result<NopEval> {
    if x.dim() != problem.x_dim() || y.dim() != problem.y_dim() {
        return Err(Error::Dimension(format!(
            "x is {}, y is {}, target is {}x{}",
            x.dim(),
            y.dim(),
            problem.x_dim(),
            problem.y_dim()
        )));
    }
    if samples.is_empty() {
        return Err(Error::Dimension("empty batch".into()));
    }
    let w = Matrix::outer(x, y);
    let mut grad_sum = Matrix::zeros(problem.x_dim(), problem.y_dim());
    let mut loss = 0.0;
    for noise in samples {
        if !noise.same_shape(&problem.target) {
            return Err(Error::Dimension("noise sample shape differs from target".into()));
        }
        for (k, g) in grad_sum.data_mut().iter_mut().enumerate() {
            let r = w.as_slice()[k] - (problem.target.as_slice()[k] + problem.snr_alpha * noise.as_slice()[k]);
            loss += r * r;
            *g += 2.0 * r;
        }
    }
    let b = samples.len() as f64;
    grad_sum.data_mut().iter_mut().for_each(|g| *g /= b);
    let gx = grad_sum.mul_vec(y);
    let gy = grad_sum.tr_mul_vec(x);
    Ok(NopEval { loss: loss / b, grad_w: grad_sum, gx, gy })
}

pub fn nop_eval(x: &Vector, y: &Vector, problem: &NopProblem, batch: &Batch) -> Result<NopEval> {
    match batch {
        Batch::Nop(samples) => nop_eval_samples(x, y, problem, samples),
        _ => Err(Error::Dimension("NOP evaluation needs a NOP batch".into())),
    }
}

/// OP loss, scalar derivative `f'` and gradients on the given noise samples.
pub fn op_eval_samples(x: &Vector, y: &Vector, problem: &OpProblem, samples: &[f64]) -> Result<OpEval> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!("OP needs dim(x) = dim(y), got {} and {}", x.dim(), y.dim())));
    }
    if samples.is_empty() {
        return Err(Error::Dimension("empty batch".into()));
    }
    let w = x.dot(y);
    let mut loss = 0.0;
    let mut fprime = 0.0;
    for n in samples {
        let r = w - (problem.target + problem.snr_alpha * n);
        loss += problem.loss_weight * r * r;
        fprime += problem.loss_weight * 2.0 * r;
    }
    let b = samples.len() as f64;
    let fprime = fprime / b;
    Ok(OpEval { loss: loss / b, fprime, gx: y.scaled(fprime), gy: x.scaled(fprime) })
}

pub fn op_eval(x: &Vector, y: &Vector, problem: &OpProblem, batch: &Batch) -> Result<OpEval> {
    match batch {
        Batch::Op(samples) => op_eval_samples(x, y, problem, samples),
        _ => Err(Error::Dimension("OP evaluation needs an OP batch".into())),
    }
}

/// Sum of per-layer NOP losses, with each layer's gradients.
pub fn ml_eval(params: &[Pair], problem: &MultiNopProblem, batch: &Batch) -> Result<(f64, Vec<NopEval>)> {
    let Batch::MultiNop(layers) = batch else {
        return Err(Error::Dimension("multi-layer evaluation needs a multi-layer batch".into()));
    };
    if params.len() != problem.depth() {
        return Err(Error::LayerMismatch { expected: problem.depth(), got: params.len() });
    }
    if layers.len() != problem.depth() {
        return Err(Error::LayerMismatch { expected: problem.depth(), got: layers.len() });
    }
    let evals = params
        .iter()
        .zip(&problem.layers)
        .zip(layers)
        .map(|((pair, p), s)| nop_eval_samples(&pair.x, &pair.y, p, s))
        .collect::<Result<Vec<_>>>()?;
    let loss = evals.iter().map(|e| e.loss).sum();
    Ok((loss, evals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_x() -> Vector {
        Vector::from_vec(vec![0.2, -0.1, 0.3])
    }

    fn nop(alpha: f64) -> NopProblem {
        NopProblem::new(Matrix::diag(&[0.5, 0.0, 0.0]), Vector::from_vec(vec![1.0, 0.8, 0.5]), alpha, 1).unwrap()
    }

    fn zero_batch(p: &NopProblem) -> Batch {
        Batch::Nop(vec![Matrix::zeros(p.x_dim(), p.y_dim()); p.batch_size])
    }

    #[test]
    fn nop_loss_at_paper_init() {
        let x = paper_x();
        let y = x.scaled(-3.0);
        let p = nop(0.0);
        let e = nop_eval(&x, &y, &p, &zero_batch(&p)).unwrap();
        // 9 |x x^T|^2 + 6 <x x^T, A> + |A|^2 = 0.1764 + 0.12 + 0.25
        assert!((e.loss - 0.5464).abs() < 1e-12, "{}", e.loss);
    }

    #[test]
    fn nop_zero_y_gives_zero_gx() {
        let x = paper_x();
        let y = Vector::zeros(3);
        let p = nop(0.0);
        let e = nop_eval(&x, &y, &p, &zero_batch(&p)).unwrap();
        assert_eq!(e.gx, Vector::zeros(3));
        let expected = p.target.tr_mul_vec(&x).scaled(-2.0);
        for i in 0..3 {
            assert!((e.gy[i] - expected[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn nop_exact_fit_is_stationary() {
        let x = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let y = Vector::from_vec(vec![0.5, 0.0, 0.0]);
        let p = nop(0.0);
        let e = nop_eval(&x, &y, &p, &zero_batch(&p)).unwrap();
        assert_eq!(e.loss, 0.0);
        assert_eq!(e.grad_w.frobenius(), 0.0);
    }

    #[test]
    fn nop_rejects_bad_dims() {
        let p = nop(0.0);
        let err = nop_eval(&Vector::zeros(2), &Vector::zeros(3), &p, &zero_batch(&p));
        assert!(matches!(err, Err(Error::Dimension(_))));
        assert!(NopProblem::new(Matrix::identity(3), Vector::zeros(2), 0.0, 1).is_err());
        assert!(NopProblem::new(Matrix::identity(3), Vector::zeros(3), -1.0, 1).is_err());
    }

    #[test]
    fn op_values_at_paper_init() {
        let x = paper_x();
        let y = x.scaled(-3.0);
        let p = OpProblem::new(0.5, 0.0, 1).unwrap();
        let e = op_eval(&x, &y, &p, &Batch::Op(vec![0.0])).unwrap();
        assert!((x.dot(&y) + 0.42).abs() < 1e-15);
        assert!((e.loss - 0.8464).abs() < 1e-12);
        assert!((e.fprime + 1.84).abs() < 1e-12);
        assert_eq!(e.gx, y.scaled(e.fprime));
    }

    #[test]
    fn op_exact_fit_and_dim_check() {
        let x = Vector::from_vec(vec![1.0, 0.0]);
        let y = Vector::from_vec(vec![0.5, 3.0]);
        let p = OpProblem::new(0.5, 0.0, 1).unwrap();
        let e = op_eval(&x, &y, &p, &Batch::Op(vec![1.3])).unwrap();
        assert_eq!((e.loss, e.fprime), (0.0, 0.0));
        assert!(op_eval(&x, &Vector::zeros(3), &p, &Batch::Op(vec![0.0])).is_err());
    }

    #[test]
    fn op_scale_invariance() {
        let x = paper_x();
        let y = Vector::from_vec(vec![0.4, 0.9, -0.2]);
        let p = OpProblem::new(0.5, 1.0, 3).unwrap();
        let batch = Batch::Op(vec![0.3, -1.2, 0.7]);
        let c = 7.3;
        let a = op_eval(&x, &y, &p, &batch).unwrap();
        let b = op_eval(&x.scaled(c), &y.scaled(1.0 / c), &p, &batch).unwrap();
        assert!((a.loss - b.loss).abs() <= 1e-12 * a.loss.abs());
        assert!((a.fprime - b.fprime).abs() <= 1e-12 * a.fprime.abs());
    }

    #[test]
    fn sampling_scales_rows_and_is_deterministic() {
        let spec = ProblemSpec::Nop(nop(1.0));
        let mut a = RngStream::new(3);
        let mut b = RngStream::new(3);
        let first = sample_batch(&spec, &mut a);
        assert_eq!(first, sample_batch(&spec, &mut b));
        assert_eq!(a.counter(), 1);

        // Row-norm ratio tends to 1.0 : 0.8 : 0.5.
        let mut sums = [0.0; 3];
        let mut rng = RngStream::new(5);
        let draws = 4000;
        for _ in 0..draws {
            let Batch::Nop(s) = sample_batch(&spec, &mut rng) else { unreachable!() };
            for (i, sum) in sums.iter_mut().enumerate() {
                *sum += (0..3).map(|j| s[0].get(i, j).powi(2)).sum::<f64>();
            }
        }
        let rms: Vec<f64> = sums.iter().map(|s| (s / draws as f64 / 3.0).sqrt()).collect();
        assert!((rms[1] / rms[0] - 0.8).abs() < 0.03, "{rms:?}");
        assert!((rms[2] / rms[0] - 0.5).abs() < 0.03, "{rms:?}");
    }

    #[test]
    fn zero_noise_diag_gives_zero_samples() {
        let p = NopProblem::new(Matrix::identity(2), Vector::zeros(2), 1.0, 2).unwrap();
        let Batch::Nop(s) = sample_batch(&ProblemSpec::Nop(p), &mut RngStream::new(1)) else { unreachable!() };
        assert!(s.iter().all(|m| m.frobenius() == 0.0));
    }

    #[test]
    fn multi_layer_loss_is_sum_of_layers() {
        let l1 = nop(0.7);
        let l2 = NopProblem::new(Matrix::diag(&[0.0, 1.0, 0.3]), Vector::from_vec(vec![0.5, 0.5, 0.5]), 0.7, 1).unwrap();
        let mp = MultiNopProblem { layers: vec![l1.clone(), l2.clone()] };
        let spec = ProblemSpec::MultiNop(mp.clone());
        let batch = sample_batch(&spec, &mut RngStream::new(9));
        let Batch::MultiNop(ref per) = batch else { unreachable!() };
        let params = vec![
            Pair::new(paper_x(), paper_x().scaled(-3.0)),
            Pair::new(Vector::from_vec(vec![0.1, 0.2, 0.3]), Vector::from_vec(vec![1.0, -1.0, 0.5])),
        ];
        let (loss, evals) = ml_eval(&params, &mp, &batch).unwrap();
        let e1 = nop_eval_samples(&params[0].x, &params[0].y, &l1, &per[0]).unwrap();
        let e2 = nop_eval_samples(&params[1].x, &params[1].y, &l2, &per[1]).unwrap();
        assert_eq!(loss, e1.loss + e2.loss);
        assert_eq!(evals, vec![e1, e2]);
        assert!(matches!(ml_eval(&params[..1], &mp, &batch), Err(Error::LayerMismatch { .. })));
    }
}
