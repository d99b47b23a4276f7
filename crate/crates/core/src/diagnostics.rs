//! Balancedness, the norm gap, predicted flow rates, the contraction threshold
//! and the OP sharpness formula.
//!
//! All functions are pure. Predictions report leading terms only.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::optimizers::{Evaluation, ParamState, RuleKind, StepFlags, StepInfo, StepRule};
use crate::problems::Pair;

/// `B = (||x||^2 - ||y||^2) / 2`
pub fn balancedness(x: &Vector, y: &Vector) -> f64 {
    0.5 * (x.norm_sq() - y.norm_sq())
}

/// Per-layer balancedness and their sum.
pub fn layered_balancedness(pairs: &[Pair]) -> (Vec<f64>, f64) {
    let per: Vec<f64> = pairs.iter().map(|p| balancedness(&p.x, &p.y)).collect();
    let total = per.iter().sum();
    (per, total)
}

/// `C = | ||x|| - ||y|| |`, always at most `sqrt(2 |B|)`.
pub fn c_gap(x: &Vector, y: &Vector) -> f64 {
    (x.norm() - y.norm()).abs()
}

/// Leading SAM rate on NOP: `rho (||g_x||^2 - ||g_y||^2) / sqrt(||g_x||^2 + ||g_y||^2)`.
pub fn predicted_dbdt_nop(gx: &Vector, gy: &Vector, rho: f64) -> Result<f64> {
    let (a, b) = (gx.norm_sq(), gy.norm_sq());
    let joint = (a + b).sqrt();
    if joint == 0.0 {
        return Err(Error::Degenerate("zero joint gradient norm"));
    }
    Ok(rho * (a - b) / joint)
}

/// Leading SAM rate on OP: `-2 rho |f'| B / sqrt(||x||^2 + ||y||^2)`. With
/// `m_terms`, `|f'|` becomes the mean of the per-subset `|f'_i|`.
pub fn predicted_dbdt_op(x: &Vector, y: &Vector, fprime: f64, rho: f64, m_terms: Option<&[f64]>) -> Result<f64> {
    let n = x.norm_sq() + y.norm_sq();
    if n == 0.0 {
        return Err(Error::Degenerate("zero parameter norms"));
    }
    let mag = match m_terms {
        Some(terms) if !terms.is_empty() => terms.iter().map(|f| f.abs()).sum::<f64>() / terms.len() as f64,
        Some(_) => return Err(Error::Degenerate("empty m-sharpness terms")),
        None => fprime.abs(),
    };
    Ok(-2.0 * rho * mag * balancedness(x, y) / n.sqrt())
}

/// Leading SAM rate per layer under the joint normalization
/// `u = 1 / sqrt(sum_l ||g_{x,l}||^2 + ||g_{y,l}||^2)`.
pub fn predicted_dbdt_layers(grads: &[(Vector, Vector)], rho: f64) -> Result<Vec<f64>> {
    let joint: f64 = grads.iter().map(|(gx, gy)| gx.norm_sq() + gy.norm_sq()).sum::<f64>().sqrt();
    if joint == 0.0 {
        return Err(Error::Degenerate("zero joint gradient norm"));
    }
    Ok(grads.iter().map(|(gx, gy)| rho * (gx.norm_sq() - gy.norm_sq()) / joint).collect())
}

/// Balancedness level below which SAM's leading-term contraction is no longer
/// guaranteed, for gradient matrix `g` at `(x, y)`.
///
/// The pair is first moved along its scaling orbit to equal norms, then
/// `abar^2 = ||G ybar|| / ||G^T xbar||` and the result is
/// `(abar^2 ||xbar||^2 - ||ybar||^2 / abar^2) / 2`.
pub fn balance_threshold(x: &Vector, y: &Vector, g: &Matrix) -> Result<f64> {
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate("threshold needs nonzero x and y"));
    }
    if g.rows() != x.dim() || g.cols() != y.dim() {
        return Err(Error::Dimension(format!(
            "gradient is {}x{}, params are {}/{}",
            g.rows(),
            g.cols(),
            x.dim(),
            y.dim()
        )));
    }
    let a = (nx / ny).sqrt();
    let xbar = x.scaled(1.0 / a);
    let ybar = y.scaled(a);
    let num = g.mul_vec(&ybar).norm();
    let den = g.tr_mul_vec(&xbar).norm();
    if den == 0.0 || num == 0.0 {
        return Err(Error::Degenerate("threshold needs nonzero G ybar and G^T xbar"));
    }
    let a2 = num / den;
    Ok(0.5 * (a2 * xbar.norm_sq() - ybar.norm_sq() / a2))
}

/// Largest Hessian eigenvalue on the OP minimizer set: `f'' (||x||^2 + ||y||^2)`.
pub fn sharpness_op(x: &Vector, y: &Vector, fsecond: f64) -> f64 {
    fsecond * (x.norm_sq() + y.norm_sq())
}

/// The `c > 0` minimizing `sharpness_op(c x, y / c)`: `(||y|| / ||x||)^(1/2)`.
pub fn sharpness_argmin_scale(x: &Vector, y: &Vector) -> Result<f64> {
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate("scaling argmin needs nonzero x and y"));
    }
    Ok((ny / nx).sqrt())
}

/// Mean of the last `fraction` of `values` (at least one element).
pub fn tail_mean(values: &[f64], fraction: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
    let tail = &values[values.len() - n..];
    Some(tail.iter().sum::<f64>() / n as f64)
}

/// Running mean, used to time-average the threshold.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningMean {
    count: u64,
    mean: f64,
}

impl RunningMean {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.mean += (v - self.mean) / self.count as f64;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerRecord {
    pub b: f64,
    pub c: f64,
    pub gx_norm: f64,
    pub gy_norm: f64,
}

/// One diagnostics row. For layered runs `b` is the sum over layers and `c`
/// is the gap of the concatenated blocks, so `C^2 <= 2|B|` still holds.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub loss: f64,
    pub b: f64,
    pub c: f64,
    pub gx_norm: f64,
    pub gy_norm: f64,
    pub dbdt_pred: Option<f64>,
    pub b_bar: Option<f64>,
    pub flags: StepFlags,
    pub layers: Vec<LayerRecord>,
}

impl TrajectoryRecord {
    /// Builds the row for step `t` from the pre-step state and what the step
    /// computed.
    pub fn from_step(step: u64, state: &ParamState, info: &StepInfo, rule: &StepRule) -> Self {
        let eval = &info.eval;
        let (_, b) = layered_balancedness(&state.pairs);
        let (xs, ys): (f64, f64) =
            state.pairs.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x.norm_sq(), b + p.y.norm_sq()));
        let c = (xs.sqrt() - ys.sqrt()).abs();
        let (gxs, gys) = eval.grads.iter().fold((0.0, 0.0), |(a, b), (gx, gy)| (a + gx.norm_sq(), b + gy.norm_sq()));
        let layers = if state.depth() > 1 {
            state
                .pairs
                .iter()
                .zip(&eval.grads)
                .map(|(p, (gx, gy))| LayerRecord {
                    b: balancedness(&p.x, &p.y),
                    c: c_gap(&p.x, &p.y),
                    gx_norm: gx.norm(),
                    gy_norm: gy.norm(),
                })
                .collect()
        } else {
            vec![]
        };
        let b_bar = match (state.depth(), eval.grad_w.first()) {
            (1, Some(g)) => balance_threshold(&state.pair().x, &state.pair().y, g).ok(),
            _ => None,
        };
        Self {
            step,
            loss: eval.loss,
            b,
            c,
            gx_norm: gxs.sqrt(),
            gy_norm: gys.sqrt(),
            dbdt_pred: predicted_rate(state, info, rule),
            b_bar,
            flags: info.flags,
            layers,
        }
    }
}

/// Leading-order `dB/dt` of the configured rule, summed over layers.
///
/// SAM variants report their flow term. BAR reports the rate of its scale
/// step, `+-(s / eta)(||x||^2 + ||y||^2)` per pair. SGD and SNGD report zero.
pub fn predicted_rate(state: &ParamState, info: &StepInfo, rule: &StepRule) -> Option<f64> {
    let eval: &Evaluation = &info.eval;
    match rule.kind {
        RuleKind::Sgd | RuleKind::Sngd => Some(0.0),
        RuleKind::Sam | RuleKind::Msam => match eval.fprime {
            Some(fp) => {
                let p = state.pair();
                let terms = (rule.kind == RuleKind::Msam).then_some(info.subset_fprimes.as_slice());
                predicted_dbdt_op(&p.x, &p.y, fp, rule.rho, terms).ok()
            }
            None => predicted_dbdt_layers(&eval.grads, rule.rho).ok().map(|v| v.iter().sum()),
        },
        RuleKind::Nbar | RuleKind::Obar => {
            let bar = info.bar.as_ref()?;
            Some(
                state
                    .pairs
                    .iter()
                    .zip(bar.s.iter().zip(&bar.grow_x))
                    .map(|(p, (s, grow))| {
                        let r = s / rule.eta * (p.x.norm_sq() + p.y.norm_sq());
                        if *grow { r } else { -r }
                    })
                    .sum(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(e: &[f64]) -> Vector {
        Vector::from_vec(e.to_vec())
    }

    fn init() -> (Vector, Vector) {
        let x = v(&[0.2, -0.1, 0.3]);
        let y = x.scaled(-3.0);
        (x, y)
    }

    #[test]
    fn balancedness_values() {
        let (x, y) = init();
        assert!((balancedness(&x, &y) + 0.56).abs() < 1e-15);
        assert_eq!(balancedness(&x, &x), 0.0);
        assert_eq!(balancedness(&y, &x), -balancedness(&x, &y));
    }

    #[test]
    fn c_gap_values() {
        let (x, y) = init();
        let expect = (1.26f64.sqrt() - 0.14f64.sqrt()).abs();
        assert!((c_gap(&x, &y) - expect).abs() < 1e-14);
        assert!((c_gap(&x, &y) - 0.74833).abs() < 1e-5);
        assert_eq!(c_gap(&x, &x), 0.0);
    }

    #[test]
    fn nop_rate_values() {
        assert!((predicted_dbdt_nop(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), 0.1).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(predicted_dbdt_nop(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 0.1).unwrap(), 0.0);
        let a = predicted_dbdt_nop(&v(&[0.3, 1.0]), &v(&[0.2]), 0.05).unwrap();
        let b = predicted_dbdt_nop(&v(&[0.2]), &v(&[0.3, 1.0]), 0.05).unwrap();
        assert_eq!(a, -b);
        assert!(matches!(predicted_dbdt_nop(&v(&[0.0]), &v(&[0.0]), 0.1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn op_rate_values() {
        let (x, y) = init();
        let r = predicted_dbdt_op(&x, &y, -1.84, 0.2, None).unwrap();
        let expect = -2.0 * 0.2 * 1.84 * (-0.56) / 1.4f64.sqrt();
        assert!((r - expect).abs() < 1e-12);
        // 0.3485 to four figures.
        assert!((r - 0.3485).abs() < 2e-4);
        assert_eq!(predicted_dbdt_op(&x, &y, -1.84, 0.2, Some(&[-1.84])).unwrap(), r);
        assert_eq!(predicted_dbdt_op(&x, &x, 3.0, 0.2, None).unwrap(), 0.0);
        assert!(predicted_dbdt_op(&v(&[0.0]), &v(&[0.0]), 1.0, 0.1, None).is_err());
    }

    #[test]
    fn threshold_symmetric_cases() {
        let (x, _) = init();
        assert!(balance_threshold(&x, &x.scaled(2.0), &Matrix::identity(3)).unwrap().abs() < 1e-15);
        let x = v(&[1.0, 2.0]);
        let y = v(&[0.5, -1.0]);
        // A symmetric G with x = y direction gives equal norms.
        let g = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let t = balance_threshold(&x, &x, &g).unwrap();
        assert!(t.abs() < 1e-14);
        assert!(balance_threshold(&x, &y, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn threshold_rescaling_invariance() {
        let x = v(&[0.3, -1.2, 0.4]);
        let y = v(&[1.5, 0.1, -0.7]);
        let g = Matrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![-0.3, 0.5, 0.9], vec![0.0, 0.0, 2.0]]).unwrap();
        let t = balance_threshold(&x, &y, &g).unwrap();
        let t2 = balance_threshold(&x.scaled(4.0), &y.scaled(0.25), &g).unwrap();
        assert!((t - t2).abs() <= 1e-12 * t.abs().max(1.0));
    }

    #[test]
    fn sharpness_values() {
        let (x, y) = init();
        assert!((sharpness_op(&x, &y, 2.0) - 2.8).abs() < 1e-14);
        assert_eq!(sharpness_op(&x, &y, 0.0), 0.0);
        let c = sharpness_argmin_scale(&x, &y).unwrap();
        assert!(balancedness(&x.scaled(c), &y.scaled(1.0 / c)).abs() < 1e-15);
        // A log grid around c* never beats it.
        let best = sharpness_op(&x.scaled(c), &y.scaled(1.0 / c), 2.0);
        for k in -40..=40 {
            let cc = c * 10f64.powf(k as f64 / 20.0);
            assert!(sharpness_op(&x.scaled(cc), &y.scaled(1.0 / cc), 2.0) >= best - 1e-14);
        }
    }

    #[test]
    fn means() {
        assert_eq!(tail_mean(&[1.0, 2.0, 3.0, 4.0], 0.5), Some(3.5));
        assert_eq!(tail_mean(&[1.0, 2.0], 0.01), Some(2.0));
        assert_eq!(tail_mean(&[], 0.5), None);
        let mut m = RunningMean::default();
        [1.0, 2.0, 6.0].iter().for_each(|v| m.push(*v));
        assert!((m.mean().unwrap() - 3.0).abs() < 1e-15);
    }
}
