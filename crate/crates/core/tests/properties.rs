use proptest::prelude::*;

use sam_balance::diagnostics::{balance_threshold, balancedness, c_gap, predicted_dbdt_nop};
use sam_balance::linalg::{Matrix, Vector};
use sam_balance::optimizers::{step, ParamState, RuleKind, StepRule};
use sam_balance::problems::{nop_eval, op_eval, sample_batch, Batch, NopProblem, OpProblem, ProblemSpec};
use sam_balance::rng::RngStream;
use sam_balance::verification::finite_diff_check;

fn vector(dim: usize) -> impl Strategy<Value = Vector> {
    (prop::collection::vec(-1.0f64..1.0, dim), -1.0f64..1.0).prop_filter_map("nonzero direction", |(v, log_norm)| {
        let v = Vector::from_vec(v);
        let n = v.norm();
        // Norm log-uniform in [0.1, 10].
        (n > 1e-3).then(|| v.scaled(10f64.powf(log_norm) / n))
    })
}

fn nop_problem() -> NopProblem {
    NopProblem::new(Matrix::diag(&[0.5, 0.0, 0.0]), Vector::from_vec(vec![1.0, 0.8, 0.5]), 1.0, 2).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nop_is_scale_invariant(x in vector(3), y in vector(3), c in prop_oneof![0.05f64..20.0, -20.0f64..-0.05], seed in 0u64..1000) {
        let p = nop_problem();
        let batch = sample_batch(&ProblemSpec::Nop(p.clone()), &mut RngStream::new(seed));
        let a = nop_eval(&x, &y, &p, &batch).unwrap();
        let b = nop_eval(&x.scaled(c), &y.scaled(1.0 / c), &p, &batch).unwrap();
        prop_assert!(rel_close(a.loss, b.loss, 1e-12));
        let scale = a.grad_w.frobenius().max(1e-300);
        for (u, v) in a.grad_w.as_slice().iter().zip(b.grad_w.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn op_is_scale_invariant(x in vector(4), y in vector(4), c in 0.05f64..20.0, seed in 0u64..1000) {
        let p = OpProblem::new(0.5, 1.0, 3).unwrap();
        let batch = sample_batch(&ProblemSpec::Op(p.clone()), &mut RngStream::new(seed));
        let a = op_eval(&x, &y, &p, &batch).unwrap();
        let b = op_eval(&x.scaled(c), &y.scaled(1.0 / c), &p, &batch).unwrap();
        prop_assert!(rel_close(a.loss, b.loss, 1e-12));
        prop_assert!(rel_close(a.fprime, b.fprime, 1e-12) || (a.fprime - b.fprime).abs() <= 1e-12 * (1.0 + a.loss.sqrt()));
    }

    #[test]
    fn gradients_match_finite_differences(x in vector(3), y in vector(3), seed in 0u64..1000) {
        let state = ParamState::single(x, y);
        for problem in [ProblemSpec::Nop(nop_problem()), ProblemSpec::Op(OpProblem::new(0.5, 1.0, 2).unwrap())] {
            let batch = sample_batch(&problem, &mut RngStream::new(seed));
            let report = finite_diff_check(&problem, &state, &batch, 1e-6).unwrap();
            prop_assert!(report.passed, "{}", report);
        }
    }

    #[test]
    fn gap_is_bounded_by_balancedness(x in vector(5), y in vector(5)) {
        let c = c_gap(&x, &y);
        let b = balancedness(&x, &y);
        prop_assert!(c >= 0.0);
        prop_assert!(c * c <= 2.0 * b.abs() * (1.0 + 1e-12));
    }

    #[test]
    fn balancedness_is_antisymmetric(x in vector(3), y in vector(2)) {
        prop_assert_eq!(balancedness(&x, &y), -balancedness(&y, &x));
    }

    #[test]
    fn nop_rate_is_antisymmetric(gx in vector(3), gy in vector(3), rho in 0.0f64..0.5) {
        let a = predicted_dbdt_nop(&gx, &gy, rho).unwrap();
        let b = predicted_dbdt_nop(&gy, &gx, rho).unwrap();
        prop_assert_eq!(a, -b);
    }

    #[test]
    fn threshold_is_rescaling_invariant(x in vector(3), y in vector(3), c in 0.1f64..10.0, entries in prop::collection::vec(-2.0f64..2.0, 9)) {
        let g = Matrix::new(3, 3, entries).unwrap();
        prop_assume!(g.frobenius() > 1e-3);
        if let Ok(t) = balance_threshold(&x, &y, &g) {
            let t2 = balance_threshold(&x.scaled(c), &y.scaled(1.0 / c), &g).unwrap();
            prop_assert!((t - t2).abs() <= 1e-9 * (x.norm() * y.norm()).max(t.abs()));
        }
    }

    #[test]
    fn sam_with_zero_radius_is_sgd(x in vector(3), y in vector(3), seed in 0u64..1000, eta in 1e-5f64..1e-2) {
        let state = ParamState::single(x, y);
        for problem in [ProblemSpec::Nop(nop_problem()), ProblemSpec::Op(OpProblem::new(0.5, 1.0, 2).unwrap())] {
            let batch = sample_batch(&problem, &mut RngStream::new(seed));
            let (a, _) = step(&state, &problem, &batch, &StepRule::sam(eta, 0.0), 0, 1).unwrap();
            let (b, _) = step(&state, &problem, &batch, &StepRule::sgd(eta), 0, 1).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn sgd_drift_identity_holds(x in vector(3), y in vector(3), seed in 0u64..1000, eta in 1e-5f64..1e-2) {
        let problem = ProblemSpec::Nop(nop_problem());
        let state = ParamState::single(x, y);
        let batch = sample_batch(&problem, &mut RngStream::new(seed));
        let (next, info) = step(&state, &problem, &batch, &StepRule::sgd(eta), 0, 1).unwrap();
        let (gx, gy) = &info.eval.grads[0];
        let (p, q) = (state.pair(), next.pair());
        let got = balancedness(&q.x, &q.y) - balancedness(&p.x, &p.y);
        let want = 0.5 * eta * eta * (gx.norm_sq() - gy.norm_sq());
        let n = p.x.norm_sq() + p.y.norm_sq();
        prop_assert!((got - want).abs() <= 1e-10 * 0.5 * n);
    }

    #[test]
    fn msharp_dominance_holds(x in vector(2), y in vector(2), seed in 0u64..1000) {
        let problem = ProblemSpec::Op(OpProblem::new(0.5, 2.0, 4).unwrap());
        let state = ParamState::single(x, y);
        let batch = sample_batch(&problem, &mut RngStream::new(seed));
        let rule = StepRule { m: 4, rho: 0.2, ..StepRule::new(RuleKind::Msam, 1e-4) };
        let (_, info) = step(&state, &problem, &batch, &rule, 0, 1).unwrap();
        let mean = info.subset_fprimes.iter().map(|f| f.abs()).sum::<f64>() / 4.0;
        prop_assert!(mean >= info.eval.fprime.unwrap().abs());
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let problem = ProblemSpec::Nop(nop_problem());
    let draw = |seed| {
        let mut rng = RngStream::new(seed);
        (0..50).map(|_| sample_batch(&problem, &mut rng)).collect::<Vec<Batch>>()
    };
    assert_eq!(draw(11), draw(11));
    assert_ne!(draw(11), draw(12));
}
