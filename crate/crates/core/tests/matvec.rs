use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use tall_lp::matvec::*;
use tall_lp::oracle::{CostKind, CostLedger};
use tall_lp::seed;

fn gaussian(n: usize, d: usize, s: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(s);
    DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `‖e‖_{(BᵀB)⁻¹}` through an LU solve.
fn inv_gram_norm(b: &DMatrix<f64>, e: &DVector<f64>) -> f64 {
    let g = b.transpose() * b;
    let z = g.lu().solve(e).unwrap();
    e.dot(&z).sqrt()
}

fn request<'a>(b: &'a DMatrix<f64>, v: &'a [f64], delta: f64) -> MatVecRequest<'a> {
    let bound = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    MatVecRequest { b, v, v_inf_bound: bound.max(1e-300), delta, failure_prob: 0.01 }
}

#[test]
fn zero_vector_is_exact() {
    let b = gaussian(500, 3, 1);
    let v = vec![0.0; 500];
    let req = MatVecRequest { b: &b, v: &v, v_inf_bound: 1.0, delta: 0.5, failure_prob: 0.01 };
    let est = estimate_matvec(&req, &MatVecConfig::default(), 3, &CostLedger::new()).unwrap();
    assert_eq!(est.y, DVector::zeros(3));
}

#[test]
fn identity_matrix_error_in_two_norm() {
    let b = DMatrix::identity(4, 4);
    let v = vec![0.3, -0.7, 1.0, 0.2];
    let est = estimate_matvec(&request(&b, &v, 0.1), &MatVecConfig::default(), 9, &CostLedger::new()).unwrap();
    let err = (est.y - DVector::from_vec(v)).norm();
    assert!(err <= 0.1, "{err}");
}

#[test]
fn exact_matvec_examples() {
    let b = gaussian(30, 3, 2);
    let mut e1 = vec![0.0; 30];
    e1[0] = 1.0;
    assert_eq!(exact_matvec(&b, &e1), b.row(0).transpose());
    assert_eq!(exact_matvec(&DMatrix::zeros(5, 2), &[1.0; 5]), DVector::zeros(2));
    let v: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
    // Sum in reverse order as an independent check.
    let mut want = DVector::zeros(3);
    for i in (0..30).rev() {
        want += b.row(i).transpose() * v[i];
    }
    assert!((exact_matvec(&b, &v) - want).amax() < 1e-12);
}

#[test]
fn error_rate_on_2048_by_4() {
    let (n, d, delta) = (2048, 4, 0.2);
    let v = vec![1.0; n];
    let mut ok = 0;
    for t in 0..100u64 {
        let b = gaussian(n, d, 300 + t);
        let ledger = CostLedger::new();
        let est = estimate_matvec(&request(&b, &v, delta), &MatVecConfig::default(), t, &ledger).unwrap();
        assert!(!est.exact && est.samples_used > 0);
        ok += (inv_gram_norm(&b, &(est.y - exact_matvec(&b, &v))) <= delta) as usize;
        if t == 0 {
            let e = ledger.entry(CostKind::MatVec.label());
            assert_eq!(e.classical_row_queries, est.samples_used);
            let modeled = (n as f64).sqrt() * d as f64 / delta;
            assert!((e.modeled_quantum_row_queries - modeled).abs() < 1e-9);
        }
    }
    assert!(ok >= 90, "{ok}/100");
}

#[test]
fn sample_mean_and_second_moment() {
    let (n, d) = (1000, 3);
    let b = gaussian(n, d, 77);
    let mut rng = seed::rng(78);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let alpha = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let pre = Preconditioner::build(&b, &MatVecConfig::default(), 5, &CostLedger::new()).unwrap();
    let target = &pre.w_inv_half * exact_matvec(&b, &v);
    let m = 200_000;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    let (mut row, mut x) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..m {
        let l = rng.random_range(0..n);
        pre.sample(&b, v[l], l, &mut row, &mut x);
        for j in 0..d {
            sum[j] += x[j];
            sq[j] += x[j] * x[j];
        }
    }
    for j in 0..d {
        let mean = sum[j] / m as f64;
        let second = sq[j] / m as f64;
        let sd = ((second - mean * mean) / m as f64).sqrt();
        assert!((mean - target[j]).abs() <= 3.0 * sd, "coordinate {j}: {mean} vs {}", target[j]);
        assert!(second <= 1.5 * n as f64 * alpha * alpha, "coordinate {j}: {second}");
    }
}

#[test]
fn norm_transfer_within_factor() {
    let b = gaussian(3000, 4, 12);
    let pre = Preconditioner::build(&b, &MatVecConfig::default(), 2, &CostLedger::new()).unwrap();
    let g = b.transpose() * &b;
    let mut rng = seed::rng(13);
    for _ in 0..100 {
        let y = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w_form = y.dot(&pre.w.clone().lu().solve(&y).unwrap());
        let b_form = y.dot(&g.clone().lu().solve(&y).unwrap());
        let r = w_form / b_form;
        assert!((2.0 / 3.0 - 1e-12..=2.0 + 1e-12).contains(&r), "{r}");
    }
}

#[test]
fn exact_policy_skips_sampling() {
    let b = gaussian(50, 2, 4);
    let v = vec![0.5; 50];
    let cfg = MatVecConfig { policy: SamplingPolicy::ExactWhenCheaper, ..Default::default() };
    let ledger = CostLedger::new();
    let est = estimate_matvec(&request(&b, &v, 0.1), &cfg, 1, &ledger).unwrap();
    assert!(est.exact);
    assert!((est.y - exact_matvec(&b, &v)).amax() < 1e-12);
    assert_eq!(ledger.entry(CostKind::MatVec.label()).classical_row_queries, 50);
}

#[test]
fn budget_formula() {
    let (g, size) = sample_budget(2048, 4, 1.0, 0.2, 0.01);
    assert_eq!(g, (8.0 * 100f64.ln()).ceil() as usize);
    assert_eq!(size, (16.0 * 1.5 * 2048.0 * 4.0 / 0.04 / g as f64).ceil() as usize);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbation_bound_holds(n in 3usize..60, d in 1usize..4, s in any::<u64>(), eps in 0.0f64..0.5) {
        prop_assume!(n >= d);
        let b = gaussian(n, d, s);
        let mut rng = seed::rng(s ^ 3);
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let dv: Vec<f64> = (0..n).map(|_| 1.0 + eps * rng.random_range(-1.0..=1.0)).collect();
        let (lhs, rhs) = perturbation_bound_check(&b, &v, &dv, eps).unwrap();
        prop_assert!(lhs <= rhs + 1e-10);
        let (lhs0, _) = perturbation_bound_check(&b, &v, &vec![1.0; n], eps).unwrap();
        prop_assert_eq!(lhs0, 0.0);
    }

    #[test]
    fn estimates_are_deterministic(s in any::<u64>()) {
        let b = gaussian(300, 2, 5);
        let v = vec![1.0; 300];
        let a = estimate_matvec(&request(&b, &v, 0.5), &MatVecConfig::default(), s, &CostLedger::new()).unwrap();
        let c = estimate_matvec(&request(&b, &v, 0.5), &MatVecConfig::default(), s, &CostLedger::new()).unwrap();
        prop_assert_eq!(a.y, c.y);
    }
}
