use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tall_lp::barrier::*;
use tall_lp::linalg::whitened_extremes;
use tall_lp::matvec::SamplingPolicy;
use tall_lp::oracle::{gen_random_tall_lp, unit_interval, CostKind, CostLedger, LpInstance};
use tall_lp::sketch::leverage_scores_exact;
use tall_lp::Error;

fn barriers(n: usize, d: usize) -> Vec<Box<dyn Barrier>> {
    let reg = BarrierRegistry::with_defaults();
    reg.names().iter().map(|name| reg.create(name, &BarrierOptions::default(), n, d).unwrap()).collect()
}

/// Random instance with its start moved a little off-center.
fn instance(n: usize, d: usize, s: u64) -> (LpInstance, DVector<f64>) {
    let inst = gen_random_tall_lp(n, d, s).unwrap();
    let x = inst.x0.clone().unwrap();
    (inst, x)
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

#[test]
fn unit_interval_slacks() {
    let inst = unit_interval(1.0);
    let s = slacks(&inst, &DVector::from_vec(vec![0.5])).unwrap();
    assert_eq!(s.as_slice(), &[0.5, 0.5]);
    match slacks(&inst, &DVector::from_vec(vec![0.0])) {
        Err(Error::InfeasibleInterior { row: 0, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unit_interval_values_gradients_and_surrogates() {
    let inst = unit_interval(1.0);
    let x = DVector::from_vec(vec![0.5]);
    assert!((barrier_value(&LogBarrier, &inst, &x).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert!((barrier_value(&VolumetricBarrier, &inst, &x).unwrap() - 0.5 * 8f64.ln()).abs() < 1e-12);
    assert!(gradient_exact(&LogBarrier, &inst, &x).unwrap()[0].abs() < 1e-12);
    assert!(gradient_exact(&VolumetricBarrier, &inst, &x).unwrap()[0].abs() < 1e-12);
    assert!((hessian_surrogate_exact(&LogBarrier, &inst, &x).unwrap()[(0, 0)] - 8.0).abs() < 1e-12);
    assert!((hessian_surrogate_exact(&VolumetricBarrier, &inst, &x).unwrap()[(0, 0)] - 4.0).abs() < 1e-12);
}

#[test]
fn log_value_decreases_toward_center() {
    // Symmetric box [-1, 1]^2: analytic center at the origin.
    let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    let inst = LpInstance::new(a, DVector::from_element(4, -1.0), DVector::from_vec(vec![1.0, 0.0]), None).unwrap();
    let mut last = f64::INFINITY;
    for k in (0..=18).rev() {
        let t = k as f64 * 0.05;
        let v = barrier_value(&LogBarrier, &inst, &DVector::from_vec(vec![t, 0.5 * t])).unwrap();
        assert!(v < last);
        last = v;
    }
}

#[test]
fn complexity_values() {
    assert_eq!(complexity(BarrierKind::Log, 1000, 10), 1000.0);
    assert!((complexity(BarrierKind::Hybrid { rho: 0.0 }, 10_000, 100) - 1000.0).abs() < 1e-9);
    let (p, n, d) = (5.0, 300usize, 4usize);
    let vp = (p + 2.0f64).powf(1.5) * (n as f64).powf(1.0 / (p + 2.0)) + 4.0 * p.powf(2.5);
    assert!((complexity(BarrierKind::Lewis { p }, n, d) - d as f64 * vp * vp).abs() < 1e-6);
    let hybrid = HybridBarrier::new(n, d, 1.0).unwrap();
    assert!((hybrid.rho - 3.0 / 299.0).abs() < 1e-15);
    assert!(HybridBarrier::new(1, 1, 1.0).is_err());
    assert!(LewisBarrier::new(3.0).is_err());
    assert_eq!(LewisBarrier::default_p(10), 4.0);
    assert_eq!(LewisBarrier::default_p(1000), 7.0);
}

#[test]
fn gradients_match_finite_differences() {
    for s in 0..5 {
        let (inst, x) = instance(30, 3, s);
        for b in barriers(inst.n, inst.d) {
            let h = 1e-5 * (1.0 + x.norm());
            let g = gradient_exact(b.as_ref(), &inst, &x).unwrap();
            let fd = gradient_fd(b.as_ref(), &inst, &x, h).unwrap();
            assert!(rel(&g, &fd) <= 1e-4, "{} seed {s}: {}", b.name(), rel(&g, &fd));
        }
    }
}

#[test]
fn log_surrogate_is_the_hessian() {
    for s in 0..5 {
        let (inst, x) = instance(40, 4, s);
        let h = hessian_surrogate_exact(&LogBarrier, &inst, &x).unwrap();
        let fd = hessian_fd(&LogBarrier, &inst, &x, 1e-5 * (1.0 + x.norm())).unwrap();
        assert!((&h - &fd).norm() / h.norm() <= 1e-4);
    }
}

#[test]
fn volumetric_sandwich_on_small_instances() {
    for s in 0..20 {
        let (inst, x) = instance(12 + s as usize, 2 + (s as usize % 3), 100 + s);
        let surrogate = hessian_surrogate_exact(&VolumetricBarrier, &inst, &x).unwrap();
        let exact = hessian_fd(&VolumetricBarrier, &inst, &x, 1e-5 * (1.0 + x.norm())).unwrap();
        let (lo, hi) = whitened_extremes(&surrogate, &exact).unwrap();
        assert!(lo >= 1.0 - 1e-4 && hi <= 5.0 + 1e-4, "seed {s}: [{lo}, {hi}]");
    }
}

#[test]
fn lewis_surrogate_sandwich() {
    for s in 0..10 {
        let (inst, x) = instance(16, 2, 200 + s);
        let b = LewisBarrier::new(4.0).unwrap();
        let surrogate = hessian_surrogate_exact(&b, &inst, &x).unwrap();
        let exact = hessian_fd(&b, &inst, &x, 1e-5 * (1.0 + x.norm())).unwrap();
        let (lo, hi) = whitened_extremes(&surrogate, &exact).unwrap();
        assert!(lo >= 1.0 - 1e-4 && hi <= 5.0 + 1e-4, "seed {s}: [{lo}, {hi}]");
    }
}

#[test]
fn weights_sum_to_dimension() {
    let (inst, x) = instance(50, 3, 4);
    let s = slacks(&inst, &x).unwrap();
    let m = scaled_rows(&inst.a, &s);
    let sigma: f64 = VolumetricBarrier.exact_weights(&m).unwrap().iter().sum();
    assert!((sigma - 3.0).abs() < 1e-10);
    let lev: f64 = leverage_scores_exact(&m).iter().sum();
    assert!((lev - 3.0).abs() < 1e-10);
    let lewis: f64 = LewisBarrier::new(4.0).unwrap().exact_weights(&m).unwrap().iter().sum();
    assert!((lewis - 3.0).abs() < 1e-9);
}

#[test]
fn log_hessian_sketch_sandwich_rate() {
    let eps = 0.3;
    let mut ok = 0;
    let cfg = OracleConfig::default();
    for t in 0..100u64 {
        let (inst, x) = instance(2048, 6, 1000 + t);
        let ledger = CostLedger::new();
        let hs = hessian_sketch(&LogBarrier, &inst, &x, eps, &cfg, t, &ledger).unwrap();
        assert!(hs.q.clone().cholesky().is_some());
        let h = hessian_surrogate_exact(&LogBarrier, &inst, &x).unwrap();
        let (lo, hi) = whitened_extremes(&hs.q, &h).unwrap();
        ok += (lo >= 1.0 - eps && hi <= 1.0 + eps) as usize;
        if t == 0 {
            assert!(ledger.entry(CostKind::HessianLog.label()).classical_row_queries >= 2048);
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn volumetric_hessian_sketch_sandwich() {
    let eps = 0.3;
    let cfg = OracleConfig::default();
    let mut ok = 0;
    for t in 0..20u64 {
        let (inst, x) = instance(2048, 6, 2000 + t);
        let hs = hessian_sketch(&VolumetricBarrier, &inst, &x, eps, &cfg, t, &CostLedger::new()).unwrap();
        let h = hessian_surrogate_exact(&VolumetricBarrier, &inst, &x).unwrap();
        let (lo, hi) = whitened_extremes(&hs.q, &h).unwrap();
        ok += (lo >= 1.0 - eps && hi <= 1.0 + eps) as usize;
    }
    assert!(ok >= 19, "{ok}/20");
}

#[test]
fn small_instances_take_the_shortcut() {
    let (inst, x) = instance(40, 3, 6);
    let hs = hessian_sketch(&LogBarrier, &inst, &x, 0.3, &OracleConfig::default(), 1, &CostLedger::new()).unwrap();
    let h = hessian_surrogate_exact(&LogBarrier, &inst, &x).unwrap();
    assert!((hs.q - h).amax() < 1e-9);
}

fn sampling_cfg() -> OracleConfig {
    let mut cfg = OracleConfig::default();
    cfg.matvec.policy = SamplingPolicy::MonteCarlo;
    cfg
}

#[test]
fn unit_interval_gradient_estimate() {
    let inst = unit_interval(1.0);
    let x = DVector::from_vec(vec![0.5]);
    let g = gradient_estimate(&LogBarrier, &inst, &x, 0.1, &sampling_cfg(), 3, &CostLedger::new()).unwrap();
    assert!(g[0].abs() / 8f64.sqrt() <= 0.1);
}

fn gradient_error(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let exact = gradient_exact(b, inst, x).unwrap();
    let h = hessian_surrogate_exact(b, inst, x).unwrap();
    let e = g - exact;
    e.dot(&h.lu().solve(&e).unwrap()).sqrt()
}

#[test]
fn log_gradient_estimate_rate() {
    let zeta = 0.2;
    let mut ok = 0;
    for t in 0..100u64 {
        let (inst, x) = instance(2048, 4, 3000 + t);
        let g = gradient_estimate(&LogBarrier, &inst, &x, zeta, &sampling_cfg(), t, &CostLedger::new()).unwrap();
        ok += (gradient_error(&LogBarrier, &inst, &x, &g) <= zeta) as usize;
    }
    assert!(ok >= 90, "{ok}/100");
}

#[test]
fn volumetric_gradient_estimate_rate() {
    let zeta = 0.25;
    let mut ok = 0;
    for t in 0..20u64 {
        let (inst, x) = instance(1024, 3, 4000 + t);
        let ledger = CostLedger::new();
        let g = gradient_estimate(&VolumetricBarrier, &inst, &x, zeta, &sampling_cfg(), t, &ledger).unwrap();
        ok += (gradient_error(&VolumetricBarrier, &inst, &x, &g) <= zeta) as usize;
        assert!(ledger.entry(CostKind::GradVol.label()).modeled_quantum_row_queries > 0.0);
    }
    assert!(ok >= 18, "{ok}/20");
}

#[test]
fn approximate_weights_are_within_tolerance() {
    let (inst, x) = instance(400, 3, 8);
    let s = slacks(&inst, &x).unwrap();
    let m = scaled_rows(&inst.a, &s);
    let cfg = OracleConfig::default();
    for b in barriers(inst.n, inst.d) {
        if b.unit_weights() {
            continue;
        }
        let delta = 0.1;
        let exact = b.exact_weights(&m).unwrap();
        let approx = b.approx_weights(&m, delta, &cfg, 2, &CostLedger::new()).unwrap();
        for (a, e) in approx.iter().zip(&exact) {
            assert!((a / e - 1.0).abs() <= delta, "{}: {a} vs {e}", b.name());
        }
    }
}

#[test]
fn registry_rejects_unknown_names() {
    let reg = BarrierRegistry::with_defaults();
    assert!(matches!(
        reg.create("universal", &BarrierOptions::default(), 10, 2),
        Err(Error::UnknownStrategy { .. })
    ));
    let lewis = reg.create("lewis", &BarrierOptions { lewis_p: Some(6.0), ..Default::default() }, 100, 2).unwrap();
    assert_eq!(lewis.kind(), BarrierKind::Lewis { p: 6.0 });
    assert_eq!(lewis.sandwich(), 7.0);
    let mut custom = BarrierRegistry::empty();
    custom.register("plain", |_, _, _| Ok(Box::new(LogBarrier)));
    assert_eq!(custom.names(), vec!["plain"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn surrogates_are_positive_definite(n in 6usize..40, d in 1usize..4, s in any::<u64>()) {
        prop_assume!(n >= 2 * d);
        let (inst, x) = instance(n, d, s);
        for b in barriers(n, d) {
            let h = hessian_surrogate_exact(b.as_ref(), &inst, &x).unwrap();
            prop_assert!(h.cholesky().is_some());
        }
    }

    #[test]
    fn gradient_consistency_random(n in 8usize..30, d in 1usize..4, s in any::<u64>()) {
        prop_assume!(n >= 2 * d);
        let (inst, x) = instance(n, d, s);
        for b in barriers(n, d) {
            let g = gradient_exact(b.as_ref(), &inst, &x).unwrap();
            let fd = gradient_fd(b.as_ref(), &inst, &x, 1e-5 * (1.0 + x.norm())).unwrap();
            prop_assert!(rel(&g, &fd) <= 1e-4 || (&g - &fd).norm() <= 1e-7, "{}: {}", b.name(), rel(&g, &fd));
        }
    }
}
