use std::time::Instant;

use super::{build_estimator, check_eps, SketchBuilder, SketchConfig, SpectralSketch};
use crate::error::Result;
use crate::oracle::{CostKind, CostLedger, HalvingChain, RowSource};
use crate::seed;

/// Spectral approximation `B̃ᵀB̃ ≈_ε AᵀA` by repeated halving, charged to the
/// `SpectralApprox` ledger label.
pub fn repeated_halving(
    src: &dyn RowSource,
    eps: f64,
    seed_value: u64,
    cfg: &SketchConfig,
    ledger: &CostLedger,
) -> Result<SpectralSketch> {
    repeated_halving_as(CostKind::SpectralApprox, src, eps, seed_value, cfg, ledger)
}

/// As [`repeated_halving`], charging the row queries and modeled cost to `kind`.
///
/// Walks the lazy chain from its deepest level up: `B_L = A_L`, then each
/// `B_ℓ` samples `A_ℓ` with weights `min(1, 2σ^{B_{ℓ+1}}_i)` at accuracy 1/2,
/// and the final level samples `A` at accuracy `eps`.
pub fn repeated_halving_as(
    kind: CostKind,
    src: &dyn RowSource,
    eps: f64,
    seed_value: u64,
    cfg: &SketchConfig,
    ledger: &CostLedger,
) -> Result<SpectralSketch> {
    check_eps(eps)?;
    let started = Instant::now();
    let (n, d) = (src.n_rows(), src.n_cols());
    let label = kind.label();
    let mut buf = vec![0.0; d];
    let mut queries = 0u64;

    let result = if n <= cfg.shortcut_rows(d, eps) {
        let mut out = SketchBuilder::new(d);
        for i in 0..n {
            src.fill_row(i, &mut buf);
            out.push(i, &buf, 1.0);
        }
        queries += n as u64;
        out.finish(eps)
    } else {
        let chain = HalvingChain::new(seed::derive(seed_value, "halving.chain"), n, d);
        let levels = chain.levels(n);
        let mut current = {
            let mut out = SketchBuilder::new(d);
            for &i in &levels[chain.depth] {
                src.fill_row(i, &mut buf);
                out.push(i, &buf, 1.0);
            }
            queries += levels[chain.depth].len() as u64;
            out.finish(0.5)
        };
        for level in (0..chain.depth).rev() {
            let level_eps = if level == 0 { eps } else { 0.5 };
            let est = build_estimator(
                cfg.mode,
                &current.rows,
                0.5,
                n,
                cfg,
                seed::derive_indexed(seed_value, "halving.estimator", level as u64),
            )?;
            let mut rng = crate::seed::rng(seed::derive_indexed(seed_value, "halving.sample", level as u64));
            let mut out = SketchBuilder::new(d);
            for &i in &levels[level] {
                src.fill_row(i, &mut buf);
                let w = (2.0 * est.score(&buf)).min(1.0);
                let p = cfg.probability(w, d, level_eps);
                let u: f64 = rand::Rng::random(&mut rng);
                if p > 0.0 && u < p {
                    out.push(i, &buf, 1.0 / p.sqrt());
                }
            }
            queries += levels[level].len() as u64;
            current = out.finish(level_eps);
        }
        current
    };

    ledger.add_queries(label, queries);
    ledger.charge_modeled(kind, n.max(d), d, eps)?;
    ledger.add_time(label, started.elapsed());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn small_inputs_are_returned_verbatim() {
        let a = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let ledger = CostLedger::new();
        let s = repeated_halving(&a, 0.5, 1, &SketchConfig::default(), &ledger).unwrap();
        assert_eq!(s.rows, a);
        assert_eq!(ledger.entry("spectral_approx").classical_row_queries, 20);
    }
}
