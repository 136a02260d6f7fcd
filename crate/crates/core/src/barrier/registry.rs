use std::collections::BTreeMap;

use super::{Barrier, HybridBarrier, LewisBarrier, LogBarrier, VolumetricBarrier};
use crate::error::{Error, Result};

/// Construction options shared by all factories.
#[derive(Clone, Debug)]
pub struct BarrierOptions {
    /// Lewis exponent; `None` selects `max(4, ⌈ln n⌉)`.
    pub lewis_p: Option<f64>,
    /// Constant in the hybrid complexity `κ_h·√(nd)`.
    pub hybrid_kappa: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { lewis_p: None, hybrid_kappa: 1.0 }
    }
}

/// Builds a barrier for an `n × d` instance.
pub type BarrierFactory = fn(&BarrierOptions, usize, usize) -> Result<Box<dyn Barrier>>;

/// Barriers registered by name and selected at runtime.
#[derive(Clone)]
pub struct BarrierRegistry {
    factories: BTreeMap<String, BarrierFactory>,
}

fn make_log(_: &BarrierOptions, _: usize, _: usize) -> Result<Box<dyn Barrier>> {
    Ok(Box::new(LogBarrier))
}

fn make_volumetric(_: &BarrierOptions, _: usize, _: usize) -> Result<Box<dyn Barrier>> {
    Ok(Box::new(VolumetricBarrier))
}

fn make_hybrid(o: &BarrierOptions, n: usize, d: usize) -> Result<Box<dyn Barrier>> {
    Ok(Box::new(HybridBarrier::new(n, d, o.hybrid_kappa)?))
}

fn make_lewis(o: &BarrierOptions, n: usize, _: usize) -> Result<Box<dyn Barrier>> {
    let p = o.lewis_p.unwrap_or_else(|| LewisBarrier::default_p(n));
    Ok(Box::new(LewisBarrier::new(p)?))
}

impl BarrierRegistry {
    pub fn empty() -> Self {
        BarrierRegistry { factories: BTreeMap::new() }
    }

    /// `log`, `volumetric`, `hybrid` and `lewis`.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("log", make_log);
        r.register("volumetric", make_volumetric);
        r.register("hybrid", make_hybrid);
        r.register("lewis", make_lewis);
        r
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: &str, factory: BarrierFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, opts: &BarrierOptions, n: usize, d: usize) -> Result<Box<dyn Barrier>> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownStrategy { kind: "barrier", name: name.to_string() })?;
        f(opts, n, d)
    }
}

impl Default for BarrierRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_registered() {
        let r = BarrierRegistry::with_defaults();
        assert_eq!(r.names(), vec!["hybrid", "lewis", "log", "volumetric"]);
        let b = r.create("lewis", &BarrierOptions::default(), 1000, 3).unwrap();
        assert_eq!(b.sandwich(), 1.0 + 7.0);
        assert!(r.create("universal", &BarrierOptions::default(), 10, 2).is_err());
        assert!(r.create("hybrid", &BarrierOptions::default(), 1, 1).is_err());
    }
}
