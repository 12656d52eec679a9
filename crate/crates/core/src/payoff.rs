//! Payoff functions with the convexity metadata the pricing formulas need.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A scalar payoff `g` on `[0, inf)` together with the two facts the
/// explicit pricing scheme relies on: whether `g` is convex, and its
/// asymptotic slope `M = lim g(z)/z`.
#[derive(Clone)]
pub struct PiecewisePayoff {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    is_convex: bool,
    asymptotic_slope: f64,
    label: String,
}

impl fmt::Debug for PiecewisePayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewisePayoff")
            .field("label", &self.label)
            .field("is_convex", &self.is_convex)
            .field("asymptotic_slope", &self.asymptotic_slope)
            .finish()
    }
}

impl PiecewisePayoff {
    /// European call `(z - strike)^+`.
    pub fn call(strike: f64) -> Self {
        Self {
            eval: Arc::new(move |z| (z - strike).max(0.0)),
            is_convex: true,
            asymptotic_slope: 1.0,
            label: format!("call:{strike}"),
        }
    }

    /// European put `(strike - z)^+`.
    pub fn put(strike: f64) -> Self {
        Self {
            eval: Arc::new(move |z| (strike - z).max(0.0)),
            is_convex: true,
            asymptotic_slope: 0.0,
            label: format!("put:{strike}"),
        }
    }

    /// Affine payoff `a z + b`.
    pub fn linear(slope: f64, intercept: f64) -> Self {
        Self {
            eval: Arc::new(move |z| slope * z + intercept),
            is_convex: true,
            asymptotic_slope: slope,
            label: format!("linear:{slope},{intercept}"),
        }
    }

    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_| 0.0),
            is_convex: true,
            asymptotic_slope: 0.0,
            label: "zero".to_string(),
        }
    }

    /// Wraps an arbitrary evaluator; the caller vouches for the flags.
    pub fn custom(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        is_convex: bool,
        asymptotic_slope: f64,
        label: impl Into<String>,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            is_convex,
            asymptotic_slope,
            label: label.into(),
        }
    }

    /// Wraps a convex evaluator whose slope is not known, estimating
    /// `M` from two chord slopes far out on the axis. The estimate is
    /// rejected unless the chords at `z` and `2z` (z = 1e6 * scale)
    /// agree to 1e-6 relative.
    pub fn convex_with_estimated_slope(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        scale: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let m = estimate_asymptotic_slope(&eval, scale)?;
        Ok(Self::custom(eval, true, m, label))
    }

    /// Parses the payoff mini-language: `call:K`, `put:K`, `linear:a,b`, `zero`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = || Error::PayoffSpec(spec.to_string());
        if spec == "zero" {
            return Ok(Self::zero());
        }
        let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
        match kind {
            "call" => Ok(Self::call(args.trim().parse::<f64>().map_err(|_| bad())?)),
            "put" => Ok(Self::put(args.trim().parse::<f64>().map_err(|_| bad())?)),
            "linear" => {
                let (a, b) = args.split_once(',').ok_or_else(bad)?;
                Ok(Self::linear(
                    a.trim().parse::<f64>().map_err(|_| bad())?,
                    b.trim().parse::<f64>().map_err(|_| bad())?,
                ))
            }
            _ => Err(bad()),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        (self.eval)(z)
    }

    pub fn is_convex(&self) -> bool {
        self.is_convex
    }

    /// `M = lim g(z)/z`, finite by construction.
    pub fn asymptotic_slope(&self) -> f64 {
        self.asymptotic_slope
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Two-point slope estimate of `lim g(z)/z`, sampled at `z = 1e6 * scale`.
pub fn estimate_asymptotic_slope(eval: &impl Fn(f64) -> f64, scale: f64) -> Result<f64> {
    let z = 1e6 * scale.max(1.0);
    let s1 = (eval(2.0 * z) - eval(z)) / z;
    let s2 = (eval(4.0 * z) - eval(2.0 * z)) / (2.0 * z);
    if !s1.is_finite() || !s2.is_finite() {
        return Err(Error::SlopeEstimation(format!(
            "chord slopes not finite at z={z:e}"
        )));
    }
    if (s1 - s2).abs() > 1e-6 * s2.abs().max(1.0) {
        return Err(Error::SlopeEstimation(format!(
            "chord slopes {s1} and {s2} disagree at z={z:e}"
        )));
    }
    Ok(s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mini_language_round_trip() {
        let call = PiecewisePayoff::parse("call:100").unwrap();
        assert_eq!(call.value(120.0), 20.0);
        assert_eq!(call.value(80.0), 0.0);
        assert_eq!(call.asymptotic_slope(), 1.0);

        let put = PiecewisePayoff::parse("put:100").unwrap();
        assert_eq!(put.value(80.0), 20.0);
        assert_eq!(put.asymptotic_slope(), 0.0);

        let lin = PiecewisePayoff::parse("linear:0.5,3").unwrap();
        assert_eq!(lin.value(10.0), 8.0);

        assert_eq!(PiecewisePayoff::parse("zero").unwrap().value(42.0), 0.0);

        assert!(PiecewisePayoff::parse("straddle:100").is_err());
        assert!(PiecewisePayoff::parse("call:abc").is_err());
        assert!(PiecewisePayoff::parse("linear:1").is_err());
    }

    #[test]
    fn slope_estimation_accepts_calls_and_rejects_quadratics() {
        let m = estimate_asymptotic_slope(&|z: f64| (z - 100.0).max(0.0), 100.0).unwrap();
        assert!((m - 1.0).abs() < 1e-12);

        assert!(estimate_asymptotic_slope(&|z: f64| z * z, 100.0).is_err());
    }
}
