//! Black-Scholes call values with integrated variance and zero rate,
//! used as the convergence oracle for the symmetric interval scheme
//! with `k = 1 -/+ sigma sqrt(dt)`.

use statrs::distribution::{ContinuousCDF, Normal};

/// Deterministic volatility curve `t -> sigma(t)`.
#[derive(Debug, Clone)]
pub enum VolCurve {
    Constant(f64),
    /// Per-step volatilities over consecutive intervals of length `dt`;
    /// the last value extends beyond the covered range.
    PiecewiseConstant { dt: f64, sigmas: Vec<f64> },
}

impl VolCurve {
    /// Integrated variance `int_0^T sigma(t)^2 dt`.
    pub fn total_variance(&self, maturity: f64) -> f64 {
        match self {
            VolCurve::Constant(sigma) => sigma * sigma * maturity,
            VolCurve::PiecewiseConstant { dt, sigmas } => {
                assert!(!sigmas.is_empty() && *dt > 0.0);
                let mut acc = 0.0;
                let mut t = 0.0;
                for &sigma in sigmas {
                    if t >= maturity {
                        return acc;
                    }
                    let span = dt.min(maturity - t);
                    acc += sigma * sigma * span;
                    t += span;
                }
                if t < maturity {
                    let last = *sigmas.last().unwrap();
                    acc += last * last * (maturity - t);
                }
                acc
            }
        }
    }
}

/// Call value `S0 Phi(d1) - K Phi(d2)` with zero interest rate.
pub fn bs_reference_price(s0: f64, strike: f64, maturity: f64, vol: &VolCurve) -> f64 {
    if strike <= 0.0 {
        return s0 - strike;
    }
    let variance = vol.total_variance(maturity);
    if variance <= 0.0 {
        return (s0 - strike).max(0.0);
    }
    let sd = variance.sqrt();
    let d1 = ((s0 / strike).ln() + 0.5 * variance) / sd;
    let d2 = d1 - sd;
    let normal = Normal::new(0.0, 1.0).unwrap();
    s0 * normal.cdf(d1) - strike * normal.cdf(d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_the_money_reference_value() {
        let c = bs_reference_price(100.0, 100.0, 1.0, &VolCurve::Constant(0.2));
        assert!((c - 7.965567455).abs() < 1e-6, "{c}");
    }

    #[test]
    fn degenerate_strikes_and_vols() {
        assert_eq!(
            bs_reference_price(100.0, 0.0, 1.0, &VolCurve::Constant(0.2)),
            100.0
        );
        assert_eq!(
            bs_reference_price(100.0, 80.0, 1.0, &VolCurve::Constant(0.0)),
            20.0
        );
        assert_eq!(
            bs_reference_price(100.0, 120.0, 1.0, &VolCurve::Constant(0.0)),
            0.0
        );
    }

    #[test]
    fn piecewise_variance_matches_constant_on_flat_curves() {
        let pw = VolCurve::PiecewiseConstant {
            dt: 0.25,
            sigmas: vec![0.2, 0.2, 0.2, 0.2],
        };
        assert!((pw.total_variance(1.0) - 0.04).abs() < 1e-15);
        assert!((pw.total_variance(0.5) - 0.02).abs() < 1e-15);
        // Tail extension uses the last value.
        assert!((pw.total_variance(2.0) - 0.08).abs() < 1e-15);
    }
}
