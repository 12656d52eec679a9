//! Recursive super-hedging valuation of convex payoffs in the
//! deterministic-multiplier model: the next price lies in
//! `[k_d S, k_u S]` with per-step deterministic multipliers.
//!
//! The value function satisfies `h(T, x) = payoff(x)` and
//! `h(t-1, x) = lambda h(t, k_d x) + (1 - lambda) h(t, k_u x)` with
//! `lambda = (k_u - 1)/(k_u - k_d)`, plus the degenerate conventions
//! `0/0 = 0` and, for `k_u = inf`, the correction term
//! `(1 - k_d) x M` where `M` is the payoff's asymptotic slope. The root
//! value is both the infimum super-hedging cost and an attained price.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::payoff::PiecewisePayoff;

/// Step cap for non-recombining (time-inhomogeneous) grids.
pub const MAX_GENERAL_STEPS: usize = 25;

/// Deterministic per-step multipliers and the initial price.
#[derive(Debug, Clone)]
pub struct IntervalModelParams {
    pub k_down: Vec<f64>,
    /// Entries may be `f64::INFINITY`.
    pub k_up: Vec<f64>,
    pub s0: f64,
    /// Step length, in years or episode fractions.
    pub dt: f64,
}

impl IntervalModelParams {
    pub fn new(k_down: Vec<f64>, k_up: Vec<f64>, s0: f64, dt: f64) -> Result<Self> {
        if k_down.len() != k_up.len() {
            return Err(Error::InvalidParams(format!(
                "k_d has {} entries, k_u has {}",
                k_down.len(),
                k_up.len()
            )));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::InvalidParams(format!("S0 = {s0} must be > 0")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt = {dt} must be > 0")));
        }
        for (i, (&kd, &ku)) in k_down.iter().zip(&k_up).enumerate() {
            if kd.is_nan() || kd < 0.0 || kd.is_infinite() {
                return Err(Error::InvalidParams(format!(
                    "k_d[{i}] = {kd} must be finite and >= 0"
                )));
            }
            if ku.is_nan() || ku < 0.0 {
                return Err(Error::InvalidParams(format!("k_u[{i}] = {ku} must be >= 0")));
            }
        }
        Ok(IntervalModelParams { k_down, k_up, s0, dt })
    }

    /// Symmetric multipliers `1 -/+ sigma sqrt(dt)` from a per-step
    /// volatility curve. Requires `sigma sqrt(dt) <= 1`.
    pub fn symmetric(sigmas: &[f64], s0: f64, dt: f64) -> Result<Self> {
        let root = dt.sqrt();
        let mut k_down = Vec::with_capacity(sigmas.len());
        let mut k_up = Vec::with_capacity(sigmas.len());
        for (i, &sigma) in sigmas.iter().enumerate() {
            if !(sigma >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "sigma[{i}] = {sigma} must be >= 0"
                )));
            }
            let move_size = sigma * root;
            if move_size > 1.0 {
                return Err(Error::InvalidParams(format!(
                    "sigma[{i}] sqrt(dt) = {move_size} > 1 gives a negative k_d"
                )));
            }
            k_down.push(1.0 - move_size);
            k_up.push(1.0 + move_size);
        }
        Self::new(k_down, k_up, s0, dt)
    }

    pub fn steps(&self) -> usize {
        self.k_down.len()
    }

    /// AIP holds iff `k_d` in `[0,1]` and `k_u` in `[1,inf]` at every step.
    pub fn validate_aip(&self) -> Result<()> {
        for (i, (&kd, &ku)) in self.k_down.iter().zip(&self.k_up).enumerate() {
            if !(0.0..=1.0).contains(&kd) || ku < 1.0 {
                return Err(Error::AipViolated {
                    step: Some(i),
                    k_down: kd,
                    k_up: ku,
                });
            }
        }
        Ok(())
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.k_down.windows(2).all(|w| w[0] == w[1]) && self.k_up.windows(2).all(|w| w[0] == w[1])
    }
}

/// Convex weights placing the current price between the extreme
/// multipliers: `lambda k_d + (1 - lambda) k_u = 1` when both are finite.
#[derive(Debug, Clone, Copy)]
pub struct LambdaWeights {
    pub lambda: f64,
    pub one_minus_lambda: f64,
    /// Set when `k_u = inf`; the up-branch term is replaced by
    /// `(1 - k_d) x M`.
    pub infinite_upper: bool,
}

/// Weights for one step, with the degenerate conventions:
/// `k_d = k_u = 1` gives `lambda = 0/0 = 0`, and `k_u = inf` gives
/// `lambda = 1` with the correction flag set.
pub fn lambda_weights(k_down: f64, k_up: f64) -> Result<LambdaWeights> {
    if !(0.0..=1.0).contains(&k_down) || k_up < 1.0 {
        return Err(Error::AipViolated {
            step: None,
            k_down,
            k_up,
        });
    }
    if k_up.is_infinite() {
        return Ok(LambdaWeights {
            lambda: 1.0,
            one_minus_lambda: 0.0,
            infinite_upper: true,
        });
    }
    if k_down == k_up {
        return Ok(LambdaWeights {
            lambda: 0.0,
            one_minus_lambda: 1.0,
            infinite_upper: false,
        });
    }
    let lambda = (k_up - 1.0) / (k_up - k_down);
    Ok(LambdaWeights {
        lambda,
        one_minus_lambda: 1.0 - lambda,
        infinite_upper: false,
    })
}

/// One time slice of the value grid.
#[derive(Debug, Clone)]
pub struct LatticeLevel {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub theta: Vec<f64>,
}

/// The computed value surface `h(t, x)` on the multiplicative grid from
/// `S0`, with hedge ratios, plus functional evaluation at arbitrary
/// abscissae for off-grid hedging.
#[derive(Debug, Clone)]
pub struct ValueLattice {
    params: IntervalModelParams,
    payoff: PiecewisePayoff,
    lambdas: Vec<LambdaWeights>,
    levels: Vec<LatticeLevel>,
    /// Homogeneous finite non-degenerate multipliers: level `t` has
    /// `t + 1` nodes and down/up children sit at `j` and `j + 1`.
    recombining: bool,
}

/// Prices a non-negative convex payoff by backward induction.
///
/// Time-homogeneous multipliers use the recombining O(n^2) lattice; the
/// inhomogeneous case expands a full binary grid and is capped at
/// [`MAX_GENERAL_STEPS`] steps. Non-convex payoffs are rejected: those
/// are served by the scenario-tree LP.
pub fn price_recursive(
    params: IntervalModelParams,
    payoff: PiecewisePayoff,
) -> Result<ValueLattice> {
    if !payoff.is_convex() {
        return Err(Error::NonConvexPayoff);
    }
    params.validate_aip()?;
    let n = params.steps();
    let lambdas: Vec<LambdaWeights> = params
        .k_down
        .iter()
        .zip(&params.k_up)
        .map(|(&kd, &ku)| lambda_weights(kd, ku))
        .collect::<Result<_>>()?;

    let homogeneous = params.is_time_homogeneous();
    let recombining = homogeneous
        && n > 0
        && params.k_up[0].is_finite()
        && params.k_down[0] != params.k_up[0];
    if !homogeneous && n > MAX_GENERAL_STEPS {
        return Err(Error::LatticeTooLarge {
            steps: n,
            limit: MAX_GENERAL_STEPS,
        });
    }

    // Grid abscissae.
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    if recombining {
        let (kd, ku) = (params.k_down[0], params.k_up[0]);
        for t in 0..=n {
            xs.push(
                (0..=t)
                    .map(|j| params.s0 * kd.powi((t - j) as i32) * ku.powi(j as i32))
                    .collect(),
            );
        }
    } else {
        xs.push(vec![params.s0]);
        for t in 0..n {
            let (kd, ku) = (params.k_down[t], params.k_up[t]);
            let prev = &xs[t];
            let next = if branches(kd, ku) {
                prev.iter().flat_map(|&x| [kd * x, ku * x]).collect()
            } else {
                prev.iter().map(|&x| kd * x).collect()
            };
            xs.push(next);
        }
    }

    // Backward induction for values and hedge ratios.
    let m = payoff.asymptotic_slope();
    let mut levels: Vec<LatticeLevel> = xs
        .into_iter()
        .map(|x| {
            let len = x.len();
            LatticeLevel {
                x,
                value: vec![0.0; len],
                theta: vec![0.0; len],
            }
        })
        .collect();
    for j in 0..levels[n].x.len() {
        levels[n].value[j] = payoff.value(levels[n].x[j]);
    }
    for t in (0..n).rev() {
        let (kd, ku) = (params.k_down[t], params.k_up[t]);
        let lw = lambdas[t];
        let (head, tail) = levels.split_at_mut(t + 1);
        let level = &mut head[t];
        let next = &tail[0];
        for j in 0..level.x.len() {
            let x = level.x[j];
            let (h_down, h_up) = if recombining {
                (next.value[j], next.value[j + 1])
            } else if branches(kd, ku) {
                (next.value[2 * j], next.value[2 * j + 1])
            } else {
                (next.value[j], next.value[j])
            };
            if lw.infinite_upper {
                level.value[j] = h_down + (1.0 - kd) * x * m;
                level.theta[j] = m;
            } else if kd == ku || x == 0.0 {
                level.value[j] = h_down;
                level.theta[j] = 0.0;
            } else {
                level.value[j] = lw.lambda * h_down + lw.one_minus_lambda * h_up;
                level.theta[j] = (h_up - h_down) / ((ku - kd) * x);
            }
        }
    }

    Ok(ValueLattice {
        params,
        payoff,
        lambdas,
        levels,
        recombining,
    })
}

fn branches(kd: f64, ku: f64) -> bool {
    ku.is_finite() && kd != ku
}

impl ValueLattice {
    pub fn params(&self) -> &IntervalModelParams {
        &self.params
    }

    pub fn payoff(&self) -> &PiecewisePayoff {
        &self.payoff
    }

    pub fn steps(&self) -> usize {
        self.params.steps()
    }

    pub fn levels(&self) -> &[LatticeLevel] {
        &self.levels
    }

    /// `h(0, S0)`: the infimum super-hedging cost, itself a price.
    pub fn root_price(&self) -> f64 {
        self.levels[0].value[0]
    }

    pub fn asymptotic_slope(&self) -> f64 {
        self.payoff.asymptotic_slope()
    }

    /// `h(t, x)` for arbitrary `x >= 0`; the value functions are defined
    /// everywhere, not only on the grid from `S0`.
    pub fn value_at(&self, t: usize, x: f64) -> f64 {
        assert!(t <= self.steps(), "time index {t} beyond horizon");
        if self.recombining {
            self.binomial_value(t, x)
        } else {
            self.recurse_value(t, x)
        }
    }

    /// Hedge ratio at `(t, x)`: the chord slope of `h(t+1, .)` over
    /// `[k_d x, k_u x]`, with the conventions `0/0 = 0` and `M` for an
    /// infinite upper multiplier.
    pub fn hedge_ratio(&self, t: usize, x: f64) -> f64 {
        assert!(t < self.steps(), "no hedging step at the horizon");
        let (kd, ku) = (self.params.k_down[t], self.params.k_up[t]);
        if ku.is_infinite() {
            return self.payoff.asymptotic_slope();
        }
        if kd == ku || x == 0.0 {
            return 0.0;
        }
        let h_down = self.value_at(t + 1, kd * x);
        let h_up = self.value_at(t + 1, ku * x);
        (h_up - h_down) / ((ku - kd) * x)
    }

    fn recurse_value(&self, t: usize, x: f64) -> f64 {
        if t == self.steps() {
            return self.payoff.value(x);
        }
        let (kd, ku) = (self.params.k_down[t], self.params.k_up[t]);
        let lw = self.lambdas[t];
        if lw.infinite_upper {
            self.recurse_value(t + 1, kd * x) + (1.0 - kd) * x * self.payoff.asymptotic_slope()
        } else if kd == ku || x == 0.0 {
            self.recurse_value(t + 1, kd * x)
        } else {
            lw.lambda * self.recurse_value(t + 1, kd * x)
                + lw.one_minus_lambda * self.recurse_value(t + 1, ku * x)
        }
    }

    /// Collapsed recursion for homogeneous finite multipliers: the value
    /// is a binomial mixture of terminal payoffs. Weights are built in
    /// log space so deep lattices cannot underflow.
    fn binomial_value(&self, t: usize, x: f64) -> f64 {
        let steps = self.steps() - t;
        if steps == 0 {
            return self.payoff.value(x);
        }
        if x == 0.0 {
            return self.payoff.value(0.0);
        }
        let (kd, ku) = (self.params.k_down[0], self.params.k_up[0]);
        let lambda = self.lambdas[0].lambda;
        if lambda == 0.0 {
            return self.payoff.value(ku.powi(steps as i32) * x);
        }
        if lambda == 1.0 {
            return self.payoff.value(kd.powi(steps as i32) * x);
        }
        let (ln_l, ln_o) = (lambda.ln(), (1.0 - lambda).ln());
        let ln_fact_n = ln_gamma(steps as f64 + 1.0);
        let mut total = 0.0;
        for ups in 0..=steps {
            let downs = steps - ups;
            let ln_weight = ln_fact_n - ln_gamma(downs as f64 + 1.0) - ln_gamma(ups as f64 + 1.0)
                + downs as f64 * ln_l
                + ups as f64 * ln_o;
            let z = x * kd.powi(downs as i32) * ku.powi(ups as i32);
            total += ln_weight.exp() * self.payoff.value(z);
        }
        total
    }

    /// Tab-separated dump of the grid: `t, x, h, theta`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("t\tx\th\ttheta\n");
        for (t, level) in self.levels.iter().enumerate() {
            for j in 0..level.x.len() {
                out.push_str(&format!(
                    "{t}\t{}\t{}\t{}\n",
                    level.x[j], level.value[j], level.theta[j]
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn lambda_conventions() {
        let lw = lambda_weights(0.5, 2.0).unwrap();
        assert!(close(lw.lambda, 2.0 / 3.0));
        assert!(close(lw.lambda * 0.5 + lw.one_minus_lambda * 2.0, 1.0));

        let lw = lambda_weights(1.0, 1.0).unwrap();
        assert_eq!(lw.lambda, 0.0);
        assert_eq!(lw.one_minus_lambda, 1.0);

        let lw = lambda_weights(0.8, f64::INFINITY).unwrap();
        assert_eq!(lw.lambda, 1.0);
        assert!(lw.infinite_upper);

        assert!(lambda_weights(1.2, 2.0).is_err());
        assert!(lambda_weights(0.5, 0.9).is_err());
    }

    #[test]
    fn two_step_call_prices_to_one_third_of_s0() {
        let params =
            IntervalModelParams::new(vec![0.5, 0.5], vec![2.0, 2.0], 100.0, 1.0).unwrap();
        let lattice = price_recursive(params, PiecewisePayoff::call(100.0)).unwrap();
        assert!(close(lattice.root_price(), 100.0 / 3.0));
        // theta* at the root from the lattice of the same example.
        assert!(close(lattice.levels()[0].theta[0], 2.0 / 3.0));
        assert!(close(lattice.hedge_ratio(0, 100.0), 2.0 / 3.0));
        // Off-grid functional evaluation agrees with the grid.
        assert!(close(lattice.value_at(1, 200.0), lattice.levels()[1].value[1]));
    }

    #[test]
    fn zero_and_affine_payoffs() {
        let params =
            IntervalModelParams::new(vec![0.7, 0.9], vec![1.5, 1.2], 50.0, 1.0).unwrap();
        let lattice = price_recursive(params.clone(), PiecewisePayoff::zero()).unwrap();
        for level in lattice.levels() {
            assert!(level.value.iter().all(|&v| v == 0.0));
        }

        // lambda k_d + (1 - lambda) k_u = 1 makes affine payoffs fixed points.
        let lattice = price_recursive(params, PiecewisePayoff::linear(2.0, 3.0)).unwrap();
        assert!(close(lattice.root_price(), 2.0 * 50.0 + 3.0));
        assert!(close(lattice.value_at(1, 77.0), 2.0 * 77.0 + 3.0));
    }

    #[test]
    fn aip_boundary_call_prices() {
        // k_d = 1: AIP holds, NA fails; calls at or above the money are free.
        let params = IntervalModelParams::new(vec![1.0, 1.0], vec![2.0, 2.0], 100.0, 1.0).unwrap();
        let at = price_recursive(params.clone(), PiecewisePayoff::call(100.0)).unwrap();
        assert!(close(at.root_price(), 0.0));
        let above = price_recursive(params.clone(), PiecewisePayoff::call(150.0)).unwrap();
        assert!(close(above.root_price(), 0.0));
        let below = price_recursive(params, PiecewisePayoff::call(70.0)).unwrap();
        assert!(close(below.root_price(), 30.0));

        // k_u = 1 mirror case.
        let params = IntervalModelParams::new(vec![0.5, 0.5], vec![1.0, 1.0], 100.0, 1.0).unwrap();
        let above = price_recursive(params.clone(), PiecewisePayoff::call(130.0)).unwrap();
        assert!(close(above.root_price(), 0.0));
        let below = price_recursive(params, PiecewisePayoff::call(60.0)).unwrap();
        assert!(close(below.root_price(), 40.0));
    }

    #[test]
    fn infinite_upper_multiplier_uses_the_slope_correction() {
        let params =
            IntervalModelParams::new(vec![0.8], vec![f64::INFINITY], 100.0, 1.0).unwrap();
        let lattice = price_recursive(params, PiecewisePayoff::call(100.0)).unwrap();
        // h(0, x) = g(0.8 x) + 0.2 x M.
        assert!(close(lattice.root_price(), 0.0 + 0.2 * 100.0));
        assert_eq!(lattice.hedge_ratio(0, 100.0), 1.0);
    }

    #[test]
    fn inhomogeneous_grid_is_capped() {
        let n = MAX_GENERAL_STEPS + 1;
        let mut k_down = vec![0.9; n];
        k_down[0] = 0.8;
        let params = IntervalModelParams::new(k_down, vec![1.1; n], 100.0, 1.0).unwrap();
        assert!(matches!(
            price_recursive(params, PiecewisePayoff::call(100.0)),
            Err(Error::LatticeTooLarge { .. })
        ));
    }

    #[test]
    fn aip_violations_and_non_convex_payoffs_are_rejected() {
        let params = IntervalModelParams::new(vec![1.3], vec![2.0], 100.0, 1.0).unwrap();
        assert!(matches!(
            price_recursive(params, PiecewisePayoff::call(100.0)),
            Err(Error::AipViolated { step: Some(0), .. })
        ));

        let params = IntervalModelParams::new(vec![0.5], vec![2.0], 100.0, 1.0).unwrap();
        let bumpy = PiecewisePayoff::custom(|z| (z - 100.0).abs().min(10.0), false, 0.0, "capped");
        assert!(matches!(
            price_recursive(params, bumpy),
            Err(Error::NonConvexPayoff)
        ));
    }

    #[test]
    fn deep_recombining_lattice_binomial_evaluation() {
        let params = IntervalModelParams::symmetric(&[0.2; 400], 100.0, 1.0 / 400.0).unwrap();
        let lattice = price_recursive(params, PiecewisePayoff::call(100.0)).unwrap();
        let functional = lattice.value_at(0, 100.0);
        assert!(
            (functional - lattice.root_price()).abs() < 1e-6,
            "{functional} vs {}",
            lattice.root_price()
        );
    }
}
