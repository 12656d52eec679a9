//! Rolling out-of-sample evaluation of the super-hedging strategy:
//! estimate multipliers on a trailing window, price and hedge the next
//! episode, and accumulate the distribution of super-hedging errors.

use chrono::NaiveDate;

use crate::calibrate::{asymmetric_estimate, symmetric_estimate, EstimatorKind, WindowConfig};
use crate::error::{Error, Result};
use crate::lattice::{price_recursive, IntervalModelParams};
use crate::payoff::PiecewisePayoff;
use crate::series::{weekly_episodes, PriceSeries};

/// Portfolio state at the start of one hedging step.
#[derive(Debug, Clone, Copy)]
pub struct TradeRow {
    pub price: f64,
    pub theta: f64,
    pub value: f64,
}

/// One priced-and-hedged week.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub start: NaiveDate,
    pub s0: f64,
    pub strike: f64,
    /// Initial cost `h(0, S_0)`.
    pub v0: f64,
    pub v_terminal: f64,
    pub payoff_terminal: f64,
    /// Super-hedging error `V_T - payoff(S_T)`.
    pub epsilon: f64,
    pub ratio_v0_s0: f64,
    /// Whether every realized ratio stayed inside `[k_d, k_u]`. The
    /// super-hedge bound is only claimed on episodes where this holds;
    /// the others are still marked to market.
    pub within_bounds: bool,
    /// Whether the calibrated model needed an AIP clamp.
    pub clamped: bool,
    pub trades: Vec<TradeRow>,
}

/// Runs one episode: price at the realized `S_0`, then self-financing
/// mark-to-market with the hedge read off the value functions at the
/// realized (generally off-grid) prices.
pub fn run_episode(
    closes: &[f64],
    params: &IntervalModelParams,
    payoff: &PiecewisePayoff,
) -> Result<EpisodeResult> {
    let n = params.steps();
    if closes.len() != n + 1 {
        return Err(Error::EpisodeLength {
            got: closes.len(),
            want: n + 1,
        });
    }
    let mut params = params.clone();
    params.s0 = closes[0];
    let within_bounds = closes
        .windows(2)
        .zip(params.k_down.iter().zip(&params.k_up))
        .all(|(w, (&kd, &ku))| {
            let r = w[1] / w[0];
            r >= kd && r <= ku
        });
    let lattice = price_recursive(params, payoff.clone())?;
    let v0 = lattice.root_price();
    let mut value = v0;
    let mut trades = Vec::with_capacity(n);
    for t in 0..n {
        let theta = lattice.hedge_ratio(t, closes[t]);
        trades.push(TradeRow {
            price: closes[t],
            theta,
            value,
        });
        value += theta * (closes[t + 1] - closes[t]);
    }
    let payoff_terminal = payoff.value(closes[n]);
    Ok(EpisodeResult {
        start: NaiveDate::default(),
        s0: closes[0],
        strike: f64::NAN,
        v0,
        v_terminal: value,
        payoff_terminal,
        epsilon: value - payoff_terminal,
        ratio_v0_s0: v0 / closes[0],
        within_bounds,
        clamped: false,
        trades,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrikeRule {
    Fixed(f64),
    /// `K = S_0` of the episode being hedged.
    AtTheMoney,
}

impl StrikeRule {
    fn strike(&self, s0: f64) -> f64 {
        match self {
            StrikeRule::Fixed(k) => *k,
            StrikeRule::AtTheMoney => s0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RollingConfig {
    pub window: WindowConfig,
    pub strike: StrikeRule,
    pub estimator: EstimatorKind,
    /// Worker threads for the episode loop; results are merged in
    /// timestamp order whatever the fan-out.
    pub jobs: usize,
}

/// Error distribution and cost statistics over all evaluated episodes.
#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub episodes: Vec<EpisodeResult>,
    pub mean_eps: f64,
    pub std_eps: f64,
    /// Empirical `P(epsilon < 0)`.
    pub p_neg: f64,
    /// 5% order-statistic quantile of epsilon, sign preserved.
    pub var95: f64,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub out_of_bounds: usize,
    pub clamped_models: usize,
}

/// Slides a one-window calibration in front of each hedged episode:
/// estimate on `window_episodes` trailing weeks, price and hedge the
/// next week with a call under the strike rule, record the error.
pub fn run_rolling(series: &PriceSeries, cfg: &RollingConfig) -> Result<BacktestResult> {
    let episodes = weekly_episodes(series, cfg.window.steps_per_episode)?;
    let w = cfg.window.window_episodes;
    if episodes.len() < w + 1 {
        return Err(Error::InsufficientData(format!(
            "{} complete episodes, need at least {} (window + 1)",
            episodes.len(),
            w + 1
        )));
    }
    let targets: Vec<usize> = (w..episodes.len()).collect();
    let run_one = |&i: &usize| -> Result<EpisodeResult> {
        let window = &episodes[i - w..i];
        let target = &episodes[i];
        let estimate = match cfg.estimator {
            EstimatorKind::Symmetric => symmetric_estimate(window, &cfg.window)?,
            EstimatorKind::Asymmetric => asymmetric_estimate(window, &cfg.window)?,
        };
        let model = estimate.to_params(target.s0(), cfg.window.dt)?;
        let strike = cfg.strike.strike(target.s0());
        let payoff = PiecewisePayoff::call(strike);
        let mut result = run_episode(&target.closes, &model.params, &payoff)?;
        result.start = target.start;
        result.strike = strike;
        result.clamped = !model.clamped_steps.is_empty();
        Ok(result)
    };

    let results: Vec<EpisodeResult> = if cfg.jobs <= 1 {
        targets.iter().map(run_one).collect::<Result<_>>()?
    } else {
        // Contiguous chunks per worker, concatenated in order: the output
        // is identical to the sequential run.
        let chunk = targets.len().div_ceil(cfg.jobs);
        std::thread::scope(|scope| {
            let handles: Vec<_> = targets
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(run_one).collect::<Result<Vec<_>>>()))
                .collect();
            let mut all = Vec::with_capacity(targets.len());
            for h in handles {
                all.extend(h.join().expect("worker panicked")?);
            }
            Ok::<_, Error>(all)
        })?
    };

    let eps: Vec<f64> = results.iter().map(|r| r.epsilon).collect();
    let ratios: Vec<f64> = results.iter().map(|r| r.ratio_v0_s0).collect();
    let (mean_eps, std_eps) = mean_std(&eps);
    let (mean_ratio, std_ratio) = mean_std(&ratios);
    Ok(BacktestResult {
        mean_eps,
        std_eps,
        p_neg: eps.iter().filter(|&&e| e < 0.0).count() as f64 / eps.len() as f64,
        var95: var_95(&eps)?,
        mean_ratio,
        std_ratio,
        out_of_bounds: results.iter().filter(|r| !r.within_bounds).count(),
        clamped_models: results.iter().filter(|r| r.clamped).count(),
        episodes: results,
    })
}

/// Empirical VaR at 95%: the `ceil(0.05 N)`-th smallest sample, no
/// interpolation, sign preserved.
pub fn var_95(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (0.05 * samples.len() as f64).ceil() as usize;
    Ok(sorted[k.max(1) - 1])
}

/// Mean and population standard deviation, summed in index order so the
/// report is bit-identical across runs.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-episode table: one row per hedged week.
pub fn episodes_tsv(result: &BacktestResult) -> String {
    let mut out =
        String::from("start\ts0\tstrike\tv0\tv_terminal\tpayoff\tepsilon\tratio_v0_s0\twithin_bounds\tclamped\n");
    for ep in &result.episodes {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            ep.start,
            ep.s0,
            ep.strike,
            ep.v0,
            ep.v_terminal,
            ep.payoff_terminal,
            ep.epsilon,
            ep.ratio_v0_s0,
            ep.within_bounds,
            ep.clamped
        ));
    }
    out
}

/// Fixed-width histogram of the error sample: `lo, hi, count` rows.
pub fn histogram_tsv(samples: &[f64], bins: usize) -> String {
    let mut out = String::from("bin_lo\tbin_hi\tcount\n");
    if samples.is_empty() || bins == 0 {
        return out;
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        out.push_str(&format!("{lo}\t{hi}\t{}\n", samples.len()));
        return out;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        let b = if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width };
        out.push_str(&format!("{a}\t{b}\t{c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    fn params_2step() -> IntervalModelParams {
        IntervalModelParams::new(vec![0.5, 0.5], vec![2.0, 2.0], 100.0, 0.5).unwrap()
    }

    #[test]
    fn on_lattice_path_replicates_exactly() {
        // Up then down lands on grid points; binomial hedging is exact.
        let params = params_2step();
        let payoff = PiecewisePayoff::call(100.0);
        let r = run_episode(&[100.0, 200.0, 100.0], &params, &payoff).unwrap();
        assert!(close(r.v0, 100.0 / 3.0));
        assert!(close(r.epsilon, 0.0));
        assert!(r.within_bounds);
        // Self-financing identity.
        let rebuilt = r.v0
            + r.trades[0].theta * (200.0 - 100.0)
            + r.trades[1].theta * (100.0 - 200.0);
        assert!((rebuilt - r.v_terminal).abs() <= 1e-12 * rebuilt.abs().max(1.0));
    }

    #[test]
    fn flat_path_keeps_the_initial_cushion() {
        let params = params_2step();
        let payoff = PiecewisePayoff::call(100.0);
        let r = run_episode(&[100.0, 100.0, 100.0], &params, &payoff).unwrap();
        assert!(close(r.v0, 100.0 / 3.0));
        // theta stays at the root hedge 2/3 on the flat path; the gains
        // are zero and the cushion is the whole initial cost.
        assert!(close(r.trades[0].theta, 2.0 / 3.0));
        assert!(close(r.trades[1].theta, 2.0 / 3.0));
        assert!(close(r.epsilon, 100.0 / 3.0));
    }

    #[test]
    fn zero_payoff_is_free_and_exact() {
        let params = params_2step();
        let r = run_episode(&[100.0, 130.0, 90.0], &params, &PiecewisePayoff::zero()).unwrap();
        assert_eq!(r.v0, 0.0);
        assert!(r.trades.iter().all(|t| t.theta == 0.0));
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn episode_length_is_checked() {
        let params = params_2step();
        assert!(matches!(
            run_episode(&[100.0, 110.0], &params, &PiecewisePayoff::zero()),
            Err(Error::EpisodeLength { got: 2, want: 3 })
        ));
    }

    #[test]
    fn var95_order_statistic() {
        let samples: Vec<f64> = (0..21).map(|i| -10.0 + 5.0 * i as f64).collect();
        assert_eq!(var_95(&samples).unwrap(), -5.0);
        assert_eq!(var_95(&[3.0]).unwrap(), 3.0);
        assert_eq!(var_95(&[7.0; 5]).unwrap(), 7.0);
        assert!(var_95(&[]).is_err());
    }
}
