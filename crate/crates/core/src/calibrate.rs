//! Multiplier estimation from historical windows: the symmetric
//! volatility-max estimator, the asymmetric min/max ratio estimator, and
//! the empirical coverage of the interval assumption.

use crate::error::{Error, Result};
use crate::lattice::IntervalModelParams;
use crate::series::Episode;

/// Sliding-window setup: `window_episodes` trailing weeks feed the
/// estimators, each week carrying `steps_per_episode` intra-week steps
/// of length `dt`.
#[derive(Debug, Clone)]
pub struct WindowConfig {
    pub window_episodes: usize,
    pub steps_per_episode: usize,
    pub dt: f64,
    /// Pool all step indices instead of estimating each separately.
    pub pooled: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_episodes: 52,
            steps_per_episode: 4,
            dt: 0.25,
            pooled: false,
        }
    }
}

impl WindowConfig {
    pub fn with_steps(steps: usize) -> Self {
        WindowConfig {
            window_episodes: 52,
            steps_per_episode: steps,
            dt: 1.0 / steps as f64,
            pooled: false,
        }
    }
}

/// Which of the two estimators drives a calibration or backtest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Symmetric,
    Asymmetric,
}

/// Per-step-index parameter estimate over one window.
#[derive(Debug, Clone)]
pub enum Estimate {
    Symmetric { sigma: Vec<f64>, dt: f64 },
    Asymmetric { k_down: Vec<f64>, k_up: Vec<f64> },
}

/// An estimate turned into pricing parameters, with the steps that had
/// to be clamped into the AIP region recorded for audit.
#[derive(Debug, Clone)]
pub struct CalibratedModel {
    pub params: IntervalModelParams,
    pub clamped_steps: Vec<usize>,
}

impl Estimate {
    /// Converts to interval-model parameters, clamping any step that
    /// falls outside the AIP region (`k_d <= 1 <= k_u`) to the boundary.
    /// Pricing requires AIP; clamping is the minimal, auditable repair.
    pub fn to_params(&self, s0: f64, dt: f64) -> Result<CalibratedModel> {
        let mut clamped = Vec::new();
        let (k_down, k_up) = match self {
            Estimate::Symmetric { sigma, dt } => {
                let root = dt.sqrt();
                let mut k_down = Vec::with_capacity(sigma.len());
                let mut k_up = Vec::with_capacity(sigma.len());
                for (i, &s) in sigma.iter().enumerate() {
                    let mv = s * root;
                    if mv > 1.0 {
                        clamped.push(i);
                    }
                    k_down.push((1.0 - mv).max(0.0));
                    k_up.push(1.0 + mv);
                }
                (k_down, k_up)
            }
            Estimate::Asymmetric { k_down, k_up } => {
                let mut kd = Vec::with_capacity(k_down.len());
                let mut ku = Vec::with_capacity(k_up.len());
                for (i, (&d, &u)) in k_down.iter().zip(k_up).enumerate() {
                    if d > 1.0 || u < 1.0 {
                        clamped.push(i);
                    }
                    kd.push(d.min(1.0));
                    ku.push(u.max(1.0));
                }
                (kd, ku)
            }
        };
        let params = IntervalModelParams::new(k_down, k_up, s0, dt)?;
        params.validate_aip()?;
        Ok(CalibratedModel {
            params,
            clamped_steps: clamped,
        })
    }
}

/// Canonical per-step ratio: `S_{i+1}/S_i` rounded to 9 significant
/// decimal digits. The rounding is far below every estimation tolerance
/// and removes the last-ulp noise a price re-denomination leaves in the
/// quotients, so estimates are bit-identical under close-price scaling.
pub fn canonical_ratio(s_next: f64, s_prev: f64) -> f64 {
    let r = s_next / s_prev;
    if r == 0.0 {
        return 0.0;
    }
    let exponent = r.abs().log10().floor();
    let scale = 10f64.powf(8.0 - exponent);
    (r * scale).round() / scale
}

fn check_window(episodes: &[Episode], cfg: &WindowConfig) -> Result<()> {
    if episodes.is_empty() {
        return Err(Error::WindowTooLarge {
            window: cfg.window_episodes,
            available: 0,
        });
    }
    let want = cfg.steps_per_episode + 1;
    for ep in episodes {
        if ep.closes.len() != want {
            return Err(Error::EpisodeLength {
                got: ep.closes.len(),
                want,
            });
        }
        if ep.closes.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidSeries(format!(
                "non-positive close in episode starting {}",
                ep.start
            )));
        }
    }
    Ok(())
}

/// Canonical ratios of one episode.
fn ratios(ep: &Episode) -> impl Iterator<Item = f64> + '_ {
    ep.closes.windows(2).map(|w| canonical_ratio(w[1], w[0]))
}

/// Per-step deviation `|S_{i+1}/S_i - 1| / sqrt(dt)` of one episode.
fn deviations(ep: &Episode, dt: f64) -> impl Iterator<Item = f64> + '_ {
    ratios(ep).map(move |r| (r - 1.0).abs() / dt.sqrt())
}

/// Volatility-max estimator: per step index, the largest deviation
/// observed across the window.
pub fn symmetric_estimate(episodes: &[Episode], cfg: &WindowConfig) -> Result<Estimate> {
    check_window(episodes, cfg)?;
    let n = cfg.steps_per_episode;
    let mut sigma = vec![0.0_f64; n];
    for ep in episodes {
        for (i, dev) in deviations(ep, cfg.dt).enumerate() {
            sigma[i] = sigma[i].max(dev);
        }
    }
    if cfg.pooled {
        let all = sigma.iter().copied().fold(0.0_f64, f64::max);
        sigma = vec![all; n];
    }
    Ok(Estimate::Symmetric { sigma, dt: cfg.dt })
}

/// Min/max ratio estimator: per step index, the extreme ratios observed
/// across the window. The bounds are one-sided and hence tighter than
/// (or equal to) the symmetric ones on the same window.
pub fn asymmetric_estimate(episodes: &[Episode], cfg: &WindowConfig) -> Result<Estimate> {
    check_window(episodes, cfg)?;
    let n = cfg.steps_per_episode;
    let mut k_down = vec![f64::INFINITY; n];
    let mut k_up = vec![f64::NEG_INFINITY; n];
    for ep in episodes {
        for (i, r) in ratios(ep).enumerate() {
            k_down[i] = k_down[i].min(r);
            k_up[i] = k_up[i].max(r);
        }
    }
    if cfg.pooled {
        let lo = k_down.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = k_up.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        k_down = vec![lo; n];
        k_up = vec![hi; n];
    }
    Ok(Estimate::Asymmetric { k_down, k_up })
}

/// Fraction of observed steps whose deviation stays within the sigma
/// envelope. The comparison uses the same expression as the estimator,
/// so in-window coverage of [`symmetric_estimate`] is exactly 1.
pub fn coverage_ratio(episodes: &[Episode], sigma: &[f64], dt: f64) -> f64 {
    let mut total = 0usize;
    let mut covered = 0usize;
    for ep in episodes {
        for (i, dev) in deviations(ep, dt).enumerate() {
            if i >= sigma.len() {
                break;
            }
            total += 1;
            if dev <= sigma[i] {
                covered += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn ep(closes: &[f64]) -> Episode {
        Episode {
            start: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            closes: closes.to_vec(),
        }
    }

    fn cfg(steps: usize, dt: f64) -> WindowConfig {
        WindowConfig {
            window_episodes: 52,
            steps_per_episode: steps,
            dt,
            pooled: false,
        }
    }

    #[test]
    fn symmetric_max_of_deviations() {
        // Two one-step episodes: ratios 1.1 and 0.9090..., dt = 1.
        let eps = [ep(&[100.0, 110.0]), ep(&[110.0, 100.0])];
        let est = symmetric_estimate(&eps, &cfg(1, 1.0)).unwrap();
        let Estimate::Symmetric { sigma, .. } = &est else {
            unreachable!()
        };
        assert!((sigma[0] - 0.1).abs() < 1e-15);

        // Constant series: sigma = 0.
        let eps = [ep(&[100.0, 100.0, 100.0])];
        let est = symmetric_estimate(&eps, &cfg(2, 1.0)).unwrap();
        let Estimate::Symmetric { sigma, .. } = &est else {
            unreachable!()
        };
        assert_eq!(sigma, &vec![0.0, 0.0]);

        // A single huge jump dominates the window max.
        let eps = [ep(&[100.0, 101.0]), ep(&[100.0, 180.0]), ep(&[100.0, 99.0])];
        let est = symmetric_estimate(&eps, &cfg(1, 1.0)).unwrap();
        let Estimate::Symmetric { sigma, .. } = &est else {
            unreachable!()
        };
        assert!((sigma[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_min_max_ratios() {
        let eps = [ep(&[100.0, 110.0]), ep(&[110.0, 100.0])];
        let est = asymmetric_estimate(&eps, &cfg(1, 1.0)).unwrap();
        let Estimate::Asymmetric { k_down, k_up } = &est else {
            unreachable!()
        };
        assert!((k_down[0] - 100.0 / 110.0).abs() < 1e-9);
        assert!((k_up[0] - 1.1).abs() < 1e-9);

        // Monotone increasing window: k_d > 1, flagged and clamped.
        let eps = [ep(&[100.0, 105.0]), ep(&[105.0, 112.0])];
        let est = asymmetric_estimate(&eps, &cfg(1, 1.0)).unwrap();
        let model = est.to_params(100.0, 1.0).unwrap();
        assert_eq!(model.clamped_steps, vec![0]);
        assert_eq!(model.params.k_down[0], 1.0);

        // Constant series degenerates to k_d = k_u = 1.
        let eps = [ep(&[100.0, 100.0, 100.0])];
        let est = asymmetric_estimate(&eps, &cfg(2, 1.0)).unwrap();
        let Estimate::Asymmetric { k_down, k_up } = &est else {
            unreachable!()
        };
        assert_eq!(k_down, &vec![1.0, 1.0]);
        assert_eq!(k_up, &vec![1.0, 1.0]);
    }

    #[test]
    fn coverage_is_exact_in_window() {
        let eps = [
            ep(&[100.0, 104.0, 98.0]),
            ep(&[98.0, 99.5, 103.0]),
            ep(&[103.0, 100.0, 100.0]),
        ];
        let config = cfg(2, 0.5);
        let est = symmetric_estimate(&eps, &config).unwrap();
        let Estimate::Symmetric { sigma, .. } = &est else {
            unreachable!()
        };
        assert_eq!(coverage_ratio(&eps, sigma, config.dt), 1.0);

        // One violation among ten steps.
        let eps: Vec<Episode> = (0..10)
            .map(|i| {
                if i == 3 {
                    ep(&[100.0, 150.0])
                } else {
                    ep(&[100.0, 101.0])
                }
            })
            .collect();
        assert_eq!(coverage_ratio(&eps, &[0.02], 1.0), 0.9);
    }

    #[test]
    fn estimators_are_scale_invariant() {
        let base = [ep(&[100.0, 104.0, 98.0]), ep(&[98.0, 99.5, 103.0])];
        let scaled: Vec<Episode> = base
            .iter()
            .map(|e| Episode {
                start: e.start,
                closes: e.closes.iter().map(|c| c * 7.3).collect(),
            })
            .collect();
        let config = cfg(2, 0.25);
        let (a, b) = (
            symmetric_estimate(&base, &config).unwrap(),
            symmetric_estimate(&scaled, &config).unwrap(),
        );
        let (Estimate::Symmetric { sigma: sa, .. }, Estimate::Symmetric { sigma: sb, .. }) =
            (&a, &b)
        else {
            unreachable!()
        };
        assert_eq!(sa, sb);

        let (a, b) = (
            asymmetric_estimate(&base, &config).unwrap(),
            asymmetric_estimate(&scaled, &config).unwrap(),
        );
        let (
            Estimate::Asymmetric {
                k_down: da,
                k_up: ua,
            },
            Estimate::Asymmetric {
                k_down: db,
                k_up: ub,
            },
        ) = (&a, &b)
        else {
            unreachable!()
        };
        assert_eq!(da, db);
        assert_eq!(ua, ub);
    }

    #[test]
    fn symmetric_clamp_when_moves_exceed_one() {
        let est = Estimate::Symmetric {
            sigma: vec![1.5],
            dt: 1.0,
        };
        let model = est.to_params(100.0, 1.0).unwrap();
        assert_eq!(model.params.k_down[0], 0.0);
        assert_eq!(model.params.k_up[0], 2.5);
        assert_eq!(model.clamped_steps, vec![0]);
    }
}
