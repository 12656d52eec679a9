//! One-dimensional convex-analysis primitives behind the one-step pricing
//! formulas: support functions, Fenchel conjugation, and concave envelopes
//! relative to a support set.
//!
//! Finite point sets are the canonical representation; everything on them
//! is computed exactly. Interval supports are handled analytically for
//! convex payoffs, where only the endpoints (and the asymptotic slope, for
//! an infinite upper endpoint) matter.

use crate::error::{Error, Result};
use crate::payoff::PiecewisePayoff;
use crate::simplex::{LpBuilder, LpOutcome, Relation};

/// Support of a one-step price distribution: either an explicit finite set
/// of reals or a closed interval whose upper end may be `+inf`.
///
/// Price supports are non-negative by construction (assets are
/// non-negative); shifted copies produced by [`SupportSet::shifted`] may
/// contain negative values.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportSet {
    /// Sorted, strictly increasing, non-empty.
    Points(Vec<f64>),
    Interval {
        lower: f64,
        upper: f64,
    },
}

impl SupportSet {
    pub fn points(pts: impl Into<Vec<f64>>) -> Result<Self> {
        let mut pts = pts.into();
        if pts.is_empty() {
            return Err(Error::EmptySupport);
        }
        if pts.iter().any(|p| p.is_nan() || p.is_infinite()) {
            return Err(Error::InvalidSupport("non-finite point".to_string()));
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        Ok(SupportSet::Points(pts))
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower.is_infinite() {
            return Err(Error::InvalidSupport(
                "interval needs a finite lower bound".to_string(),
            ));
        }
        if lower > upper {
            return Err(Error::InvalidSupport(format!(
                "lower {lower} exceeds upper {upper}"
            )));
        }
        Ok(SupportSet::Interval { lower, upper })
    }

    pub fn singleton(v: f64) -> Self {
        SupportSet::Points(vec![v])
    }

    /// `essinf` of the underlying variable.
    pub fn min(&self) -> f64 {
        match self {
            SupportSet::Points(p) => p[0],
            SupportSet::Interval { lower, .. } => *lower,
        }
    }

    /// `esssup` of the underlying variable; may be `+inf`.
    pub fn max(&self) -> f64 {
        match self {
            SupportSet::Points(p) => *p.last().unwrap(),
            SupportSet::Interval { upper, .. } => *upper,
        }
    }

    /// Whether `y` lies in the convex hull `[min, max]`.
    pub fn contains_hull(&self, y: f64) -> bool {
        y >= self.min() && y <= self.max()
    }

    pub fn is_singleton(&self) -> bool {
        self.min() == self.max()
    }

    /// The support of `X - dy` when this is the support of `X`.
    pub fn shifted(&self, dy: f64) -> SupportSet {
        match self {
            SupportSet::Points(p) => SupportSet::Points(p.iter().map(|x| x - dy).collect()),
            SupportSet::Interval { lower, upper } => SupportSet::Interval {
                lower: lower - dy,
                upper: upper - dy,
            },
        }
    }
}

/// Outcome of a one-step pricing: the infimum super-hedging cost, the
/// hedge that certifies it, and whether the cost is itself a price.
///
/// `price == -inf` flags an immediate profit at the node (the zero claim
/// is super-replicable from a negative cost).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneStepPrice {
    pub price: f64,
    pub theta: f64,
    pub attained: bool,
}

impl OneStepPrice {
    pub(crate) fn immediate_profit() -> Self {
        OneStepPrice {
            price: f64::NEG_INFINITY,
            theta: 0.0,
            attained: false,
        }
    }

    pub fn is_immediate_profit(&self) -> bool {
        self.price == f64::NEG_INFINITY
    }
}

/// Support function of `-D`: `sup_{x in D} (-x * theta)`.
///
/// A strictly negative value for some direction means an immediate profit
/// exists when `D` is the support of the price increment.
pub fn support_function(d: &SupportSet, theta: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    match d {
        SupportSet::Points(pts) => pts
            .iter()
            .map(|x| -x * theta)
            .fold(f64::NEG_INFINITY, f64::max),
        SupportSet::Interval { lower, upper } => {
            if theta > 0.0 {
                -theta * lower
            } else {
                -theta * upper
            }
        }
    }
}

/// Fenchel-Legendre conjugate of `f = -g + indicator(supp)` at `x`:
/// `f*(x) = sup_{z in supp} (x z + g(z))`.
///
/// Exact on finite supports. On intervals the payoff must be convex
/// (endpoints then decide), and `+inf` is returned when the support is
/// unbounded and `x` plus the asymptotic slope points upward.
pub fn fenchel_conjugate(supp: &SupportSet, g: &PiecewisePayoff, x: f64) -> f64 {
    match supp {
        SupportSet::Points(pts) => pts
            .iter()
            .map(|&z| x * z + g.value(z))
            .fold(f64::NEG_INFINITY, f64::max),
        SupportSet::Interval { lower, upper } => {
            assert!(
                g.is_convex(),
                "interval supports require a convex payoff; finite supports are the general route"
            );
            let at_lower = x * lower + g.value(*lower);
            if upper.is_infinite() {
                if x + g.asymptotic_slope() > 0.0 {
                    f64::INFINITY
                } else {
                    at_lower
                }
            } else {
                at_lower.max(x * upper + g.value(*upper))
            }
        }
    }
}

/// Conjugate of a function known through samples `(points[i], values[i])`.
pub fn fenchel_conjugate_sampled(points: &[f64], values: &[f64], x: f64) -> f64 {
    assert_eq!(points.len(), values.len());
    points
        .iter()
        .zip(values)
        .map(|(&z, &v)| x * z + v)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Infimum super-hedging cost of `g` evaluated at the current price `y`:
/// `-f**(y)`, i.e. the concave envelope of `g` relative to the support
/// when `y` lies in its convex hull, and `-inf` otherwise.
pub fn biconjugate_price(supp: &SupportSet, g: &PiecewisePayoff, y: f64) -> f64 {
    match supp {
        SupportSet::Points(pts) => {
            let values: Vec<f64> = pts.iter().map(|&z| g.value(z)).collect();
            biconjugate_price_sampled(pts, &values, y)
        }
        SupportSet::Interval { lower, upper } => {
            assert!(
                g.is_convex(),
                "interval supports require a convex payoff; finite supports are the general route"
            );
            if !(y >= *lower && y <= *upper) {
                return f64::NEG_INFINITY;
            }
            match one_step_price_convex(g, y, *lower, *upper) {
                Ok(p) => p.price,
                Err(_) => f64::NEG_INFINITY,
            }
        }
    }
}

/// Sampled-function variant of [`biconjugate_price`].
///
/// Values may be `-inf`: those constraints are vacuous, so the points
/// carrying them drop out of the effective support. This is how an
/// immediate profit propagates backwards through a tree.
pub fn biconjugate_price_sampled(points: &[f64], values: &[f64], y: f64) -> f64 {
    envelope_eval_sampled(points, values, y).price
}

/// Evaluates the upper concave hull of `(points, values)` at `y`,
/// returning the value together with a supporting slope.
pub(crate) fn envelope_eval_sampled(points: &[f64], values: &[f64], y: f64) -> OneStepPrice {
    assert_eq!(points.len(), values.len());
    // Collapse duplicate abscissae to their max value and drop -inf rows.
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for (&z, &v) in points.iter().zip(values) {
        debug_assert!(!z.is_nan() && !v.is_nan());
        pairs.push((z, v));
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (z, v) in pairs {
        match merged.last_mut() {
            Some((zl, vl)) if *zl == z => *vl = vl.max(v),
            _ => merged.push((z, v)),
        }
    }
    merged.retain(|&(_, v)| v > f64::NEG_INFINITY);
    if merged.is_empty() {
        return OneStepPrice::immediate_profit();
    }
    if y < merged[0].0 || y > merged[merged.len() - 1].0 {
        return OneStepPrice::immediate_profit();
    }
    let hull = upper_concave_hull(&merged);
    if hull.len() == 1 {
        return OneStepPrice {
            price: hull[0].1,
            theta: 0.0,
            attained: true,
        };
    }
    // Segment containing y; at a vertex either side supports the hull.
    let hi = hull
        .partition_point(|&(z, _)| z < y)
        .clamp(1, hull.len() - 1);
    let (z0, v0) = hull[hi - 1];
    let (z1, v1) = hull[hi];
    let theta = (v1 - v0) / (z1 - z0);
    OneStepPrice {
        price: v0 + theta * (y - z0),
        theta,
        attained: true,
    }
}

/// Upper (concave) hull of points sorted by strictly increasing abscissa.
fn upper_concave_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            // Pop while the middle point does not rise above the chord.
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Concave envelope of `g` relative to the support, evaluated at `y`, as
/// the optimum of the two-variable LP
/// `min alpha*y + beta  s.t.  alpha*z + beta >= g(z)` over the support.
///
/// This is the independent route against which the hull-based
/// [`biconjugate_price`] is checked.
pub fn concave_envelope_relative(supp: &SupportSet, g: &PiecewisePayoff, y: f64) -> Result<f64> {
    if !supp.contains_hull(y) {
        return Err(Error::PriceOutsideSupport {
            y,
            lower: supp.min(),
            upper: supp.max(),
        });
    }
    match supp {
        SupportSet::Points(pts) => {
            let mut lp = LpBuilder::new();
            let alpha = lp.free(y);
            let beta = lp.free(1.0);
            for &z in pts {
                lp.constraint(&[(alpha, z), (beta, 1.0)], Relation::Ge, g.value(z));
            }
            match lp.solve() {
                LpOutcome::Optimal { objective, .. } => Ok(objective),
                LpOutcome::Unbounded => Err(Error::PriceOutsideSupport {
                    y,
                    lower: supp.min(),
                    upper: supp.max(),
                }),
                LpOutcome::Infeasible => Err(Error::NoAffineMajorant),
            }
        }
        SupportSet::Interval { lower, upper } => {
            if !g.is_convex() {
                return Err(Error::NonConvexPayoff);
            }
            Ok(one_step_price_convex(g, y, *lower, *upper)?.price)
        }
    }
}

/// Closed-form one-step price of a non-negative convex payoff whose
/// support hull is `[essinf, esssup]`:
///
/// `theta* = (g(esssup) - g(essinf)) / (esssup - essinf)` with the
/// conventions `0/0 = 0` and `g(inf)/inf = M`, and
/// `price = g(essinf) + theta* (y - essinf)`.
///
/// The returned cost is always attained (it is itself a price), and the
/// pair certifies `price + theta*(z - y) >= g(z)` on the hull.
pub fn one_step_price_convex(
    g: &PiecewisePayoff,
    y: f64,
    essinf: f64,
    esssup: f64,
) -> Result<OneStepPrice> {
    if !g.is_convex() {
        return Err(Error::NonConvexPayoff);
    }
    if essinf.is_nan() || esssup.is_nan() || essinf.is_infinite() || essinf < 0.0 {
        return Err(Error::InvalidSupport(format!(
            "essinf={essinf}, esssup={esssup}"
        )));
    }
    if !(essinf <= y && y <= esssup) {
        return Err(Error::PriceOutsideSupport {
            y,
            lower: essinf,
            upper: esssup,
        });
    }
    let theta = if essinf == esssup {
        0.0
    } else if esssup.is_infinite() {
        g.asymptotic_slope()
    } else {
        (g.value(esssup) - g.value(essinf)) / (esssup - essinf)
    };
    Ok(OneStepPrice {
        price: g.value(essinf) + theta * (y - essinf),
        theta,
        attained: true,
    })
}
