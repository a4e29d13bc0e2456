//! Event costs, the cost exceedance curve, and the large-event risk metrics.
//!
//! An event's customer cost is `beta` dollars per customer-hour times its
//! performance-curve area. Risk is summarized by the exceedance function
//! `F(c) = P[C > c]`, the probability `p_large` of exceeding a threshold
//! `c_large` (by default the 99th-percentile observed cost), and the expected
//! annual frequency of such events `f_large = p_large * r_event`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::ResilienceEvent;
use crate::tailfit::{self, TailFit, TailFitOptions};

/// Cost model and threshold configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CostConfig {
    /// USD per customer-hour of outage.
    pub beta: f64,
    /// Percentile of observed costs defining `c_large` when no override is
    /// given.
    pub large_cost_percentile: f64,
    /// Fixed large-cost threshold in USD, bypassing the percentile.
    pub c_large_override: Option<f64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            beta: 370.2,
            large_cost_percentile: 0.99,
            c_large_override: None,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta <= 0.0 || self.beta.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.large_cost_percentile > 0.0 && self.large_cost_percentile < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "large_cost_percentile must be in (0, 1), got {}",
                self.large_cost_percentile
            )));
        }
        Ok(())
    }
}

/// Customer cost of one event: `beta * area`.
pub fn event_cost(event: &ResilienceEvent, config: &CostConfig) -> f64 {
    config.beta * event.area_customer_hours()
}

/// Costs of every event, in event order.
pub fn event_costs(events: &[ResilienceEvent], config: &CostConfig) -> Vec<f64> {
    events.iter().map(|e| event_cost(e, config)).collect()
}

/// Empirical cost exceedance function (survival function / CCDF):
/// `F(c) = (#costs strictly greater than c) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceCurve {
    costs: Vec<f64>, // ascending
}

impl ExceedanceCurve {
    pub fn new(costs: &[f64]) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::NoEvents);
        }
        let mut sorted = costs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
        Ok(ExceedanceCurve { costs: sorted })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    /// `P[C > c]` under the empirical distribution.
    pub fn eval(&self, c: f64) -> f64 {
        let at_most = self.costs.partition_point(|&x| x <= c);
        (self.costs.len() - at_most) as f64 / self.costs.len() as f64
    }

    /// Plot points `(c_i, (n - i) / n)` over the sorted costs, suitable for
    /// log-log display of the curve.
    pub fn plot_points(&self) -> Vec<(f64, f64)> {
        let n = self.costs.len() as f64;
        self.costs
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, (self.costs.len() - i - 1) as f64 / n))
            .collect()
    }

    pub fn min_cost(&self) -> f64 {
        self.costs[0]
    }

    pub fn max_cost(&self) -> f64 {
        self.costs[self.costs.len() - 1]
    }
}

/// Builds the empirical exceedance curve; errors with "no events" on empty
/// input.
pub fn exceedance_curve(costs: &[f64]) -> Result<ExceedanceCurve> {
    ExceedanceCurve::new(costs)
}

/// Nearest-rank quantile: the `ceil(percentile * n)`-th smallest cost. The
/// returned threshold is always an observed cost.
pub fn large_cost_threshold(costs: &[f64], percentile: f64) -> Result<f64> {
    if costs.is_empty() {
        return Err(Error::NoEvents);
    }
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "percentile must be in (0, 1), got {percentile}"
        )));
    }
    let mut sorted = costs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    let rank = (percentile * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// `p_large = P[C > c_large]`, with strict inequality: ties at the threshold
/// are not large.
pub fn p_large(costs: &[f64], c_large: f64) -> f64 {
    if costs.is_empty() {
        return 0.0;
    }
    costs.iter().filter(|&&c| c > c_large).count() as f64 / costs.len() as f64
}

/// Average annual event rate.
pub fn annual_event_rate(n_events: usize, years_observed: f64) -> Result<f64> {
    if years_observed <= 0.0 || years_observed.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "years_observed must be positive, got {years_observed}"
        )));
    }
    Ok(n_events as f64 / years_observed)
}

/// Expected annual frequency of large-cost events. The rate multiplier
/// accommodates an expected future increase in event frequency.
pub fn f_large(p_large: f64, r_event: f64, rate_multiplier: f64) -> f64 {
    p_large * r_event * rate_multiplier
}

/// The large-event risk metric bundle for one dataset realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMetrics {
    pub n_events: usize,
    pub tail: TailFit,
    pub c_large_usd: f64,
    pub p_large: f64,
    pub r_event_per_year: f64,
    pub rate_multiplier: f64,
    pub f_large_per_year: f64,
    /// False when the fitted tail slope magnitude is at most 1, in which case
    /// the tail mean diverges and mean-based large-cost summaries are
    /// refused.
    pub mean_is_finite: bool,
}

/// Computes the full metric bundle from event costs. `c_large_override`, when
/// set (directly or via the config), pins the threshold instead of the
/// percentile; reruns use this to hold the baseline threshold fixed.
pub fn compute_metrics(
    costs: &[f64],
    years_observed: f64,
    config: &CostConfig,
    tail_opts: &TailFitOptions,
    rate_multiplier: f64,
) -> Result<RiskMetrics> {
    config.validate()?;
    if rate_multiplier <= 0.0 || rate_multiplier.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "rate_multiplier must be positive, got {rate_multiplier}"
        )));
    }
    let curve = exceedance_curve(costs)?;
    let c_large = match config.c_large_override {
        Some(c) => c,
        None => large_cost_threshold(costs, config.large_cost_percentile)?,
    };
    let p = curve.eval(c_large);
    let r = annual_event_rate(costs.len(), years_observed)?;
    let tail = tailfit::select_xmin(costs, tail_opts)?;
    Ok(RiskMetrics {
        n_events: costs.len(),
        mean_is_finite: tail.alpha > 1.0,
        c_large_usd: c_large,
        p_large: p,
        r_event_per_year: r,
        rate_multiplier,
        f_large_per_year: f_large(p, r, rate_multiplier),
        tail,
    })
}

/// True when there are enough events for a sensible estimate of the
/// percentile threshold: `n >= 1 / (1 - percentile)`.
pub fn sufficient_for_percentile(n: usize, percentile: f64) -> bool {
    n as f64 >= 1.0 / (1.0 - percentile)
}
