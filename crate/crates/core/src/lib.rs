//! Resilience analytics for electric distribution systems, driven by utility
//! outage logs and weather observations.
//!
//! The pipeline: load and filter outage records ([`ingest`]), group
//! overlapping outages into resilience events ([`events`]), convert event
//! customer-hours to costs and compute large-event risk metrics ([`risk`],
//! [`tailfit`]), and quantify what a hardening or faster-restoration
//! investment would have changed by rerunning history ([`rerun`]).
//! [`synth`] generates datasets with known ground truth for validating every
//! estimator.

pub mod error;
pub mod events;
pub mod ingest;
pub mod rerun;
pub mod risk;
pub mod synth;
pub mod tailfit;

pub use error::{Error, Result};
pub use events::{extract_events, PerformanceCurve, ResilienceEvent};
pub use ingest::{
    Dataset, OutageRecord, Settings, Station, UnixSeconds, WeatherData, WeatherObservation,
    WindUnit,
};
pub use rerun::{
    HardeningMode, HardeningSpec, MetricRow, RateCurve, RerunResult, RestorationSpec,
};
pub use risk::{CostConfig, ExceedanceCurve, RiskMetrics};
pub use synth::SynthSpec;
pub use tailfit::{TailFit, TailFitOptions};

/// Seconds in a Julian year (365.25 days); used wherever a rate is per year.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;
