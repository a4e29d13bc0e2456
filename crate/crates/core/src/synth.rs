//! Synthetic wind series, outage datasets, and power-law cost samples with
//! known ground truth, used to validate every estimator in the crate.
//!
//! The wind model is an hourly mean-reverting process with occasional gust
//! spikes that decay over several hours; it is the simplest process that
//! produces the rare high-wind clustering behind large multi-outage events,
//! not a meteorological model. Outages arrive as a nonhomogeneous Poisson
//! process with intensity `lambda0 * exp(gamma * w(t))` driven by the hourly
//! series.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{Dataset, OutageRecord, Station, UnixSeconds, WeatherData, WeatherObservation};

/// Hours in a Julian year.
const HOURS_PER_YEAR: f64 = 365.25 * 24.0;

/// Window start of generated datasets: 2017-01-01T00:00:00Z.
pub const SYNTH_EPOCH: UnixSeconds = 1_483_228_800;

const SYNTH_STATION_ID: &str = "WX1";
const SYNTH_STATION_LAT: f64 = 42.0;
const SYNTH_STATION_LON: f64 = -93.6;

/// Mean-reverting hourly wind with decaying gust spikes, clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WindModel {
    /// Mean-reversion target in m/s.
    pub level: f64,
    /// Hourly noise standard deviation in m/s; zero gives a flat series.
    pub variability: f64,
    /// Pull toward `level` per hour, in (0, 1].
    pub reversion: f64,
    /// Probability a gust front arrives in a given hour.
    pub gust_rate_per_hour: f64,
    /// Mean added wind speed at gust onset (exponentially distributed).
    pub gust_mean_amplitude: f64,
    /// Multiplicative decay of the gust component per hour, in [0, 1).
    pub gust_decay: f64,
}

/// Discrete heavy-tailed customers-per-outage model:
/// `min(cap, ceil(minimum * U^(-1/ccdf_exponent)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomersModel {
    pub minimum: u64,
    pub ccdf_exponent: f64,
    pub cap: u64,
}

/// Full generator specification; everything is reproducible from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub duration_years: f64,
    pub wind: WindModel,
    /// Outage rate at zero wind, per hour.
    pub lambda0_per_hour: f64,
    /// Exponential wind sensitivity of the outage rate, per (m/s).
    pub gamma_per_mps: f64,
    /// Restore-duration lognormal parameters, in ln-hours.
    pub restore_log_mean_hours: f64,
    pub restore_log_sd_hours: f64,
    pub customers: CustomersModel,
    pub seed: u64,
}

impl SynthSpec {
    /// Calibrated to land near the scale of a six-year single-area utility
    /// dataset: roughly 12.7k unscheduled outages grouping into roughly 3.7k
    /// events, with an event-cost tail slope magnitude near 0.8.
    pub fn paper_scale(seed: u64) -> Self {
        SynthSpec {
            duration_years: 6.0,
            wind: WindModel {
                level: 5.5,
                variability: 1.1,
                reversion: 0.25,
                gust_rate_per_hour: 0.004,
                gust_mean_amplitude: 14.0,
                gust_decay: 0.9,
            },
            lambda0_per_hour: 0.045,
            gamma_per_mps: 0.22,
            restore_log_mean_hours: 1.1,
            restore_log_sd_hours: 0.9,
            customers: CustomersModel {
                minimum: 8,
                ccdf_exponent: 0.9,
                cap: 4_000,
            },
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_years", self.duration_years),
            ("wind.level", self.wind.level),
            ("wind.reversion", self.wind.reversion),
            ("customers.ccdf_exponent", self.customers.ccdf_exponent),
        ];
        for (name, value) in positive {
            if value <= 0.0 || value.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.lambda0_per_hour < 0.0 || self.gamma_per_mps < 0.0 {
            return Err(Error::InvalidParameter(
                "outage rate parameters must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Standard normal via Box-Muller; consumes exactly two uniforms.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = (1.0 - rng.gen::<f64>()).max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates the hourly wind series for the spec's window.
pub fn gen_wind_series(spec: &SynthSpec) -> Result<Vec<WeatherObservation>> {
    spec.validate()?;
    let hours = (spec.duration_years * HOURS_PER_YEAR).round() as i64;
    let mut rng = rng_stream(spec.seed, 1);
    let mut base = spec.wind.level;
    let mut gust = 0.0f64;
    let mut series = Vec::with_capacity(hours as usize);
    for h in 0..hours {
        series.push(WeatherObservation {
            station: SYNTH_STATION_ID.to_string(),
            timestamp: SYNTH_EPOCH + h * 3600,
            wind_speed: (base + gust).max(0.0),
        });
        base += spec.wind.reversion * (spec.wind.level - base)
            + spec.wind.variability * standard_normal(&mut rng);
        let gust_draw: f64 = rng.gen();
        if gust_draw < spec.wind.gust_rate_per_hour {
            // Bounded amplitude (0.5x to 1.5x the mean) keeps the exponential
            // outage intensity from exploding on stacked gusts.
            gust += spec.wind.gust_mean_amplitude * (0.5 + rng.gen::<f64>());
        }
        gust *= spec.wind.gust_decay;
    }
    Ok(series)
}

/// Draws outages from the wind-driven nonhomogeneous Poisson process. The
/// intensity at time `t` uses the observation nearest in time (matching the
/// wind join applied during analysis), so it is constant between observation
/// midpoints and arrivals are generated exactly, segment by segment, as
/// exponential gaps at each segment's rate.
pub fn gen_outages(wind: &[WeatherObservation], spec: &SynthSpec) -> Result<Vec<OutageRecord>> {
    spec.validate()?;
    if wind.is_empty() || spec.lambda0_per_hour == 0.0 {
        return Ok(Vec::new());
    }
    let window_start = wind[0].timestamp;
    let window_end = wind[wind.len() - 1].timestamp + 3600;

    let mut arrivals = rng_stream(spec.seed, 2);
    let mut marks = rng_stream(spec.seed, 3);
    let causes = ["wind", "tree", "equipment", "animal", "unknown"];
    let mut outages = Vec::new();
    let mut starts = Vec::new();
    for (idx, obs) in wind.iter().enumerate() {
        let seg_start = if idx == 0 {
            window_start as f64
        } else {
            obs.timestamp as f64 - 1800.0
        };
        let seg_end = if idx + 1 == wind.len() {
            window_end as f64
        } else {
            obs.timestamp as f64 + 1800.0
        };
        let lambda = spec.lambda0_per_hour * (spec.gamma_per_mps * obs.wind_speed).exp();
        if lambda <= 0.0 {
            continue;
        }
        let mut t = seg_start;
        loop {
            let u: f64 = 1.0 - arrivals.gen::<f64>();
            t += -u.ln() / lambda * 3600.0;
            if t >= seg_end {
                break;
            }
            starts.push(t);
        }
    }

    for &t in &starts {
        let start = t.floor() as i64;
        let duration_h = (spec.restore_log_mean_hours
            + spec.restore_log_sd_hours * standard_normal(&mut marks))
        .exp();
        let duration_s = ((duration_h * 3600.0).round() as i64).max(120);
        let restore = start + duration_s;
        let u_cust: f64 = 1.0 - marks.gen::<f64>();
        let customers = ((spec.customers.minimum as f64
            * u_cust.powf(-1.0 / spec.customers.ccdf_exponent))
        .ceil() as u64)
            .min(spec.customers.cap);
        let cause = causes[marks.gen_range(0..causes.len())];
        let lat = SYNTH_STATION_LAT + (marks.gen::<f64>() - 0.5) * 0.8;
        let lon = SYNTH_STATION_LON + (marks.gen::<f64>() - 0.5) * 0.8;
        if restore > window_end {
            continue; // keep every record inside the observation window
        }
        outages.push(OutageRecord {
            id: format!("O{:06}", outages.len() + 1),
            start,
            restore,
            customers,
            cause: cause.to_string(),
            scheduled: false,
            lat: Some((lat * 1e4).round() / 1e4),
            lon: Some((lon * 1e4).round() / 1e4),
            station: None,
        });
    }
    Ok(outages)
}

/// Inverse-CDF samples from the power-law tail model:
/// `x = x_min * U^(-1/alpha)` with `U` uniform on (0, 1].
pub fn gen_powerlaw_costs(alpha: f64, x_min: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if alpha <= 0.0 || x_min <= 0.0 || alpha.is_nan() || x_min.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "alpha and x_min must be positive, got alpha={alpha}, x_min={x_min}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.gen::<f64>();
            x_min * u.powf(-1.0 / alpha)
        })
        .collect())
}

/// Generates a complete dataset: one station, its hourly wind series, and
/// the outage list, with the observation window set to the generation window.
pub fn gen_dataset(spec: &SynthSpec) -> Result<Dataset> {
    let wind = gen_wind_series(spec)?;
    let window_start = wind.first().map(|o| o.timestamp).unwrap_or(SYNTH_EPOCH);
    let window_end = wind.last().map(|o| o.timestamp + 3600).unwrap_or(SYNTH_EPOCH);
    let outages = gen_outages(&wind, spec)?;
    let weather = WeatherData::from_observations(wind)?;
    let stations = vec![Station {
        id: SYNTH_STATION_ID.to_string(),
        lat: SYNTH_STATION_LAT,
        lon: SYNTH_STATION_LON,
    }];
    Dataset::new(outages, weather, stations, window_start, window_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tailfit;

    fn quiet_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            duration_years: 1.0,
            wind: WindModel {
                level: 7.0,
                variability: 0.0,
                reversion: 0.3,
                gust_rate_per_hour: 0.0,
                gust_mean_amplitude: 0.0,
                gust_decay: 0.9,
            },
            lambda0_per_hour: 0.2,
            gamma_per_mps: 0.0,
            restore_log_mean_hours: 0.5,
            restore_log_sd_hours: 0.6,
            customers: CustomersModel {
                minimum: 5,
                ccdf_exponent: 1.2,
                cap: 10_000,
            },
            seed,
        }
    }

    #[test]
    fn flat_model_gives_constant_series() {
        let spec = quiet_spec(3);
        let series = gen_wind_series(&spec).unwrap();
        assert_eq!(series.len(), 8766);
        assert!(series.iter().all(|o| o.wind_speed == 7.0));
    }

    #[test]
    fn same_seed_regenerates_identically() {
        let spec = SynthSpec::paper_scale(42);
        let a = gen_dataset(&spec).unwrap();
        let b = gen_dataset(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_series_mean_tracks_level() {
        let mut spec = SynthSpec::paper_scale(7);
        spec.duration_years = 4.0;
        spec.wind.gust_rate_per_hour = 0.0;
        let series = gen_wind_series(&spec).unwrap();
        let mean = series.iter().map(|o| o.wind_speed).sum::<f64>() / series.len() as f64;
        assert!(
            (mean - spec.wind.level).abs() / spec.wind.level < 0.05,
            "mean {mean} vs level {}",
            spec.wind.level
        );
        // Gusts push the mean up on purpose, but only modestly.
        let full = gen_wind_series(&SynthSpec::paper_scale(7)).unwrap();
        let full_mean = full.iter().map(|o| o.wind_speed).sum::<f64>() / full.len() as f64;
        assert!(full_mean > mean && full_mean < 1.2 * spec.wind.level);
    }

    #[test]
    fn zero_rate_means_no_outages() {
        let mut spec = quiet_spec(5);
        spec.lambda0_per_hour = 0.0;
        let wind = gen_wind_series(&spec).unwrap();
        assert!(gen_outages(&wind, &spec).unwrap().is_empty());
    }

    #[test]
    fn homogeneous_counts_match_poisson() {
        // gamma = 0 makes arrivals homogeneous at lambda0; the count over T
        // hours averaged across seeds must sit within 3 sigma of lambda0*T.
        let runs = 100;
        let mut total = 0usize;
        for seed in 0..runs {
            let spec = quiet_spec(seed);
            let wind = gen_wind_series(&spec).unwrap();
            total += gen_outages(&wind, &spec).unwrap().len();
        }
        let expected_per_run = 0.2 * 8766.0;
        let sd_of_mean = (expected_per_run / runs as f64).sqrt();
        let mean = total as f64 / runs as f64;
        assert!(
            (mean - expected_per_run).abs() < 3.0 * sd_of_mean,
            "mean count {mean} vs expected {expected_per_run}"
        );
    }

    #[test]
    fn generated_records_satisfy_ingest_invariants() {
        let spec = SynthSpec::paper_scale(11);
        let ds = gen_dataset(&spec).unwrap();
        assert!(!ds.outages.is_empty());
        for o in &ds.outages {
            assert!(o.restore > o.start);
            assert!(o.start >= ds.window_start && o.restore <= ds.window_end);
            assert!(!o.scheduled);
            assert!(o.lat.is_some() && o.lon.is_some());
        }
        assert!(ds.years_observed > 0.0);
    }

    #[test]
    fn powerlaw_boundary_and_ccdf() {
        let costs = gen_powerlaw_costs(1.0, 100.0, 100_000, 13).unwrap();
        assert!(costs.iter().all(|&x| x >= 100.0));
        // Model check at 2*x_min for alpha = 1: F(200) = 0.5.
        let above = costs.iter().filter(|&&x| x > 200.0).count() as f64 / costs.len() as f64;
        assert!((above - 0.5).abs() < 0.01, "empirical CCDF {above}");
    }

    #[test]
    fn powerlaw_fit_recovers_alpha() {
        let (alpha, x_min, n) = (0.789, 130_251.0, 10_000);
        let costs = gen_powerlaw_costs(alpha, x_min, n, 17).unwrap();
        let fitted = tailfit::fit_alpha_given_xmin(&costs, x_min, 10).unwrap();
        let bound = 3.0 * alpha / (n as f64).sqrt();
        assert!(
            (fitted - alpha).abs() < bound,
            "fitted {fitted} vs {alpha} (bound {bound})"
        );
    }

    // Regression fixture: the paper-scale preset was calibrated once against
    // the scale of the six-year single-area dataset (12715 unscheduled
    // outages, 3706 events) and is frozen here at +/-15%.
    #[test]
    fn paper_scale_counts_stay_on_target() {
        for seed in [1u64, 2] {
            let ds = gen_dataset(&SynthSpec::paper_scale(seed)).unwrap();
            let n = ds.outages.len() as f64;
            assert!(
                (n - 12_715.0).abs() / 12_715.0 < 0.15,
                "seed {seed}: {n} outages"
            );
            let n_events = crate::events::extract_events(&ds.outages).len() as f64;
            assert!(
                (n_events - 3_706.0).abs() / 3_706.0 < 0.15,
                "seed {seed}: {n_events} events"
            );
        }
    }
}
