//! Loading, validation, and filtering of outage records and weather
//! observations, plus the nearest-station and nearest-in-time wind joins.
//!
//! File formats (all CSV with a header row):
//! - outages: `id,start,restore,customers,cause,scheduled,lat,lon` with an
//!   optional trailing `station` column for pre-assigned areas
//! - weather: `station,timestamp,wind_speed`
//! - stations: `id,lat,lon`
//!
//! Timestamps are ISO-8601 with an offset or trailing `Z` and are held
//! internally as UTC unix seconds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SECONDS_PER_YEAR;

/// UTC unix timestamp at 1-second resolution.
pub type UnixSeconds = i64;

/// Fatal threshold on the fraction of unparseable outage rows.
pub const MAX_REJECT_FRACTION: f64 = 0.01;

/// Default minimum outage duration retained by [`filter_unscheduled`].
pub const DEFAULT_MIN_DURATION_S: i64 = 60;

/// Default largest tolerated gap between an outage start and the nearest
/// weather observation before the outage is flagged wind-unknown.
pub const DEFAULT_MAX_GAP_S: i64 = 3 * 3600;

const MPH_TO_MPS: f64 = 0.44704;
const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// One component outage as recorded by the utility's outage management system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageRecord {
    pub id: String,
    pub start: UnixSeconds,
    pub restore: UnixSeconds,
    pub customers: u64,
    pub cause: String,
    pub scheduled: bool,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    /// Weather-station area the outage belongs to. Either pre-assigned in the
    /// input file or filled by [`assign_stations`].
    pub station: Option<String>,
}

impl OutageRecord {
    pub fn duration_s(&self) -> i64 {
        self.restore - self.start
    }
}

/// One wind observation at a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherObservation {
    pub station: String,
    pub timestamp: UnixSeconds,
    /// Wind speed in m/s (canonical unit; mph inputs are converted on load).
    pub wind_speed: f64,
}

/// A weather station with its location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

/// Per-station observation series, each sorted by strictly increasing
/// timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeatherData {
    series: BTreeMap<String, Vec<WeatherObservation>>,
}

impl WeatherData {
    /// Groups observations by station and sorts each series by time.
    /// Duplicate timestamps within one station are a data error.
    pub fn from_observations(observations: Vec<WeatherObservation>) -> Result<Self> {
        let mut series: BTreeMap<String, Vec<WeatherObservation>> = BTreeMap::new();
        for obs in observations {
            if obs.wind_speed < 0.0 || !obs.wind_speed.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "wind_speed {} at station {} is not a nonnegative finite value",
                    obs.wind_speed, obs.station
                )));
            }
            series.entry(obs.station.clone()).or_default().push(obs);
        }
        for (station, obs) in series.iter_mut() {
            obs.sort_by_key(|o| o.timestamp);
            for pair in obs.windows(2) {
                if pair[0].timestamp == pair[1].timestamp {
                    return Err(Error::InvalidParameter(format!(
                        "station {station} has duplicate observation timestamp {}",
                        pair[0].timestamp
                    )));
                }
            }
        }
        Ok(WeatherData { series })
    }

    pub fn station(&self, id: &str) -> Option<&[WeatherObservation]> {
        self.series.get(id).map(Vec::as_slice)
    }

    pub fn station_ids(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &WeatherObservation> {
        self.series.values().flatten()
    }

    pub fn n_observations(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// A full analysis input: outages, weather, stations, and the observation
/// window the annual event rate is computed against.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub outages: Vec<OutageRecord>,
    pub weather: WeatherData,
    pub stations: Vec<Station>,
    pub window_start: UnixSeconds,
    pub window_end: UnixSeconds,
    pub years_observed: f64,
}

impl Dataset {
    pub fn new(
        outages: Vec<OutageRecord>,
        weather: WeatherData,
        stations: Vec<Station>,
        window_start: UnixSeconds,
        window_end: UnixSeconds,
    ) -> Result<Self> {
        if window_end <= window_start {
            return Err(Error::InvalidParameter(format!(
                "window_end {window_end} must be after window_start {window_start}"
            )));
        }
        for outage in &outages {
            if outage.start < window_start || outage.restore > window_end {
                return Err(Error::InvalidParameter(format!(
                    "outage {} [{}, {}] falls outside the observation window [{}, {}]",
                    outage.id, outage.start, outage.restore, window_start, window_end
                )));
            }
        }
        let years_observed = (window_end - window_start) as f64 / SECONDS_PER_YEAR;
        Ok(Dataset {
            outages,
            weather,
            stations,
            window_start,
            window_end,
            years_observed,
        })
    }

    /// Builds a dataset inferring the observation window from the data
    /// itself: `[min outage start, max outage restore]`.
    pub fn from_parts(
        outages: Vec<OutageRecord>,
        weather: WeatherData,
        stations: Vec<Station>,
    ) -> Result<Self> {
        let window_start = outages.iter().map(|o| o.start).min().ok_or(Error::NoEvents)?;
        let window_end = outages
            .iter()
            .map(|o| o.restore)
            .max()
            .ok_or(Error::NoEvents)?;
        Dataset::new(outages, weather, stations, window_start, window_end)
    }

    /// Restricts the outage list to one station area.
    pub fn filter_station(&mut self, station_id: &str) {
        self.outages
            .retain(|o| o.station.as_deref() == Some(station_id));
    }
}

/// A row that failed to parse, with its line number in the source file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

/// Outcome of [`load_outages`]: parsed records plus the rejects report.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub records: Vec<OutageRecord>,
    pub rejects: Vec<Reject>,
}

impl LoadReport {
    pub fn total_rows(&self) -> usize {
        self.records.len() + self.rejects.len()
    }

    pub fn reject_fraction(&self) -> f64 {
        if self.total_rows() == 0 {
            0.0
        } else {
            self.rejects.len() as f64 / self.total_rows() as f64
        }
    }
}

fn parse_timestamp(raw: &str) -> std::result::Result<UnixSeconds, String> {
    let parse = |s: &str| DateTime::parse_from_rfc3339(s).map(|dt| dt.timestamp());
    parse(raw.trim())
        .or_else(|_| parse(&raw.trim().replacen(' ', "T", 1)))
        .map_err(|e| format!("bad timestamp `{raw}`: {e}"))
}

/// Formats unix seconds as ISO-8601 UTC with a trailing `Z`.
pub fn format_timestamp(ts: UnixSeconds) -> String {
    Utc.timestamp_opt(ts, 0)
        .single()
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(format!("bad boolean `{other}` (expected 0/1/true/false)")),
    }
}

fn parse_opt_coord(raw: &str, name: &str, limit: f64) -> std::result::Result<Option<f64>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let value: f64 = raw
        .parse()
        .map_err(|_| format!("bad {name} `{raw}`"))?;
    if !value.is_finite() || value.abs() > limit {
        return Err(format!("{name} {value} out of range [-{limit}, {limit}]"));
    }
    Ok(Some(value))
}

struct OutageColumns {
    id: usize,
    start: usize,
    restore: usize,
    customers: usize,
    cause: usize,
    scheduled: usize,
    lat: usize,
    lon: usize,
    station: Option<usize>,
}

impl OutageColumns {
    fn from_headers(path: &str, headers: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_string(),
                    column: name.to_string(),
                })
        };
        Ok(OutageColumns {
            id: find("id")?,
            start: find("start")?,
            restore: find("restore")?,
            customers: find("customers")?,
            cause: find("cause")?,
            scheduled: find("scheduled")?,
            lat: find("lat")?,
            lon: find("lon")?,
            station: headers.iter().position(|h| h.trim() == "station"),
        })
    }
}

fn parse_outage_row(
    cols: &OutageColumns,
    row: &csv::StringRecord,
) -> std::result::Result<OutageRecord, String> {
    let field = |idx: usize| row.get(idx).ok_or_else(|| "short row".to_string());
    let start = parse_timestamp(field(cols.start)?)?;
    let restore = parse_timestamp(field(cols.restore)?)?;
    if restore < start {
        return Err("negative duration".to_string());
    }
    let customers: u64 = field(cols.customers)?
        .trim()
        .parse()
        .map_err(|_| format!("bad customers `{}`", row.get(cols.customers).unwrap_or("")))?;
    let station = match cols.station {
        Some(idx) => {
            let raw = field(idx)?.trim();
            (!raw.is_empty()).then(|| raw.to_string())
        }
        None => None,
    };
    Ok(OutageRecord {
        id: field(cols.id)?.trim().to_string(),
        start,
        restore,
        customers,
        cause: field(cols.cause)?.trim().to_string(),
        scheduled: parse_bool(field(cols.scheduled)?)?,
        lat: parse_opt_coord(field(cols.lat)?, "lat", 90.0)?,
        lon: parse_opt_coord(field(cols.lon)?, "lon", 180.0)?,
        station,
    })
}

/// Loads outage records from CSV. Malformed rows are collected into the
/// rejects report; the load is fatal when the reject fraction reaches
/// [`MAX_REJECT_FRACTION`]. A missing column is always fatal.
pub fn load_outages(path: impl AsRef<Path>) -> Result<LoadReport> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_open_error(&display, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: display.clone(),
            source: e,
        })?
        .clone();
    let cols = OutageColumns::from_headers(&display, &headers)?;

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv {
            path: display.clone(),
            source: e,
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_outage_row(&cols, &row) {
            Ok(record) => records.push(record),
            Err(reason) => rejects.push(Reject { line, reason }),
        }
    }

    let report = LoadReport { records, rejects };
    if report.reject_fraction() >= MAX_REJECT_FRACTION {
        return Err(Error::TooManyRejects {
            path: display,
            rejected: report.rejects.len(),
            total: report.total_rows(),
            limit_percent: MAX_REJECT_FRACTION * 100.0,
            rejects: report.rejects,
        });
    }
    Ok(report)
}

fn csv_open_error(path: &str, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv {
            path: path.to_string(),
            source: e,
        }
    }
}

/// Writes records in the outage CSV format. The `station` column is included
/// only when at least one record carries an assignment.
pub fn write_outages(path: impl AsRef<Path>, records: &[OutageRecord]) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_open_error(&display, e))?;
    let with_station = records.iter().any(|r| r.station.is_some());
    let mut header = vec![
        "id",
        "start",
        "restore",
        "customers",
        "cause",
        "scheduled",
        "lat",
        "lon",
    ];
    if with_station {
        header.push("station");
    }
    let map_err = |e: csv::Error| Error::Csv {
        path: display.clone(),
        source: e,
    };
    writer.write_record(&header).map_err(map_err)?;
    for r in records {
        let mut row = vec![
            r.id.clone(),
            format_timestamp(r.start),
            format_timestamp(r.restore),
            r.customers.to_string(),
            r.cause.clone(),
            if r.scheduled { "1" } else { "0" }.to_string(),
            r.lat.map(|v| v.to_string()).unwrap_or_default(),
            r.lon.map(|v| v.to_string()).unwrap_or_default(),
        ];
        if with_station {
            row.push(r.station.clone().unwrap_or_default());
        }
        writer.write_record(&row).map_err(map_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(display.clone(), e))?;
    Ok(())
}

/// Loads weather observations (`station,timestamp,wind_speed`); any malformed
/// row is fatal. Wind speeds in `unit` are converted to m/s.
pub fn load_weather(path: impl AsRef<Path>, unit: WindUnit) -> Result<WeatherData> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_open_error(&display, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: display.clone(),
            source: e,
        })?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: display.clone(),
                column: name.to_string(),
            })
    };
    let (c_station, c_ts, c_wind) = (find("station")?, find("timestamp")?, find("wind_speed")?);

    let mut observations = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv {
            path: display.clone(),
            source: e,
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::BadRow {
            path: display.clone(),
            line,
            reason,
        };
        let timestamp = parse_timestamp(row.get(c_ts).unwrap_or("")).map_err(bad)?;
        let raw_speed = row.get(c_wind).unwrap_or("").trim();
        let speed: f64 = raw_speed
            .parse()
            .map_err(|_| bad(format!("bad wind_speed `{raw_speed}`")))?;
        if speed < 0.0 || !speed.is_finite() {
            return Err(bad(format!("wind_speed {speed} must be nonnegative")));
        }
        observations.push(WeatherObservation {
            station: row.get(c_station).unwrap_or("").trim().to_string(),
            timestamp,
            wind_speed: unit.to_mps(speed),
        });
    }
    WeatherData::from_observations(observations)
}

/// Writes weather observations in m/s.
pub fn write_weather(path: impl AsRef<Path>, weather: &WeatherData) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_open_error(&display, e))?;
    let map_err = |e: csv::Error| Error::Csv {
        path: display.clone(),
        source: e,
    };
    writer
        .write_record(["station", "timestamp", "wind_speed"])
        .map_err(map_err)?;
    for obs in weather.iter_all() {
        writer
            .write_record([
                obs.station.clone(),
                format_timestamp(obs.timestamp),
                obs.wind_speed.to_string(),
            ])
            .map_err(map_err)?;
    }
    writer.flush().map_err(|e| Error::io(display.clone(), e))?;
    Ok(())
}

/// Loads stations (`id,lat,lon`); ids must be unique, coordinates in range.
pub fn load_stations(path: impl AsRef<Path>) -> Result<Vec<Station>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_open_error(&display, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: display.clone(),
            source: e,
        })?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: display.clone(),
                column: name.to_string(),
            })
    };
    let (c_id, c_lat, c_lon) = (find("id")?, find("lat")?, find("lon")?);

    let mut stations: Vec<Station> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv {
            path: display.clone(),
            source: e,
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::BadRow {
            path: display.clone(),
            line,
            reason,
        };
        let id = row.get(c_id).unwrap_or("").trim().to_string();
        let lat = parse_opt_coord(row.get(c_lat).unwrap_or(""), "lat", 90.0)
            .map_err(bad)?
            .ok_or_else(|| bad("missing lat".to_string()))?;
        let lon = parse_opt_coord(row.get(c_lon).unwrap_or(""), "lon", 180.0)
            .map_err(bad)?
            .ok_or_else(|| bad("missing lon".to_string()))?;
        if stations.iter().any(|s| s.id == id) {
            return Err(bad(format!("duplicate station id `{id}`")));
        }
        stations.push(Station { id, lat, lon });
    }
    Ok(stations)
}

/// Writes the station list.
pub fn write_stations(path: impl AsRef<Path>, stations: &[Station]) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_open_error(&display, e))?;
    let map_err = |e: csv::Error| Error::Csv {
        path: display.clone(),
        source: e,
    };
    writer.write_record(["id", "lat", "lon"]).map_err(map_err)?;
    for s in stations {
        writer
            .write_record([s.id.clone(), s.lat.to_string(), s.lon.to_string()])
            .map_err(map_err)?;
    }
    writer.flush().map_err(|e| Error::io(display.clone(), e))?;
    Ok(())
}

/// Keeps exactly the unscheduled records with duration of at least
/// `min_duration_s`. Idempotent.
pub fn filter_unscheduled(records: &[OutageRecord], min_duration_s: i64) -> Vec<OutageRecord> {
    records
        .iter()
        .filter(|r| !r.scheduled && r.duration_s() >= min_duration_s)
        .cloned()
        .collect()
}

/// Great-circle distance in meters (haversine on a spherical earth).
pub fn great_circle_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().atan2((1.0 - a).sqrt())
}

/// Fills each record's `station` with the nearest station by great-circle
/// distance; ties break to the lexicographically smallest id. Records with a
/// pre-assigned station keep it (the id must exist in `stations`).
pub fn assign_stations(
    records: &[OutageRecord],
    stations: &[Station],
) -> Result<Vec<OutageRecord>> {
    if stations.is_empty() {
        return Err(Error::NoStations);
    }
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        let mut record = record.clone();
        if let Some(assigned) = &record.station {
            if !stations.iter().any(|s| &s.id == assigned) {
                return Err(Error::Config(format!(
                    "outage `{}` references unknown station `{assigned}`",
                    record.id
                )));
            }
        } else {
            let (lat, lon) = match (record.lat, record.lon) {
                (Some(lat), Some(lon)) => (lat, lon),
                _ => {
                    return Err(Error::MissingLocation {
                        id: record.id.clone(),
                    })
                }
            };
            let nearest = stations
                .iter()
                .map(|s| (great_circle_m(lat, lon, s.lat, s.lon), s.id.as_str()))
                .min_by(|a, b| a.partial_cmp(b).expect("finite distances"))
                .map(|(_, id)| id.to_string());
            record.station = nearest;
        }
        out.push(record);
    }
    Ok(out)
}

/// Wind speed at the outage start: the observation nearest in time at the
/// outage's station, ties to the earlier observation. Returns `None`
/// (wind-unknown) when the station has no observations, the record has no
/// station, or the nearest observation is farther than `max_gap_s` away.
pub fn wind_at(outage: &OutageRecord, weather: &WeatherData, max_gap_s: i64) -> Option<f64> {
    let series = weather.station(outage.station.as_deref()?)?;
    if series.is_empty() {
        return None;
    }
    let t = outage.start;
    let idx = series.partition_point(|obs| obs.timestamp < t);
    let mut best: Option<&WeatherObservation> = None;
    // Candidates: last observation before t and first at/after t. Earlier one
    // wins ties.
    if idx > 0 {
        best = Some(&series[idx - 1]);
    }
    if let Some(after) = series.get(idx) {
        let closer = match best {
            Some(before) => (after.timestamp - t).abs() < (before.timestamp - t).abs(),
            None => true,
        };
        if closer {
            best = Some(after);
        }
    }
    let best = best?;
    ((best.timestamp - t).abs() <= max_gap_s).then_some(best.wind_speed)
}

/// Wind at start for every record, in order; `None` marks wind-unknown.
pub fn winds_for(
    records: &[OutageRecord],
    weather: &WeatherData,
    max_gap_s: i64,
) -> Vec<Option<f64>> {
    records
        .iter()
        .map(|r| wind_at(r, weather, max_gap_s))
        .collect()
}

/// Input wind unit; everything downstream works in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindUnit {
    MetersPerSecond,
    MilesPerHour,
}

impl WindUnit {
    pub fn to_mps(self, value: f64) -> f64 {
        match self {
            WindUnit::MetersPerSecond => value,
            WindUnit::MilesPerHour => value * MPH_TO_MPS,
        }
    }
}

impl FromStr for WindUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m/s" | "mps" => Ok(WindUnit::MetersPerSecond),
            "mph" => Ok(WindUnit::MilesPerHour),
            other => Err(Error::Config(format!(
                "unknown wind_unit `{other}` (expected m/s or mph)"
            ))),
        }
    }
}

impl fmt::Display for WindUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindUnit::MetersPerSecond => write!(f, "m/s"),
            WindUnit::MilesPerHour => write!(f, "mph"),
        }
    }
}

/// Run settings read from the plain-text key/value config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub beta_usd_per_cust_hour: f64,
    pub min_duration_s: i64,
    pub wind_unit: WindUnit,
    pub max_gap_s: i64,
    pub large_cost_percentile: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            beta_usd_per_cust_hour: 370.2,
            min_duration_s: DEFAULT_MIN_DURATION_S,
            wind_unit: WindUnit::MetersPerSecond,
            max_gap_s: DEFAULT_MAX_GAP_S,
            large_cost_percentile: 0.99,
        }
    }
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are
    /// config errors so typos do not silently fall back to defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut settings = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad_value =
                |k: &str| Error::Config(format!("line {}: bad value for {k}", lineno + 1));
            match key {
                "beta_usd_per_cust_hour" => {
                    settings.beta_usd_per_cust_hour =
                        value.parse().map_err(|_| bad_value(key))?;
                }
                "min_duration_s" => {
                    settings.min_duration_s = value.parse().map_err(|_| bad_value(key))?;
                }
                "wind_unit" => settings.wind_unit = value.parse()?,
                "max_gap_s" => settings.max_gap_s = value.parse().map_err(|_| bad_value(key))?,
                "large_cost_percentile" => {
                    settings.large_cost_percentile = value.parse().map_err(|_| bad_value(key))?;
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        settings.validate()?;
        Ok(settings)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Settings::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta_usd_per_cust_hour > 0.0 && self.beta_usd_per_cust_hour.is_finite()) {
            return Err(Error::Config("beta_usd_per_cust_hour must be > 0".into()));
        }
        if !(0.0 < self.large_cost_percentile && self.large_cost_percentile < 1.0) {
            return Err(Error::Config(
                "large_cost_percentile must be in (0, 1)".into(),
            ));
        }
        if self.min_duration_s < 0 || self.max_gap_s < 0 {
            return Err(Error::Config(
                "min_duration_s and max_gap_s must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn outage(id: &str, start: i64, restore: i64) -> OutageRecord {
        OutageRecord {
            id: id.to_string(),
            start,
            restore,
            customers: 10,
            cause: "wind".to_string(),
            scheduled: false,
            lat: None,
            lon: None,
            station: None,
        }
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_rows() {
        let f = write_tmp(
            "id,start,restore,customers,cause,scheduled,lat,lon\n\
             a,2020-01-01T00:00:00Z,2020-01-01T01:00:00Z,5,wind,0,42.0,-93.6\n\
             b,2020-01-02T00:00:00Z,2020-01-02T02:00:00Z,7,tree,false,42.1,-93.5\n\
             c,2020-01-03T00:00:00+00:00,2020-01-03T00:30:00+00:00,1,animal,1,42.2,-93.4\n",
        );
        let report = load_outages(f.path()).unwrap();
        assert_eq!(report.records.len(), 3);
        assert!(report.rejects.is_empty());
        assert_eq!(report.records[0].customers, 5);
        assert_eq!(report.records[0].start, 1577836800);
        assert!(report.records[2].scheduled);
    }

    #[test]
    fn rejects_negative_duration_with_reason() {
        let f = write_tmp(
            "id,start,restore,customers,cause,scheduled,lat,lon\n\
             a,2020-01-01T02:00:00Z,2020-01-01T01:00:00Z,5,wind,0,42.0,-93.6\n\
             b,2020-01-02T00:00:00Z,2020-01-02T02:00:00Z,7,tree,0,42.1,-93.5\n",
        );
        // 1 reject of 2 rows is over the 1% limit, so the load is fatal; the
        // reject reason must still be visible in the error.
        match load_outages(f.path()) {
            Err(Error::TooManyRejects { rejects, .. }) => {
                assert_eq!(rejects.len(), 1);
                assert_eq!(rejects[0].reason, "negative duration");
            }
            other => panic!("expected TooManyRejects, got {other:?}"),
        }
    }

    #[test]
    fn tolerates_sub_percent_rejects() {
        let mut body = String::from("id,start,restore,customers,cause,scheduled,lat,lon\n");
        for i in 0..999 {
            body.push_str(&format!(
                "r{i},2020-01-01T00:00:00Z,2020-01-01T01:00:00Z,5,wind,0,42.0,-93.6\n"
            ));
        }
        body.push_str("bad,not-a-time,2020-01-01T01:00:00Z,5,wind,0,42.0,-93.6\n");
        let f = write_tmp(&body);
        let report = load_outages(f.path()).unwrap();
        assert_eq!(report.records.len(), 999);
        assert_eq!(report.rejects.len(), 1);
        assert!(report.rejects[0].reason.contains("bad timestamp"));
    }

    #[test]
    fn missing_column_is_fatal() {
        let f = write_tmp("id,start,restore,customers,cause,scheduled,lat\na,b,c,d,e,f,g\n");
        match load_outages(f.path()) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "lon"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn synthetic_rows_round_trip_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let causes = ["wind", "tree", "equipment", "animal", "unknown"];
        let records: Vec<OutageRecord> = (0..12715)
            .map(|i| {
                let start = 1_500_000_000 + rng.gen_range(0..189_345_600);
                OutageRecord {
                    id: format!("O{i:05}"),
                    start,
                    restore: start + rng.gen_range(60..86_400),
                    customers: rng.gen_range(0..5_000),
                    cause: causes[rng.gen_range(0..causes.len())].to_string(),
                    scheduled: rng.gen_bool(0.1),
                    lat: Some((rng.gen::<f64>() - 0.5) * 180.0),
                    lon: Some((rng.gen::<f64>() - 0.5) * 360.0),
                    station: None,
                }
            })
            .collect();

        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("a.csv");
        let path_b = dir.path().join("b.csv");
        write_outages(&path_a, &records).unwrap();
        let loaded = load_outages(&path_a).unwrap();
        assert!(loaded.rejects.is_empty());
        assert_eq!(loaded.records, records);
        write_outages(&path_b, &loaded.records).unwrap();
        let reloaded = load_outages(&path_b).unwrap();
        assert_eq!(reloaded.records, records);
    }

    #[test]
    fn filter_drops_scheduled_and_short() {
        let mut scheduled = outage("s", 0, 7200);
        scheduled.scheduled = true;
        let records = vec![
            scheduled,
            outage("short", 0, 59),
            outage("exact", 0, 60),
            outage("long", 0, 3600),
        ];
        let kept = filter_unscheduled(&records, 60);
        let ids: Vec<&str> = kept.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["exact", "long"]);
    }

    #[test]
    fn filter_matches_brute_force_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let records: Vec<OutageRecord> = (0..500)
            .map(|i| {
                let start = rng.gen_range(0..100_000);
                let mut r = outage(&format!("r{i}"), start, start + rng.gen_range(0..300));
                r.scheduled = rng.gen_bool(0.3);
                r
            })
            .collect();
        let expected = records
            .iter()
            .filter(|r| !r.scheduled && r.restore - r.start >= 60)
            .count();
        let kept = filter_unscheduled(&records, 60);
        assert_eq!(kept.len(), expected);
        // Full scan: every surviving record satisfies the predicate.
        assert!(kept.iter().all(|r| !r.scheduled && r.duration_s() >= 60));
    }

    #[test]
    fn filter_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let records: Vec<OutageRecord> = (0..300)
            .map(|i| {
                let start = rng.gen_range(0..100_000);
                let mut r = outage(&format!("r{i}"), start, start + rng.gen_range(0..300));
                r.scheduled = rng.gen_bool(0.5);
                r
            })
            .collect();
        let once = filter_unscheduled(&records, 60);
        let twice = filter_unscheduled(&once, 60);
        assert_eq!(once, twice);
    }

    fn station(id: &str, lat: f64, lon: f64) -> Station {
        Station {
            id: id.to_string(),
            lat,
            lon,
        }
    }

    #[test]
    fn single_station_takes_everything() {
        let stations = vec![station("only", 42.0, -93.6)];
        let mut r = outage("a", 0, 3600);
        r.lat = Some(40.0);
        r.lon = Some(-95.0);
        let assigned = assign_stations(&[r], &stations).unwrap();
        assert_eq!(assigned[0].station.as_deref(), Some("only"));
    }

    #[test]
    fn equidistant_tie_breaks_to_smaller_id() {
        // Outage on the equator midway between two stations on the same
        // parallel; distances are exactly symmetric.
        let stations = vec![station("B", 0.0, 1.0), station("A", 0.0, -1.0)];
        let mut r = outage("mid", 0, 3600);
        r.lat = Some(0.0);
        r.lon = Some(0.0);
        let assigned = assign_stations(&[r], &stations).unwrap();
        assert_eq!(assigned[0].station.as_deref(), Some("A"));
    }

    #[test]
    fn empty_station_list_is_fatal() {
        let mut r = outage("a", 0, 3600);
        r.lat = Some(40.0);
        r.lon = Some(-95.0);
        assert!(matches!(
            assign_stations(&[r], &[]),
            Err(Error::NoStations)
        ));
    }

    // Independent nearest-neighbor oracle: spherical law of cosines instead
    // of haversine, straight linear scan.
    fn oracle_nearest(lat: f64, lon: f64, stations: &[Station]) -> String {
        let mut best: Option<(f64, &str)> = None;
        for s in stations {
            let d = (lat.to_radians().sin() * s.lat.to_radians().sin()
                + lat.to_radians().cos()
                    * s.lat.to_radians().cos()
                    * (lon - s.lon).to_radians().cos())
            .clamp(-1.0, 1.0)
            .acos();
            let better = match best {
                None => true,
                Some((bd, bid)) => d < bd - 1e-12 || ((d - bd).abs() <= 1e-12 && s.id.as_str() < bid),
            };
            if better {
                best = Some((d, &s.id));
            }
        }
        best.unwrap().1.to_string()
    }

    #[test]
    fn assignment_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let stations: Vec<Station> = (0..12)
            .map(|i| {
                station(
                    &format!("S{i:02}"),
                    rng.gen_range(38.0..46.0),
                    rng.gen_range(-98.0..-88.0),
                )
            })
            .collect();
        let records: Vec<OutageRecord> = (0..200)
            .map(|i| {
                let mut r = outage(&format!("r{i}"), 0, 3600);
                r.lat = Some(rng.gen_range(38.0..46.0));
                r.lon = Some(rng.gen_range(-98.0..-88.0));
                r
            })
            .collect();
        let assigned = assign_stations(&records, &stations).unwrap();
        for (rec, a) in records.iter().zip(&assigned) {
            let expect = oracle_nearest(rec.lat.unwrap(), rec.lon.unwrap(), &stations);
            assert_eq!(a.station.as_deref(), Some(expect.as_str()));
        }
    }

    #[test]
    fn assignment_invariant_under_station_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut stations: Vec<Station> = (0..8)
            .map(|i| {
                station(
                    &format!("S{i}"),
                    rng.gen_range(38.0..46.0),
                    rng.gen_range(-98.0..-88.0),
                )
            })
            .collect();
        let records: Vec<OutageRecord> = (0..50)
            .map(|i| {
                let mut r = outage(&format!("r{i}"), 0, 3600);
                r.lat = Some(rng.gen_range(38.0..46.0));
                r.lon = Some(rng.gen_range(-98.0..-88.0));
                r
            })
            .collect();
        let forward = assign_stations(&records, &stations).unwrap();
        stations.reverse();
        let reversed = assign_stations(&records, &stations).unwrap();
        assert_eq!(forward, reversed);
    }

    fn obs(station: &str, timestamp: i64, wind: f64) -> WeatherObservation {
        WeatherObservation {
            station: station.to_string(),
            timestamp,
            wind_speed: wind,
        }
    }

    #[test]
    fn wind_at_exact_observation() {
        let weather =
            WeatherData::from_observations(vec![obs("S", 0, 3.0), obs("S", 3600, 9.0)]).unwrap();
        let mut r = outage("a", 3600, 7200);
        r.station = Some("S".to_string());
        assert_eq!(wind_at(&r, &weather, DEFAULT_MAX_GAP_S), Some(9.0));
    }

    #[test]
    fn wind_at_midpoint_prefers_earlier() {
        let weather =
            WeatherData::from_observations(vec![obs("S", 0, 3.0), obs("S", 3600, 9.0)]).unwrap();
        let mut r = outage("a", 1800, 7200);
        r.station = Some("S".to_string());
        assert_eq!(wind_at(&r, &weather, DEFAULT_MAX_GAP_S), Some(3.0));
    }

    #[test]
    fn wind_at_gap_and_missing_station() {
        let weather = WeatherData::from_observations(vec![obs("S", 0, 3.0)]).unwrap();
        let mut r = outage("a", DEFAULT_MAX_GAP_S + 1, 999_999);
        r.station = Some("S".to_string());
        assert_eq!(wind_at(&r, &weather, DEFAULT_MAX_GAP_S), None);
        let mut far = outage("b", 0, 3600);
        far.station = Some("T".to_string()); // no observations at all
        assert_eq!(wind_at(&far, &weather, DEFAULT_MAX_GAP_S), None);
    }

    #[test]
    fn wind_at_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let series: Vec<WeatherObservation> = (0..500)
            .map(|i| obs("S", i * 3600 + rng.gen_range(0..600), rng.gen::<f64>() * 30.0))
            .collect();
        let weather = WeatherData::from_observations(series.clone()).unwrap();
        let sorted = weather.station("S").unwrap().to_vec();
        for _ in 0..200 {
            let t = rng.gen_range(-3600..(500 * 3600 + 3600));
            let mut r = outage("q", t, t + 7200);
            r.station = Some("S".to_string());
            // Oracle: full scan, min |dt|, ties to the earlier timestamp.
            let best = sorted
                .iter()
                .min_by_key(|o| ((o.timestamp - t).abs(), o.timestamp))
                .unwrap();
            let expected =
                ((best.timestamp - t).abs() <= DEFAULT_MAX_GAP_S).then_some(best.wind_speed);
            assert_eq!(wind_at(&r, &weather, DEFAULT_MAX_GAP_S), expected);
        }
    }

    #[test]
    fn settings_parse_and_defaults() {
        let s = Settings::parse("").unwrap();
        assert_eq!(s, Settings::default());
        assert_eq!(s.beta_usd_per_cust_hour, 370.2);
        assert_eq!(s.large_cost_percentile, 0.99);

        let s = Settings::parse(
            "# comment\n\
             beta_usd_per_cust_hour = 100.5\n\
             min_duration_s = 120\n\
             wind_unit = mph\n\
             max_gap_s = 7200\n\
             large_cost_percentile = 0.95\n",
        )
        .unwrap();
        assert_eq!(s.beta_usd_per_cust_hour, 100.5);
        assert_eq!(s.wind_unit, WindUnit::MilesPerHour);
        assert_eq!(s.max_gap_s, 7200);
    }

    #[test]
    fn settings_reject_unknown_key_and_bad_percentile() {
        assert!(matches!(
            Settings::parse("beta = 1"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Settings::parse("large_cost_percentile = 1.5"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mph_converts_on_load() {
        let f = write_tmp(
            "station,timestamp,wind_speed\nS,2020-01-01T00:00:00Z,10\n",
        );
        let weather = load_weather(f.path(), WindUnit::MilesPerHour).unwrap();
        let got = weather.station("S").unwrap()[0].wind_speed;
        assert!((got - 4.4704).abs() < 1e-12);
    }

    #[test]
    fn dataset_window_inference() {
        let records = vec![outage("a", 100, 200), outage("b", 50, 400)];
        let ds = Dataset::from_parts(records, WeatherData::default(), vec![]).unwrap();
        assert_eq!(ds.window_start, 50);
        assert_eq!(ds.window_end, 400);
        assert!(ds.years_observed > 0.0);
    }
}
