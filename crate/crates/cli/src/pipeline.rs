//! Shared input loading: files -> settings -> filtered, station-assigned
//! dataset.

use std::path::PathBuf;

use anyhow::{Context, Result};
use gridrisk_core::ingest::{
    self, assign_stations, filter_unscheduled, LoadReport, Settings, Station, WeatherData,
};
use gridrisk_core::risk::CostConfig;
use gridrisk_core::{Dataset, OutageRecord};

use crate::InputArgs;

/// Global flags shared by every subcommand.
pub struct Common {
    pub config: Option<PathBuf>,
    pub station: Option<String>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Common {
    pub fn settings(&self) -> Result<Settings> {
        match &self.config {
            Some(path) => Settings::from_file(path)
                .with_context(|| format!("reading config {}", path.display())),
            None => Ok(Settings::default()),
        }
    }
}

pub fn cost_config(settings: &Settings) -> CostConfig {
    CostConfig {
        beta: settings.beta_usd_per_cust_hour,
        large_cost_percentile: settings.large_cost_percentile,
        c_large_override: None,
    }
}

/// Everything loaded from disk, before dataset assembly.
pub struct Inputs {
    pub settings: Settings,
    pub report: LoadReport,
    pub unscheduled: Vec<OutageRecord>,
    pub stations: Vec<Station>,
    pub weather: WeatherData,
}

pub fn load_inputs(common: &Common, input: &InputArgs) -> Result<Inputs> {
    let settings = common.settings()?;
    let report = ingest::load_outages(&input.outages)?;
    let mut unscheduled = filter_unscheduled(&report.records, settings.min_duration_s);
    let stations = match &input.stations {
        Some(path) => ingest::load_stations(path)?,
        None => Vec::new(),
    };
    if !stations.is_empty() {
        unscheduled = assign_stations(&unscheduled, &stations)?;
    }
    let weather = match &input.weather {
        Some(path) => ingest::load_weather(path, settings.wind_unit)?,
        None => WeatherData::default(),
    };
    Ok(Inputs {
        settings,
        report,
        unscheduled,
        stations,
        weather,
    })
}

/// Assembles the analysis dataset, applying the optional station filter.
pub fn into_dataset(inputs: Inputs, station: Option<&str>) -> Result<(Settings, Dataset)> {
    let Inputs {
        settings,
        unscheduled,
        stations,
        weather,
        ..
    } = inputs;
    let outages = match station {
        Some(id) => unscheduled
            .into_iter()
            .filter(|o| o.station.as_deref() == Some(id))
            .collect(),
        None => unscheduled,
    };
    let dataset = Dataset::from_parts(outages, weather, stations)?;
    Ok((settings, dataset))
}

pub fn load_dataset(common: &Common, input: &InputArgs) -> Result<(Settings, Dataset)> {
    let inputs = load_inputs(common, input)?;
    into_dataset(inputs, common.station.as_deref())
}
