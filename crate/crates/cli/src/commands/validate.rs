//! `validate`: load everything, report counts, exit 2 on data-quality
//! problems.

use std::collections::BTreeMap;

use anyhow::Result;
use gridrisk_core::ingest::format_timestamp;
use gridrisk_core::{Error, SECONDS_PER_YEAR};

use crate::pipeline::{self, Common};
use crate::InputArgs;

pub fn run(common: &Common, input: &InputArgs) -> Result<u8> {
    let inputs = match pipeline::load_inputs(common, input) {
        Err(err) => {
            // A fatal reject fraction still deserves the counts and reasons.
            if let Some(Error::TooManyRejects {
                rejected,
                total,
                rejects,
                ..
            }) = err.downcast_ref::<Error>()
            {
                println!("outages: {total} rows, {rejected} rejected (fatal, limit 1%)");
                for reject in rejects.iter().take(20) {
                    println!("  line {}: {}", reject.line, reject.reason);
                }
                if rejects.len() > 20 {
                    println!("  ... {} more", rejects.len() - 20);
                }
                return Ok(2);
            }
            return Err(err);
        }
        Ok(inputs) => inputs,
    };

    let total = inputs.report.total_rows();
    let rejected = inputs.report.rejects.len();
    println!(
        "outages: loaded {} of {total} rows, rejected {rejected} ({:.2}%)",
        inputs.report.records.len(),
        100.0 * inputs.report.reject_fraction()
    );
    for reject in &inputs.report.rejects {
        println!("  line {}: {}", reject.line, reject.reason);
    }
    println!(
        "filtered: {} unscheduled outages of at least {} s",
        inputs.unscheduled.len(),
        inputs.settings.min_duration_s
    );

    let filtered: Vec<_> = match common.station.as_deref() {
        Some(id) => inputs
            .unscheduled
            .iter()
            .filter(|o| o.station.as_deref() == Some(id))
            .collect(),
        None => inputs.unscheduled.iter().collect(),
    };
    if let Some(id) = common.station.as_deref() {
        println!("station filter {id}: {} outages", filtered.len());
    }

    if filtered.is_empty() {
        println!("no events");
        return Ok(2);
    }

    let start = filtered.iter().map(|o| o.start).min().unwrap();
    let end = filtered.iter().map(|o| o.restore).max().unwrap();
    println!(
        "window: {} .. {} ({:.2} years)",
        format_timestamp(start),
        format_timestamp(end),
        (end - start) as f64 / SECONDS_PER_YEAR
    );
    if inputs.weather.n_observations() > 0 {
        println!(
            "weather: {} observations across {} stations",
            inputs.weather.n_observations(),
            inputs.weather.station_ids().count()
        );
        let unknown = filtered
            .iter()
            .filter(|o| gridrisk_core::ingest::wind_at(o, &inputs.weather, inputs.settings.max_gap_s).is_none())
            .count();
        if unknown > 0 {
            println!(
                "warning: {unknown} of {} outages are wind-unknown (no observation within {} s)",
                filtered.len(),
                inputs.settings.max_gap_s
            );
        }
    }

    let mut per_station: BTreeMap<&str, usize> = BTreeMap::new();
    for outage in &filtered {
        if let Some(station) = outage.station.as_deref() {
            *per_station.entry(station).or_default() += 1;
        }
    }
    for (station, count) in per_station {
        println!("station {station}: {count} outages");
    }
    Ok(0)
}
