//! `synth`: write a generated dataset as the three input CSVs.

use anyhow::{bail, Result};
use gridrisk_core::ingest::{write_outages, write_stations, write_weather};
use gridrisk_core::synth::{gen_dataset, SynthSpec};

use crate::commands::ensure_out_dir;
use crate::pipeline::Common;

pub fn run(common: &Common, preset: &str) -> Result<u8> {
    let spec = match preset {
        "paper-scale" => SynthSpec::paper_scale(common.seed),
        other => bail!("unknown preset `{other}` (available: paper-scale)"),
    };
    let dataset = gen_dataset(&spec)?;
    ensure_out_dir(&common.out_dir)?;
    write_outages(common.out_dir.join("outages.csv"), &dataset.outages)?;
    write_weather(common.out_dir.join("weather.csv"), &dataset.weather)?;
    write_stations(common.out_dir.join("stations.csv"), &dataset.stations)?;
    println!(
        "{} outages, {} weather observations, {} stations -> {}",
        dataset.outages.len(),
        dataset.weather.n_observations(),
        dataset.stations.len(),
        common.out_dir.display()
    );
    Ok(0)
}
