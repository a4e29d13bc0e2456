//! `events`: extract resilience events, write events.csv.

use anyhow::{Context, Result};
use gridrisk_core::events::extract_events;
use gridrisk_core::ingest::format_timestamp;

use crate::commands::ensure_out_dir;
use crate::pipeline::{self, Common};
use crate::InputArgs;

pub fn run(common: &Common, input: &InputArgs) -> Result<u8> {
    let (_, dataset) = pipeline::load_dataset(common, input)?;
    let events = extract_events(&dataset.outages);
    ensure_out_dir(&common.out_dir)?;
    let path = common.out_dir.join("events.csv");
    let mut writer =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["event_id", "start", "end", "n_outages", "area_cust_hours"])?;
    for (idx, event) in events.iter().enumerate() {
        writer.write_record([
            (idx + 1).to_string(),
            format_timestamp(event.start),
            format_timestamp(event.end),
            event.n_outages().to_string(),
            event.area_customer_hours().to_string(),
        ])?;
    }
    writer.flush()?;
    println!(
        "{} events from {} outages -> {}",
        events.len(),
        dataset.outages.len(),
        path.display()
    );
    Ok(0)
}
