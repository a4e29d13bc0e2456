//! `rerun harden|restore`: before/after/percent-diff comparison of the risk
//! metrics under a counterfactual investment, emitted as JSON and a table.

use std::path::Path;

use anyhow::{bail, Context, Result};
use gridrisk_core::rerun::{
    rerun_hardening, rerun_restoration, HardeningSpec, RateCurveOptions, RerunOptions,
    RerunResult, RestorationSpec,
};
use gridrisk_core::tailfit::TailFitOptions;
use serde::Serialize;

use crate::commands::{ensure_out_dir, write_json};
use crate::pipeline::{self, Common};
use crate::RerunScenario;

#[derive(Serialize)]
struct RerunReport {
    schema: u32,
    #[serde(flatten)]
    result: RerunResult,
}

pub fn run(common: &Common, scenario: RerunScenario) -> Result<u8> {
    match scenario {
        RerunScenario::Harden {
            input,
            reduction,
            samples,
            mode,
            fix_xmin,
            per_sample,
            rate_multiplier,
        } => {
            if input.weather.is_none() {
                bail!("rerun harden needs --weather to build the outage rate curve");
            }
            let (settings, dataset) = pipeline::load_dataset(common, &input)?;
            let spec = HardeningSpec {
                reduction,
                mode: mode.into(),
                n_samples: samples,
                seed: common.seed,
                refit_xmin_per_sample: !fix_xmin,
            };
            let opts = RerunOptions {
                cost: pipeline::cost_config(&settings),
                tail: TailFitOptions::default(),
                rate_curve: RateCurveOptions {
                    max_gap_s: settings.max_gap_s,
                    ..RateCurveOptions::default()
                },
                rate_multiplier,
            };
            let result = rerun_hardening(&dataset, &spec, &opts)?;
            if let Some(path) = per_sample {
                write_per_sample_csv(&path, &result)?;
            }
            finish(common, result)
        }
        RerunScenario::Restore {
            input,
            speedup,
            rate_multiplier,
        } => {
            let (settings, dataset) = pipeline::load_dataset(common, &input)?;
            let opts = RerunOptions {
                cost: pipeline::cost_config(&settings),
                tail: TailFitOptions::default(),
                rate_curve: RateCurveOptions {
                    max_gap_s: settings.max_gap_s,
                    ..RateCurveOptions::default()
                },
                rate_multiplier,
            };
            let result = rerun_restoration(&dataset, &RestorationSpec { speedup }, &opts)?;
            finish(common, result)
        }
    }
}

fn finish(common: &Common, result: RerunResult) -> Result<u8> {
    ensure_out_dir(&common.out_dir)?;
    let path = common.out_dir.join("rerun.json");
    write_json(&path, &RerunReport { schema: 1, result: result.clone() })?;

    println!("{:<10} {:>22} {:>22} {:>24} {:>12}", "metric", "before", "after", "sd", "% diff");
    for row in &result.rows {
        let sd = row
            .after_sd
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:<10} {:>22} {:>22} {:>24} {:>12}",
            row.metric,
            row.before,
            row.after,
            sd,
            format!("{:+.1}%", row.percent_diff)
        );
    }
    if result.samples_without_alpha > 0 {
        println!(
            "note: {} samples had too small a tail for alpha",
            result.samples_without_alpha
        );
    }
    if result.clamped_restores > 0 {
        println!(
            "note: restore clamp applied to {} outages",
            result.clamped_restores
        );
    }
    println!("report -> {}", path.display());
    Ok(0)
}

fn write_per_sample_csv(path: &Path, result: &RerunResult) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record([
        "sample",
        "n_outages",
        "n_events",
        "alpha",
        "p_large",
        "r_event_per_year",
        "f_large_per_year",
    ])?;
    for s in &result.per_sample {
        writer.write_record([
            s.sample.to_string(),
            s.n_outages.to_string(),
            s.n_events.to_string(),
            s.alpha.map(|a| a.to_string()).unwrap_or_default(),
            s.p_large.to_string(),
            s.r_event_per_year.to_string(),
            s.f_large_per_year.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
