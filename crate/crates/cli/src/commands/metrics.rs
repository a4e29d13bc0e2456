//! `metrics`: the full pipeline to a risk-metrics JSON report plus plot-ready
//! CSVs for the exceedance curve, the fitted tail line, and the large-cost
//! threshold marker.

use std::path::Path;

use anyhow::{Context, Result};
use gridrisk_core::events::extract_events;
use gridrisk_core::risk::{
    annual_event_rate, event_costs, exceedance_curve, f_large, large_cost_threshold, p_large,
    sufficient_for_percentile, ExceedanceCurve,
};
use gridrisk_core::tailfit::{select_xmin, TailFit, TailFitOptions, N_TAIL_WARN};
use gridrisk_core::{Dataset, Error, Settings};
use serde::Serialize;

use crate::commands::{ensure_out_dir, write_json};
use crate::pipeline::{self, Common};
use crate::InputArgs;

/// The metrics report. The tail section is null when the dataset is too
/// small to fit a power-law tail; every other metric stays well-defined.
#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub schema: u32,
    pub n_events: usize,
    pub years_observed: f64,
    pub c_large_usd: f64,
    pub p_large: f64,
    pub r_event_per_year: f64,
    pub rate_multiplier: f64,
    pub f_large_per_year: f64,
    pub tail: Option<TailFit>,
    pub mean_is_finite: Option<bool>,
}

pub fn compute_report(settings: &Settings, dataset: &Dataset) -> Result<(MetricsReport, ExceedanceCurve)> {
    let events = extract_events(&dataset.outages);
    let cost_config = pipeline::cost_config(settings);
    let costs = event_costs(&events, &cost_config);
    let curve = exceedance_curve(&costs)?;
    if !sufficient_for_percentile(costs.len(), settings.large_cost_percentile) {
        eprintln!(
            "warning: only {} events for the {:.0}th-percentile threshold; c_large is noisy",
            costs.len(),
            settings.large_cost_percentile * 100.0
        );
    }
    let c_large = large_cost_threshold(&costs, settings.large_cost_percentile)?;
    let p = p_large(&costs, c_large);
    let r = annual_event_rate(costs.len(), dataset.years_observed)?;
    let f = f_large(p, r, 1.0);

    let tail = match select_xmin(&costs, &TailFitOptions::default()) {
        Ok(fit) => {
            if fit.n_tail < N_TAIL_WARN {
                eprintln!(
                    "warning: tail fit rests on only {} points; treat alpha with caution",
                    fit.n_tail
                );
            }
            if fit.alpha <= 1.0 {
                eprintln!(
                    "warning: fitted alpha = {:.3} <= 1, the tail has an infinite mean; \
                     mean-based large-cost summaries are not usable",
                    fit.alpha
                );
            }
            Some(fit)
        }
        Err(Error::InsufficientTail {
            available,
            required,
        }) => {
            eprintln!(
                "warning: no tail fit ({available} positive costs, need {required}); \
                 tail section omitted"
            );
            None
        }
        Err(e) => return Err(e.into()),
    };

    let report = MetricsReport {
        schema: 1,
        n_events: costs.len(),
        years_observed: dataset.years_observed,
        c_large_usd: c_large,
        p_large: p,
        r_event_per_year: r,
        rate_multiplier: 1.0,
        f_large_per_year: f,
        mean_is_finite: tail.as_ref().map(|t| t.alpha > 1.0),
        tail,
    };
    // The report never leaves this process with a broken rate identity.
    assert_eq!(
        report.f_large_per_year,
        report.p_large * report.r_event_per_year * report.rate_multiplier
    );
    Ok((report, curve))
}

pub fn run(common: &Common, input: &InputArgs) -> Result<u8> {
    let (settings, dataset) = pipeline::load_dataset(common, input)?;
    let (report, curve) = compute_report(&settings, &dataset)?;
    ensure_out_dir(&common.out_dir)?;
    write_json(&common.out_dir.join("metrics.json"), &report)?;
    write_exceedance_csv(&common.out_dir.join("exceedance.csv"), &curve)?;
    if let Some(tail) = &report.tail {
        write_tail_csv(&common.out_dir.join("tail_fit.csv"), tail, &curve)?;
    }
    write_marker_csv(&common.out_dir.join("c_large.csv"), report.c_large_usd, curve.n())?;
    write_gnuplot_stub(&common.out_dir.join("plot.gp"), report.tail.is_some())?;

    println!("n_events          {}", report.n_events);
    println!("years_observed    {}", report.years_observed);
    println!("c_large_usd       {}", report.c_large_usd);
    println!("p_large           {}", report.p_large);
    println!("r_event_per_year  {}", report.r_event_per_year);
    println!("f_large_per_year  {}", report.f_large_per_year);
    if let Some(tail) = &report.tail {
        println!("alpha             {}", tail.alpha);
        println!("x_min_usd         {}", tail.x_min);
        println!("n_tail            {}", tail.n_tail);
        println!("ks                {}", tail.ks_distance);
        println!("mean_is_finite    {}", tail.alpha > 1.0);
    }
    println!("report -> {}", common.out_dir.join("metrics.json").display());
    Ok(0)
}

fn write_exceedance_csv(path: &Path, curve: &ExceedanceCurve) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["cost_usd", "exceedance_prob"])?;
    for (cost, prob) in curve.plot_points() {
        writer.write_record([cost.to_string(), prob.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// The fitted tail line, scaled by the empirical mass at x_min so it overlays
/// the exceedance curve on a log-log plot.
fn write_tail_csv(path: &Path, tail: &TailFit, curve: &ExceedanceCurve) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["cost_usd", "model_prob"])?;
    let scale = tail.n_tail as f64 / curve.n() as f64;
    let (lo, hi) = (tail.x_min.ln(), curve.max_cost().ln());
    let steps = 200;
    for k in 0..=steps {
        let x = (lo + (hi - lo) * k as f64 / steps as f64).exp();
        let model = scale * (x / tail.x_min).powf(-tail.alpha);
        writer.write_record([x.to_string(), model.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_marker_csv(path: &Path, c_large: f64, n: usize) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["cost_usd", "exceedance_prob"])?;
    writer.write_record([c_large.to_string(), (1.0 / n as f64).to_string()])?;
    writer.write_record([c_large.to_string(), "1".to_string()])?;
    writer.flush()?;
    Ok(())
}

fn write_gnuplot_stub(path: &Path, with_tail: bool) -> Result<()> {
    let mut script = String::from(concat!(
        "set datafile separator comma\n",
        "set logscale xy\n",
        "set xlabel \"event cost (USD)\"\n",
        "set ylabel \"P[C > c]\"\n",
        "plot \"exceedance.csv\" skip 1 using 1:2 with steps title \"empirical\", \\\n",
        "     \"c_large.csv\" skip 1 using 1:2 with lines dashtype 2 title \"c_large\"",
    ));
    if with_tail {
        script.push_str(", \\\n     \"tail_fit.csv\" skip 1 using 1:2 with lines title \"fitted tail\"");
    }
    script.push('\n');
    std::fs::write(path, script).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
