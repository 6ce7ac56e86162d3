//! Report serialization: structured JSON, the two-row summary table and
//! per-vehicle CSV.

use std::fmt::Write as _;

use clap::ValueEnum;
use ssbump_core::sim::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Canonical key-sorted JSON.
    Json,
    /// Per-bump-type summary.
    Table,
    /// One row per vehicle and bump.
    Csv,
}

/// Key-sorted pretty JSON. Identical reports give identical bytes.
pub fn structured(report: &Report) -> String {
    // serde_json's map is ordered by key, so a round trip through `Value`
    // sorts every object.
    let value = serde_json::to_value(report).expect("reports always serialize");
    let mut out = serde_json::to_string_pretty(&value).expect("values always serialize");
    out.push('\n');
    out
}

/// JSON array of reports, in the given order.
pub fn structured_many(reports: &[Report]) -> String {
    let value = serde_json::to_value(reports).expect("reports always serialize");
    let mut out = serde_json::to_string_pretty(&value).expect("values always serialize");
    out.push('\n');
    out
}

fn one_decimal(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

pub fn tabular(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} (seed {})", report.scenario, report.seed);
    let _ = writeln!(out, "# average time delay per vehicle, s");
    let _ = writeln!(out, "Conventional {}", one_decimal(report.conventional.mean_transit_s));
    let _ = writeln!(out, "SSBump {}", one_decimal(report.ssbump.mean_transit_s));
    if let (Some(r), Some(rr)) = (report.reduction_percent, report.reduction_percent_rounded) {
        let _ = writeln!(out, "reduction {r:.1}% ({rr:.1}% from the rounded means)");
    }
    for d in &report.ev_delays {
        let run = if d.control { "control" } else { "primary" };
        let _ = writeln!(out, "ev {} bump {} {run} delay {:.3} s", d.ev_id, d.bump_id, d.delay_s);
    }
    out
}

pub fn records_csv(reports: &[Report]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed",
        "vehicle_id",
        "vehicle_kind",
        "bump_id",
        "bump_type",
        "control",
        "regime",
        "entered_at_s",
        "cruise_speed_mps",
        "avg_zone_speed_mps",
        "transit_time_s",
        "free_flow_time_s",
        "net_delay_s",
    ])
    .expect("in-memory write");
    for report in reports {
        for r in &report.records {
            w.write_record([
                report.seed.to_string(),
                r.vehicle_id.to_string(),
                label(&r.vehicle_kind),
                r.bump_id.to_string(),
                label(&r.bump_type),
                r.control.to_string(),
                label(&r.regime),
                r.entered_at_s.to_string(),
                r.cruise_speed_mps.to_string(),
                r.avg_zone_speed_mps.to_string(),
                r.transit_time_s.to_string(),
                r.free_flow_time_s.to_string(),
                r.net_delay_s.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Serialized name of a unit enum variant.
fn label<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}
