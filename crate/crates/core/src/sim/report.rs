use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::config::ScenarioConfig;
use super::run::SceneRecord;
use super::truth::TruthRecord;
use super::SimError;
use crate::awareness::{metrics, LabeledEstimate, MetricsTable, TrackRecord, TruthSample};
use crate::estimator::Provenance;
use crate::frames::{global_to_local, Point, Pose2D};
use crate::zonoset::{outline_2d, Zonotope};

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub metrics: MetricsTable,
    pub metrics_csv: String,
    pub outlines_csv: String,
}

fn provenance(t: &TrackRecord) -> Result<Provenance, SimError> {
    t.provenance.parse().map_err(SimError::Artifact)
}

pub fn track_zonotope(t: &TrackRecord) -> Result<Zonotope, SimError> {
    let data: Vec<f64> = t.generators.iter().flatten().copied().collect();
    Ok(Zonotope::new(
        DVector::from_row_slice(&t.center),
        DMatrix::from_column_slice(3, t.generators.len(), &data),
    )?)
}

fn provenance_label(cfg: &ScenarioConfig, p: Provenance) -> String {
    match p {
        Provenance::External(id) => match cfg.actor(id) {
            Some(a) => format!("external {}", a.name),
            None => p.to_string(),
        },
        Provenance::Local => "local".into(),
        Provenance::Fused => "fused".into(),
    }
}

fn cell(center: Point, area: f64) -> String {
    format!("({:8.3}, {:8.3}) {:8.3}", center.x, center.y, area)
}

/// Builds the report text, the metrics table and the outline file from the
/// scene stream and the truth log.
pub fn build_report(cfg: &ScenarioConfig, scenes: &[SceneRecord], truth: &[TruthRecord]) -> Result<Report, SimError> {
    let truth_samples: Vec<TruthSample> = truth
        .iter()
        .map(|r| TruthSample {
            time_ms: r.time_ms,
            actor: r.actor,
            position: Point::new(r.x, r.y),
        })
        .collect();
    let mut estimates = Vec::new();
    for s in scenes {
        for t in &s.tracks {
            estimates.push(LabeledEstimate {
                time_ms: s.time_ms,
                actor: t.truth_actor,
                provenance: provenance(t)?,
                center: Point::new(t.center[0], t.center[1]),
                area: t.area,
            });
        }
    }
    let table = metrics(&estimates, &truth_samples);

    let mut text = String::new();
    writeln!(text, "scenario {}  seed {}", cfg.name, cfg.seed).unwrap();

    // Snapshot table.
    let report_ms = super::run::time_ms(cfg.report_time());
    if let Some(scene) = scenes.iter().min_by_key(|s| s.time_ms.abs_diff(report_ms)) {
        let ego: Pose2D = scene.ego_pose.into();
        writeln!(
            text,
            "snapshot at t = {:.3} s, centers in the ego frame (m, m), areas in m²",
            scene.time_ms as f64 / 1000.0
        )
        .unwrap();
        let mut columns: Vec<Provenance> = Vec::new();
        let mut cells: BTreeMap<(u32, Provenance), String> = BTreeMap::new();
        for t in &scene.tracks {
            let p = provenance(t)?;
            if !columns.contains(&p) {
                columns.push(p);
            }
            if let Some(actor) = t.truth_actor {
                cells
                    .entry((actor, p))
                    .or_insert_with(|| cell(Point::new(t.center_ev[0], t.center_ev[1]), t.area));
            }
        }
        columns.sort();
        let width = 30;
        let mut header = format!("{:<12} | {:<width$}", "actor", "ground truth");
        for p in &columns {
            write!(header, " | {:<width$}", provenance_label(cfg, *p)).unwrap();
        }
        writeln!(text, "{header}").unwrap();
        writeln!(text, "{}", "-".repeat(header.chars().count())).unwrap();
        for a in &cfg.actors {
            let Some(r) = truth.iter().find(|r| r.actor == a.id && r.time_ms == scene.time_ms) else {
                continue;
            };
            let gt = global_to_local(&ego, &Point::new(r.x, r.y));
            let mut line = format!(
                "{:<12} | {:<width$}",
                a.name,
                cell(gt, a.footprint.length * a.footprint.width)
            );
            for p in &columns {
                let c = cells.get(&(a.id, *p)).map(String::as_str).unwrap_or("-");
                write!(line, " | {c:<width$}").unwrap();
            }
            writeln!(text, "{}", line.trim_end()).unwrap();
        }
    }

    writeln!(text).unwrap();
    writeln!(text, "RMSE of set centers and mean set area over the run").unwrap();
    writeln!(
        text,
        "{:<12} | {:<20} | {:>7} | {:>9} | {:>11}",
        "actor", "provenance", "samples", "rmse (m)", "area (m²)"
    )
    .unwrap();
    for row in &table.rows {
        let name = cfg.actor(row.actor).map(|a| a.name.as_str()).unwrap_or("?");
        let p: Provenance = row.provenance.parse().map_err(SimError::Artifact)?;
        writeln!(
            text,
            "{:<12} | {:<20} | {:>7} | {:>9.3} | {:>11.3}",
            name,
            provenance_label(cfg, p),
            row.samples,
            row.rmse_m,
            row.mean_area_m2
        )
        .unwrap();
    }
    writeln!(text, "estimates without truth: {}", table.excluded).unwrap();

    // Outlines.
    let mut outlines = String::from("tick,time_s,track,provenance,truth_actor,vertex,x,y,x_ev,y_ev\n");
    for s in scenes {
        let ego: Pose2D = s.ego_pose.into();
        for t in &s.tracks {
            let ring = outline_2d(&track_zonotope(t)?);
            let actor = t.truth_actor.map(|a| a.to_string()).unwrap_or_default();
            for (i, v) in ring.iter().enumerate() {
                let ev = global_to_local(&ego, v);
                writeln!(
                    outlines,
                    "{},{},{},{},{},{},{},{},{},{}",
                    s.tick,
                    s.time_ms as f64 / 1000.0,
                    t.id,
                    t.provenance,
                    actor,
                    i,
                    v.x,
                    v.y,
                    ev.x,
                    ev.y
                )
                .unwrap();
            }
        }
    }

    Ok(Report {
        text,
        metrics_csv: table.to_csv(),
        metrics: table,
        outlines_csv: outlines,
    })
}
