use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::estimator::Provenance;
use crate::frames::Point;

/// Center and area of one emitted set, labeled with the actor it tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledEstimate {
    pub time_ms: u64,
    pub actor: Option<u32>,
    pub provenance: Provenance,
    pub center: Point,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub time_ms: u64,
    pub actor: u32,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub actor: u32,
    pub provenance: String,
    pub samples: usize,
    pub rmse_m: f64,
    pub mean_area_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    /// Estimates without an actor label or without a truth sample.
    pub excluded: usize,
}

impl MetricsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actor,provenance,samples,rmse_m,mean_area_m2\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                r.actor, r.provenance, r.samples, r.rmse_m, r.mean_area_m2
            ));
        }
        out
    }

    pub fn row(&self, actor: u32, provenance: Provenance) -> Option<&MetricsRow> {
        let p = provenance.to_string();
        self.rows.iter().find(|r| r.actor == actor && r.provenance == p)
    }
}

/// RMSE of set centers against true positions and mean set area, per actor
/// and provenance. Rows are ordered by actor, then provenance.
pub fn metrics(estimates: &[LabeledEstimate], truth: &[TruthSample]) -> MetricsTable {
    let truth: HashMap<(u32, u64), Point> = truth.iter().map(|t| ((t.actor, t.time_ms), t.position)).collect();
    let mut acc: BTreeMap<(u32, Provenance), (usize, f64, f64)> = BTreeMap::new();
    let mut excluded = 0;
    for e in estimates {
        let Some(actor) = e.actor else {
            excluded += 1;
            continue;
        };
        let Some(p) = truth.get(&(actor, e.time_ms)) else {
            excluded += 1;
            continue;
        };
        let entry = acc.entry((actor, e.provenance)).or_default();
        entry.0 += 1;
        entry.1 += (e.center - p).norm_squared();
        entry.2 += e.area;
    }
    let rows = acc
        .into_iter()
        .map(|((actor, provenance), (n, sq, area))| MetricsRow {
            actor,
            provenance: provenance.to_string(),
            samples: n,
            rmse_m: (sq / n as f64).sqrt(),
            mean_area_m2: area / n as f64,
        })
        .collect();
    MetricsTable { rows, excluded }
}
