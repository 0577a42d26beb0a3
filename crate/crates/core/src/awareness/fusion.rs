use serde::{Deserialize, Serialize};

use super::AwarenessError;
use crate::estimator::{Provenance, RoadUserTrack, TrackId};
use crate::frames::{global_to_local, FovSector, Obstacle, Point, Pose2D};
use crate::zonoset::{fuse, optimal_weights, Zonotope};

const POSITION: [usize; 2] = [0, 1];

/// Groups tracks whose position projections intersect, taking connected
/// components of the pairwise-intersection graph. Each group is sorted by id
/// and groups are sorted by their first member. The result does not depend on
/// input order.
pub fn associate(tracks: &[RoadUserTrack]) -> Result<Vec<Vec<TrackId>>, AwarenessError> {
    let mut order: Vec<&RoadUserTrack> = tracks.iter().collect();
    order.sort_by_key(|t| t.id);
    let sets: Vec<Zonotope> = order.iter().map(|t| t.corrected_set.project(&POSITION)).collect();

    let mut parent: Vec<usize> = (0..order.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
            if ri != rj && sets[i].intersects(&sets[j])? {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }

    let mut groups: Vec<Vec<TrackId>> = Vec::new();
    let mut slot_of_root = vec![usize::MAX; order.len()];
    for (i, track) in order.iter().enumerate() {
        let r = root(&mut parent, i);
        if slot_of_root[r] == usize::MAX {
            slot_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot_of_root[r]].push(track.id);
    }
    Ok(groups)
}

/// Result of fusing one association group.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionReport {
    pub group_id: u32,
    pub members: Vec<TrackId>,
    pub weights: Vec<f64>,
    pub fused_set: Zonotope,
    /// Area of the position projection, m².
    pub area: f64,
    pub center_ev: Point,
}

impl FusionReport {
    /// The fused set as a track of provenance `Fused`.
    pub fn as_track(&self, template: &RoadUserTrack, time: f64) -> RoadUserTrack {
        RoadUserTrack {
            id: TrackId {
                provenance: Provenance::Fused,
                object: self.group_id,
            },
            corrected_set: self.fused_set.clone(),
            heading: template.heading,
            last_update: time,
            class: template.class,
            footprint: template.footprint,
        }
    }
}

pub fn fuse_group(group_id: u32, group: &[RoadUserTrack], ego: &Pose2D) -> Result<FusionReport, AwarenessError> {
    if group.len() < 2 {
        return Err(AwarenessError::GroupTooSmall(group.len()));
    }
    let sets: Vec<Zonotope> = group.iter().map(|t| t.corrected_set.clone()).collect();
    let weights = optimal_weights(&sets);
    let fused_set = fuse(&sets, &weights)?;
    let area = fused_set.project(&POSITION).area_2d()?;
    let c = fused_set.center();
    Ok(FusionReport {
        group_id,
        members: group.iter().map(|t| t.id).collect(),
        weights,
        area,
        center_ev: global_to_local(ego, &Point::new(c[0], c[1])),
        fused_set,
    })
}

/// Everything the ego knows at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMap {
    pub time: f64,
    pub ego_pose: Pose2D,
    /// Source tracks followed by fused tracks.
    pub tracks: Vec<RoadUserTrack>,
    pub fovs: Vec<FovSector>,
    pub obstacles: Vec<Obstacle>,
    /// Groups with at least two members; fused track `g` comes from group `g`.
    pub associations: Vec<Vec<TrackId>>,
    pub fusion: Vec<FusionReport>,
}

/// Associates the given time-aligned source tracks and fuses every group of
/// two or more.
pub fn build_scene(
    time: f64,
    ego_pose: Pose2D,
    source_tracks: Vec<RoadUserTrack>,
    fovs: Vec<FovSector>,
    obstacles: Vec<Obstacle>,
) -> Result<SceneMap, AwarenessError> {
    let mut tracks = source_tracks;
    tracks.retain(|t| t.provenance() != Provenance::Fused);
    tracks.sort_by_key(|t| t.id);
    let associations: Vec<Vec<TrackId>> = associate(&tracks)?.into_iter().filter(|g| g.len() >= 2).collect();
    let mut fusion = Vec::with_capacity(associations.len());
    let mut fused_tracks = Vec::with_capacity(associations.len());
    for (gid, group) in associations.iter().enumerate() {
        let members: Vec<RoadUserTrack> = group
            .iter()
            .map(|id| {
                let i = tracks.binary_search_by_key(id, |t| t.id).expect("member present");
                tracks[i].clone()
            })
            .collect();
        let report = fuse_group(gid as u32, &members, &ego_pose)?;
        fused_tracks.push(report.as_track(&members[0], time));
        fusion.push(report);
    }
    tracks.extend(fused_tracks);
    Ok(SceneMap {
        time,
        ego_pose,
        tracks,
        fovs,
        obstacles,
        associations,
        fusion,
    })
}

/// One track in the scene stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    /// `provenance/object`, e.g. `external:2/5`.
    pub id: String,
    pub provenance: String,
    /// `(x, y, speed)` in the global frame.
    pub center: [f64; 3],
    /// Position of the center in the ego frame.
    pub center_ev: [f64; 2],
    /// Generators as columns of `(x, y, speed)`.
    pub generators: Vec<[f64; 3]>,
    pub area: f64,
    /// Actor the underlying measurements came from, when known.
    pub truth_actor: Option<u32>,
}

impl TrackRecord {
    pub fn new(track: &RoadUserTrack, ego: &Pose2D, truth_actor: Option<u32>) -> Result<Self, AwarenessError> {
        let c = track.corrected_set.center();
        let ev = global_to_local(ego, &Point::new(c[0], c[1]));
        Ok(Self {
            id: track.id.to_string(),
            provenance: track.id.provenance.to_string(),
            center: [c[0], c[1], c[2]],
            center_ev: [ev.x, ev.y],
            generators: track
                .corrected_set
                .generators()
                .column_iter()
                .map(|g| [g[0], g[1], g[2]])
                .collect(),
            area: track.corrected_set.project(&POSITION).area_2d()?,
            truth_actor,
        })
    }
}
