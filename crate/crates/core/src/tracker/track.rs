//! Track lifecycle management and fixed-slot tracklet assembly.

use serde::{Deserialize, Serialize};

use crate::geometry::{encode, iou, BBox, Category, Quad, Role};
use crate::numkit::Matrix;

use super::kalman::{kalman_predict, kalman_update, state_to_bbox, KalmanState};

/// Tracker behavior knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Detections scoring below this are dropped before association.
    /// Detections without a score count as 1.0.
    pub score_threshold: f64,
    /// Matches with IoU below this are rejected even if assigned.
    pub iou_min: f64,
    /// A track is terminated once it has gone unmatched for more than this
    /// many consecutive frames.
    pub max_age: usize,
    /// Tracks with fewer total matches than this are dropped at assembly.
    pub min_hits: usize,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams { score_threshold: 0.5, iou_min: 0.3, max_age: 1, min_hits: 1 }
    }
}

/// One tracked instance.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub category: Category,
    pub state: KalmanState,
    /// Number of successful measurement updates (including the birth frame).
    pub hits: usize,
    /// Consecutive frames since the last update.
    pub age_since_update: usize,
    /// Frame index at which the track was created.
    pub birth_frame: usize,
    /// One entry per frame since birth: the matched detection box, or `None`.
    pub history: Vec<Option<BBox>>,
    /// Sum of matched detection scores (unscored detections count 1.0).
    pub score_sum: f64,
}

impl Track {
    fn new(id: u64, det: &BBox, frame: usize) -> Self {
        Track {
            id,
            category: det.category,
            state: KalmanState::from_box(det),
            hits: 1,
            age_since_update: 0,
            birth_frame: frame,
            history: vec![Some(det.clone())],
            score_sum: det.score.unwrap_or(1.0),
        }
    }

    /// The matched detection box at an absolute frame index, if any.
    pub fn box_at_frame(&self, frame: usize) -> Option<&BBox> {
        frame
            .checked_sub(self.birth_frame)
            .and_then(|i| self.history.get(i))
            .and_then(|b| b.as_ref())
    }

    /// Frames with a matched detection.
    pub fn covered_frames(&self) -> usize {
        self.history.iter().filter(|b| b.is_some()).count()
    }
}

/// Online tracker: call [`Tracker::step`] once per frame, then
/// [`Tracker::finish`].
#[derive(Debug)]
pub struct Tracker {
    pub params: TrackerParams,
    active: Vec<Track>,
    finished: Vec<Track>,
    next_id: u64,
    frame: usize,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Tracker { params, active: Vec::new(), finished: Vec::new(), next_id: 1, frame: 0 }
    }

    pub fn frame_index(&self) -> usize {
        self.frame
    }

    /// Process one frame of detections. Returns `(track_id, detection_index)`
    /// for each accepted match, sorted by track id. Detection indices refer
    /// to the input slice (before score filtering).
    pub fn step(&mut self, detections: &[BBox]) -> Vec<(u64, usize)> {
        let kept: Vec<usize> = detections
            .iter()
            .enumerate()
            .filter(|(_, d)| d.score.unwrap_or(1.0) >= self.params.score_threshold)
            .map(|(i, _)| i)
            .collect();

        // Predict every active track forward to this frame.
        let mut predicted: Vec<BBox> = Vec::with_capacity(self.active.len());
        for t in &mut self.active {
            t.state = kalman_predict(&t.state);
            predicted.push(state_to_bbox(&t.state, t.category));
        }

        // Associate: cost = 1 - IoU, then reject weak matches. Cross-category
        // pairs get IoU 0, so they can never survive the iou_min gate.
        let mut iou_table = Matrix::zeros(self.active.len(), kept.len());
        for (ti, pb) in predicted.iter().enumerate() {
            for (kj, &dj) in kept.iter().enumerate() {
                let v = if self.active[ti].category == detections[dj].category {
                    iou(pb, &detections[dj])
                } else {
                    0.0
                };
                iou_table.set(ti, kj, v);
            }
        }
        let mut cost = Matrix::zeros(self.active.len(), kept.len());
        for i in 0..cost.rows() {
            for j in 0..cost.cols() {
                cost.set(i, j, 1.0 - iou_table.at(i, j));
            }
        }

        let mut matched_track = vec![false; self.active.len()];
        let mut matched_det = vec![false; kept.len()];
        let mut matches: Vec<(u64, usize)> = Vec::new();
        for (ti, kj) in super::assign(&cost) {
            if iou_table.at(ti, kj) < self.params.iou_min {
                continue;
            }
            matched_track[ti] = true;
            matched_det[kj] = true;
            let det = &detections[kept[kj]];
            let t = &mut self.active[ti];
            t.state = kalman_update(&t.state, det);
            t.hits += 1;
            t.age_since_update = 0;
            t.history.push(Some(det.clone()));
            t.score_sum += det.score.unwrap_or(1.0);
            matches.push((t.id, kept[kj]));
        }

        for (ti, matched) in matched_track.iter().enumerate() {
            if !matched {
                let t = &mut self.active[ti];
                t.age_since_update += 1;
                t.history.push(None);
            }
        }

        for (kj, matched) in matched_det.iter().enumerate() {
            if !matched {
                let det = &detections[kept[kj]];
                let t = Track::new(self.next_id, det, self.frame);
                self.next_id += 1;
                matches.push((t.id, kept[kj]));
                self.active.push(t);
            }
        }

        // Retire tracks that have been lost for too long.
        let max_age = self.params.max_age;
        let mut still_active = Vec::with_capacity(self.active.len());
        for t in self.active.drain(..) {
            if t.age_since_update > max_age {
                self.finished.push(t);
            } else {
                still_active.push(t);
            }
        }
        self.active = still_active;

        self.frame += 1;
        matches.sort_unstable();
        matches
    }

    /// Consume the tracker, returning every track ever created, sorted by id.
    pub fn finish(mut self) -> Vec<Track> {
        self.finished.append(&mut self.active);
        self.finished.sort_by_key(|t| t.id);
        self.finished
    }
}

/// A fixed-slot trajectory handed to the model: a role plus one optional box
/// per source frame. Null slots have no track id and no boxes.
#[derive(Debug, Clone)]
pub struct Tracklet {
    pub role: Role,
    pub track_id: Option<u64>,
    pub boxes: Vec<Option<BBox>>,
}

impl Tracklet {
    pub fn null(num_frames: usize) -> Self {
        Tracklet { role: Role::Null, track_id: None, boxes: vec![None; num_frames] }
    }

    /// Normalized coordinates per frame; missing boxes give the zero quad.
    pub fn quads(&self, frame_w: f64, frame_h: f64) -> Vec<Quad> {
        self.boxes.iter().map(|b| encode(b.as_ref(), frame_w, frame_h)).collect()
    }

    pub fn is_null(&self) -> bool {
        self.track_id.is_none()
    }
}

/// Result of slotting tracks into a fixed-size interaction set.
#[derive(Debug, Clone)]
pub struct AssembledTracklets {
    /// Exactly `n_slots` entries: subjects first, then ranked objects, then
    /// null padding.
    pub slots: Vec<Tracklet>,
    /// Ranked candidates that did not fit in the slots.
    pub overflow: Vec<Tracklet>,
}

/// Rank tracks and fill `n_slots` interaction slots.
///
/// Hand tracks become subjects and are always preferred over objects.
/// Within a category, tracks are ranked by `score_sum * coverage`
/// (descending), ties broken by lower track id. Tracks with fewer than
/// `min_hits` matches are discarded entirely.
pub fn assemble_tracklets(
    tracks: &[Track],
    num_frames: usize,
    n_slots: usize,
    min_hits: usize,
) -> AssembledTracklets {
    let rank = |t: &Track| -> f64 {
        let coverage = if num_frames > 0 {
            t.covered_frames() as f64 / num_frames as f64
        } else {
            0.0
        };
        t.score_sum * coverage
    };

    let mut hands: Vec<&Track> = tracks
        .iter()
        .filter(|t| t.category == Category::Hand && t.hits >= min_hits)
        .collect();
    let mut objects: Vec<&Track> = tracks
        .iter()
        .filter(|t| t.category == Category::Object && t.hits >= min_hits)
        .collect();
    let by_rank = |a: &&Track, b: &&Track| {
        rank(b).total_cmp(&rank(a)).then_with(|| a.id.cmp(&b.id))
    };
    hands.sort_by(by_rank);
    objects.sort_by(by_rank);

    let to_tracklet = |t: &Track, role: Role| -> Tracklet {
        let boxes = (0..num_frames).map(|f| t.box_at_frame(f).cloned()).collect();
        Tracklet { role, track_id: Some(t.id), boxes }
    };

    let mut slots: Vec<Tracklet> = Vec::with_capacity(n_slots);
    let mut overflow: Vec<Tracklet> = Vec::new();

    for (i, h) in hands.iter().enumerate() {
        if i < n_slots {
            slots.push(to_tracklet(h, Role::Subject));
        } else {
            overflow.push(to_tracklet(h, Role::Subject));
        }
    }
    for o in &objects {
        if slots.len() < n_slots {
            slots.push(to_tracklet(o, Role::Object));
        } else {
            overflow.push(to_tracklet(o, Role::Object));
        }
    }
    while slots.len() < n_slots {
        slots.push(Tracklet::null(num_frames));
    }

    AssembledTracklets { slots, overflow }
}
