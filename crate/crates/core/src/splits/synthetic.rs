//! Synthetic trajectory corpus.
//!
//! Each video is a parametric scene in normalized coordinates: a hand, a
//! manipulated object, and a static container, rendered to pixel boxes. The
//! randomness for a video is keyed by (seed, noun, video index) only — not
//! the verb — so verb pairs that are time reversals of each other (put_into
//! and take_out) share scene geometry exactly, and a reversed quad sequence
//! from one is bit-identical to the other.
//!
//! Motion amplitudes, box sizes, and per-frame step ramps are chosen so that
//! consecutive-frame IoU stays well above the tracker's association gate for
//! every verb and noun, and no box ever leaves the frame.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, Category};
use crate::rng::stream;

use super::schema::{AnnotatedVideo, FrameBoxes};

/// The available motion programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionVerb {
    /// Hand approaches the object along a random ray; object static.
    MoveToward,
    /// Hand retreats from the object along a random ray; object static.
    MoveAway,
    /// Hand carries the object straight up (center y strictly decreasing).
    MoveUp,
    /// Hand carries the object straight down.
    MoveDown,
    /// Hand carries the object left.
    MoveLeft,
    /// Hand carries the object right.
    MoveRight,
    /// Hand carries the object into the container; ends centered on it.
    PutInto,
    /// Exact time reversal of PutInto for the same scene draw.
    TakeOut,
    /// Object oscillates horizontally with at least two direction reversals.
    Shake,
    /// Object sweeps half a circle around its start point.
    Circle,
    /// Hand approaches, then pushes the object along the approach ray.
    Push,
    /// Object arcs up and over to a new spot (x monotone, y dips up).
    PickPlace,
}

impl MotionVerb {
    /// The six core verbs.
    pub const CORE: [MotionVerb; 6] = [
        MotionVerb::MoveToward,
        MotionVerb::MoveAway,
        MotionVerb::MoveUp,
        MotionVerb::MoveDown,
        MotionVerb::PutInto,
        MotionVerb::TakeOut,
    ];

    /// Every motion program.
    pub const ALL: [MotionVerb; 12] = [
        MotionVerb::MoveToward,
        MotionVerb::MoveAway,
        MotionVerb::MoveUp,
        MotionVerb::MoveDown,
        MotionVerb::MoveLeft,
        MotionVerb::MoveRight,
        MotionVerb::PutInto,
        MotionVerb::TakeOut,
        MotionVerb::Shake,
        MotionVerb::Circle,
        MotionVerb::Push,
        MotionVerb::PickPlace,
    ];

    pub fn template(self) -> &'static str {
        match self {
            MotionVerb::MoveToward => "move_toward",
            MotionVerb::MoveAway => "move_away",
            MotionVerb::MoveUp => "move_up",
            MotionVerb::MoveDown => "move_down",
            MotionVerb::MoveLeft => "move_left",
            MotionVerb::MoveRight => "move_right",
            MotionVerb::PutInto => "put_into",
            MotionVerb::TakeOut => "take_out",
            MotionVerb::Shake => "shake",
            MotionVerb::Circle => "circle",
            MotionVerb::Push => "push",
            MotionVerb::PickPlace => "pick_place",
        }
    }

    /// Verbs that are near-inverses of each other share a super class, which
    /// forces them into the same verb group of a compositional split.
    pub fn super_class(self) -> &'static str {
        match self {
            MotionVerb::MoveToward | MotionVerb::MoveAway => "radial",
            MotionVerb::MoveUp | MotionVerb::MoveDown => "vertical",
            MotionVerb::MoveLeft | MotionVerb::MoveRight => "horizontal",
            MotionVerb::PutInto | MotionVerb::TakeOut => "containment",
            MotionVerb::Shake => "shake",
            MotionVerb::Circle => "circle",
            MotionVerb::Push => "push",
            MotionVerb::PickPlace => "pick_place",
        }
    }

    pub fn from_template(s: &str) -> Option<MotionVerb> {
        MotionVerb::ALL.iter().copied().find(|v| v.template() == s)
    }
}

/// Parameters of the synthetic corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub verbs: Vec<MotionVerb>,
    /// Nouns per object group (groups differ in size, aspect, and where
    /// objects tend to start).
    pub nouns_per_group: usize,
    pub videos_per_pair: usize,
    /// Source frames per video.
    pub frames: usize,
    /// Scale of per-frame step jitter in [0, 1].
    pub noise: f64,
    pub width: f64,
    pub height: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            verbs: MotionVerb::CORE.to_vec(),
            nouns_per_group: 4,
            videos_per_pair: 50,
            frames: 8,
            noise: 1.0,
            width: 320.0,
            height: 240.0,
            seed: 0,
        }
    }
}

/// Everything random about a scene, drawn up front from the per-video
/// stream. All verbs consume the same draws in the same order.
struct SceneDraw {
    object_start: (f64, f64),
    object_size: (f64, f64),
    hand_size: (f64, f64),
    container_center: (f64, f64),
    container_size: (f64, f64),
    angle: f64,
    step_jitter: Vec<f64>,
    wiggle: Vec<f64>,
}

struct NounProps {
    name: String,
    width: f64,
    aspect: f64,
    start_bias: (f64, f64),
}

fn noun_table(per_group: usize) -> Vec<NounProps> {
    let mut out = Vec::new();
    for i in 0..per_group {
        out.push(NounProps {
            name: format!("obj_a{i}"),
            width: 0.10 + 0.015 * (i % 4) as f64,
            aspect: 1.25,
            start_bias: (0.42, 0.45),
        });
    }
    for i in 0..per_group {
        out.push(NounProps {
            name: format!("obj_b{i}"),
            width: 0.18 + 0.012 * (i % 4) as f64,
            aspect: 0.8,
            start_bias: (0.58, 0.55),
        });
    }
    out
}

fn draw_scene(rng: &mut ChaCha8Rng, noun: &NounProps, frames: usize) -> SceneDraw {
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let object_start = (noun.start_bias.0 + u(-0.04, 0.04), noun.start_bias.1 + u(-0.04, 0.04));
    let ow = noun.width * (1.0 + 0.1 * u(-1.0, 1.0));
    let object_size = (ow, ow / noun.aspect);
    let hand_size = (0.10 * (1.0 + 0.1 * u(-1.0, 1.0)), 0.12 * (1.0 + 0.1 * u(-1.0, 1.0)));
    let mirror = (
        (1.0 - object_start.0).clamp(0.32, 0.68) + u(-0.02, 0.02),
        (1.0 - object_start.1).clamp(0.32, 0.68) + u(-0.02, 0.02),
    );
    let container_size = (0.36 * (1.0 + 0.05 * u(-1.0, 1.0)), 0.30 * (1.0 + 0.05 * u(-1.0, 1.0)));
    let angle = u(0.0, 2.0 * PI);
    let step_jitter: Vec<f64> = (0..frames.saturating_sub(1)).map(|_| u(0.0, 1.0)).collect();
    let wiggle: Vec<f64> = (0..2 * frames).map(|_| u(-1.0, 1.0)).collect();
    SceneDraw {
        object_start,
        object_size,
        hand_size,
        container_center: mirror,
        container_size,
        angle,
        step_jitter,
        wiggle,
    }
}

/// Strictly increasing cumulative fractions 0 = f_0 < f_1 < ... < f_{n-1} = 1
/// over `n` frames. Early steps ramp up from rest (first step about a third
/// of a steady step), and `noise` jitters each step by up to +/-15%.
fn ramped_fractions(n: usize, noise: f64, jitter: &[f64]) -> Vec<f64> {
    assert!(n >= 2);
    let steps = n - 1;
    let mut shares = Vec::with_capacity(steps);
    for t in 0..steps {
        let ramp = ((t + 1) as f64 / 3.0).min(1.0);
        let j = 1.0 + 0.3 * noise * (jitter[t] - 0.5);
        shares.push(ramp * j);
    }
    let total: f64 = shares.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for (t, s) in shares.iter().enumerate() {
        acc += s / total;
        // Pin the endpoint exactly.
        out.push(if t + 1 == steps { 1.0 } else { acc });
    }
    out
}

fn unit(angle: f64) -> (f64, f64) {
    (angle.cos(), angle.sin())
}

fn add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn lerp(a: (f64, f64), b: (f64, f64), f: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
}

/// Per-frame centers for hand and object.
struct Trajectory {
    hand: Vec<(f64, f64)>,
    object: Vec<(f64, f64)>,
}

fn hand_offset(scene: &SceneDraw) -> (f64, f64) {
    // Hand grips the top edge of the object.
    (0.0, -(scene.object_size.1 * 0.3 + scene.hand_size.1 * 0.2))
}

fn carried(object_path: Vec<(f64, f64)>, scene: &SceneDraw) -> Trajectory {
    let off = hand_offset(scene);
    let hand = object_path.iter().map(|&p| add(p, off)).collect();
    Trajectory { hand, object: object_path }
}

fn build_trajectory(verb: MotionVerb, scene: &SceneDraw, frames: usize, noise: f64) -> Trajectory {
    let f = ramped_fractions(frames, noise, &scene.step_jitter);
    let o = scene.object_start;
    let dir = unit(scene.angle);
    match verb {
        MotionVerb::MoveToward => {
            let object = vec![o; frames];
            let hand = f
                .iter()
                .map(|&ft| {
                    let r = 0.28 - 0.22 * ft;
                    add(o, (dir.0 * r, dir.1 * r))
                })
                .collect();
            Trajectory { hand, object }
        }
        MotionVerb::MoveAway => {
            let object = vec![o; frames];
            let hand = f
                .iter()
                .map(|&ft| {
                    let r = 0.06 + 0.22 * ft;
                    add(o, (dir.0 * r, dir.1 * r))
                })
                .collect();
            Trajectory { hand, object }
        }
        MotionVerb::MoveUp => carried(f.iter().map(|&ft| (o.0, o.1 - 0.22 * ft)).collect(), scene),
        MotionVerb::MoveDown => carried(f.iter().map(|&ft| (o.0, o.1 + 0.22 * ft)).collect(), scene),
        MotionVerb::MoveLeft => carried(f.iter().map(|&ft| (o.0 - 0.20 * ft, o.1)).collect(), scene),
        MotionVerb::MoveRight => carried(f.iter().map(|&ft| (o.0 + 0.20 * ft, o.1)).collect(), scene),
        MotionVerb::PutInto => {
            carried(f.iter().map(|&ft| lerp(o, scene.container_center, ft)).collect(), scene)
        }
        MotionVerb::TakeOut => {
            // Bit-exact time reversal of PutInto for the same scene.
            let mut t = build_trajectory(MotionVerb::PutInto, scene, frames, noise);
            t.hand.reverse();
            t.object.reverse();
            t
        }
        MotionVerb::Shake => {
            let amp = 0.015 * (1.0 + 0.2 * scene.wiggle[0]);
            let path = (0..frames)
                .map(|t| {
                    let phase = 2.5 * PI * t as f64 / (frames - 1) as f64;
                    (o.0 + amp * phase.sin(), o.1)
                })
                .collect();
            carried(path, scene)
        }
        MotionVerb::Circle => {
            let rho = 0.06;
            let path = f
                .iter()
                .map(|&ft| {
                    let phi = PI * ft;
                    (o.0 + rho * (phi.cos() - 1.0), o.1 + rho * phi.sin())
                })
                .collect();
            carried(path, scene)
        }
        MotionVerb::Push => {
            // Contact at 40% of the video, then the object slides along the
            // approach direction while the hand stays on it.
            let contact = 0.4;
            let touch_r = 0.06;
            let total_push = 0.12;
            let mut hand = Vec::with_capacity(frames);
            let mut object = Vec::with_capacity(frames);
            for &ft in &f {
                if ft < contact {
                    let a = ft / contact;
                    let r = 0.26 - (0.26 - touch_r) * a;
                    hand.push(add(o, (dir.0 * r, dir.1 * r)));
                    object.push(o);
                } else {
                    let a = (ft - contact) / (1.0 - contact);
                    let slide = total_push * a;
                    let op = add(o, (-dir.0 * slide, -dir.1 * slide));
                    object.push(op);
                    hand.push(add(op, (dir.0 * touch_r, dir.1 * touch_r)));
                }
            }
            Trajectory { hand, object }
        }
        MotionVerb::PickPlace => {
            let path = f
                .iter()
                .map(|&ft| (o.0 + 0.18 * ft, o.1 - 0.08 * (PI * ft).sin()))
                .collect();
            carried(path, scene)
        }
    }
}

fn centered_box(center: (f64, f64), size: (f64, f64), cat: Category, instance: &str, w: f64, h: f64) -> BBox {
    let mut b = BBox::new(
        (center.0 - size.0 / 2.0) * w,
        (center.1 - size.1 / 2.0) * h,
        (center.0 + size.0 / 2.0) * w,
        (center.1 + size.1 / 2.0) * h,
        cat,
    );
    b.instance_id = Some(instance.to_string());
    b
}

/// Generate the full corpus for `spec`. Deterministic: the same spec always
/// yields an identical video list.
pub fn generate_synthetic(spec: &SynthSpec) -> Vec<AnnotatedVideo> {
    assert!(spec.frames >= 2, "synthetic videos need at least two frames");
    assert!(spec.nouns_per_group >= 1);
    let nouns = noun_table(spec.nouns_per_group);
    let mut out = Vec::new();
    for (noun_id, noun) in nouns.iter().enumerate() {
        for &verb in &spec.verbs {
            for idx in 0..spec.videos_per_pair {
                // Keyed without the verb: reversal verb pairs share scenes.
                let mut rng = stream(spec.seed, "synth.video", &[noun_id as u64, idx as u64]);
                let scene = draw_scene(&mut rng, noun, spec.frames);
                let traj = build_trajectory(verb, &scene, spec.frames, spec.noise);
                let frames = (0..spec.frames)
                    .map(|t| FrameBoxes {
                        boxes: vec![
                            centered_box(traj.hand[t], scene.hand_size, Category::Hand, "hand_0", spec.width, spec.height),
                            centered_box(traj.object[t], scene.object_size, Category::Object, "obj_0", spec.width, spec.height),
                            centered_box(
                                scene.container_center,
                                scene.container_size,
                                Category::Object,
                                "container_0",
                                spec.width,
                                spec.height,
                            ),
                        ],
                    })
                    .collect();
                out.push(AnnotatedVideo {
                    video_id: format!("synth_{}_{}_{:03}", noun.name, verb.template(), idx),
                    verb_template: verb.template().to_string(),
                    super_class: Some(verb.super_class().to_string()),
                    nouns: vec![noun.name.clone()],
                    width: spec.width,
                    height: spec.height,
                    frames,
                });
            }
        }
    }
    out
}
