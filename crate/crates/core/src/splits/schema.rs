//! JSONL record types and readers/writers.
//!
//! Every JSONL file starts with a header record
//! `{"schema":"<name>","version":1}`; data records follow, one JSON object
//! per line. Readers reject missing headers, wrong schema names, and
//! unsupported versions, and report parse failures with 1-based line
//! numbers.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, Role};

use super::{DataError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const ANNOTATIONS_SCHEMA: &str = "annotations";
pub const TRACKLETS_SCHEMA: &str = "tracklets";
pub const SPLIT_SCHEMA: &str = "split";
pub const PREDICTIONS_SCHEMA: &str = "predictions";
pub const APPEARANCE_SCHEMA: &str = "appearance";

/// First record of every JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaHeader {
    pub schema: String,
    pub version: u32,
}

/// Boxes visible in one frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameBoxes {
    pub boxes: Vec<BBox>,
}

/// One annotated video: identity, labels, and per-frame boxes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotatedVideo {
    pub video_id: String,
    /// Action class label, e.g. "move_up".
    pub verb_template: String,
    /// Coarse grouping of verbs; verbs sharing a super class always land in
    /// the same verb group of a compositional split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub super_class: Option<String>,
    /// Nouns (object names) that appear in the video.
    pub nouns: Vec<String>,
    pub width: f64,
    pub height: f64,
    pub frames: Vec<FrameBoxes>,
}

impl AnnotatedVideo {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// One tracked instance with one optional `[x1, y1, x2, y2]` entry per
/// source frame. Null padding slots have no `track_id` and all-null boxes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackletEntry {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
    pub boxes: Vec<Option<[f64; 4]>>,
}

/// Tracker output for one video. `tracklets` holds the filled interaction
/// slots (subjects, ranked objects, then null padding) followed by any
/// overflow candidates beyond the slot budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackletRecord {
    pub video_id: String,
    pub tracklets: Vec<TrackletEntry>,
}

/// A train/val partition. `kind` is "compositional", "shuffled", or
/// "oneclass"; the group maps are empty when they do not apply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: String,
    pub seed: u64,
    /// Verb -> "1" | "2".
    pub verb_group_of: std::collections::BTreeMap<String, String>,
    /// Frequent noun -> "A" | "B".
    pub object_group_of: std::collections::BTreeMap<String, String>,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

/// A few-shot partition: base classes with a held-out validation slice, and
/// novel classes with k training examples each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FewShotSpec {
    pub kind: String,
    pub seed: u64,
    pub k: usize,
    pub base_classes: Vec<String>,
    pub novel_classes: Vec<String>,
    pub base_train_ids: Vec<String>,
    pub base_val_ids: Vec<String>,
    pub novel_train_ids: Vec<String>,
    pub novel_val_ids: Vec<String>,
}

/// Either kind of split file, distinguished by the `kind` field.
#[derive(Debug, Clone)]
pub enum SplitFile {
    Plain(SplitSpec),
    FewShot(FewShotSpec),
}

impl SplitFile {
    pub fn load(path: &Path) -> Result<SplitFile> {
        let values: Vec<serde_json::Value> = read_jsonl(path, SPLIT_SCHEMA)?;
        let p = path.display().to_string();
        let first = values
            .into_iter()
            .next()
            .ok_or_else(|| DataError::Json { path: p.clone(), line: 2, msg: "empty split file".into() })?;
        let kind = first.get("kind").and_then(|k| k.as_str()).unwrap_or("").to_string();
        let mk_err = |e: serde_json::Error| DataError::Json { path: p.clone(), line: 2, msg: e.to_string() };
        match kind.as_str() {
            "fewshot" => Ok(SplitFile::FewShot(serde_json::from_value(first).map_err(mk_err)?)),
            "compositional" | "shuffled" | "oneclass" => {
                Ok(SplitFile::Plain(serde_json::from_value(first).map_err(mk_err)?))
            }
            other => Err(DataError::Json {
                path: p,
                line: 2,
                msg: format!("unknown split kind {other:?}"),
            }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            SplitFile::Plain(s) => write_jsonl(path, SPLIT_SCHEMA, std::slice::from_ref(s)),
            SplitFile::FewShot(s) => write_jsonl(path, SPLIT_SCHEMA, std::slice::from_ref(s)),
        }
    }
}

/// Per-video model output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub label: usize,
    pub pred: usize,
    pub prob: f64,
}

/// Externally computed appearance feature for one video.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppearanceRecord {
    pub video_id: String,
    pub vector: Vec<f64>,
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io { path: path.display().to_string(), source }
}

/// Write a JSONL file: schema header first, then one record per line.
pub fn write_jsonl<T: Serialize>(path: &Path, schema: &str, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let header = SchemaHeader { schema: schema.to_string(), version: SCHEMA_VERSION };
    let mut emit = |line: String| -> Result<()> {
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))
    };
    emit(serde_json::to_string(&header).expect("header serializes"))?;
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| DataError::Json { path: path.display().to_string(), line: 0, msg: e.to_string() })?;
        emit(line)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Read a JSONL file, checking the header against `expected_schema`.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, expected_schema: &str) -> Result<Vec<T>> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            let header: SchemaHeader = serde_json::from_str(&line)
                .map_err(|e| DataError::Header { path: p.clone(), msg: e.to_string() })?;
            if header.schema != expected_schema {
                return Err(DataError::WrongSchema {
                    path: p,
                    got: header.schema,
                    want: expected_schema.to_string(),
                });
            }
            if header.version != SCHEMA_VERSION {
                return Err(DataError::Version { path: p, got: header.version, supported: SCHEMA_VERSION });
            }
            saw_header = true;
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| DataError::Json { path: p.clone(), line: lineno, msg: e.to_string() })?;
        out.push(record);
    }
    if !saw_header {
        return Err(DataError::Header { path: p, msg: "file is empty".into() });
    }
    Ok(out)
}

fn validate_video(v: &AnnotatedVideo) -> Result<()> {
    let fail = |field: &'static str, msg: String| {
        Err(DataError::Invalid { video_id: v.video_id.clone(), field, msg })
    };
    if v.video_id.is_empty() {
        return Err(DataError::Invalid {
            video_id: "<unset>".into(),
            field: "video_id",
            msg: "must be non-empty".into(),
        });
    }
    if v.verb_template.is_empty() {
        return fail("verb_template", "must be non-empty".into());
    }
    if v.nouns.is_empty() {
        return fail("nouns", "must list at least one noun".into());
    }
    if v.nouns.iter().any(|n| n.is_empty()) {
        return fail("nouns", "noun names must be non-empty".into());
    }
    if !(v.width.is_finite() && v.width > 0.0 && v.height.is_finite() && v.height > 0.0) {
        return fail("width", format!("frame size {}x{} must be positive and finite", v.width, v.height));
    }
    if v.frames.is_empty() {
        return fail("frames", "must contain at least one frame".into());
    }
    for (fi, frame) in v.frames.iter().enumerate() {
        for (bi, b) in frame.boxes.iter().enumerate() {
            let ctx = format!("frame {fi}, box {bi}");
            if ![b.x1, b.y1, b.x2, b.y2].iter().all(|c| c.is_finite()) {
                return fail("frames", format!("{ctx}: non-finite coordinates"));
            }
            if b.x2 < b.x1 || b.y2 < b.y1 {
                return fail("frames", format!("{ctx}: inverted box ({}, {}, {}, {})", b.x1, b.y1, b.x2, b.y2));
            }
            if let Some(s) = b.score {
                if !(0.0..=1.0).contains(&s) || !s.is_finite() {
                    return fail("frames", format!("{ctx}: score {s} outside [0, 1]"));
                }
            }
        }
    }
    Ok(())
}

/// Load and validate an annotations file. Boxes are clamped to the frame;
/// the result is sorted by `video_id` and ids must be unique.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotatedVideo>> {
    let mut videos: Vec<AnnotatedVideo> = read_jsonl(path, ANNOTATIONS_SCHEMA)?;
    for v in &mut videos {
        validate_video(v)?;
        let (w, h) = (v.width, v.height);
        for frame in &mut v.frames {
            for b in &mut frame.boxes {
                *b = b.clamp_to_frame(w, h);
            }
        }
    }
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let mut seen = BTreeSet::new();
    for v in &videos {
        if !seen.insert(v.video_id.clone()) {
            return Err(DataError::DuplicateVideo(v.video_id.clone()));
        }
    }
    Ok(videos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Category;

    fn video(id: &str, verb: &str, nouns: &[&str]) -> AnnotatedVideo {
        AnnotatedVideo {
            video_id: id.into(),
            verb_template: verb.into(),
            super_class: None,
            nouns: nouns.iter().map(|s| s.to_string()).collect(),
            width: 320.0,
            height: 240.0,
            frames: vec![FrameBoxes {
                boxes: vec![BBox::new(10.0, 10.0, 50.0, 50.0, Category::Object)],
            }],
        }
    }

    #[test]
    fn round_trip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let videos = vec![video("b", "push", &["cup"]), video("a", "pull", &["pen"])];
        write_jsonl(&path, ANNOTATIONS_SCHEMA, &videos).unwrap();
        let loaded = load_annotations(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        // load_annotations sorts by id
        assert_eq!(loaded[0].video_id, "a");
        assert_eq!(loaded[1].video_id, "b");
    }

    #[test]
    fn missing_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        std::fs::write(&path, "{\"video_id\":\"v\"}\n").unwrap();
        let err = load_annotations(&path).unwrap_err();
        assert!(matches!(err, DataError::Header { .. }), "{err}");
    }

    #[test]
    fn wrong_schema_and_version_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, "{\"schema\":\"tracklets\",\"version\":1}\n").unwrap();
        assert!(matches!(load_annotations(&path).unwrap_err(), DataError::WrongSchema { .. }));
        std::fs::write(&path, "{\"schema\":\"annotations\",\"version\":9}\n").unwrap();
        let err = load_annotations(&path).unwrap_err();
        assert!(matches!(err, DataError::Version { got: 9, .. }), "{err}");
    }

    #[test]
    fn missing_nouns_field_is_rejected_naming_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let line = r#"{"video_id":"v1","verb_template":"push","width":320,"height":240,"frames":[{"boxes":[]}]}"#;
        std::fs::write(&path, format!("{{\"schema\":\"annotations\",\"version\":1}}\n{line}\n")).unwrap();
        let err = load_annotations(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nouns"), "error should name the missing field: {msg}");
        assert!(msg.contains(":2"), "error should carry the line number: {msg}");
    }

    #[test]
    fn empty_nouns_list_is_rejected_naming_video_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let mut v = video("v7", "push", &["cup"]);
        v.nouns.clear();
        write_jsonl(&path, ANNOTATIONS_SCHEMA, &[v]).unwrap();
        let err = load_annotations(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("v7") && msg.contains("nouns"), "{msg}");
    }

    #[test]
    fn inverted_box_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let mut v = video("v1", "push", &["cup"]);
        v.frames[0].boxes[0].x2 = 5.0; // x2 < x1
        write_jsonl(&path, ANNOTATIONS_SCHEMA, &[v]).unwrap();
        let err = load_annotations(&path).unwrap_err();
        assert!(err.to_string().contains("inverted"), "{err}");
    }

    #[test]
    fn out_of_frame_boxes_are_clamped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let mut v = video("v1", "push", &["cup"]);
        v.frames[0].boxes[0] = BBox::new(-20.0, -5.0, 400.0, 100.0, Category::Object);
        write_jsonl(&path, ANNOTATIONS_SCHEMA, &[v]).unwrap();
        let loaded = load_annotations(&path).unwrap();
        let b = &loaded[0].frames[0].boxes[0];
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (0.0, 0.0, 320.0, 100.0));
    }

    #[test]
    fn duplicate_video_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        write_jsonl(&path, ANNOTATIONS_SCHEMA, &[video("v", "a", &["x"]), video("v", "b", &["y"])]).unwrap();
        assert!(matches!(load_annotations(&path).unwrap_err(), DataError::DuplicateVideo(_)));
    }

    #[test]
    fn header_only_file_is_an_empty_dataset() {
        // [TRIVIAL]
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        write_jsonl::<AnnotatedVideo>(&path, ANNOTATIONS_SCHEMA, &[]).unwrap();
        assert!(load_annotations(&path).unwrap().is_empty());
    }

    #[test]
    fn split_file_round_trip_both_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let plain = SplitSpec {
            kind: "compositional".into(),
            seed: 7,
            verb_group_of: [("push".to_string(), "1".to_string())].into_iter().collect(),
            object_group_of: [("cup".to_string(), "A".to_string())].into_iter().collect(),
            train_ids: vec!["a".into()],
            val_ids: vec!["b".into()],
        };
        let p1 = dir.path().join("plain.jsonl");
        SplitFile::Plain(plain.clone()).save(&p1).unwrap();
        match SplitFile::load(&p1).unwrap() {
            SplitFile::Plain(s) => {
                assert_eq!(s.kind, "compositional");
                assert_eq!(s.train_ids, plain.train_ids);
            }
            _ => panic!("expected plain split"),
        }

        let few = FewShotSpec {
            kind: "fewshot".into(),
            seed: 7,
            k: 5,
            base_classes: vec!["push".into()],
            novel_classes: vec!["pull".into()],
            base_train_ids: vec!["a".into()],
            base_val_ids: vec!["b".into()],
            novel_train_ids: vec!["c".into()],
            novel_val_ids: vec!["d".into()],
        };
        let p2 = dir.path().join("few.jsonl");
        SplitFile::FewShot(few).save(&p2).unwrap();
        match SplitFile::load(&p2).unwrap() {
            SplitFile::FewShot(s) => assert_eq!(s.k, 5),
            _ => panic!("expected fewshot split"),
        }
    }
}
