//! Train/val split generators.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::stream;

use super::schema::{AnnotatedVideo, FewShotSpec, SplitSpec};
use super::{DataError, Result};

/// Nouns must appear in strictly more than this many videos to count as
/// frequent in the compositional split.
pub const DEFAULT_FREQUENT_THRESHOLD: usize = 100;

/// Videos excluded while building a compositional split, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitStats {
    /// No frequent noun at all.
    pub excluded_infrequent: usize,
    /// Frequent nouns spanning both object groups.
    pub excluded_mixed: usize,
}

/// Nouns appearing in strictly more than `threshold` videos, sorted.
pub fn frequent_objects(videos: &[AnnotatedVideo], threshold: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in videos {
        // A noun counts once per video even if listed twice.
        let uniq: BTreeSet<&str> = v.nouns.iter().map(|s| s.as_str()).collect();
        for n in uniq {
            *counts.entry(n).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c > threshold)
        .map(|(n, _)| n.to_string())
        .collect()
}

/// Group verbs into two groups, keeping verbs that share a `super_class`
/// together. Verbs without a super class form singleton groups. Returns
/// verb -> "1"/"2".
fn group_verbs(videos: &[AnnotatedVideo], seed: u64) -> Result<BTreeMap<String, String>> {
    let mut verbs_of_super: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for v in videos {
        let key = v.super_class.clone().unwrap_or_else(|| format!("<solo>{}", v.verb_template));
        verbs_of_super.entry(key).or_default().insert(v.verb_template.clone());
    }
    let total_verbs: usize = verbs_of_super.values().map(|s| s.len()).sum();
    if total_verbs < 2 {
        return Err(DataError::Infeasible("need at least two verbs".into()));
    }
    if verbs_of_super.len() < 2 {
        return Err(DataError::Infeasible(
            "all verbs share one super class, so the two verb groups cannot both be non-empty".into(),
        ));
    }

    let mut supers: Vec<(String, Vec<String>)> = verbs_of_super
        .into_iter()
        .map(|(k, verbs)| (k, verbs.into_iter().collect()))
        .collect();
    let mut rng = stream(seed, "split.compositional.verbs", &[]);
    supers.shuffle(&mut rng);

    // Greedy balance: each super class goes to the currently smaller group.
    let mut group_of = BTreeMap::new();
    let (mut n1, mut n2) = (0usize, 0usize);
    for (_, verbs) in supers {
        let g = if n1 <= n2 { "1" } else { "2" };
        if g == "1" {
            n1 += verbs.len();
        } else {
            n2 += verbs.len();
        }
        for v in verbs {
            group_of.insert(v, g.to_string());
        }
    }
    Ok(group_of)
}

/// Split frequent nouns into two groups "A"/"B" by seeded shuffle-and-halve.
fn group_objects(frequent: &[String], seed: u64) -> Result<BTreeMap<String, String>> {
    if frequent.len() < 2 {
        return Err(DataError::Infeasible(format!(
            "need at least two frequent nouns, found {}",
            frequent.len()
        )));
    }
    let mut nouns = frequent.to_vec();
    let mut rng = stream(seed, "split.compositional.objects", &[]);
    nouns.shuffle(&mut rng);
    let half = nouns.len() / 2;
    let mut group_of = BTreeMap::new();
    for (i, n) in nouns.into_iter().enumerate() {
        group_of.insert(n, if i < half { "A".to_string() } else { "B".to_string() });
    }
    Ok(group_of)
}

/// Compositional split: verbs are grouped into 1/2 (respecting super
/// classes) and frequent nouns into A/B. Videos whose frequent nouns all sit
/// in one object group are kept; train takes the (1, A) and (2, B)
/// verb-group x object-group cells, validation takes (1, B) and (2, A), so
/// no verb-noun combination is shared between train and validation.
pub fn make_compositional(
    videos: &[AnnotatedVideo],
    threshold: usize,
    seed: u64,
) -> Result<(SplitSpec, SplitStats)> {
    let verb_group_of = group_verbs(videos, seed)?;
    let frequent = frequent_objects(videos, threshold);
    let object_group_of = group_objects(&frequent, seed)?;

    let mut stats = SplitStats::default();
    let mut train_ids = Vec::new();
    let mut val_ids = Vec::new();
    for v in videos {
        let groups: BTreeSet<&String> =
            v.nouns.iter().filter_map(|n| object_group_of.get(n)).collect();
        if groups.is_empty() {
            stats.excluded_infrequent += 1;
            continue;
        }
        if groups.len() > 1 {
            stats.excluded_mixed += 1;
            continue;
        }
        let ngroup = groups.into_iter().next().unwrap().as_str();
        let vgroup = verb_group_of[&v.verb_template].as_str();
        let is_train = matches!((vgroup, ngroup), ("1", "A") | ("2", "B"));
        if is_train {
            train_ids.push(v.video_id.clone());
        } else {
            val_ids.push(v.video_id.clone());
        }
    }
    train_ids.sort();
    val_ids.sort();
    Ok((
        SplitSpec {
            kind: "compositional".into(),
            seed,
            verb_group_of,
            object_group_of,
            train_ids,
            val_ids,
        },
        stats,
    ))
}

/// Shuffled control split: the same candidate pool as the compositional
/// split for this seed, re-partitioned at random with the same train size,
/// so verb-noun combinations do leak across the boundary.
pub fn make_shuffled(videos: &[AnnotatedVideo], threshold: usize, seed: u64) -> Result<SplitSpec> {
    let (comp, _) = make_compositional(videos, threshold, seed)?;
    let train_size = comp.train_ids.len();
    let mut pool: Vec<String> = comp.train_ids.into_iter().chain(comp.val_ids).collect();
    pool.sort();
    let mut rng = stream(seed, "split.shuffled", &[]);
    pool.shuffle(&mut rng);
    let mut train_ids: Vec<String> = pool[..train_size].to_vec();
    let mut val_ids: Vec<String> = pool[train_size..].to_vec();
    train_ids.sort();
    val_ids.sort();
    Ok(SplitSpec {
        kind: "shuffled".into(),
        seed,
        verb_group_of: BTreeMap::new(),
        object_group_of: BTreeMap::new(),
        train_ids,
        val_ids,
    })
}

/// Few-shot split: classes are halved into base and novel (base gets the
/// extra class on odd counts); 10% of base videos form a base validation
/// slice; each novel class contributes exactly `k` training videos; novel
/// validation excludes videos sharing any noun with the k-shot examples.
pub fn make_fewshot(videos: &[AnnotatedVideo], k: usize, seed: u64) -> Result<FewShotSpec> {
    if k == 0 {
        return Err(DataError::Infeasible("k must be at least 1".into()));
    }
    let mut classes: Vec<String> = {
        let set: BTreeSet<&str> = videos.iter().map(|v| v.verb_template.as_str()).collect();
        set.into_iter().map(|s| s.to_string()).collect()
    };
    if classes.len() < 2 {
        return Err(DataError::Infeasible("need at least two classes".into()));
    }
    let mut rng = stream(seed, "split.fewshot.classes", &[]);
    classes.shuffle(&mut rng);
    let n_base = classes.len().div_ceil(2);
    let mut base_classes: Vec<String> = classes[..n_base].to_vec();
    let mut novel_classes: Vec<String> = classes[n_base..].to_vec();
    base_classes.sort();
    novel_classes.sort();
    let base_set: BTreeSet<&str> = base_classes.iter().map(|s| s.as_str()).collect();
    let novel_set: BTreeSet<&str> = novel_classes.iter().map(|s| s.as_str()).collect();

    // Base videos: hold out roughly 10% (at least one) for validation.
    let mut base_videos: Vec<&AnnotatedVideo> =
        videos.iter().filter(|v| base_set.contains(v.verb_template.as_str())).collect();
    base_videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    if base_videos.len() < 2 {
        return Err(DataError::Infeasible("base classes have fewer than two videos".into()));
    }
    let mut order: Vec<usize> = (0..base_videos.len()).collect();
    let mut rng = stream(seed, "split.fewshot.baseval", &[]);
    order.shuffle(&mut rng);
    let n_val = (base_videos.len() / 10).max(1);
    let val_idx: BTreeSet<usize> = order[..n_val].iter().copied().collect();
    let mut base_train_ids = Vec::new();
    let mut base_val_ids = Vec::new();
    for (i, v) in base_videos.iter().enumerate() {
        if val_idx.contains(&i) {
            base_val_ids.push(v.video_id.clone());
        } else {
            base_train_ids.push(v.video_id.clone());
        }
    }

    // Novel training: exactly k examples per novel class.
    let mut novel_train_ids = Vec::new();
    let mut shot_nouns: BTreeSet<&str> = BTreeSet::new();
    for (ci, class) in novel_classes.iter().enumerate() {
        let mut members: Vec<&AnnotatedVideo> =
            videos.iter().filter(|v| v.verb_template == *class).collect();
        members.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        if members.len() < k + 1 {
            return Err(DataError::Infeasible(format!(
                "novel class {class:?} has {} videos; needs at least k+1 = {} for train and validation",
                members.len(),
                k + 1
            )));
        }
        let mut rng = stream(seed, "split.fewshot.shots", &[ci as u64]);
        members.shuffle(&mut rng);
        for v in &members[..k] {
            novel_train_ids.push(v.video_id.clone());
            shot_nouns.extend(v.nouns.iter().map(|s| s.as_str()));
        }
    }
    let shot_ids: BTreeSet<&str> = novel_train_ids.iter().map(|s| s.as_str()).collect();

    // Novel validation: remaining novel videos whose nouns do not overlap
    // with any k-shot example.
    let mut novel_val_ids: Vec<String> = videos
        .iter()
        .filter(|v| {
            novel_set.contains(v.verb_template.as_str())
                && !shot_ids.contains(v.video_id.as_str())
                && v.nouns.iter().all(|n| !shot_nouns.contains(n.as_str()))
        })
        .map(|v| v.video_id.clone())
        .collect();
    novel_val_ids.sort();
    if novel_val_ids.is_empty() {
        return Err(DataError::Infeasible(
            "novel validation is empty: every remaining novel video shares a noun with the k-shot examples".into(),
        ));
    }
    novel_train_ids.sort();
    base_train_ids.sort();
    base_val_ids.sort();

    Ok(FewShotSpec {
        kind: "fewshot".into(),
        seed,
        k,
        base_classes,
        novel_classes,
        base_train_ids,
        base_val_ids,
        novel_train_ids,
        novel_val_ids,
    })
}

/// One-class split: videos containing `noun` train, everything else
/// validates.
pub fn make_oneclass(videos: &[AnnotatedVideo], noun: &str) -> Result<SplitSpec> {
    let mut train_ids = Vec::new();
    let mut val_ids = Vec::new();
    for v in videos {
        if v.nouns.iter().any(|n| n == noun) {
            train_ids.push(v.video_id.clone());
        } else {
            val_ids.push(v.video_id.clone());
        }
    }
    if train_ids.is_empty() {
        return Err(DataError::Infeasible(format!("no videos contain the noun {noun:?}")));
    }
    if val_ids.is_empty() {
        return Err(DataError::Infeasible(format!(
            "every video contains the noun {noun:?}; validation would be empty"
        )));
    }
    train_ids.sort();
    val_ids.sort();
    Ok(SplitSpec {
        kind: "oneclass".into(),
        seed: 0,
        verb_group_of: BTreeMap::new(),
        object_group_of: BTreeMap::new(),
        train_ids,
        val_ids,
    })
}

/// Seeded pick of up to `n` distinct items, preserving no particular order
/// guarantee beyond determinism.
pub(crate) fn seeded_sample<T: Clone>(items: &[T], n: usize, rng: &mut impl Rng) -> Vec<T> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    idx.truncate(n);
    idx.into_iter().map(|i| items[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox, Category};
    use crate::splits::schema::FrameBoxes;

    fn video(id: &str, verb: &str, sup: Option<&str>, nouns: &[&str]) -> AnnotatedVideo {
        AnnotatedVideo {
            video_id: id.into(),
            verb_template: verb.into(),
            super_class: sup.map(|s| s.to_string()),
            nouns: nouns.iter().map(|s| s.to_string()).collect(),
            width: 320.0,
            height: 240.0,
            frames: vec![FrameBoxes {
                boxes: vec![BBox::new(0.0, 0.0, 10.0, 10.0, Category::Object)],
            }],
        }
    }

    /// Toy corpus: verbs V1, V2 share a super class, V3 stands alone; four
    /// nouns O1..O4, every verb-noun pair present once.
    fn toy_corpus() -> Vec<AnnotatedVideo> {
        let mut out = Vec::new();
        for (vi, verb) in ["V1", "V2", "V3"].iter().enumerate() {
            let sup = if *verb == "V3" { None } else { Some("S12") };
            for (ni, noun) in ["O1", "O2", "O3", "O4"].iter().enumerate() {
                out.push(video(&format!("v{vi}{ni}"), verb, sup, &[noun]));
            }
        }
        out
    }

    #[test]
    fn frequency_threshold_is_strict() {
        // [DERIVED] a noun in exactly `threshold` videos is excluded; one
        // more video includes it.
        let mut vids = Vec::new();
        for i in 0..3 {
            vids.push(video(&format!("a{i}"), "V", None, &["exactly3"]));
        }
        for i in 0..4 {
            vids.push(video(&format!("b{i}"), "V", None, &["four"]));
        }
        let freq = frequent_objects(&vids, 3);
        assert_eq!(freq, vec!["four".to_string()]);
    }

    #[test]
    fn compositional_split_has_expected_structure() {
        let corpus = toy_corpus();
        let (spec, stats) = make_compositional(&corpus, 0, 7).unwrap();

        // Same super class -> same verb group; groups non-empty.
        assert_eq!(spec.verb_group_of["V1"], spec.verb_group_of["V2"]);
        assert_ne!(spec.verb_group_of["V1"], spec.verb_group_of["V3"]);

        // Nouns split 2/2.
        let a = spec.object_group_of.values().filter(|g| *g == "A").count();
        assert_eq!(a, 2);

        // Every video lands somewhere (all nouns frequent at threshold 0),
        // and train/val are disjoint and complete.
        assert_eq!(stats, SplitStats::default());
        assert_eq!(spec.train_ids.len() + spec.val_ids.len(), corpus.len());
        let train: BTreeSet<_> = spec.train_ids.iter().collect();
        let val: BTreeSet<_> = spec.val_ids.iter().collect();
        assert!(train.is_disjoint(&val));

        // No verb-noun combination crosses the boundary.
        let combo = |id: &String| {
            let v = corpus.iter().find(|v| &v.video_id == id).unwrap();
            (v.verb_template.clone(), v.nouns[0].clone())
        };
        let train_combos: BTreeSet<_> = spec.train_ids.iter().map(combo).collect();
        let val_combos: BTreeSet<_> = spec.val_ids.iter().map(combo).collect();
        assert!(train_combos.is_disjoint(&val_combos));
    }

    #[test]
    fn compositional_assignment_enumerated_for_fixed_seed() {
        // [DERIVED] with threshold 0 and seed 7, recompute the expected
        // partition by walking the same grouping tables the generator
        // produced; every (verb group, object group) cell must route to the
        // documented side.
        let corpus = toy_corpus();
        let (spec, _) = make_compositional(&corpus, 0, 7).unwrap();
        for v in &corpus {
            let vg = spec.verb_group_of[&v.verb_template].as_str();
            let og = spec.object_group_of[&v.nouns[0]].as_str();
            let expect_train = matches!((vg, og), ("1", "A") | ("2", "B"));
            assert_eq!(
                spec.train_ids.contains(&v.video_id),
                expect_train,
                "video {} in cell ({vg},{og})",
                v.video_id
            );
            assert_eq!(spec.val_ids.contains(&v.video_id), !expect_train);
        }
    }

    #[test]
    fn all_verbs_in_one_super_class_is_infeasible() {
        let vids = vec![
            video("a", "V1", Some("S"), &["O1"]),
            video("b", "V2", Some("S"), &["O2"]),
        ];
        let err = make_compositional(&vids, 0, 1).unwrap_err();
        assert!(err.to_string().contains("super class"), "{err}");
    }

    #[test]
    fn videos_with_mixed_group_nouns_are_excluded() {
        let mut corpus = toy_corpus();
        corpus.push(video("mix", "V1", Some("S12"), &["O1", "O2", "O3", "O4"]));
        let (spec, stats) = make_compositional(&corpus, 0, 7).unwrap();
        // A video containing all four nouns spans both groups.
        assert_eq!(stats.excluded_mixed, 1);
        assert!(!spec.train_ids.contains(&"mix".to_string()));
        assert!(!spec.val_ids.contains(&"mix".to_string()));
    }

    #[test]
    fn videos_without_frequent_nouns_are_excluded() {
        let mut corpus = toy_corpus();
        corpus.push(video("rare", "V1", Some("S12"), &["unicorn"]));
        // threshold 0: nouns appearing in > 0 videos are frequent, which
        // includes "unicorn", so raise the bar to exclude it.
        let (_, stats) = make_compositional(&corpus, 1, 7).unwrap();
        assert_eq!(stats.excluded_infrequent, 1);
    }

    #[test]
    fn same_seed_reproduces_split() {
        let corpus = toy_corpus();
        let (a, _) = make_compositional(&corpus, 0, 3).unwrap();
        let (b, _) = make_compositional(&corpus, 0, 3).unwrap();
        assert_eq!(a.train_ids, b.train_ids);
        assert_eq!(a.val_ids, b.val_ids);
        assert_eq!(a.verb_group_of, b.verb_group_of);
    }

    #[test]
    fn shuffled_split_keeps_pool_and_sizes() {
        let corpus = toy_corpus();
        let (comp, _) = make_compositional(&corpus, 0, 7).unwrap();
        let shuf = make_shuffled(&corpus, 0, 7).unwrap();
        assert_eq!(shuf.train_ids.len(), comp.train_ids.len());
        let comp_pool: BTreeSet<_> =
            comp.train_ids.iter().chain(&comp.val_ids).cloned().collect();
        let shuf_pool: BTreeSet<_> =
            shuf.train_ids.iter().chain(&shuf.val_ids).cloned().collect();
        assert_eq!(comp_pool, shuf_pool);
        let train: BTreeSet<_> = shuf.train_ids.iter().collect();
        let val: BTreeSet<_> = shuf.val_ids.iter().collect();
        assert!(train.is_disjoint(&val));
        assert_ne!(shuf.train_ids, comp.train_ids, "shuffled control should differ");
    }

    fn fewshot_corpus() -> Vec<AnnotatedVideo> {
        // Four classes x six videos; each video uses one of three nouns per
        // class "side" so that noun exclusion keeps some validation videos.
        let mut out = Vec::new();
        for (vi, verb) in ["W1", "W2", "W3", "W4"].iter().enumerate() {
            for i in 0..6 {
                let noun = format!("n{}", i % 3);
                out.push(video(&format!("f{vi}_{i}"), verb, None, &[&noun]));
            }
        }
        out
    }

    #[test]
    fn fewshot_split_contract() {
        let corpus = fewshot_corpus();
        let spec = make_fewshot(&corpus, 2, 5).unwrap();
        assert_eq!(spec.base_classes.len(), 2);
        assert_eq!(spec.novel_classes.len(), 2);
        // No class overlap.
        let base: BTreeSet<_> = spec.base_classes.iter().collect();
        let novel: BTreeSet<_> = spec.novel_classes.iter().collect();
        assert!(base.is_disjoint(&novel));
        // Exactly k per novel class.
        for class in &spec.novel_classes {
            let count = spec
                .novel_train_ids
                .iter()
                .filter(|id| corpus.iter().any(|v| &v.video_id == *id && &v.verb_template == class))
                .count();
            assert_eq!(count, 2, "class {class} must contribute exactly k examples");
        }
        // Novel val excludes k-shot nouns.
        let shot_nouns: BTreeSet<_> = spec
            .novel_train_ids
            .iter()
            .flat_map(|id| corpus.iter().find(|v| &v.video_id == id).unwrap().nouns.clone())
            .collect();
        for id in &spec.novel_val_ids {
            let v = corpus.iter().find(|v| &v.video_id == id).unwrap();
            assert!(v.nouns.iter().all(|n| !shot_nouns.contains(n)));
        }
        // All four id lists pairwise disjoint.
        let lists = [
            &spec.base_train_ids,
            &spec.base_val_ids,
            &spec.novel_train_ids,
            &spec.novel_val_ids,
        ];
        for i in 0..lists.len() {
            for j in (i + 1)..lists.len() {
                let a: BTreeSet<_> = lists[i].iter().collect();
                let b: BTreeSet<_> = lists[j].iter().collect();
                assert!(a.is_disjoint(&b), "lists {i} and {j} overlap");
            }
        }
    }

    #[test]
    fn fewshot_with_k_too_large_names_the_class() {
        let corpus = fewshot_corpus();
        let err = make_fewshot(&corpus, 6, 5).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('W'), "error should name the class: {msg}");
    }

    #[test]
    fn oneclass_split_partitions_by_noun() {
        let vids = vec![
            video("a", "V", None, &["box"]),
            video("b", "V", None, &["box", "lid"]),
            video("c", "V", None, &["cup"]),
        ];
        let spec = make_oneclass(&vids, "box").unwrap();
        assert_eq!(spec.train_ids, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(spec.val_ids, vec!["c".to_string()]);
    }

    #[test]
    fn oneclass_errors() {
        let vids = vec![video("a", "V", None, &["box"])];
        assert!(make_oneclass(&vids, "unknown").is_err());
        assert!(make_oneclass(&vids, "box").is_err(), "validation would be empty");
    }
}
