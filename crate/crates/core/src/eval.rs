//! 3D detection output parsing and threshold-based precision / recall / F1.
//!
//! Model answers are JSON lists of `{"label": ..., "bbox_3d": [9 numbers]}`,
//! usually wrapped in a fenced json block. Scoring is class-wise greedy
//! matching on IoU, reported per class and aggregated both micro and macro.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::boxes::{iou3d_with, BoxError, IouOptions, OrientedBox3};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum EvalError {
    #[error("no parsable detection JSON found{}", fmt_reasons(.0))]
    NoParsableJson(Vec<String>),
    #[error("IoU threshold must be in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Box(#[from] BoxError),
}

fn fmt_reasons(r: &[String]) -> String {
    if r.is_empty() {
        String::new()
    } else {
        format!(": {}", r.join("; "))
    }
}

/// A labelled oriented box. Serialized as `{"label": .., "bbox_3d": [..9]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub bbox: OrientedBox3,
}

impl Detection {
    pub fn new(label: &str, bbox: OrientedBox3) -> Self {
        Self {
            label: normalize_label(label),
            bbox,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    label: String,
    bbox_3d: [f64; 9],
}

impl Serialize for Detection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DetectionRecord {
            label: self.label.clone(),
            bbox_3d: self.bbox.to_params(),
        }
        .serialize(s)
    }
}

pub fn normalize_label(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedDetections {
    pub detections: Vec<Detection>,
    pub warnings: Vec<String>,
}

/// Body of the first fenced code block, if any.
fn fenced_body(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // skip the info string (e.g. "json") up to the end of the line
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(&body[..end])
}

/// Top-level `{...}` spans, string-aware.
fn object_spans(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_str = false;
    let mut escaped = false;
    for (i, ch) in text.char_indices() {
        if in_str {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    out
}

fn detection_from_value(v: &Value) -> Result<Detection, String> {
    let obj = v.as_object().ok_or("entry is not an object")?;
    let label = obj
        .get("label")
        .and_then(Value::as_str)
        .map(normalize_label)
        .ok_or("missing string \"label\"")?;
    if label.is_empty() {
        return Err("empty label".into());
    }
    let arr = obj
        .get("bbox_3d")
        .or_else(|| obj.get("box_3d"))
        .ok_or("missing \"bbox_3d\" / \"box_3d\"")?
        .as_array()
        .ok_or("box is not an array")?;
    if arr.len() != 9 {
        return Err(format!("box has {} values, expected 9", arr.len()));
    }
    let mut p = [0.0; 9];
    for (slot, x) in p.iter_mut().zip(arr) {
        *slot = x.as_f64().ok_or("box value is not a number")?;
    }
    let bbox = OrientedBox3::from_params(p).map_err(|e| e.to_string())?;
    Ok(Detection { label, bbox })
}

/// Parses raw model output. Accepts a fenced json block or bare JSON, a list or
/// a single object, and either `bbox_3d` or `box_3d`. Malformed entries are
/// dropped with a warning; the list itself may be broken (e.g. an ellipsis
/// line), in which case every well-formed object is still recovered.
pub fn parse_detections(text: &str) -> Result<ParsedDetections, EvalError> {
    let cleaned = text.replace(['\u{201c}', '\u{201d}'], "\"");
    let body = fenced_body(&cleaned).unwrap_or(&cleaned).trim();

    let mut warnings = Vec::new();
    let (candidates, whole_parsed): (Vec<Result<Value, String>>, bool) = match serde_json::from_str::<Value>(body) {
        Ok(Value::Array(items)) => (items.into_iter().map(Ok).collect(), true),
        Ok(v @ Value::Object(_)) => (vec![Ok(v)], true),
        Ok(other) => {
            return Err(EvalError::NoParsableJson(vec![format!(
                "top-level JSON is neither a list nor an object: {other}"
            )]))
        }
        Err(e) => {
            warnings.push(format!("output is not valid JSON ({e}); recovering individual entries"));
            let spans = object_spans(body);
            let parsed = spans
                .iter()
                .map(|s| serde_json::from_str::<Value>(s).map_err(|e| e.to_string()))
                .collect();
            (parsed, false)
        }
    };

    let mut detections = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        match c.as_ref().map_err(Clone::clone).and_then(detection_from_value) {
            Ok(d) => detections.push(d),
            Err(e) => warnings.push(format!("entry {i} skipped: {e}")),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let rejected_any = candidates.len() > detections.len();
    if detections.is_empty() && (!whole_parsed || rejected_any) {
        return Err(EvalError::NoParsableJson(warnings));
    }
    Ok(ParsedDetections { detections, warnings })
}

/// Raw counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub matched: usize,
    pub n_pred: usize,
    pub n_truth: usize,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.matched += o.matched;
        self.n_pred += o.n_pred;
        self.n_truth += o.n_truth;
    }
}

/// Percent-valued metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `2PR / (P + R)`, zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl Metrics {
    pub fn from_counts(c: &Counts) -> Self {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = pct(c.matched, c.n_pred);
        let recall = pct(c.matched, c.n_truth);
        Self {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    pub label: String,
    pub pred_index: usize,
    pub truth_index: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub per_class: BTreeMap<String, ClassReport>,
    /// Pooled counts over all classes.
    pub micro: ClassReport,
    /// Unweighted mean over classes seen in predictions or ground truth.
    #[serde(rename = "macro")]
    pub macro_avg: Metrics,
    pub matches: Vec<MatchedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou: IouOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    pub scenes: usize,
    pub thresholds: Vec<ThresholdReport>,
}

/// Per-threshold tallies for one scene; merging is plain addition.
#[derive(Debug, Clone, Default)]
struct Tally {
    counts: BTreeMap<String, Counts>,
    matches: Vec<MatchedPair>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        for (k, c) in other.counts {
            self.counts.entry(k).or_default().add(&c);
        }
        self.matches.extend(other.matches);
    }

    fn into_report(self, threshold: f64) -> ThresholdReport {
        let mut total = Counts::default();
        let mut per_class = BTreeMap::new();
        for (label, c) in &self.counts {
            total.add(c);
            per_class.insert(
                label.clone(),
                ClassReport {
                    counts: *c,
                    metrics: Metrics::from_counts(c),
                },
            );
        }
        let n = per_class.len().max(1) as f64;
        let (p, r, f) = per_class.values().fold((0.0, 0.0, 0.0), |acc, c| {
            (acc.0 + c.metrics.precision, acc.1 + c.metrics.recall, acc.2 + c.metrics.f1)
        });
        ThresholdReport {
            threshold,
            per_class,
            micro: ClassReport {
                counts: total,
                metrics: Metrics::from_counts(&total),
            },
            macro_avg: Metrics {
                precision: p / n,
                recall: r / n,
                f1: f / n,
            },
            matches: self.matches,
        }
    }
}

fn check_threshold(t: f64) -> Result<(), EvalError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(EvalError::BadThreshold(t))
    }
}

fn keep(label: &str, classes: Option<&BTreeSet<String>>) -> bool {
    classes.is_none_or(|c| c.contains(label))
}

/// Greedy matching for one scene at one threshold.
fn tally_scene(
    scene: Option<&str>,
    preds: &[Detection],
    truths: &[Detection],
    threshold: f64,
    classes: Option<&BTreeSet<String>>,
    opts: IouOptions,
) -> Result<Tally, EvalError> {
    let mut tally = Tally::default();
    for d in preds.iter().filter(|d| keep(&d.label, classes)) {
        tally.counts.entry(d.label.clone()).or_default().n_pred += 1;
    }
    for d in truths.iter().filter(|d| keep(&d.label, classes)) {
        tally.counts.entry(d.label.clone()).or_default().n_truth += 1;
    }

    let mut candidates = Vec::new();
    for (pi, p) in preds.iter().enumerate().filter(|(_, d)| keep(&d.label, classes)) {
        for (ti, t) in truths.iter().enumerate().filter(|(_, d)| d.label == p.label) {
            let iou = iou3d_with(&p.bbox, &t.bbox, opts)?;
            if iou >= threshold {
                candidates.push((iou, pi, ti));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_used = vec![false; preds.len()];
    let mut truth_used = vec![false; truths.len()];
    for (iou, pi, ti) in candidates {
        if pred_used[pi] || truth_used[ti] {
            continue;
        }
        pred_used[pi] = true;
        truth_used[ti] = true;
        let label = preds[pi].label.clone();
        tally.counts.entry(label.clone()).or_default().matched += 1;
        tally.matches.push(MatchedPair {
            scene: scene.map(str::to_string),
            label,
            pred_index: pi,
            truth_index: ti,
            iou,
        });
    }
    tally.matches.sort_by_key(|m| m.pred_index);
    Ok(tally)
}

/// Scores a single scene at one IoU threshold.
pub fn match_and_score(
    preds: &[Detection],
    truths: &[Detection],
    threshold: f64,
    classes: Option<&BTreeSet<String>>,
    opts: IouOptions,
) -> Result<EvalReport, EvalError> {
    let scene = Scene {
        id: String::new(),
        preds: preds.to_vec(),
        truths: truths.to_vec(),
    };
    let mut report = evaluate_scenes(std::slice::from_ref(&scene), &[threshold], classes, opts)?;
    for t in &mut report.thresholds {
        for m in &mut t.matches {
            m.scene = None;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub preds: Vec<Detection>,
    pub truths: Vec<Detection>,
}

/// Scores many scenes. Boxes only match within their own scene; scenes are
/// scored in parallel and merged in scene-id order.
pub fn evaluate_scenes(
    scenes: &[Scene],
    thresholds: &[f64],
    classes: Option<&BTreeSet<String>>,
    opts: IouOptions,
) -> Result<EvalReport, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::BadThreshold(f64::NAN));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let mut order: Vec<&Scene> = scenes.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let per_scene: Vec<Vec<Tally>> = order
        .par_iter()
        .map(|s| {
            thresholds
                .iter()
                .map(|&t| tally_scene(Some(&s.id), &s.preds, &s.truths, t, classes, opts))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut merged: Vec<Tally> = vec![Tally::default(); thresholds.len()];
    for scene_tallies in per_scene {
        for (acc, t) in merged.iter_mut().zip(scene_tallies) {
            acc.merge(t);
        }
    }
    Ok(EvalReport {
        iou: opts,
        classes: classes.map(|c| c.iter().cloned().collect()),
        scenes: scenes.len(),
        thresholds: merged
            .into_iter()
            .zip(thresholds)
            .map(|(t, &th)| t.into_report(th))
            .collect(),
    })
}

impl EvalReport {
    /// Per-class rows plus `__micro__` and `__macro__` aggregates.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["threshold", "class", "n_pred", "n_truth", "matched", "precision", "recall", "f1"])?;
        for t in &self.thresholds {
            let th = t.threshold.to_string();
            let rows = t
                .per_class
                .iter()
                .map(|(k, v)| (k.as_str(), Some(v.counts), v.metrics))
                .chain([("__micro__", Some(t.micro.counts), t.micro.metrics), ("__macro__", None, t.macro_avg)]);
            for (label, c, m) in rows {
                let num = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    th.clone(),
                    label.to_string(),
                    num(c.map(|c| c.n_pred)),
                    num(c.map(|c| c.n_truth)),
                    num(c.map(|c| c.matched)),
                    format!("{:.4}", m.precision),
                    format!("{:.4}", m.recall),
                    format!("{:.4}", m.f1),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}
