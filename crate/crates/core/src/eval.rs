//! Retrieval benchmark: precision and recall at K, rank-window average
//! precision per query and per class, nearest-neighbour confusion matrix,
//! and timing.
//!
//! Every indexed image is used as a query against the whole index. Ranks
//! are 1-based positions in the list sorted by ascending distance, ties
//! broken by ascending id.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError};
use crate::index::FeatureIndex;
use crate::metric::Metric;
use crate::pipeline::Fingerprint;
use crate::retrieval::{rank_all, Neighbor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Retrieved-set size for precision and recall.
    pub k: usize,
    pub metric: Metric,
    /// Rank window of the per-query average precision.
    pub rank_window: usize,
    /// Whether the query counts as one of its own results.
    pub include_self: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 20,
            metric: Metric::L2,
            rank_window: 100,
            include_self: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.k == 0 {
            return Err(EvalError::Config("k must be at least 1".into()));
        }
        if self.rank_window == 0 {
            return Err(EvalError::Config("rank_window must be at least 1".into()));
        }
        Ok(())
    }
}

fn relevant_in<'a>(
    ranked: impl Iterator<Item = &'a Neighbor>,
    query_label: &str,
    labels: &HashMap<u32, String>,
) -> usize {
    ranked
        .filter(|n| labels.get(&n.id).map(String::as_str) == Some(query_label))
        .count()
}

/// `(P, R)` at `k`: relevant items among the first `k`, divided by `k` and
/// by `total_relevant` respectively.
pub fn precision_recall_at_k(
    ranked: &[Neighbor],
    query_label: &str,
    labels: &HashMap<u32, String>,
    k: usize,
    total_relevant: usize,
) -> (f64, f64) {
    let hits = relevant_in(ranked.iter().take(k), query_label, labels) as f64;
    let recall = if total_relevant == 0 {
        0.0
    } else {
        hits / total_relevant as f64
    };
    (hits / k as f64, recall)
}

/// Number of the first `window` ranks holding the query's class.
pub fn rank_window_hits(
    ranked: &[Neighbor],
    query_label: &str,
    labels: &HashMap<u32, String>,
    window: usize,
) -> usize {
    relevant_in(ranked.iter().take(window), query_label, labels)
}

/// Fraction of the first `window` ranks holding the query's class,
/// normalized by the window (not by the number of items seen).
pub fn rank_window_precision(
    ranked: &[Neighbor],
    query_label: &str,
    labels: &HashMap<u32, String>,
    window: usize,
) -> f64 {
    rank_window_hits(ranked, query_label, labels, window) as f64 / window as f64
}

/// Mean over one class of `hits / window`, taken as one division of the
/// summed counts so the result is the correctly rounded ratio.
pub fn class_avg_precision(hits: &[usize], window: usize, class: &str) -> Result<f64, EvalError> {
    if hits.is_empty() {
        return Err(EvalError::EmptyClass(class.to_string()));
    }
    if window == 0 {
        return Err(EvalError::Config("window must be at least 1".into()));
    }
    let total: usize = hits.iter().sum();
    Ok(total as f64 / (hits.len() * window) as f64)
}

/// Orders labels numerically when both parse as integers, else lexically.
pub fn label_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

pub fn label_order(index: &FeatureIndex) -> Vec<String> {
    let mut labels: Vec<String> = index.class_counts().into_keys().collect();
    labels.sort_by(|a, b| label_cmp(a, b));
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[t][p]`: queries of class `t` whose nearest other image is of class `p`.
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized percentages of `counts`.
    pub percent: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    fn from_predictions(labels: Vec<String>, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let n = labels.len();
        let mut counts = vec![vec![0usize; n]; n];
        for (truth, pred) in pairs {
            counts[truth][pred] += 1;
        }
        let percent = counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| {
                        if total == 0 {
                            0.0
                        } else {
                            100.0 * c as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect();
        ConfusionMatrix {
            labels,
            counts,
            percent,
        }
    }

    /// Mean of the diagonal percentages.
    pub fn retrieval_rate(&self) -> f64 {
        let n = self.labels.len();
        (0..n).map(|i| self.percent[i][i]).sum::<f64>() / n as f64
    }
}

/// Label of the nearest neighbour other than the query itself.
fn nearest_other(ranked: &[Neighbor], query: u32) -> Option<u32> {
    ranked.iter().find(|n| n.id != query).map(|n| n.id)
}

/// Minimum-distance classification of every indexed image against the
/// rest of the index (the query itself is excluded).
pub fn confusion_matrix(
    index: &FeatureIndex,
    metric: Metric,
) -> Result<ConfusionMatrix, EvalError> {
    let labels = label_order(index);
    if labels.len() < 2 {
        return Err(EvalError::TooFewClasses(labels.len()));
    }
    let slot: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let by_id: HashMap<u32, &str> = index
        .entries()
        .iter()
        .map(|e| (e.id, e.label.as_str()))
        .collect();
    let pairs: Vec<(usize, usize)> = index
        .entries()
        .par_iter()
        .filter_map(|e| {
            let ranked = rank_all(&e.vector, index, metric).expect("entries share the header");
            nearest_other(&ranked, e.id).map(|id| (slot[e.label.as_str()], slot[by_id[&id]]))
        })
        .collect();
    Ok(ConfusionMatrix::from_predictions(
        labels.clone(),
        pairs.into_iter(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub id: u32,
    pub label: String,
    pub precision_at_k: f64,
    pub recall_at_k: f64,
    pub avg_precision: f64,
    /// Relevant items among the first `k`.
    pub hits_at_k: usize,
    /// Relevant items among the first `rank_window`.
    pub window_hits: usize,
    /// Label of the nearest other image, if any exists.
    pub predicted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    pub size: usize,
    pub precision_at_k: f64,
    pub recall_at_k: f64,
    /// Mean rank-window precision of the class's queries.
    pub avg_precision: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub seconds_per_100_queries: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: Fingerprint,
    pub config: EvalConfig,
    pub queries: usize,
    pub classes: Vec<ClassReport>,
    /// Means of the per-class columns.
    pub precision_at_k: f64,
    pub recall_at_k: f64,
    pub avg_precision: f64,
    /// Mean diagonal of the confusion matrix, in percent.
    pub retrieval_rate: Option<f64>,
    pub confusion: Option<ConfusionMatrix>,
    pub per_query: Vec<QueryResult>,
    pub timing: Timing,
}

impl EvalReport {
    /// JSON value with the timing fields removed, for reproducibility checks.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        v
    }

    pub fn class(&self, label: &str) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Per-class precision / recall / average precision table.
    pub fn render_class_table(&self) -> String {
        let k = self.config.k;
        let w = self
            .classes
            .iter()
            .map(|c| c.label.len())
            .max()
            .unwrap_or(5)
            .max(7);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w$}  {:>5}  {:>8}  {:>8}  {:>8}",
            "Class",
            "Size",
            format!("P@{k}"),
            format!("R@{k}"),
            "AvgP"
        );
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<w$}  {:>5}  {:>8.4}  {:>8.4}  {:>8.4}",
                c.label, c.size, c.precision_at_k, c.recall_at_k, c.avg_precision
            );
        }
        let _ = writeln!(
            out,
            "{:<w$}  {:>5}  {:>8.4}  {:>8.4}  {:>8.4}",
            "Average", self.queries, self.precision_at_k, self.recall_at_k, self.avg_precision
        );
        out
    }

    /// Confusion matrix with integer percentages.
    pub fn render_confusion(&self) -> String {
        let Some(cm) = &self.confusion else {
            return "confusion matrix needs at least two classes\n".into();
        };
        let w = cm.labels.iter().map(String::len).max().unwrap_or(1).max(7);
        let mut out = String::new();
        let _ = write!(out, "{:<w$}", "Class \\ %");
        for l in &cm.labels {
            let _ = write!(out, "  {:>w$}", l);
        }
        out.push('\n');
        for (t, row) in cm.percent.iter().enumerate() {
            let _ = write!(out, "{:<w$}", cm.labels[t]);
            for p in row {
                let _ = write!(out, "  {:>w$}", p.round() as i64);
            }
            out.push('\n');
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "fingerprint {}\nmetric {}  k {}  rank window {}  include self {}\n\n",
            self.fingerprint,
            self.config.metric,
            self.config.k,
            self.config.rank_window,
            self.config.include_self
        );
        out.push_str(&self.render_class_table());
        out.push('\n');
        out.push_str(&self.render_confusion());
        if let Some(rate) = self.retrieval_rate {
            let _ = writeln!(out, "\nretrieval rate {:.2}%", rate);
        }
        let _ = writeln!(
            out,
            "time {:.3} s total, {:.3} s / 100 queries",
            self.timing.total_seconds, self.timing.seconds_per_100_queries
        );
        for c in &self.classes {
            if let Some(note) = &c.note {
                let _ = writeln!(out, "note [{}]: {}", c.label, note);
            }
        }
        out
    }

    /// One line per query for plotting.
    pub fn per_query_csv(&self) -> String {
        let mut out = String::from("id,label,precision_at_k,recall_at_k,avg_precision,predicted\n");
        for q in &self.per_query {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                q.id,
                csv_field(&q.label),
                q.precision_at_k,
                q.recall_at_k,
                q.avg_precision,
                q.predicted.as_deref().map(csv_field).unwrap_or_default()
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Uses every indexed image as a query and assembles the report.
pub fn run_benchmark(index: &FeatureIndex, config: &EvalConfig) -> Result<EvalReport, Error> {
    config.validate()?;
    if index.is_empty() {
        return Err(EvalError::EmptyIndex.into());
    }
    let labels = label_order(index);
    let counts = index.class_counts();
    let by_id: HashMap<u32, String> = index
        .entries()
        .iter()
        .map(|e| (e.id, e.label.clone()))
        .collect();

    let start = Instant::now();
    let per_query: Vec<QueryResult> = index
        .entries()
        .par_iter()
        .map(|e| {
            let mut ranked = rank_all(&e.vector, index, config.metric)?;
            let predicted = nearest_other(&ranked, e.id).map(|id| by_id[&id].clone());
            let mut relevant = counts[&e.label];
            if !config.include_self {
                ranked.retain(|n| n.id != e.id);
                relevant -= 1;
            }
            let (p, r) = precision_recall_at_k(&ranked, &e.label, &by_id, config.k, relevant);
            let window_hits = rank_window_hits(&ranked, &e.label, &by_id, config.rank_window);
            Ok(QueryResult {
                id: e.id,
                label: e.label.clone(),
                precision_at_k: p,
                recall_at_k: r,
                avg_precision: window_hits as f64 / config.rank_window as f64,
                hits_at_k: relevant_in(ranked.iter().take(config.k), &e.label, &by_id),
                window_hits,
                predicted,
            })
        })
        .collect::<Result<_, crate::error::CompareError>>()?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut classes = Vec::with_capacity(labels.len());
    for label in &labels {
        let rows: Vec<&QueryResult> = per_query.iter().filter(|q| &q.label == label).collect();
        let size = rows.len();
        let relevant = counts[label] - usize::from(!config.include_self);
        let at_k: Vec<usize> = rows.iter().map(|q| q.hits_at_k).collect();
        let window: Vec<usize> = rows.iter().map(|q| q.window_hits).collect();
        let mut notes = Vec::new();
        if size == 1 {
            notes.push(
                "single member: no same-class neighbour exists for classification".to_string(),
            );
        }
        if size != config.rank_window {
            notes.push(format!(
                "class size {size} differs from rank window {}; average precision is bounded by {:.4}",
                config.rank_window,
                (size as f64 / config.rank_window as f64).min(1.0)
            ));
        }
        classes.push(ClassReport {
            label: label.clone(),
            size,
            precision_at_k: class_avg_precision(&at_k, config.k, label)?,
            recall_at_k: if relevant == 0 {
                0.0
            } else {
                class_avg_precision(&at_k, relevant, label)?
            },
            avg_precision: class_avg_precision(&window, config.rank_window, label)?,
            note: (!notes.is_empty()).then(|| notes.join("; ")),
        });
    }

    let confusion = (labels.len() >= 2).then(|| {
        let slot: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        ConfusionMatrix::from_predictions(
            labels.clone(),
            per_query.iter().filter_map(|q| {
                q.predicted
                    .as_ref()
                    .map(|p| (slot[q.label.as_str()], slot[p.as_str()]))
            }),
        )
    });

    let mean =
        |f: fn(&ClassReport) -> f64| classes.iter().map(f).sum::<f64>() / classes.len() as f64;
    Ok(EvalReport {
        fingerprint: index.fingerprint(),
        config: *config,
        queries: per_query.len(),
        precision_at_k: mean(|c| c.precision_at_k),
        recall_at_k: mean(|c| c.recall_at_k),
        avg_precision: mean(|c| c.avg_precision),
        retrieval_rate: confusion.as_ref().map(ConfusionMatrix::retrieval_rate),
        confusion,
        classes,
        per_query,
        timing: Timing {
            total_seconds: elapsed,
            seconds_per_100_queries: elapsed * 100.0 / index.len() as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranked(ids: &[u32]) -> Vec<Neighbor> {
        ids.iter()
            .enumerate()
            .map(|(i, &id)| Neighbor {
                id,
                distance: i as f64,
            })
            .collect()
    }

    fn labels(pairs: &[(u32, &str)]) -> HashMap<u32, String> {
        pairs.iter().map(|&(i, l)| (i, l.to_string())).collect()
    }

    #[test]
    fn precision_fifteen_of_twenty() {
        let ids: Vec<u32> = (0..20).collect();
        let lab: HashMap<u32, String> = (0..20)
            .map(|i| (i, if i < 15 { "a" } else { "b" }.to_string()))
            .collect();
        let (p, r) = precision_recall_at_k(&ranked(&ids), "a", &lab, 20, 100);
        assert_eq!(p, 0.75);
        assert_eq!(r, 0.15);
    }

    #[test]
    fn perfect_and_empty_retrieval() {
        let lab = labels(&[(0, "a"), (1, "a"), (2, "b"), (3, "b")]);
        assert_eq!(
            precision_recall_at_k(&ranked(&[0, 1, 2, 3]), "a", &lab, 2, 2),
            (1.0, 1.0)
        );
        assert_eq!(
            precision_recall_at_k(&ranked(&[2, 3, 0, 1]), "a", &lab, 2, 2),
            (0.0, 0.0)
        );
    }

    #[test]
    fn window_precision() {
        let lab: HashMap<u32, String> = (0..200)
            .map(|i| (i, if i % 2 == 0 { "a" } else { "b" }.to_string()))
            .collect();
        let ids: Vec<u32> = (0..200).collect();
        assert_eq!(rank_window_precision(&ranked(&ids), "a", &lab, 100), 0.5);
        let evens: Vec<u32> = (0..100).map(|i| 2 * i).collect();
        assert_eq!(rank_window_precision(&ranked(&evens), "a", &lab, 100), 1.0);
    }

    #[test]
    fn class_means() {
        assert_eq!(class_avg_precision(&[98; 100], 100, "4").unwrap(), 0.98);
        assert_eq!(class_avg_precision(&[2, 1, 2, 1], 2, "x").unwrap(), 0.75);
        assert_eq!(
            class_avg_precision(&[], 2, "x"),
            Err(EvalError::EmptyClass("x".into()))
        );
    }

    #[test]
    fn natural_label_order() {
        let mut v = vec!["10", "9", "b", "a", "2"];
        v.sort_by(|a, b| label_cmp(a, b));
        assert_eq!(v, vec!["2", "9", "10", "a", "b"]);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
