use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dbcr::eval::{label_cmp, run_benchmark, EvalConfig, EvalReport};
use dbcr::image::ImageFormat;
use dbcr::index::{FeatureIndex, IndexEntry, FORMAT_VERSION};
use dbcr::metric::Metric;
use dbcr::pipeline::{DescriptorConfig, FeatureVector};
use dbcr::retrieval::{ingest, knn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{unix_now, RunConfig, RunManifest};
use crate::{
    CliResult, DescribeArgs, EvaluateArgs, ExitKind, Failure, IndexArgs, InfoArgs, QueryArgs,
};

fn describe_file(path: &Path, config: &DescriptorConfig) -> Result<FeatureVector, dbcr::Error> {
    let bytes = fs::read(path)?;
    let hint = path
        .extension()
        .and_then(|e| e.to_str())
        .and_then(ImageFormat::from_extension);
    let img = dbcr::decode_image(&bytes, hint)?;
    dbcr::describe(&img, config)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents)
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

fn load_index(path: &Path) -> CliResult<FeatureIndex> {
    FeatureIndex::load(path)
        .map_err(|e| Failure::data(format!("cannot load index {}: {e}", path.display())))
}

fn class_counts_text(index: &FeatureIndex) -> String {
    let mut counts: Vec<(String, usize)> = index.class_counts().into_iter().collect();
    counts.sort_by(|a, b| label_cmp(&a.0, &b.0));
    let w = counts
        .iter()
        .map(|(l, _)| l.len())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut out = String::new();
    for (label, n) in counts {
        let _ = writeln!(out, "  {label:<w$}  {n:>6}");
    }
    out
}

pub fn index(args: &IndexArgs) -> CliResult {
    let started = unix_now();
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let descriptor = cfg.descriptor;
    let files = ingest(&args.dataset, args.layout).map_err(dbcr::Error::from)?;
    if files.is_empty() {
        return Err(Failure::data(format!(
            "no images found under {}; no index written",
            args.dataset.display()
        )));
    }

    let described: Vec<_> = files
        .par_iter()
        .map(|f| describe_file(&f.path, &descriptor))
        .collect();

    let mut index = FeatureIndex::new(
        descriptor.fingerprint(),
        descriptor.feature_dim().map_err(dbcr::Error::from)?,
    );
    let mut failures = 0usize;
    for (id, (file, result)) in files.iter().zip(described).enumerate() {
        match result {
            Ok(vector) => {
                let rel = file.path.strip_prefix(&args.dataset).unwrap_or(&file.path);
                let path = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                index
                    .push(IndexEntry {
                        id: id as u32,
                        path,
                        label: file.label.clone(),
                        vector,
                    })
                    .map_err(dbcr::Error::from)?;
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", file.path.display());
            }
        }
    }
    if failures > 0 && !args.skip_errors {
        return Err(Failure::data(format!(
            "{failures} of {} files failed; no index written (use --skip-errors to index the rest)",
            files.len()
        )));
    }
    if index.is_empty() {
        return Err(Failure::data("every file failed; no index written"));
    }

    index
        .save(&args.out)
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", args.out.display())))?;
    let mut manifest = RunManifest::new(Some(descriptor), Some(cfg.eval), started);
    manifest.outputs.push(args.out.display().to_string());
    manifest.write(&args.out)?;

    println!(
        "indexed {} images into {} ({} skipped)",
        index.len(),
        args.out.display(),
        failures
    );
    println!("fingerprint {}", index.fingerprint());
    print!("{}", class_counts_text(&index));
    Ok(())
}

#[derive(Serialize)]
struct QueryRow<'a> {
    rank: usize,
    id: u32,
    label: &'a str,
    path: &'a str,
    distance: f64,
}

#[derive(Serialize)]
struct QueryOutput<'a> {
    query: String,
    fingerprint: String,
    metric: Metric,
    k: usize,
    results: Vec<QueryRow<'a>>,
}

pub fn query(args: &QueryArgs) -> CliResult {
    let index = load_index(&args.index)?;
    let (descriptor, eval) = match &args.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            (cfg.descriptor, cfg.eval)
        }
        None => match RunManifest::read(&args.index)? {
            Some(RunManifest {
                descriptor: Some(d),
                eval,
                ..
            }) => (d, eval.unwrap_or_default()),
            _ => {
                return Err(Failure::usage(format!(
                    "no --config given and no descriptor configuration in {}",
                    RunManifest::path_for(&args.index).display()
                )))
            }
        },
    };
    let expected = index.fingerprint();
    let found = descriptor.fingerprint();
    if expected != found {
        return Err(Failure::new(
            ExitKind::Comparability,
            anyhow::anyhow!(
                "refusing to compare: index fingerprint {expected} differs from query configuration fingerprint {found}"
            ),
        ));
    }
    let k = args.k.unwrap_or(eval.k);
    let metric = args.metric.unwrap_or(eval.metric);

    let vector = describe_file(&args.image, &descriptor)?;
    let neighbors = knn(&vector, &index, k, metric).map_err(dbcr::Error::from)?;
    let rows: Vec<QueryRow> = neighbors
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let e = index.get(n.id).expect("ranked ids come from the index");
            QueryRow {
                rank: i + 1,
                id: n.id,
                label: &e.label,
                path: &e.path,
                distance: n.distance,
            }
        })
        .collect();

    if args.json {
        let out = QueryOutput {
            query: args.image.display().to_string(),
            fingerprint: expected.to_hex(),
            metric,
            k,
            results: rows,
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&out).expect("serializes")
        );
        return Ok(());
    }
    let w = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    println!(
        "{:>4}  {:>6}  {:<w$}  {:>14}  path",
        "rank", "id", "label", "distance"
    );
    for r in &rows {
        println!(
            "{:>4}  {:>6}  {:<w$}  {:>14.6}  {}",
            r.rank, r.id, r.label, r.distance, r.path
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricRow {
    metric: Metric,
    precision_at_k: f64,
    recall_at_k: f64,
    avg_precision: f64,
    retrieval_rate: Option<f64>,
}

fn metric_table(rows: &[MetricRow], k: usize) -> String {
    let mut out = format!(
        "{:<9}  {:>8}  {:>8}  {:>8}  {:>10}\n",
        "Metric",
        format!("P@{k}"),
        format!("R@{k}"),
        "AvgP",
        "Retrieval%"
    );
    for r in rows {
        let rate = r
            .retrieval_rate
            .map_or("-".to_string(), |v| format!("{v:.2}"));
        let _ = writeln!(
            out,
            "{:<9}  {:>8.4}  {:>8.4}  {:>8.4}  {:>10}",
            r.metric.name(),
            r.precision_at_k,
            r.recall_at_k,
            r.avg_precision,
            rate
        );
    }
    out
}

fn row_of(report: &EvalReport) -> MetricRow {
    MetricRow {
        metric: report.config.metric,
        precision_at_k: report.precision_at_k,
        recall_at_k: report.recall_at_k,
        avg_precision: report.avg_precision,
        retrieval_rate: report.retrieval_rate,
    }
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult {
    let started = unix_now();
    let index = load_index(&args.index)?;
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let mut eval: EvalConfig = cfg.eval;
    if let Some(k) = args.k {
        eval.k = k;
    }
    if let Some(m) = args.metric {
        eval.metric = m;
    }
    if let Some(w) = args.rank_window {
        eval.rank_window = w;
    }
    if args.exclude_self {
        eval.include_self = false;
    }
    eval.validate().map_err(Failure::usage)?;

    let report = run_benchmark(&index, &eval)?;
    print!("{}", report.render_text());

    let mut rows = Vec::new();
    if args.all_metrics {
        for m in Metric::ALL {
            if m == eval.metric {
                rows.push(row_of(&report));
            } else {
                let other = run_benchmark(&index, &EvalConfig { metric: m, ..eval })?;
                rows.push(row_of(&other));
            }
        }
        println!();
        print!("{}", metric_table(&rows, eval.k));
    }

    if let Some(prefix) = &args.report {
        let with = |ext: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(ext);
            std::path::PathBuf::from(s)
        };
        let mut outputs = vec![with(".json"), with(".txt"), with(".queries.csv")];
        write_file(
            &outputs[0],
            serde_json::to_string_pretty(&report).expect("serializes") + "\n",
        )?;
        write_file(&outputs[1], report.render_text())?;
        write_file(&outputs[2], report.per_query_csv())?;
        if args.all_metrics {
            let path = with(".metrics.json");
            let json = serde_json::json!({
                "fingerprint": report.fingerprint,
                "k": eval.k,
                "rank_window": eval.rank_window,
                "include_self": eval.include_self,
                "metrics": rows,
            });
            write_file(
                &path,
                serde_json::to_string_pretty(&json).expect("serializes") + "\n",
            )?;
            outputs.push(path);
        }
        let descriptor = RunManifest::read(&args.index)?.and_then(|m| m.descriptor);
        let mut manifest = RunManifest::new(descriptor, Some(eval), started);
        manifest.fingerprint = index.fingerprint();
        manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        manifest.write(prefix)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DescribeOutput<'a> {
    image: String,
    fingerprint: String,
    dim: usize,
    values: &'a [f32],
}

pub fn describe(args: &DescribeArgs) -> CliResult {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let vector = describe_file(&args.image, &cfg.descriptor)?;
    let out = DescribeOutput {
        image: args.image.display().to_string(),
        fingerprint: vector.fingerprint.to_hex(),
        dim: vector.dim(),
        values: &vector.values,
    };
    let json = serde_json::to_string(&out).expect("serializes") + "\n";
    match &args.out {
        Some(path) => write_file(path, json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

pub fn info(args: &InfoArgs) -> CliResult {
    let index = load_index(&args.index)?;
    println!("format version {FORMAT_VERSION}");
    println!("fingerprint {}", index.fingerprint());
    println!("dimension {}", index.dim());
    println!("entries {}", index.len());
    println!("classes {}", index.class_counts().len());
    print!("{}", class_counts_text(&index));
    if let Some(m) = RunManifest::read(&args.index)? {
        if let Some(d) = &m.descriptor {
            let note = if d.fingerprint() == index.fingerprint() {
                ""
            } else {
                " (does not match the index header)"
            };
            println!("configuration{note}: {}", d.canonical_string());
        }
        println!(
            "built by dbcr {} at unix time {}",
            m.tool_version, m.finished_unix
        );
    }
    Ok(())
}
