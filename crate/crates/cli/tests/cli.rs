use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dbcr::image::{encode_ppm, RgbPixelGrid};

const CONFIG: &str = "[descriptor]\nwidth = 64\nheight = 64\n\n[eval]\nk = 4\n";

fn dbcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbcr"))
        .args(args)
        .env_remove("DBCR_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn image(class: &str, seed: u32) -> RgbPixelGrid {
    let shade = 40.0 + (seed * 37 % 120) as f64;
    RgbPixelGrid::from_fn(64, 64, |r, c| {
        let on = match class {
            "stripes" => (c / 8) % 2 == 0,
            "checker" => (r / 8 + c / 8) % 2 == 0,
            _ => true,
        };
        let noise = ((r * 31 + c * 17 + seed as usize * 7) % 5) as f64;
        let v = if on { shade } else { shade + 90.0 } + noise;
        [v, v * 0.8, 255.0 - v]
    })
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    data: PathBuf,
    config: PathBuf,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let data = root.join("data");
        for class in ["checker", "solid", "stripes"] {
            fs::create_dir_all(data.join(class)).unwrap();
            for i in 0..4 {
                fs::write(
                    data.join(class).join(format!("{i}.ppm")),
                    encode_ppm(&image(class, i)),
                )
                .unwrap();
            }
        }
        let config = root.join("run.toml");
        fs::write(&config, CONFIG).unwrap();
        Fixture {
            _dir: dir,
            root,
            data,
            config,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn build(&self, out: &Path) -> Output {
        dbcr(&[
            "index",
            self.data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--config",
            self.config.to_str().unwrap(),
        ])
    }
}

#[test]
fn index_is_reproducible_and_reports_counts() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a.dbcr"), fx.path("b.dbcr"));
    let out = fx.build(&a);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("indexed 12 images"), "{text}");
    for class in ["checker", "solid", "stripes"] {
        assert!(
            text.lines()
                .any(|l| l.split_whitespace().collect::<Vec<_>>() == [class, "4"]),
            "{text}"
        );
    }
    assert!(fx.build(&b).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.path("a.dbcr.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["descriptor"]["width"], 64);
    let header = fs::read(&a).unwrap();
    assert_eq!(
        manifest["fingerprint"].as_str().unwrap(),
        hex_of(&header[6..38])
    );
}

fn hex_of(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn query_finds_the_image_itself() {
    let fx = Fixture::new();
    let idx = fx.path("x.dbcr");
    assert!(fx.build(&idx).status.success());
    let img = fx.data.join("stripes/2.ppm");
    for metric in ["l1", "l2", "canberra", "chi2"] {
        let out = dbcr(&[
            "query",
            img.to_str().unwrap(),
            "--index",
            idx.to_str().unwrap(),
            "--metric",
            metric,
            "--json",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        let results = v["results"].as_array().unwrap();
        // k comes from the [eval] table recorded at index time
        assert_eq!(results.len(), 4);
        assert_eq!(results[0]["path"], "stripes/2.ppm");
        assert_eq!(results[0]["distance"], 0.0);
    }
    let out = dbcr(&[
        "query",
        img.to_str().unwrap(),
        "--index",
        idx.to_str().unwrap(),
        "--k",
        "7",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 8);
}

#[test]
fn query_refuses_a_foreign_configuration() {
    let fx = Fixture::new();
    let idx = fx.path("x.dbcr");
    assert!(fx.build(&idx).status.success());
    let other = fx.path("other.toml");
    fs::write(
        &other,
        "[descriptor]\nwidth = 64\nheight = 64\n[descriptor.hog]\nbin_count = 12\n",
    )
    .unwrap();
    let img = fx.data.join("solid/0.ppm");
    let out = dbcr(&[
        "query",
        img.to_str().unwrap(),
        "--index",
        idx.to_str().unwrap(),
        "--config",
        other.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = stderr(&out);
    let header = fs::read(&idx).unwrap();
    assert!(err.contains(&hex_of(&header[6..38])), "{err}");
    assert_eq!(err.matches("fingerprint").count(), 2, "{err}");
}

#[test]
fn evaluate_writes_reports_deterministically() {
    let fx = Fixture::new();
    let idx = fx.path("x.dbcr");
    assert!(fx.build(&idx).status.success());
    let run = |prefix: &str| {
        let p = fx.path(prefix);
        let out = dbcr(&[
            "evaluate",
            "--index",
            idx.to_str().unwrap(),
            "--config",
            fx.config.to_str().unwrap(),
            "--report",
            p.to_str().unwrap(),
            "--all-metrics",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        (out, p)
    };
    let (out, p1) = run("r1");
    let text = stdout(&out);
    assert!(text.contains("P@4"), "{text}");
    for metric in ["l1", "l2", "canberra", "chi2"] {
        assert!(text.lines().any(|l| l.starts_with(metric)), "{text}");
    }
    for ext in [
        ".json",
        ".txt",
        ".queries.csv",
        ".metrics.json",
        ".manifest.json",
    ] {
        let mut s = p1.as_os_str().to_owned();
        s.push(ext);
        assert!(Path::new(&s).exists(), "{ext}");
    }

    let load = |p: &Path| -> serde_json::Value {
        let mut s = p.as_os_str().to_owned();
        s.push(".json");
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(s).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    let (_, p2) = run("r2");
    let (a, b) = (load(&p1), load(&p2));
    assert_eq!(a, b);

    let rows = a["confusion"]["percent"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let sum: f64 = row
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert!((sum - 100.0).abs() < 1e-9);
    }
    let csv = {
        let mut s = p1.as_os_str().to_owned();
        s.push(".queries.csv");
        fs::read_to_string(s).unwrap()
    };
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn describe_and_info() {
    let fx = Fixture::new();
    let img = fx.data.join("checker/1.ppm");
    let out = dbcr(&[
        "describe",
        img.to_str().unwrap(),
        "--config",
        fx.config.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // 2 images x 4 bands x 3x3 blocks x 36 values at 64x64
    assert_eq!(v["dim"], 2592);
    assert_eq!(v["values"].as_array().unwrap().len(), 2592);

    let idx = fx.path("x.dbcr");
    assert!(fx.build(&idx).status.success());
    let out = dbcr(&["info", idx.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("format version 1"), "{text}");
    assert!(text.contains("dimension 2592"), "{text}");
    assert!(text.contains("entries 12"), "{text}");
    assert!(text.contains(v["fingerprint"].as_str().unwrap()), "{text}");
}

#[test]
fn empty_dataset_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out_path = dir.path().join("x.dbcr");
    let out = dbcr(&[
        "index",
        empty.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_path.exists());
}

#[test]
fn broken_files_need_skip_errors() {
    let fx = Fixture::new();
    fs::write(
        fx.data.join("solid/broken.ppm"),
        b"P6\n64 64\n255\n\x01\x02",
    )
    .unwrap();
    let idx = fx.path("x.dbcr");
    let out = fx.build(&idx);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("broken.ppm"));
    assert!(!idx.exists());

    let out = dbcr(&[
        "index",
        fx.data.to_str().unwrap(),
        "--out",
        idx.to_str().unwrap(),
        "--config",
        fx.config.to_str().unwrap(),
        "--skip-errors",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("indexed 12 images"));
}

#[test]
fn usage_errors() {
    let out = dbcr(&["evaluate", "--index", "x.dbcr", "--metric", "cosine"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[descriptor]\nwidht = 64\n").unwrap();
    let out = dbcr(&["describe", "nothing.ppm", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = dbcr(&["info", dir.path().join("missing.dbcr").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
