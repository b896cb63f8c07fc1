use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stackiqa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackiqa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn lines(path: impl AsRef<Path>) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

/// Binary PGM with a deterministic texture; `noise` adds a pseudo-random
/// perturbation of that amplitude.
fn write_pgm(path: &Path, size: usize, seed: u64, noise: u8) {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut data = format!("P5\n{size} {size}\n255\n").into_bytes();
    for y in 0..size {
        for x in 0..size {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let texture = 128.0 + 60.0 * ((x as f64 / 7.0).sin() * (y as f64 / 11.0).cos());
            let jitter = if noise == 0 {
                0.0
            } else {
                ((state >> 33) % (2 * noise as u64 + 1)) as f64 - noise as f64
            };
            data.push((texture + jitter).round().clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(path, data).unwrap();
}

/// Three pairs over one reference in `dir`, images 256x256.
fn image_manifest(dir: &Path) -> PathBuf {
    write_pgm(&dir.join("ref.pgm"), 256, 1, 0);
    let mut csv = String::from("pair_id,ref_path,a_path,b_path,p_a\n");
    for i in 0..3 {
        let a = format!("p{i}_a.pgm");
        let b = format!("p{i}_b.pgm");
        write_pgm(&dir.join(&a), 256, 10 + i, 4 + i as u8);
        write_pgm(&dir.join(&b), 256, 20 + i, 20 + 5 * i as u8);
        csv += &format!("p{i},ref.pgm,{a},{b},0.{}\n", 9 - i);
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, csv).unwrap();
    path
}

#[test]
fn score_counts_new_entries_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    image_manifest(dir.path());
    let args = ["--manifest", "manifest.csv", "--cache", "cache.csv", "score", "--metrics", "psnr,ssim,niqe"];
    let first = ok(&stackiqa(dir.path(), &args));
    assert!(first.contains("scored 18 new entries"), "{first}");
    assert_eq!(lines(dir.path().join("cache.csv")).len(), 19);
    let before = fs::read(dir.path().join("cache.csv")).unwrap();
    let second = ok(&stackiqa(dir.path(), &args));
    assert!(second.contains("scored 0 new entries"), "{second}");
    assert_eq!(fs::read(dir.path().join("cache.csv")).unwrap(), before);

    ok(&stackiqa(dir.path(), &["--manifest", "manifest.csv", "--cache", "cache.csv", "evaluate", "--metrics", "psnr,ssim,niqe"]));
    let baselines = lines(dir.path().join("baselines.csv"));
    assert_eq!(baselines[0], "metric_id,accuracy,n");
    assert!(baselines[1].starts_with("psnr,"));
    assert_eq!(baselines.len(), 4);
}

#[test]
fn external_metric_is_redirected_to_ingest() {
    let dir = tempfile::tempdir().unwrap();
    image_manifest(dir.path());
    let out = stackiqa(dir.path(), &["--manifest", "manifest.csv", "--cache", "cache.csv", "score", "--metrics", "pieapp"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
    assert!(!dir.path().join("cache.csv").exists());
}

#[test]
fn ingest_merges_idempotently_and_rejects_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("pair_id,side,metric_id,score\n");
    for i in 0..5 {
        rows += &format!("q{i},A,pieapp,{}.5\nq{i},B,pieapp,{}.25\n", i, i + 1);
    }
    fs::write(dir.path().join("ext.csv"), &rows).unwrap();
    let first = ok(&stackiqa(dir.path(), &["--cache", "cache.csv", "ingest", "ext.csv"]));
    assert!(first.contains("ingested 10 new entries"), "{first}");
    assert_eq!(lines(dir.path().join("cache.csv")).len(), 11);
    let second = ok(&stackiqa(dir.path(), &["--cache", "cache.csv", "ingest", "ext.csv"]));
    assert!(second.contains("ingested 0 new entries"), "{second}");

    fs::write(
        dir.path().join("bad.csv"),
        "pair_id,side,metric_id,score\nq9,A,pieapp,1\nq3,B,pieapp,7\n",
    )
    .unwrap();
    let before = fs::read(dir.path().join("cache.csv")).unwrap();
    let out = stackiqa(dir.path(), &["--cache", "cache.csv", "ingest", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("q3") && err.contains("pieapp") && err.contains("row 3"), "{err}");
    assert_eq!(fs::read(dir.path().join("cache.csv")).unwrap(), before);
}

fn synth(dir: &Path, pairs: &str) {
    ok(&stackiqa(dir, &["synth", "--pairs", pairs, "--out", "data"]));
    ok(&stackiqa(dir, &["--cache", "cache.csv", "ingest", "data/scores.csv"]));
}

#[test]
fn training_accuracy_is_not_below_held_out_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "500");
    let manifest = lines(dir.path().join("data/manifest.csv"));
    let header = &manifest[0];
    let train: Vec<&String> = manifest[1..401].iter().collect();
    let held: Vec<&String> = manifest[401..].iter().collect();
    let join = |rows: &[&String]| {
        let body: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        format!("{header}\n{}\n", body.join("\n"))
    };
    fs::write(dir.path().join("data/train.csv"), join(&train)).unwrap();
    fs::write(dir.path().join("data/held.csv"), join(&held)).unwrap();
    let common = ["--cache", "cache.csv", "--registry", "data/metrics.csv"];
    let metrics = ["--metrics", "syn_a,syn_b,syn_c,syn_d"];
    ok(&stackiqa(dir.path(), &[&common[..], &["--manifest", "data/train.csv", "train", "--out", "m"], &metrics[..]].concat()));
    let accuracy = |manifest: &str, out: &str| {
        let stdout = ok(&stackiqa(
            dir.path(),
            &[&common[..], &["--manifest", manifest, "predict", "--model", "m/stack.model", "--out", out]].concat(),
        ));
        let line = stdout.lines().find(|l| l.starts_with("accuracy")).unwrap().to_string();
        line.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap()
    };
    let on_train = accuracy("data/train.csv", "pt");
    let on_held = accuracy("data/held.csv", "ph");
    assert!(on_train >= on_held, "train {on_train} held-out {on_held}");
    let preds = lines(dir.path().join("ph/predictions.csv"));
    assert_eq!(preds[0], "pair_id,decision_value,prediction");
    assert_eq!(preds.len(), 101);
}

#[test]
fn search_over_fifteen_metrics_covers_every_subset() {
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = (0..15).map(|m| format!("x{m:02}")).collect();
    let mut registry = String::from("metric_id,kind,polarity\n");
    let mut manifest = String::from("pair_id,ref_path,a_path,b_path,p_a\n");
    let mut scores = String::from("pair_id,side,metric_id,score\n");
    for id in &ids {
        registry += &format!("{id},nr,higher\n");
    }
    for i in 0..16 {
        let prefer_a = i % 2 == 0;
        manifest += &format!("s{i:02},r.png,a.png,b.png,{}\n", if prefer_a { 0.8 } else { 0.2 });
        for (m, id) in ids.iter().enumerate() {
            let wobble = ((i * 7 + m * 3) % 5) as f64 / 10.0;
            let (a, b) = if prefer_a { (1.0 + wobble, 0.6) } else { (0.6, 1.0 + wobble) };
            scores += &format!("s{i:02},A,{id},{a}\ns{i:02},B,{id},{b}\n");
        }
    }
    fs::write(dir.path().join("metrics.csv"), registry).unwrap();
    fs::write(dir.path().join("manifest.csv"), manifest).unwrap();
    fs::write(dir.path().join("ext.csv"), scores).unwrap();
    ok(&stackiqa(dir.path(), &["--cache", "cache.csv", "ingest", "ext.csv"]));
    let pool = ids.join(",");
    ok(&stackiqa(
        dir.path(),
        &[
            "--manifest", "manifest.csv", "--cache", "cache.csv", "--registry", "metrics.csv",
            "search", "--pool", &pool, "--sizes", "1-15", "--cycles", "1",
        ],
    ));
    let rows = lines(dir.path().join("subset_search.csv"));
    assert_eq!(rows[0], "size,metric_ids,median_accuracy");
    assert_eq!(rows.len() - 1, 32767);
    assert_eq!(lines(dir.path().join("subset_best.csv")).len() - 1, 15);
    assert!(dir.path().join("subset_scatter.svg").exists());
}

fn run_workflow(dir: &Path, out: &str) {
    let common = ["--manifest", "data/manifest.csv", "--cache", "cache.csv", "--registry", "data/metrics.csv", "--out", out];
    let pool = "syn_a,syn_b,syn_c,syn_d,syn_e,syn_f";
    ok(&stackiqa(dir, &[&common[..], &["evaluate", "--metrics", pool, "--cv"]].concat()));
    ok(&stackiqa(dir, &[&common[..], &["search", "--pool", pool, "--sizes", "1-2"]].concat()));
    ok(&stackiqa(dir, &[&common[..], &["supporters", "--metrics", pool]].concat()));
    ok(&stackiqa(dir, &[&common[..], &["train", "--metrics", "syn_a,syn_c"]].concat()));
    let model = format!("{out}/stack.model");
    ok(&stackiqa(dir, &[&common[..], &["predict", "--model", &model]].concat()));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "120");
    run_workflow(dir.path(), "run1");
    run_workflow(dir.path(), "run2");
    let mut names: Vec<String> = fs::read_dir(dir.path().join("run1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "baselines.csv", "cv_report.csv", "predictions.csv", "stack.model", "subset_best.csv",
            "subset_scatter.svg", "subset_search.csv", "supporter_heatmap.svg", "supporters.csv",
        ]
    );
    for name in &names {
        assert_eq!(
            fs::read(dir.path().join("run1").join(name)).unwrap(),
            fs::read(dir.path().join("run2").join(name)).unwrap(),
            "{name} differs"
        );
    }
    ok(&stackiqa(dir.path(), &["synth", "--pairs", "120", "--out", "data2"]));
    for name in ["manifest.csv", "scores.csv", "metrics.csv"] {
        assert_eq!(
            fs::read(dir.path().join("data").join(name)).unwrap(),
            fs::read(dir.path().join("data2").join(name)).unwrap()
        );
    }
}

#[test]
fn fitted_niqe_model_is_usable_for_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let images: Vec<String> = ["camera", "coins", "grass", "moon"]
        .iter()
        .map(|n| fixtures.join(format!("{n}.png")).to_string_lossy().into_owned())
        .collect();
    let mut args = vec!["fit-niqe", "--patch-size", "32", "--out", "model"];
    args.extend(images.iter().map(String::as_str));
    ok(&stackiqa(dir.path(), &args));
    image_manifest(dir.path());
    let out = ok(&stackiqa(
        dir.path(),
        &["--manifest", "manifest.csv", "--cache", "c.csv", "--niqe-model", "model/niqe_pristine.model", "score", "--metrics", "niqe"],
    ));
    assert!(out.contains("scored 6 new entries"), "{out}");
}

#[test]
fn every_subcommand_documents_its_flags() {
    let dir = tempfile::tempdir().unwrap();
    let global = ["--manifest", "--cache", "--out", "--seed", "--jobs", "--niqe-model", "--registry"];
    let hyper = ["--c", "--gamma", "--tol", "--max-passes", "--no-swap-augment"];
    let protocol = ["--cycles", "--train-fraction", "--split-unit", "--include-ties"];
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("score", vec!["--metrics"]),
        ("ingest", vec![]),
        ("train", [&["--metrics"][..], &hyper].concat()),
        ("predict", vec!["--model"]),
        ("evaluate", [&["--metrics", "--cv"][..], &hyper, &protocol].concat()),
        ("search", [&["--pool", "--sizes"][..], &hyper, &protocol].concat()),
        ("supporters", vec!["--metrics", "--include-ties"]),
        ("fit-niqe", vec!["--patch-size", "--sharpness-fraction"]),
        ("synth", vec!["--pairs"]),
    ];
    for (cmd, flags) in cases {
        let out = stackiqa(dir.path(), &[cmd, "--help"]);
        let text = ok(&out);
        for flag in global.iter().chain(&flags) {
            assert!(text.contains(flag), "`{cmd} --help` lacks {flag}");
        }
    }
    ok(&stackiqa(dir.path(), &["--help"]));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stackiqa(dir.path(), &["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(stackiqa(dir.path(), &["evaluate", "--metrics", "psnr"]).status.code(), Some(2));
    synth(dir.path(), "30");
    let out = stackiqa(
        dir.path(),
        &["--manifest", "data/manifest.csv", "--cache", "cache.csv", "--registry", "data/metrics.csv", "search", "--pool", "syn_a,syn_b", "--sizes", "3"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = stackiqa(dir.path(), &["--manifest", "data/manifest.csv", "--cache", "cache.csv", "evaluate", "--metrics", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_class_training_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("m.csv"),
        "pair_id,ref_path,a_path,b_path,p_a\nu0,r,a,b,0.9\nu1,r,a,b,0.8\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("s.csv"),
        "pair_id,side,metric_id,score\nu0,A,topiq,1\nu0,B,topiq,0\nu1,A,topiq,2\nu1,B,topiq,0\n",
    )
    .unwrap();
    ok(&stackiqa(dir.path(), &["--cache", "c.csv", "ingest", "s.csv"]));
    let out = stackiqa(dir.path(), &["--manifest", "m.csv", "--cache", "c.csv", "train", "--metrics", "topiq", "--no-swap-augment"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
