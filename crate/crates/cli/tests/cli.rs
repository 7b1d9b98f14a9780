use sketchrec::eval::parse_csv;
use sketchrec::net::{load_network, preset_lenet_modified, save_state, NetworkState};
use sketchrec::sketch_io::{decode_pgm_image, decode_ppm};
use sketchrec::svm::{load_features, load_model};
use sketchrec::synth::{glyph_corpus, write_corpus};
use std::path::Path;
use std::process::{Command, Output};

fn sketchrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchrec")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn count_files(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                count_files(&p)
            } else {
                1
            }
        })
        .sum()
}

#[test]
fn usage_errors_exit_1() {
    let out = sketchrec(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(sketchrec(&["augment", "--input", "a", "--output", "b", "--bogus"]).status.code(), Some(1));
    assert_eq!(sketchrec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sketchrec(&["heatmap", "--input", "a", "--output", "b", "--weights", "w", "--mode", "jet"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sketchrec(&["augment", "--input", s(&dir.path().join("absent")), "--output", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent"));
}

#[test]
fn augment_writes_thirty_variants_per_sketch() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&glyph_corpus(1, 56, 64, 2).unwrap(), &dir.path().join("in")).unwrap();
    let out = sketchrec(&[
        "augment", "--input", s(&dir.path().join("in")), "--output", s(&dir.path().join("out")), "--plan", "paper30",
        "--seed", "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("\"seed\":3") && log.contains("\"plan\":\"paper30\""), "{log}");
    assert_eq!(count_files(&dir.path().join("out")), 1680);
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = d.join("corpus");
    write_corpus(&glyph_corpus(3, 10, 64, 4).unwrap(), &corpus).unwrap();

    let weights = d.join("net.bin");
    let out = sketchrec(&[
        "train-cnn", "--input", s(&corpus), "--output", s(&weights), "--iters", "30", "--batch", "8", "--seed", "1",
        "--threads", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (spec, _) = load_network("lenet-modified", &weights).unwrap();
    assert_eq!(spec.num_classes(), Some(3));

    let features = d.join("feat/f.bin");
    let extract = |path: &Path| {
        sketchrec(&[
            "extract", "--input", s(&corpus), "--output", s(path), "--weights", s(&weights), "--layer", "ip1",
        ])
    };
    assert!(extract(&features).status.success());
    let set = load_features(&features).unwrap();
    assert_eq!((set.len(), set.dim(), set.layer.as_str()), (30, 500, "ip1"));
    let again = d.join("f2.bin");
    assert!(extract(&again).status.success());
    assert_eq!(std::fs::read(&features).unwrap(), std::fs::read(&again).unwrap());

    let model = d.join("svm.bin");
    let out = sketchrec(&["train-svm", "--input", s(&features), "--output", s(&model), "--c", "1", "--tol", "1e-3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_model(&model).unwrap().dim(), 500);

    let sketch = d.join("corpus/glyph-001/0000.pgm");
    for (mode, file) in [("gray", "h.pgm"), ("color", "h.ppm")] {
        let out = sketchrec(&[
            "heatmap", "--input", s(&sketch), "--output", s(&d.join(file)), "--weights", s(&weights), "--mode", mode,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(decode_pgm_image(&std::fs::read(d.join("h.pgm")).unwrap()).unwrap().width, 28);
    assert_eq!(decode_ppm(&std::fs::read(d.join("h.ppm")).unwrap()).unwrap().height, 28);
    let out = sketchrec(&[
        "heatmap", "--input", s(&sketch), "--output", s(&d.join("x.pgm")), "--weights", s(&weights), "--layer", "ip1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("conv2"));

    let config = d.join("exp.json");
    std::fs::write(&config, r#"{"per_category": 10, "ladder": [4, 8], "shuffles": 2, "working_resolution": 64}"#).unwrap();
    let report = d.join("out/report.csv");
    let out = sketchrec(&[
        "evaluate", "--config", s(&config), "--input", s(&corpus), "--weights", s(&weights), "--report", s(&report),
        "--seed", "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = parse_csv(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(runs.len(), 4);
    assert!(runs.iter().all(|r| r.train_count == r.ladder * 30 * 3 && r.test_count == (10 - r.ladder) * 3));
    assert!(d.join("out/report.json").is_file() && d.join("out/report.timings.json").is_file());
}

#[test]
fn extract_from_preset_weights_has_ip1_width() {
    let dir = tempfile::tempdir().unwrap();
    let spec = preset_lenet_modified(10).unwrap();
    save_state(&spec, &NetworkState::init(&spec, 0), &dir.path().join("w.bin")).unwrap();
    write_corpus(&glyph_corpus(2, 3, 32, 0).unwrap(), &dir.path().join("c")).unwrap();
    let out = sketchrec(&[
        "extract", "--input", s(&dir.path().join("c")), "--output", s(&dir.path().join("f.bin")), "--net",
        "lenet-modified", "--weights", s(&dir.path().join("w.bin")), "--layer", "ip1", "--plan", "paper30",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let set = load_features(&dir.path().join("f.bin")).unwrap();
    assert_eq!((set.dim(), set.len()), (500, 6 * 31));
}
