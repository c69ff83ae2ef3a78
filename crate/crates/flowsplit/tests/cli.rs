use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowsplit::report::Manifest;
use flowsplit::{read_flo, FlowSlice};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowsplit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn count(dir: &Path, ext: &str) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
        .count()
}

fn synth(dir: &Path, args: &[&str]) -> PathBuf {
    let out = dir.join("frames");
    let mut all = vec!["synth"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", p(&out)]);
    let o = run(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn summary_value(o: &Output, key: &str) -> f64 {
    Manifest::parse(&stdout(o)).unwrap().get(key).unwrap().parse().unwrap()
}

fn constant_sequence(dir: &Path) -> PathBuf {
    let d = dir.join("const");
    std::fs::create_dir_all(&d).unwrap();
    for i in 0..4 {
        image::GrayImage::from_pixel(6, 5, image::Luma([90])).save(d.join(format!("f{i}.png"))).unwrap();
    }
    d
}

#[test]
fn synth_flicker_writes_the_raw_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth(dir.path(), &["flicker", "--size", "32", "--repeats", "4"]);
    assert_eq!(count(&out, "pgm"), 16);
    let m = Manifest::parse(&std::fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(m.get("generator"), Some("flicker"));
    assert_eq!(m.get("grid"), Some("32x32x16"));
    assert_eq!(m.get("repeats"), Some("4"));
}

#[test]
fn synth_rotate_honours_frame_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth(dir.path(), &["rotate", "--freq", "8", "--frames", "48", "--size", "24"]);
    assert_eq!(count(&out, "pgm"), 48);
}

#[test]
fn synth_without_out_is_a_usage_error() {
    let o = run(&["synth", "flicker"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--out"));
    assert_eq!(code(&run(&["synth", "square", "--amplitude", "0.5", "--out", "/tmp/never"])), 2);
}

#[test]
fn decompose_constant_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let input = constant_sequence(dir.path());
    let out = dir.path().join("flow");
    let o = run(&["decompose", "--in", p(&input), "--alpha1", "1", "--alpha2", "0.25", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(summary_value(&o, "iterations") <= 2.0);
    for t in 0..4 {
        for prefix in ["u1", "u2", "sum"] {
            let s = read_flo(out.join(format!("{prefix}_t{t:04}.flo"))).unwrap();
            assert_eq!(s, FlowSlice::zeros(6, 5));
        }
    }
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("iteration,energy,residual\n"));
    assert_eq!(report.lines().count(), 3);
}

#[test]
fn decompose_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), &["square", "--size", "24", "--frames", "8"]);
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for o in &outs {
        let r = run(&["decompose", "--in", p(&input), "--alpha1", "1", "--alpha2", "0.25", "--out", p(o)]);
        assert_eq!(code(&r), 0);
    }
    let mut names: Vec<_> = std::fs::read_dir(&outs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 3 * 8 + 2);
    for n in names {
        assert_eq!(std::fs::read(outs[0].join(&n)).unwrap(), std::fs::read(outs[1].join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn decompose_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    assert_eq!(code(&run(&["decompose", "--in", p(&missing), "--alpha1", "1", "--alpha2", "1"])), 2);
    let input = constant_sequence(dir.path());
    assert_eq!(code(&run(&["decompose", "--in", p(&input), "--alpha1", "-1", "--alpha2", "1"])), 2);
    assert_eq!(code(&run(&["decompose", "--in", p(&input), "--alpha1", "1"])), 2);
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), &["flicker", "--size", "16", "--frames", "9"]);
    let o = run(&[
        "decompose", "--in", p(&input), "--alpha1", "1", "--alpha2", "1", "--dtau", "10", "--eps", "1",
        "--tol", "1e-300", "--max-iter", "100000",
    ]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep"));
}

#[test]
fn flicker_lands_in_u2() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), &["flicker", "--size", "64", "--repeats", "2", "--frames", "15", "--seed", "3"]);
    let o = run(&[
        "decompose", "--in", p(&input), "--alpha1", "1", "--alpha2", "1", "--out", p(&dir.path().join("flow")),
    ]);
    assert_eq!(code(&o), 0);
    let (s1, s2) = (summary_value(&o, "u1_sup"), summary_value(&o, "u2_sup"));
    assert!(s1 <= 0.1 * s2, "{s1} vs {s2}");
}

#[test]
fn huge_alpha2_suppresses_u2() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), &["rotate", "--size", "24", "--frames", "9"]);
    let o = run(&["decompose", "--in", p(&input), "--alpha1", "1", "--alpha2", "1e8", "--out", p(&dir.path().join("f"))]);
    assert_eq!(code(&o), 0);
    assert!(summary_value(&o, "u2_sup") < 1e-6 * summary_value(&o, "u1_sup"));
}

#[test]
fn compare_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let input = constant_sequence(dir.path());
    let o = run(&["compare", "--in", p(&input)]);
    assert_eq!(code(&o), 0);
    assert_eq!(summary_value(&o, "ratio"), 1.0);

    let input = synth(dir.path(), &["square", "--size", "32", "--frames", "16"]);
    let o = run(&["compare", "--in", p(&input)]);
    assert_eq!(code(&o), 0);
    assert!(summary_value(&o, "ratio") < 1.0, "{}", stdout(&o));
    assert!(summary_value(&o, "u2_energy") > 0.0);
}

#[test]
fn render_modes() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.flo");
    flowsplit::write_flo(&FlowSlice::zeros(5, 4), &zero).unwrap();
    let png = dir.path().join("zero.png");
    assert_eq!(code(&run(&["render", "--flo", p(&zero), "--mode", "color", "--out", p(&png)])), 0);
    assert!(image::open(&png).unwrap().to_rgb8().pixels().all(|px| px.0 == [255, 255, 255]));

    let slow = dir.path().join("slow.flo");
    flowsplit::write_flo(&FlowSlice::from_fn(5, 4, |_, _| [0.1, 0.0]), &slow).unwrap();
    assert_eq!(code(&run(&["render", "--flo", p(&slow), "--mode", "magnitude", "--threshold", "0.5", "--out", p(&png)])), 0);
    assert!(image::open(&png).unwrap().to_luma8().pixels().all(|px| px.0 == [0]));

    let masked = dir.path().join("masked.png");
    let args = ["render", "--flo", p(&slow), "--mode", "magnitude", "--threshold", "0.05", "--mask-common", p(&slow), "--out", p(&masked)];
    assert_eq!(code(&run(&args)), 0);
    assert!(image::open(&masked).unwrap().to_luma8().pixels().all(|px| px.0 == [0]));

    let bad = dir.path().join("bad.flo");
    std::fs::write(&bad, b"XXXX0000000000000000").unwrap();
    assert_eq!(code(&run(&["render", "--flo", p(&bad), "--out", p(&png)])), 2);
}

#[test]
fn verify_named_checks() {
    let o = run(&["verify", "--only", "fourier-oracle"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("PASS fourier-oracle"));

    let o = run(&["verify", "--only", "norms", "--beta", "0.4"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(code(&run(&["verify", "--only", "no-such-check"])), 2);
}

#[test]
fn verify_everything() {
    let o = run(&["verify"]);
    let out = stdout(&o);
    assert_eq!(code(&o), 0, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS ")));
    assert_eq!(out.lines().count(), flowsplit::verify::check_names().count());
}
