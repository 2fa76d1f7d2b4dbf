use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sceneparse")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_train_parse_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let spec = ok(&["synth", "--out", "unused", "--print-spec"])
        .replace("train = 200", "train = 24")
        .replace("test = 50", "test = 4");
    fs::write(root.join("spec.txt"), spec).unwrap();
    let data = root.join("data");
    ok(&["synth", "--out", s(&data), "--spec", s(&root.join("spec.txt")), "--seed", "3"]);
    assert_eq!(fs::read_to_string(data.join("test.txt")).unwrap().lines().count(), 4);

    let train = |out: &Path| {
        ok(&["train", "--data", s(&data), "--out", s(out), "--benchmark", "--set", "trees=8"])
    };
    let log = train(&root.join("a.bin"));
    assert!(log.contains("regime unbalanced"));
    train(&root.join("b.bin"));
    assert_eq!(fs::read(root.join("a.bin")).unwrap(), fs::read(root.join("b.bin")).unwrap());

    for out in ["p1", "p2"] {
        ok(&["parse", "--bundle", s(&root.join("a.bin")), "--data", s(&data), "--out", s(&root.join(out)), "--debug"]);
    }
    let ids: Vec<String> = fs::read_to_string(data.join("test.txt")).unwrap().lines().map(String::from).collect();
    for id in &ids {
        let a = fs::read(root.join("p1").join(format!("{id}.pgm"))).unwrap();
        assert!(a.starts_with(b"P5"));
        assert_eq!(a, fs::read(root.join("p2").join(format!("{id}.pgm"))).unwrap());
        assert!(root.join("p1").join(format!("{id}.context.txt")).exists());
    }
    let energy = fs::read_to_string(root.join("p1/energy.txt")).unwrap();
    assert_eq!(energy.lines().count(), 1 + 2 * ids.len());

    let csv = root.join("classes.csv");
    let eval = ok(&["eval", "--pred", s(&root.join("p1")), "--data", s(&data), "--csv", s(&csv)]);
    assert!(eval.contains("per-pixel accuracy"));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("class,pixels,correct,recall"));

    let conf = root.join("confusion.csv");
    let table = ok(&["report", "--pred", s(&root.join("p1")), "--data", s(&data), "--confusion", s(&conf)]);
    assert!(table.contains("recall"));
    let conf = fs::read_to_string(&conf).unwrap();
    assert_eq!(conf.lines().count(), 1 + 8);

    let single = root.join("single");
    let img = data.join("images").join(format!("{}.ppm", ids[0]));
    ok(&["parse", "--bundle", s(&root.join("a.bin")), "--image", s(&img), "--out", s(&single), "--variant", "baseline"]);
    assert!(single.join(format!("{}.pgm", ids[0])).exists());
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--data", "/nonexistent/data", "--out", "x.bin"],
        vec!["parse", "--bundle", missing.to_str().unwrap(), "--image", "nope.ppm", "--out", "o"],
        vec!["train", "--data", "/nonexistent", "--out", "x.bin", "--set", "lambda"],
        vec!["bench", "--data", "/nonexistent", "--set", "bogus=1"],
    ];
    for args in cases {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("error:"), "{args:?}: {err}");
    }
    let bad_variant = run(&["parse", "--bundle", "b", "--image", "i.ppm", "--out", "o", "--variant", "magic"]);
    assert!(!bad_variant.status.success());
    assert!(String::from_utf8_lossy(&bad_variant.stderr).contains("unknown variant"));
}
