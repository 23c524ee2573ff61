use std::path::{Path, PathBuf};
use std::process::Command;

use mask_reconcile::cli;
use mask_reconcile::imgio::{
    read_mask_png, read_pfm, write_boxes, write_mask_png, write_rgb_png, BBox,
};
use mask_reconcile::synth::{corrupt_boundary, scene, SceneParams};
use mask_reconcile::{BinaryMask, RgbImage};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_mask-reconcile");

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mask-reconcile").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Triple {
    dir: TempDir,
    image: PathBuf,
    a: PathBuf,
    b: PathBuf,
}

impl Triple {
    fn write(image: &RgbImage, a: &BinaryMask, b: &BinaryMask) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let t = Triple {
            image: dir.path().join("image.png"),
            a: dir.path().join("a.png"),
            b: dir.path().join("b.png"),
            dir,
        };
        write_rgb_png(image, &t.image).unwrap();
        write_mask_png(a, &t.a).unwrap();
        write_mask_png(b, &t.b).unwrap();
        t
    }

    /// 64x64 synthetic scene with two independently corrupted masks.
    fn scene(seed: u64) -> Self {
        let sc = scene(&SceneParams::default(), seed);
        let a = corrupt_boundary(&sc.truth, 0.1, seed * 2 + 1);
        let b = corrupt_boundary(&sc.truth, 0.1, seed * 2 + 2);
        Self::write(&sc.image, &a, &b)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn inputs(&self) -> Vec<String> {
        [
            "--image",
            s(&self.image),
            "--mask-a",
            s(&self.a),
            "--mask-b",
            s(&self.b),
        ]
        .map(String::from)
        .to_vec()
    }

    fn cmd(&self, sub: &str, out: &Path, extra: &[&str]) -> (i32, String, String) {
        let mut args: Vec<String> = vec![sub.into()];
        args.extend(self.inputs());
        args.extend(["--out".into(), s(out).into()]);
        args.extend(extra.iter().map(|e| e.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&refs)
    }
}

/// Drops the trailing wall-clock field of a reconcile summary.
fn without_time(line: &str) -> &str {
    line.split(" time=").next().unwrap()
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
}

#[test]
fn probmap_happy_path() {
    let t = Triple::scene(1);
    let out = t.path("p.pfm");
    let (code, stdout, stderr) = t.cmd("probmap", &out, &[]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.starts_with("patches fitted="), "{stdout}");
    assert!(stdout.contains(" skipped="));
    assert_eq!(read_pfm(&out).unwrap().dims(), (64, 64));
}

#[test]
fn mask_dimension_mismatch_names_both_sizes() {
    let t = Triple::scene(2);
    write_mask_png(&BinaryMask::zeros(32, 16).unwrap(), &t.b).unwrap();
    let (code, _, stderr) = t.cmd("probmap", &t.path("p.pfm"), &[]);
    assert_eq!(code, 2);
    assert!(
        stderr.contains("64x64") && stderr.contains("32x16"),
        "{stderr}"
    );
    let (code, _, _) = t.cmd("reconcile", &t.path("r.png"), &[]);
    assert_eq!(code, 2);
}

#[test]
fn zero_components_is_usage_error() {
    let t = Triple::scene(3);
    let (code, _, stderr) = t.cmd("probmap", &t.path("p.pfm"), &["--components", "0"]);
    assert_eq!(code, 1, "{stderr}");
}

#[test]
fn missing_input_is_data_error() {
    let t = Triple::scene(3);
    std::fs::remove_file(&t.image).unwrap();
    assert_eq!(t.cmd("probmap", &t.path("p.pfm"), &[]).0, 2);
}

#[test]
fn identical_masks_are_fully_fixed() {
    let sc = scene(&SceneParams::default(), 4);
    let t = Triple::write(&sc.image, &sc.truth, &sc.truth);
    let out = t.path("r.png");
    let (code, stdout, stderr) = t.cmd("reconcile", &out, &[]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(field(&stdout, "free"), "0");
    assert_eq!(read_mask_png(&out).unwrap(), sc.truth);
}

#[test]
fn zero_lambda_thresholds_probabilities() {
    let t = Triple::scene(5);
    let prob = t.path("p.pfm");
    assert_eq!(t.cmd("probmap", &prob, &[]).0, 0);
    let out = t.path("r.png");
    let (code, _, stderr) = t.cmd("reconcile", &out, &["--lambda", "0", "--prob", s(&prob)]);
    assert_eq!(code, 0, "{stderr}");

    let p = read_pfm(&prob).unwrap();
    let (a, b) = (read_mask_png(&t.a).unwrap(), read_mask_png(&t.b).unwrap());
    let r = read_mask_png(&out).unwrap();
    let mut ambiguous = 0;
    for y in 0..64 {
        for x in 0..64 {
            if a.get(x, y) == b.get(x, y) {
                assert_eq!(r.get(x, y), a.get(x, y));
            } else {
                ambiguous += 1;
                assert_eq!(
                    r.get(x, y),
                    p.get(x, y) > 0.5,
                    "pixel ({x},{y}) P={}",
                    p.get(x, y)
                );
            }
        }
    }
    assert!(ambiguous > 0);
}

#[test]
fn graphcut_and_bruteforce_print_same_objective() {
    // 8x8 pair disagreeing on a handful of pixels.
    let sc = scene(
        &SceneParams {
            width: 8,
            height: 8,
            blobs: 1..=1,
            radius: 2.5..=3.5,
            ..Default::default()
        },
        9,
    );
    let mut b = sc.truth.clone();
    for (x, y) in [
        (0, 0),
        (3, 3),
        (4, 2),
        (7, 7),
        (1, 6),
        (5, 5),
        (2, 4),
        (6, 1),
    ] {
        b.set(x, y, !b.get(x, y));
    }
    let t = Triple::write(&sc.image, &sc.truth, &b);
    let (c1, gc, e1) = t.cmd("reconcile", &t.path("g.png"), &["--solver", "graphcut"]);
    let (c2, bf, e2) = t.cmd("reconcile", &t.path("b.png"), &["--solver", "bruteforce"]);
    assert_eq!((c1, c2), (0, 0), "{e1}{e2}");
    assert_eq!(field(&gc, "free"), "8");
    assert_eq!(without_time(&gc), without_time(&bf));
}

#[test]
fn bruteforce_cap_reports_free_count() {
    let t = Triple::scene(6);
    let (a, b) = (read_mask_png(&t.a).unwrap(), read_mask_png(&t.b).unwrap());
    let free = a
        .labels()
        .iter()
        .zip(b.labels())
        .filter(|(x, y)| x != y)
        .count();
    assert!(free > 25);
    let (code, _, stderr) = t.cmd("reconcile", &t.path("r.png"), &["--solver", "bruteforce"]);
    assert_eq!(code, 2);
    assert!(stderr.contains(&format!("has {free}")), "{stderr}");
}

#[test]
fn probmap_then_reconcile_matches_direct_reconcile() {
    let t = Triple::scene(7);
    let prob = t.path("p.pfm");
    assert_eq!(t.cmd("probmap", &prob, &["--seed", "3"]).0, 0);
    let (_, staged, _) = t.cmd("reconcile", &t.path("staged.png"), &["--prob", s(&prob)]);
    let (_, direct, _) = t.cmd("reconcile", &t.path("direct.png"), &["--seed", "3"]);
    assert_eq!(without_time(&staged), without_time(&direct));
    assert_eq!(
        std::fs::read(t.path("staged.png")).unwrap(),
        std::fs::read(t.path("direct.png")).unwrap()
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let t = Triple::scene(8);
    for name in ["1", "2"] {
        assert_eq!(t.cmd("probmap", &t.path(&format!("{name}.pfm")), &[]).0, 0);
        assert_eq!(
            t.cmd("reconcile", &t.path(&format!("{name}.png")), &[]).0,
            0
        );
    }
    for ext in ["pfm", "png"] {
        let one = std::fs::read(t.path(&format!("1.{ext}"))).unwrap();
        let two = std::fs::read(t.path(&format!("2.{ext}"))).unwrap();
        assert_eq!(one, two, "{ext}");
    }
}

#[test]
fn config_file_then_flags() {
    let t = Triple::scene(10);
    let conf = t.path("run.conf");
    std::fs::write(&conf, "# tuned\ncomponents = 3\nlambda=0.5\n").unwrap();
    let base = [
        "mask-reconcile",
        "reconcile",
        "--image",
        "i",
        "--mask-a",
        "a",
        "--mask-b",
        "b",
        "--out",
        "o",
    ];
    let with = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        cli::resolved_config(args).unwrap()
    };
    let from_file = with(&["--config", s(&conf)]);
    assert_eq!(
        (from_file.components, from_file.lambda, from_file.split),
        (3, 0.5, 10)
    );
    let overridden = with(&["--config", s(&conf), "--components", "4", "--lambda", "1"]);
    assert_eq!((overridden.components, overridden.lambda), (4, 1.0));

    std::fs::write(&conf, "colour=3\n").unwrap();
    let (code, _, stderr) = t.cmd("probmap", &t.path("p.pfm"), &["--config", s(&conf)]);
    assert_eq!(code, 1, "{stderr}");
}

#[test]
fn boxes_from_two_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let mask = BinaryMask::from_fn(12, 9, |x, y| {
        ((1..4).contains(&x) && (2..5).contains(&y))
            || ((7..11).contains(&x) && (5..8).contains(&y))
    })
    .unwrap();
    let path = dir.path().join("m.png");
    write_mask_png(&mask, &path).unwrap();
    let (code, stdout, _) = run(&["boxes-from-mask", "--mask", s(&path)]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "1 2 4 5\n7 5 11 8\n");
}

#[test]
fn weakloss_perfect_projection_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let bx = BBox::new(2, 3, 7, 6);
    let mask = BinaryMask::from_fn(10, 10, |x, y| bx.contains(x, y)).unwrap();
    let (mp, bp) = (dir.path().join("m.png"), dir.path().join("boxes.txt"));
    write_mask_png(&mask, &mp).unwrap();
    write_boxes(&[bx], &bp).unwrap();
    let (code, stdout, stderr) = run(&[
        "weakloss",
        "--mask",
        s(&mp),
        "--boxes",
        s(&bp),
        "--loss",
        "boxinst-proj",
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout, "loss=0\n");

    let (code, stdout, _) = run(&[
        "weakloss",
        "--mask",
        s(&mp),
        "--boxes",
        s(&bp),
        "--loss",
        "mil-pairwise",
        "--loss",
        "boxinst-proj",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 2);
    // A term that needs boxes, without boxes, is a usage error.
    assert_eq!(
        run(&["weakloss", "--mask", s(&mp), "--loss", "mil-unary"]).0,
        1
    );
}

#[test]
fn oracle_check_in_process() {
    let (code, stdout, _) = run(&[
        "oracle-check",
        "--size",
        "3x3",
        "--trials",
        "50",
        "--seed",
        "1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "oracle-check size=3x3 trials=50 pass=50 fail=0\n");
    assert_eq!(
        run(&["oracle-check", "--size", "five", "--trials", "5"]).0,
        1
    );
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval")
}

#[test]
fn evaluate_matches_golden_csv() {
    let dir = golden_dir();
    let (code, stdout, stderr) = run(&[
        "evaluate",
        "--pred",
        s(&dir.join("pred")),
        "--gt",
        s(&dir.join("gt")),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(
        stdout,
        std::fs::read_to_string(dir.join("golden.csv")).unwrap()
    );
}

#[test]
fn evaluate_unpaired_is_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = golden_dir().join("gt");
    let pred = tmp.path();
    std::fs::copy(gt.join("a_overlap.png"), pred.join("a_overlap.png")).unwrap();
    assert_eq!(run(&["evaluate", "--pred", s(pred), "--gt", s(&gt)]).0, 2);
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn binary_exit_codes() {
    let (code, stdout, _) = binary(&[
        "oracle-check",
        "--size",
        "4x4",
        "--trials",
        "1000",
        "--seed",
        "7",
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout,
        "oracle-check size=4x4 trials=1000 pass=1000 fail=0\n"
    );
    assert_eq!(
        binary(&["oracle-check", "--size", "6x6", "--trials", "10"]).0,
        1
    );
    assert_eq!(
        binary(&["oracle-check", "--size", "4x4", "--trials", "0"]).0,
        1
    );
    assert_eq!(binary(&["no-such-command"]).0, 1);
    assert_eq!(binary(&["--help"]).0, 0);

    let t = Triple::scene(11);
    write_mask_png(&BinaryMask::zeros(10, 64).unwrap(), &t.a).unwrap();
    let mut args = vec!["probmap".to_string()];
    args.extend(t.inputs());
    args.extend(["--out".into(), s(&t.path("p.pfm")).into()]);
    let (code, _, stderr) = binary(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 2);
    assert!(
        stderr.contains("10x64") && stderr.contains("64x64"),
        "{stderr}"
    );
}

#[test]
fn binary_evaluate_golden() {
    let dir = golden_dir();
    let out = tempfile::tempdir().unwrap();
    let csv = out.path().join("report.csv");
    let (code, stdout, _) = binary(&[
        "evaluate",
        "--pred",
        s(&dir.join("pred")),
        "--gt",
        s(&dir.join("gt")),
        "--out",
        s(&csv),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    assert_eq!(
        std::fs::read(csv).unwrap(),
        std::fs::read(dir.join("golden.csv")).unwrap()
    );
}
