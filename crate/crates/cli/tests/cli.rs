use std::fs;
use std::path::Path;

use imrl_cli::run_command;
use imrl_core::geometry::BinaryMask;
use imrl_core::report::read_report_csv;

fn run(args: &[&str]) -> i32 {
    let argv: Vec<String> = std::iter::once("imrl").chain(args.iter().copied()).map(String::from).collect();
    run_command(&argv)
}

fn disk_mask(side: usize, r: f64) -> BinaryMask {
    let c = (side as f64 - 1.0) / 2.0;
    BinaryMask::from_fn(side, side, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        dx * dx + dy * dy <= r * r
    })
    .unwrap()
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    fs::write(
        &p,
        format!(
            "seed=5\nimages_per_class=30\nrepr_epochs=1\ndemos=2\nattempts=1\nbc_epochs=2\neval_episodes=1\n\
             tsne_points=12\ntsne_perplexity=3\ntsne_iters=20\nout_dir={}\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    p
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&[]), 2);
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    fs::write(&p, "margin_alpha=-1\n").unwrap();
    assert_eq!(run(&["gen-demos", "--config", p.to_str().unwrap()]), 1);
    assert_eq!(run(&["gen-demos", "--config", "/nonexistent.cfg"]), 1);
}

#[test]
fn scoop_point_prints_x_y_density_distance() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.pgm");
    let mask = disk_mask(31, 10.0);
    fs::write(&p, mask.to_pgm()).unwrap();
    let on_boundary = |x: i64, y: i64| {
        mask.get_signed(x, y) && [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)].iter().any(|&(a, b)| !mask.get_signed(a, b))
    };
    let nearest = (0..31i64)
        .flat_map(|y| (0..31i64).map(move |x| (x, y)))
        .filter(|&(x, y)| on_boundary(x, y))
        .map(|(x, y)| (((x - 15).pow(2) + (y - 15).pow(2)) as f64).sqrt())
        .fold(f64::INFINITY, f64::min);
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_imrl"))
        .args(["scoop-point", "--mask", p.to_str().unwrap(), "--r", "9", "--m", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    // Every pixel near the center has a full window; the tie goes to the
    // centroid.
    assert_eq!(String::from_utf8(out.stdout).unwrap(), format!("15 15 1.000000 {nearest:.6}\n"));

    let out = std::process::Command::new(env!("CARGO_BIN_EXE_imrl"))
        .args(["scoop-point", "--mask", p.to_str().unwrap(), "--m", "40"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert_eq!(run(&["scoop-point", "--mask", "/nonexistent.pgm"]), 1);
}

#[test]
fn full_chain_writes_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let c = cfg.to_str().unwrap();
    for cmd in ["gen-data", "gen-demos", "train-repr", "train-bc", "eval", "embed"] {
        assert_eq!(run(&[cmd, "--config", c]), 0, "{cmd}");
    }
    let out = dir.path().join("out");
    let hash = imrl_core::parse_config(&cfg).unwrap().hash();
    let report = read_report_csv(&out.join("metrics.csv")).unwrap();
    assert_eq!(report.config_hash, hash);
    assert_eq!(report.rows.last().unwrap().bowl, "all");
    for f in ["loss.csv", "bc_loss.csv", "embeddings.csv", "tsne.csv", "dataset/labels.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(&hash), "{f}");
    }
    for f in ["encoder.bin.hash", "policy.bin.hash", "demos.jsonl.hash"] {
        assert_eq!(fs::read_to_string(out.join(f)).unwrap().trim(), hash);
    }
}

#[test]
fn ablate_writes_four_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    fs::write(&cfg, fs::read_to_string(&cfg).unwrap() + "ablation_suite=unseen-food\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["ablate", "--config", c]), 0);
    let csv = dir.path().join("out/ablation.csv");
    let first = fs::read(&csv).unwrap();
    let report = read_report_csv(&csv).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(names, ["full", "no-visual-physical", "no-temporal", "no-geometric"]);
    assert_eq!(run(&["ablate", "--config", c]), 0);
    assert_eq!(fs::read(&csv).unwrap(), first);
}
