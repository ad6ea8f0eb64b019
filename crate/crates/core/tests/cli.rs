use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lamperti(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamperti"))
        .args(args)
        .env_remove("LAMPERTI_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn grids_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../grids")
}

fn simulate(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let file = dir.join(name);
    let mut all = vec!["simulate"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", p(&file)]);
    let out = lamperti(&all);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    file
}

#[test]
fn simulate_writes_grid_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--process",
        "fbm",
        "--hurst",
        "0.5",
        "--n",
        "16",
        "--seed",
        "1",
    ];
    let a = simulate(dir.path(), "a.csv", &args);
    let b = simulate(dir.path(), "b.csv", &args);
    let text = fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 18);
    assert_eq!(lines[0], "t,value");
    assert_eq!(lines[1], "0,0");
    assert_eq!(lines[17].split(',').next(), Some("1"));
    assert!(!text.contains('\r'));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = simulate(
        dir.path(),
        "c.csv",
        &[
            "--process",
            "fbm",
            "--hurst",
            "0.5",
            "--n",
            "16",
            "--seed",
            "2",
        ],
    );
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn simulate_rejects_bad_domains() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("x.csv");
    let cases: [&[&str]; 4] = [
        &[
            "--process",
            "tfbm",
            "--hurst",
            "0.5",
            "--k",
            "1.0",
            "--n",
            "16",
            "--seed",
            "1",
        ],
        &[
            "--process",
            "fbm",
            "--hurst",
            "1.2",
            "--n",
            "16",
            "--seed",
            "1",
        ],
        &[
            "--process",
            "bfbm",
            "--hurst",
            "0.5",
            "--n",
            "16",
            "--seed",
            "1",
        ],
        &[
            "--process",
            "fbm",
            "--hurst",
            "0.5",
            "--sigma2",
            "-1",
            "--n",
            "16",
            "--seed",
            "1",
        ],
    ];
    for args in cases {
        let mut all = vec!["simulate"];
        all.extend_from_slice(args);
        all.extend_from_slice(&["--out", p(&out_file)]);
        let out = lamperti(&all);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        let err = stderr(&out);
        assert!(
            err.contains("--hurst") || err.contains("--k") || err.contains("--sigma2"),
            "{err}"
        );
    }
}

#[test]
fn estimate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let mut text = String::from("t,value\n");
    for j in 0..=64 {
        text.push_str(&format!("{},3.5\n", j as f64 / 64.0));
    }
    fs::write(&flat, text).unwrap();
    let out = lamperti(&["estimate", "--algorithm", "kurtosis", "--in", p(&flat)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    let path = simulate(
        dir.path(),
        "p.csv",
        &[
            "--process",
            "fbm",
            "--hurst",
            "0.7",
            "--n",
            "256",
            "--seed",
            "3",
        ],
    );
    let out = lamperti(&["estimate", "--algorithm", "known-sigma", "--in", p(&path)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("--sigma2"));

    let out = lamperti(&["estimate", "--algorithm", "kurtosis"]);
    assert_eq!(code(&out), 2);

    let out = lamperti(&[
        "estimate",
        "--algorithm",
        "known-sigma",
        "--sigma2",
        "1",
        "--in",
        p(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = stdout(&out);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(
        lines[0],
        "algorithm,index_estimate,h_component,k_component,iterations,residual,warnings"
    );
    assert!(lines[1].starts_with("known-sigma,"));
}

fn estimate_value(path: &Path, extra: &[&str]) -> f64 {
    let mut args = vec!["estimate", "--in", p(path)];
    args.extend_from_slice(extra);
    let out = lamperti(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    stdout(&out)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = 20;
    let (mut known_ok, mut qv_ok) = (0, 0);
    for seed in 0..seeds {
        let seed = seed.to_string();
        let path = simulate(
            dir.path(),
            "p.csv",
            &[
                "--process",
                "fbm",
                "--hurst",
                "0.7",
                "--n",
                "4096",
                "--seed",
                &seed,
            ],
        );
        let known = estimate_value(&path, &["--algorithm", "known-sigma", "--sigma2", "1"]);
        let qv = estimate_value(&path, &["--algorithm", "qv"]);
        known_ok += (0.6 < known && known < 0.8) as usize;
        qv_ok += (0.65 < qv && qv < 0.75) as usize;
    }
    assert!(
        known_ok * 100 >= 95 * seeds,
        "known-sigma in band for {known_ok}/{seeds} seeds"
    );
    assert!(
        qv_ok * 100 >= 95 * seeds,
        "qv in band for {qv_ok}/{seeds} seeds"
    );
}

#[test]
fn bench_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.grid");
    fs::write(
        &grid,
        "families = fbm, bfbm\nhurst = 0.3, 0.7\nk = 0.5\nlengths = 64\nreps = 1\nalgorithms = known-sigma, kurtosis\nseed = 9\n",
    )
    .unwrap();
    let one = dir.path().join("one");
    let eight = dir.path().join("eight");
    for (out_dir, workers) in [(&one, "1"), (&eight, "8")] {
        let out = lamperti(&[
            "bench",
            "--grid",
            p(&grid),
            "--out-dir",
            p(out_dir),
            "--workers",
            workers,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("master_seed=9"));
    }
    for name in ["summary.csv", "replicates.csv", "ledger.txt"] {
        assert_eq!(
            fs::read(one.join(name)).unwrap(),
            fs::read(eight.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn bench_reports_malformed_config_line() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("bad.grid");
    fs::write(
        &grid,
        "families = fbm\n# comment\nhurst = 0.5, oops\nlengths = 64\n",
    )
    .unwrap();
    let out = lamperti(&[
        "bench",
        "--grid",
        p(&grid),
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.grid:3:"), "{}", stderr(&out));

    fs::write(&grid, "families = fbm\nhurst = 0.5\nlengths 64\n").unwrap();
    let out = lamperti(&[
        "bench",
        "--grid",
        p(&grid),
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.grid:3:"), "{}", stderr(&out));
}

#[test]
fn bundled_table1_grid_has_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(grids_dir().join("table1.grid")).unwrap();
    let small = text.replace("reps = 200", "reps = 2");
    let grid = dir.path().join("t1.grid");
    fs::write(&grid, small).unwrap();
    let out = lamperti(&["bench", "--grid", p(&grid), "--out-dir", p(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(
        lines[0],
        "family,H_true,K_true,index_true,sigma2,N,reps,algorithm,mean_estimate,mse,rmse,failures"
    );
    assert_eq!(lines.len(), 17);
}

#[test]
fn bundled_heatmap_rows_decrease_in_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = lamperti(&[
        "bench",
        "--grid",
        p(&grids_dir().join("heatmap.grid")),
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let heat = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|f| {
            f.file_name()
                .unwrap()
                .to_str()
                .unwrap()
                .starts_with("heatmap")
        })
        .unwrap();
    let text = fs::read_to_string(heat).unwrap();
    let mut rows: Vec<(f64, usize, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 9 * 6);
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for row in rows.chunks(6) {
        for w in row.windows(2) {
            assert!(
                w[1].2 < w[0].2,
                "H = {}: rmse {} at N={} after {} at N={}",
                w[0].0,
                w[1].2,
                w[1].1,
                w[0].2,
                w[0].1
            );
        }
    }
}

#[test]
fn nile_window_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("series.txt");
    let values: Vec<String> = (0..663)
        .map(|i| format!("{}", 1000 + (i * 37) % 101))
        .collect();
    fs::write(&file, format!("# synthetic\n{}\n", values.join("\n"))).unwrap();
    let out = lamperti(&[
        "nile",
        "--file",
        p(&file),
        "--from-year",
        "1300",
        "--to-year",
        "1310",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let out = lamperti(&[
        "nile",
        "--file",
        p(&file),
        "--from-year",
        "900",
        "--to-year",
        "1200",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("window,900..1200,values,301,"));
}
