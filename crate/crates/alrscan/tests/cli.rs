//! End-to-end tests of the `alrscan` binary: exit codes, report determinism,
//! and the documented validation errors.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alrscan"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_point_csv(dir: &Path, name: &str, rows: &[(f64, f64, u8)]) -> std::path::PathBuf {
    let mut text = String::from("id,x,y,case\n");
    for (i, (x, y, c)) in rows.iter().enumerate() {
        text.push_str(&format!("{},{x},{y},{c}\n", i + 1));
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn demo_rows(n: usize, seed: u64) -> Vec<(f64, f64, u8)> {
    // deterministic scatter with a mild cluster of cases near the origin
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|i| {
            let x = next();
            let y = next();
            let near = (x * x + y * y).sqrt() < 0.4;
            let p = if near { 0.35 } else { 0.1 };
            let c = u8::from(next() < p);
            let _ = i;
            (x, y, c)
        })
        .collect()
}

#[test]
fn analyze_reports_are_byte_identical_across_threads_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_point_csv(dir.path(), "pts.csv", &demo_rows(120, 5));
    let args = |threads: &str| {
        vec![
            "analyze".to_string(),
            format!("--data={}", csv.display()),
            "--windows=knn:jmax=6".to_string(),
            "--stat=alr".to_string(),
            "--alt=one".to_string(),
            "--pvalue=chi2".to_string(),
            "--pvalue=gdist".to_string(),
            "--pvalue=perm:L=500".to_string(),
            "--seed=42".to_string(),
            format!("--threads={threads}"),
        ]
    };
    let a = bin().args(args("1")).output().unwrap();
    let b = bin().args(args("2")).output().unwrap();
    let c = bin().args(args("1")).output().unwrap();
    assert!(a.status.success());
    assert_eq!(
        stdout_str(&a),
        stdout_str(&b),
        "thread count changed the report"
    );
    assert_eq!(stdout_str(&a), stdout_str(&c), "rerun changed the report");

    let report: serde_json::Value = serde_json::from_str(&stdout_str(&a)).unwrap();
    assert_eq!(report["schema"], 1);
    let pvalues = report["pvalues"].as_array().unwrap();
    assert_eq!(pvalues.len(), 3);
    let mut methods: Vec<&str> = pvalues
        .iter()
        .map(|p| p["method"].as_str().unwrap())
        .collect();
    methods.sort_unstable();
    methods.dedup();
    assert_eq!(
        methods.len(),
        3,
        "every requested method appears exactly once"
    );
    for p in pvalues {
        let v = p["p"].as_f64().unwrap();
        assert!(v > 0.0 && v <= 1.0);
    }
}

#[test]
fn walr_weight_normalization_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_point_csv(dir.path(), "pts.csv", &demo_rows(30, 9));
    // knn:jmax=2 over 30 distinct sites -> 60 windows; write 60 bad weights
    let weights = dir.path().join("weights.txt");
    std::fs::write(
        &weights,
        format!("{}", 0.9 / 60.0).repeat(1).to_string() + "\n",
    )
    .unwrap();
    let text: String = (0..60).map(|_| format!("{}\n", 0.9 / 60.0)).collect();
    std::fs::write(&weights, text).unwrap();
    let out = run(&[
        "analyze",
        &format!("--data={}", csv.display()),
        "--windows=knn:jmax=2",
        "--stat",
        &format!("walr:weights={}", weights.display()),
        "--alt=two",
        "--pvalue=chi2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_str(&out);
    assert!(
        err.contains("normalized") || err.contains("sum to 1"),
        "message should cite normalization: {err}"
    );
}

#[test]
fn bad_case_label_exits_2_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "id,x,y,case\n1,0,0,1\n2,1,0,0\n3,2,0,2\n").unwrap();
    let out = run(&[
        "analyze",
        &format!("--data={}", path.display()),
        "--windows=knn:jmax=1",
        "--stat=scan",
        "--pvalue=chi2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("line 4"), "{}", stderr_str(&out));
}

#[test]
fn risk_without_covariates_is_a_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_point_csv(dir.path(), "pts.csv", &demo_rows(40, 2));
    let out = run(&[
        "analyze",
        &format!("--data={}", csv.display()),
        "--windows=knn:jmax=2",
        "--stat=scan",
        "--pvalue=risk:L=99",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("--covariates"));
}

#[test]
fn duplicate_pvalue_method_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_point_csv(dir.path(), "pts.csv", &demo_rows(20, 3));
    let out = run(&[
        "analyze",
        &format!("--data={}", csv.display()),
        "--windows=knn:jmax=2",
        "--stat=alr",
        "--pvalue=chi2",
        "--pvalue=chi2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("more than once"));
}

#[test]
fn laryngeal_format_summary_counts() {
    // 58 cases merged with 978 controls in the published format
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("id,x,y,case\n");
    let mut k = 0u64;
    for i in 0..1036 {
        k = k
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let x = 34500.0 + ((k >> 20) % 2000) as f64;
        k = k
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let y = 41100.0 + ((k >> 20) % 2000) as f64;
        let case = u8::from(i < 58);
        text.push_str(&format!("{},{x},{y},{case}\n", i + 1));
    }
    let path = dir.path().join("laryngeal_format.csv");
    std::fs::write(&path, text).unwrap();
    let out = run(&[
        "analyze",
        &format!("--data={}", path.display()),
        "--windows=grid:w=40,s=10,o=5,min=2,domain=34500:36500:41100:43100",
        "--stat=alr",
        "--alt=one",
        "--pvalue=chi2",
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["dataset"]["subjects"], 1036);
    assert_eq!(report["dataset"]["cases"], 58);
}

#[test]
fn aggregated_data_is_autodetected_and_expanded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tracts.csv");
    let mut text = String::from("id,x,y,cases,population\n");
    for j in 0..12 {
        let m = if j == 3 { 4 } else { j % 2 };
        text.push_str(&format!(
            "{},{}.5,{}.25,{m},{}\n",
            j + 1,
            j % 4,
            j / 4,
            40 + j
        ));
    }
    std::fs::write(&path, text).unwrap();
    let out = run(&[
        "analyze",
        &format!("--data={}", path.display()),
        "--windows=allpairs:wmax=1.5",
        "--stat=scan",
        "--alt=two",
        "--pvalue=chi2",
        "--pvalue=perm:L=300",
        "--seed=8",
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["dataset"]["kind"], "aggregated");
    let total: u64 = (0..12).map(|j| 40 + j).sum();
    assert_eq!(report["dataset"]["subjects"], total);
    assert!(report["statistics"][0]["argmax"]["provenance"]
        .as_str()
        .unwrap()
        .contains("circle"));
}

#[test]
fn simulate_qq_writes_shape_contract_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("qq.cfg");
    std::fs::write(
        &cfg,
        "mode = gaussian\nlocations = 10\nw1 = 0.2\nreplicates = 400\n",
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "--experiment=qq",
        &format!("--config={}", cfg.display()),
        "--seed=4",
        &format!("--out={}", dir.path().display()),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    for name in ["qq_two_sided.tsv", "qq_one_sided.tsv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines.len(),
            401,
            "{name}: header plus one row per replicate"
        );
        assert!(lines[1..].iter().all(|l| l.split('\t').count() == 3));
    }
    assert!(dir.path().join("qq.json").exists());
}

#[test]
fn simulate_unknown_experiment_exits_2() {
    let out = run(&["simulate", "--experiment=example99"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("unknown experiment"));
}

#[test]
fn simulate_example1_writes_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ex1.cfg");
    std::fs::write(
        &cfg,
        "replicates = 12\nmc_replicates = 49\ntheta = 0, 0.3\nblock_size = 60\n",
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "--experiment=example1",
        &format!("--config={}", cfg.display()),
        "--seed=1",
        &format!("--out={}", dir.path().display()),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let text = std::fs::read_to_string(dir.path().join("example1.tsv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // header + one row per theta; rate columns for two alphas and two methods
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0].split('\t').count(), 6);
}

#[test]
fn dump_windows_writes_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_point_csv(dir.path(), "pts.csv", &demo_rows(25, 12));
    let dump = dir.path().join("windows.tsv");
    let out = run(&[
        "analyze",
        &format!("--data={}", csv.display()),
        "--windows=knn:jmax=3",
        "--stat=scan",
        "--pvalue=chi2",
        &format!("--dump-windows={}", dump.display()),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("window\tprovenance\tn\tm\tscore\n"));
    assert_eq!(text.lines().count(), 76);
}
