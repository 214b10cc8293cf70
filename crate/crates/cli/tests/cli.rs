//! End-to-end checks of the command-line surface: subcommand chains, exit
//! codes, emitted files, and the worker-count environment override.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ranktwo"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn gen_solve_certify_chain() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("inst");
    let status = bin()
        .args(["gen", "--model", "z2", "--n", "40", "--sigma", "0.4", "--seed", "9"])
        .arg("--out")
        .arg(&prefix)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(prefix.with_extension("coord").exists());
    assert!(prefix.with_extension("json").exists());

    let report = dir.path().join("report.json");
    let point = dir.path().join("q.txt");
    let status = bin()
        .arg("solve")
        .arg("--matrix")
        .arg(prefix.with_extension("coord"))
        .args(["--seed", "2", "--set", "grad_tol=1e-7"])
        .arg("--out")
        .arg(&report)
        .arg("--point-out")
        .arg(&point)
        .status()
        .unwrap();
    assert!(status.success());
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["status"], "converged");
    assert!(rep["point"].as_str().unwrap().lines().count() == 40);

    let cert = dir.path().join("cert.json");
    let status = bin()
        .arg("certify")
        .arg("--matrix")
        .arg(prefix.with_extension("coord"))
        .arg("--point")
        .arg(&point)
        .arg("--labels")
        .arg(prefix.with_extension("json"))
        .arg("--out")
        .arg(&cert)
        .status()
        .unwrap();
    assert!(status.success());
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(cert["verdict"], "global-unique-ground-truth");
}

#[test]
fn gen_sbm_and_sparse_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("graph");
    let status = bin()
        .args(["gen", "--model", "sbm", "--n", "60", "--a", "30", "--b", "3", "--seed", "4"])
        .arg("--out")
        .arg(&prefix)
        .status()
        .unwrap();
    assert!(status.success());
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["model"], "sbm");
    assert_eq!(sidecar["labels"].as_array().unwrap().len(), 60);
}

#[test]
fn sbm_solve_with_centering_recovers_partition() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("g");
    assert!(bin()
        .args(["gen", "--model", "sbm", "--n", "80", "--a", "40", "--b", "2", "--seed", "5"])
        .arg("--out")
        .arg(&prefix)
        .status()
        .unwrap()
        .success());
    // (p + q) / 2 = (a + b) / (2 n)
    let shift = (40.0 + 2.0) / (2.0 * 80.0);
    let point = dir.path().join("q.txt");
    assert!(bin()
        .arg("solve")
        .arg("--matrix")
        .arg(prefix.with_extension("coord"))
        .args(["--shift", &shift.to_string(), "--seed", "1"])
        .arg("--point-out")
        .arg(&point)
        .status()
        .unwrap()
        .success());
    let cert = dir.path().join("cert.json");
    assert!(bin()
        .arg("certify")
        .arg("--matrix")
        .arg(prefix.with_extension("coord"))
        .args(["--shift", &shift.to_string()])
        .arg("--point")
        .arg(&point)
        .arg("--labels")
        .arg(prefix.with_extension("json"))
        .arg("--out")
        .arg(&cert)
        .status()
        .unwrap()
        .success());
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    // strong signal: the partition is certified as the unique optimum
    assert_eq!(cert["q_rank"], 1, "{cert}");
}

#[test]
fn sweep_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    let out = dir.path().join("rows.csv");
    write(
        &cfg,
        &format!(
            "experiment = z2-sweep\nn = 30\nz2.lambda = 8\ntrials = 2\nrestarts = 2\n\
             master_seed = 5\noutput = {}\n",
            out.display()
        ),
    );
    let status = bin().arg("sweep").arg("--config").arg(&cfg).status().unwrap();
    assert!(status.success());
    let table = std::fs::read_to_string(&out).unwrap();
    assert_eq!(table.lines().count(), 5); // header + 4 rows
    assert!(table.starts_with("experiment,seed,n,"));
    let manifest_path = dir.path().join("rows.csv.manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["rows"], 4);
    assert_eq!(manifest["master_seed"], 5);
}

#[test]
fn sbm_rows_leave_z2_fields_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    let out = dir.path().join("rows.json");
    write(
        &cfg,
        &format!(
            "experiment = sbm-sweep\nn = 40\nsbm.a = 20\nsbm.b = 2\ntrials = 1\nrestarts = 1\n\
             master_seed = 6\nformat = json\noutput = {}\n",
            out.display()
        ),
    );
    assert!(bin().arg("sweep").arg("--config").arg(&cfg).status().unwrap().success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(rows[0]["sigma"].is_null());
    assert!(rows[0]["lambda"].is_null());
    assert!(rows[0]["a"].is_number());
}

#[test]
fn failing_assertion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    write(
        &cfg,
        &format!(
            "experiment = z2-sweep\nn = 30\nz2.sigma = 30\ntrials = 2\nrestarts = 1\n\
             master_seed = 5\nassert.min_correlation = 0.99\noutput = {}\n",
            dir.path().join("r.csv").display()
        ),
    );
    let status = bin().arg("sweep").arg("--config").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn config_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(&cfg, "experiment = z2-sweep\nn = 30\n"); // missing grid
    let status = bin().arg("sweep").arg("--config").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn missing_matrix_exits_two() {
    let status = bin()
        .args(["solve", "--matrix", "/nonexistent/m.coord"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn worker_env_var_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    let run = |workers: &str, out: &Path| {
        write(
            &cfg,
            &format!(
                "experiment = z2-sweep\nn = 30\nz2.lambda = 8\ntrials = 3\nrestarts = 1\n\
                 master_seed = 11\noutput = {}\n",
                out.display()
            ),
        );
        let status = bin()
            .arg("sweep")
            .arg("--config")
            .arg(&cfg)
            .env("RANKTWO_WORKERS", workers)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let strip_wall = |csv: &str| -> Vec<String> {
        csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let a = run("1", &dir.path().join("a.csv"));
    let b = run("4", &dir.path().join("b.csv"));
    assert_eq!(strip_wall(&a), strip_wall(&b));
}

#[test]
fn tails_subcommand_prints_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tails.cfg");
    write(
        &cfg,
        "experiment = tails\nn = 60\ntrials = 5\ntails.t_values = 2, 4\nmaster_seed = 1\n",
    );
    let output = bin().arg("tails").arg("--config").arg(&cfg).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("t=2"), "stdout: {text}");
}

#[test]
fn oracle_subcommand_reports_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("oracle.cfg");
    write(
        &cfg,
        "experiment = oracle-audit\nn = 10\nz2.sigma = 0.5\ntrials = 4\nmaster_seed = 3\n",
    );
    let output = bin().arg("oracle").arg("--config").arg(&cfg).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("counterexamples=0"), "stdout: {text}");
}
