//! End-to-end checks of the `jamlab` command-line interface.

use std::path::Path;
use std::process::Command;

fn jamlab(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_jamlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = jamlab(dir, args);
    assert!(
        out.status.success(),
        "jamlab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn model_fd_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["model", "fd", "--out", "fd.csv", "--points", "21"],
    );
    let text = read(dir.path(), "fd.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rho,Q_smooth,Q_nd,Q_greenshields");
    assert_eq!(lines.len(), 22);
    let last: Vec<f64> = lines[21].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 1.0 / 7.5).abs() < 1e-15);
    assert!(last[1].abs() < 1e-12 && last[3].abs() < 1e-12);
}

#[test]
fn jamiton_construct_and_fd() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "jamiton",
            "construct",
            "--rho-s",
            "0.433",
            "--v-minus",
            "26",
            "--samples",
            "200",
            "--out",
            "p.csv",
        ],
    );
    assert!(stdout.contains("m = 0.3559"));
    let text = read(dir.path(), "p.csv");
    for key in ["# m = ", "# s = ", "# L = ", "# N = ", "# A = "] {
        assert!(text.contains(key), "missing {key}");
    }
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "x,v,rho,u");
    assert_eq!(rows.len(), 201);

    ok(
        dir.path(),
        &["jamiton", "fd", "--out", "e.csv", "--points", "10"],
    );
    let text = read(dir.path(), "e.csv");
    assert!(text.starts_with("rho_s,s,m,rho_M,q_M,rho_R,q_R,rho_star,q_star"));
    assert!(text.lines().filter(|l| !l.starts_with('#')).count() >= 9);
}

#[test]
fn construct_rejects_stable_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = jamlab(
        dir.path(),
        &[
            "jamiton",
            "construct",
            "--rho-s",
            "0.1",
            "--v-minus",
            "26",
            "--out",
            "p.csv",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no jamiton"));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "ic = \"jamiton\"\nrho_s = 0.433\nv_minus = 26.0\nn_cells = 160\ncfl = 0.5\ntau = 5.0\nt_final = 1.0\nsnapshot_stride = 20\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &["simulate", "--config", "run.cfg", "--out", "traj.csv"],
    );
    let text = read(dir.path(), "traj.csv");
    let blocks = text.lines().filter(|l| l.starts_with("t,")).count();
    assert!(blocks >= 2);
    assert!(text.contains("t,1\n"));
    let est = ok(dir.path(), &["estimate", "--in", "traj.csv", "--t", "1"]);
    let s: f64 = est
        .lines()
        .find_map(|l| l.strip_prefix("s_est = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((s - 6.3739).abs() < 0.01, "s_est = {s}");
    assert!(est.contains("rho_s_est"));
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.cfg"),
        "ic = \"jamiton\"\nnonsense = 3\n",
    )
    .unwrap();
    let out = jamlab(
        dir.path(),
        &["simulate", "--config", "bad.cfg", "--out", "t.csv"],
    );
    assert!(!out.status.success());
}

#[test]
fn collide_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "collide",
            "--rho-s-other",
            "0.443",
            "--rho-s-test",
            "0.425",
            "--v-minus",
            "25",
            "--cells",
            "160",
            "--out",
            "rec.csv",
        ],
    );
    assert!(stdout.contains("status = settled"));
    let text = read(dir.path(), "rec.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "rho_s_in,tau,s_out,m_out,L_out,A_out,rho_plus_out,E_L,t_settle,status"
    );
    assert!(lines[1].ends_with(",settled"));
}

#[test]
fn batch_is_worker_independent_and_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "batch-collide",
            "--candidates",
            "4",
            "--workers",
            "1",
            "--out",
            "b1.csv",
        ],
    );
    ok(
        dir.path(),
        &[
            "batch-collide",
            "--candidates",
            "4",
            "--workers",
            "4",
            "--out",
            "b4.csv",
        ],
    );
    let b1 = read(dir.path(), "b1.csv");
    assert_eq!(b1, read(dir.path(), "b4.csv"));
    assert_eq!(b1.lines().count(), 5);

    ok(
        dir.path(),
        &[
            "sweep-tau",
            "--taus",
            "1,5",
            "--candidates",
            "2",
            "--out",
            "sweep.csv",
        ],
    );
    assert_eq!(read(dir.path(), "sweep.csv").lines().count(), 5);
}

#[test]
fn accuracy_table_small() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "accuracy-table",
            "--cells",
            "20,40",
            "--taus",
            "5",
            "--times",
            "0.5,2",
            "--out",
            "acc.csv",
        ],
    );
    let text = read(dir.path(), "acc.csv");
    assert!(text.starts_with("N,tau,t,eps_rho,eps_u,eps_s,eps_m"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn params_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.toml"), "u_max = 30.0\n").unwrap();
    ok(
        dir.path(),
        &[
            "--params", "m.toml", "model", "fd", "--out", "fd.csv", "--points", "3",
        ],
    );
    let default = tempfile::tempdir().unwrap();
    ok(
        default.path(),
        &["model", "fd", "--out", "fd.csv", "--points", "3"],
    );
    assert_ne!(read(dir.path(), "fd.csv"), read(default.path(), "fd.csv"));
    std::fs::write(dir.path().join("bad.toml"), "speed = 30.0\n").unwrap();
    let out = jamlab(
        dir.path(),
        &["--params", "bad.toml", "model", "fd", "--out", "x.csv"],
    );
    assert!(!out.status.success());
}
