use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use matml::io::Table;
use matml_cli::{emit_plot_data, sha256_hex};

fn matml(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matml")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let o = matml(args, cwd);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

/// Every CSV below `dir`, keyed by relative path.
fn csvs(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Runs `args` twice into `a/` and `b/` and compares all CSVs.
fn assert_deterministic(cwd: &Path, args: &[&str]) {
    for d in ["a", "b"] {
        let mut full = args.to_vec();
        full.extend(["--out-dir", d]);
        ok(&full, cwd);
    }
    let (a, b) = (csvs(&cwd.join("a")), csvs(&cwd.join("b")));
    assert!(!a.is_empty(), "{args:?} wrote no CSV");
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{args:?}: {} differs between runs", k.display());
    }
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = matml(&["transmogrify"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_input_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = matml(&["vsi", "--chi", "absent_chi.csv", "--y", "absent_y.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("absent_y.csv") && err.lines().count() == 1, "{err}");
    let o = matml(&["dns", "--solver", "allen-cahn", "--config", "nowhere.ini"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.ini"));
}

#[test]
fn config_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.ini", "[AllenCahn]\nsteps = 5\nbogus = 1\n");
    let o = matml(&["dns", "--solver", "allen-cahn", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = matml(&["dns", "--solver", "allen-cahn", "--set", "AllenCahn.dt=-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn vsi_contract_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // y = 2 a - 0.5 b exactly, c is spurious
    let mut chi = String::from("a,b,c\n");
    let mut y = String::from("y\n");
    for i in 0..40 {
        let t = i as f64 * 0.1;
        let (a, b, c) = (t.sin(), (1.3 * t).cos(), t * t - 1.0);
        chi.push_str(&format!("{a},{b},{c}\n"));
        y.push_str(&format!("{}\n", 2.0 * a - 0.5 * b));
    }
    write(d, "chi.csv", &chi);
    write(d, "y.csv", &y);
    let cfg = write(
        d,
        "cfg.ini",
        "[VSI]\ndata_dir=N/A\nidentify_strategy= specified_target\ntarget_index= 0\n\n[StepwiseRegression]\nbasis_drop_strategy = most_inignificant\nregression_method = ridge\nalpha_ridge = 1.0e-5\nF_criteria=1\n",
    );
    ok(
        &["vsi", "--config", cfg.to_str().unwrap(), "--chi", "chi.csv", "--y", "y.csv", "--set", "StepwiseRegression.regression_method=ols"],
        d,
    );
    let out = d.join("out");
    let model = Table::read_csv(&out.join("model.csv"));
    assert!(model.is_err(), "model.csv has a text label column");
    let text = std::fs::read_to_string(out.join("model.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "{text}");
    assert!(rows[0].starts_with("a,2.0000000") || rows[0].starts_with("a,1.9999999"), "{text}");
    assert!(out.join("trace.csv").is_file());

    let m = manifest(&out);
    assert_eq!(m["subcommand"], "vsi");
    assert!(m["config"].as_str().unwrap().contains("regression_method = ols"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
    for f in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
    }
}

#[test]
fn numbers_round_trip_with_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["dns", "--solver", "allen-cahn", "--set", "AllenCahn.steps=3", "--set", "AllenCahn.nodes=9"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("out/energy.csv")).unwrap();
    let cell = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let mantissa = cell.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{cell}");
}

#[test]
fn plot_data_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Table::new();
    t.push("iteration", vec![1.0, 2.0]).unwrap();
    t.push("loss", vec![0.5, 0.25]).unwrap();
    let p = dir.path().join("loss.csv");
    let written = emit_plot_data(&t, &p, true).unwrap();
    assert_eq!(written.len(), 2);
    let csv = std::fs::read_to_string(&p).unwrap();
    assert!(csv.lines().all(|l| l.split(',').count() == 2));
    let dat = std::fs::read_to_string(dir.path().join("loss.dat")).unwrap();
    assert!(dat.starts_with("# iteration loss\n") && dat.lines().count() == 3);

    let mut empty = Table::new();
    empty.push("eta_0", vec![]).unwrap();
    empty.push("f_hat", vec![]).unwrap();
    let p = dir.path().join("empty.csv");
    emit_plot_data(&empty, &p, false).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "eta_0,f_hat\n");

    let bad = dir.path().join("missing_dir/x.csv");
    assert!(emit_plot_data(&t, &bad, false).is_err());
}

#[test]
fn dns_is_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "dns", "--solver", "schnakenberg", "--seed", "7", "--set", "Schnakenberg.steps=3", "--set", "Schnakenberg.nodes=12",
        "--set", "Schnakenberg.library=true",
    ];
    assert_deterministic(d, &args);
    ok(&["dns", "--solver", "schnakenberg", "--seed", "8", "--set", "Schnakenberg.steps=3", "--set", "Schnakenberg.nodes=12", "--out-dir", "c"], d);
    assert_ne!(std::fs::read(d.join("a/c1_00000.csv")).unwrap(), std::fs::read(d.join("c/c1_00000.csv")).unwrap());
    assert_eq!(manifest(&d.join("a"))["seeds"]["initial_condition"], 7);

    let dir = tempfile::tempdir().unwrap();
    assert_deterministic(dir.path(), &["dns", "--solver", "allen-cahn", "--set", "AllenCahn.steps=10", "--set", "AllenCahn.init=kinks"]);
    let dir = tempfile::tempdir().unwrap();
    assert_deterministic(dir.path(), &["dns", "--solver", "steady-diffusion", "--set", "SteadyDiffusion.nodes=9"]);
}

#[test]
fn graph_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut pts = String::from("x_1,u\n");
    for i in 0..17 {
        let x = i as f64 / 16.0;
        pts.push_str(&format!("{x},{}\n", x * x));
    }
    write(d, "pts.csv", &pts);
    write(
        d,
        "g.ini",
        "model_order = 1\nmodel_p = 1\ndifferential_operations.0.function = u\ndifferential_operations.0.manifold = x_1\ndifferential_operations.0.dimension = 0\ndifferential_operations.0.order = 1\ndifferential_operations.0.accuracy = 2\n",
    );
    assert_deterministic(d, &["graph", "--config", "g.ini", "--input", "pts.csv"]);
    let t = Table::read_csv(&d.join("a/data.csv")).unwrap();
    let (x, du) = (t.column("x_1").unwrap(), t.column("du/dx_1").unwrap());
    for (x, du) in x.iter().zip(du) {
        assert!((du - 2.0 * x).abs() < 1e-9, "{x} {du}");
    }
}

#[test]
fn idnn_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut data = String::from("x_1,x_2,dy_1,dy_2\n");
    for i in 0..30 {
        let (x, y) = ((i % 6) as f64 / 5.0 - 0.5, (i / 6) as f64 / 4.0 - 0.5);
        data.push_str(&format!("{x},{y},{},{}\n", 2.0 * x, 4.0 * y * y * y));
    }
    write(d, "data.csv", &data);
    write(d, "net.ini", "[IDNN]\nhidden = 6,6\ntransforms = identity:0, square:1\n[Training]\nepochs = 20\nbatch_size = 8\n");
    assert_deterministic(d, &["idnn", "train", "--config", "net.ini", "--data", "data.csv", "--seed", "2"]);
    assert_eq!(std::fs::read(d.join("a/idnn.txt")).unwrap(), std::fs::read(d.join("b/idnn.txt")).unwrap());

    let e = tempfile::tempdir().unwrap();
    let model = d.join("a/idnn.txt");
    let pts = d.join("data.csv");
    assert_deterministic(e.path(), &["idnn", "eval", "--model", model.to_str().unwrap(), "--points", pts.to_str().unwrap()]);
    let t = Table::read_csv(&e.path().join("a/eval.csv")).unwrap();
    assert_eq!(t.names(), ["x_1", "x_2", "f", "dy_1", "dy_2"]);

    let s = tempfile::tempdir().unwrap();
    assert_deterministic(s.path(), &["idnn", "convexity-scan", "--model", model.to_str().unwrap(), "--set", "Scan.resolution=4"]);
    let t = Table::read_csv(&s.path().join("a/convexity.csv")).unwrap();
    assert_eq!(t.nrows(), 16);
    // the transform makes the surface even in x_2
    let (x2, f) = (t.column("x_2").unwrap(), t.column("min_eigenvalue").unwrap());
    for i in 0..4 {
        assert_eq!(x2[i], -x2[12 + i]);
        assert_eq!(f[i], f[12 + i]);
    }
}

#[test]
fn active_learning_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "al.ini",
        "[ActiveLearning]\nrounds = 3\nglobal_initial = 24\nglobal_batch = 8\nlocal_batch = 8\nscreening_batch = 32\nhidden = 4,4\nsearch_grid = 4,4; 6\nsearch_epochs = 4\nepochs = 6\nslice_resolution = 4\n",
    );
    assert_deterministic(d, &["active-learning", "--config", "al.ini", "--seed", "11", "--gnuplot"]);
    for r in 0..3 {
        assert!(d.join(format!("a/slice_round_{r:02}.csv")).is_file());
        assert!(d.join(format!("a/slice_round_{r:02}.dat")).is_file());
    }
    assert_eq!(manifest(&d.join("a"))["seeds"]["workflow"], 11);
}

#[test]
fn allen_cahn_rom_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "rom.ini", "[AllenCahn]\nsteps = 40\nnodes = 48\n[Ensemble]\ntrajectories = 24\n");
    assert_deterministic(d, &["allen-cahn-rom", "--config", "rom.ini"]);
    for b in ["B1", "B2", "B3"] {
        let text = std::fs::read_to_string(d.join(format!("a/table1_{b}.csv"))).unwrap();
        assert!(text.starts_with("iteration,n_terms,loss,"), "{text}");
        let loss = Table::read_csv(&d.join(format!("a/loss_{b}.csv"))).unwrap();
        assert_eq!(loss.names(), ["iteration", "n_terms", "loss"]);
    }
}
