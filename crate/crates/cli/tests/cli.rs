use std::path::Path;
use std::process::{Command, Output};

fn vrvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrvi"))
        .args(args)
        .env_remove("VRVI_SEED")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let out = dir.join(format!("{name}_out"));
    let text = format!("[experiment]\noutput = {}\nwall_clock = false\n{body}", out.display());
    let path = dir.join(format!("{name}.cfg"));
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

struct Trace {
    header: String,
    rows: Vec<Vec<String>>,
}

impl Trace {
    fn read(path: &Path) -> Trace {
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().to_string();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Trace { header, rows }
    }

    fn column(&self, name: &str) -> Vec<f64> {
        let k = self.header.split(',').position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[k].parse().unwrap()).collect()
    }
}

const SM: &str = "\
[problem]
kind = strongly_monotone
dim = 8
m1 = 6
m2 = 4
mu_h = 0.2
";

#[test]
fn zero_budget_writes_header_and_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero", &format!("budget = 0\nseeds = 4\n{SM}"));
    let out = vrvi(&["solve", "-c", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = Trace::read(&dir.path().join("zero_out/seed_4.csv"));
    assert_eq!(
        t.header,
        "iter,epoch,oracle_h_calls,oracle_g_calls,dist_sq,q_gap,res_norm,cons_viol,obj_gap,wall_ms"
    );
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0][0], "0");
    // no constraint metrics on an unconstrained instance
    assert_eq!(t.rows[0][7], "");
    assert_eq!(t.rows[0][8], "");
}

#[test]
fn identical_runs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("budget = 3000\nseeds = 1,2,3\n{SM}[noise]\nstd = 0.05\n");
    let files = ["seed_1.csv", "seed_3.csv", "mean.csv"];
    let mut runs = vec![];
    for name in ["a", "b"] {
        let cfg = write_config(dir.path(), name, &body);
        assert!(vrvi(&["solve", "-c", &cfg]).status.success());
        runs.push(files.map(|f| std::fs::read(dir.path().join(format!("{name}_out/{f}"))).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn env_seed_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "env", &format!("budget = 0\nseeds = 1\n{SM}"));
    let out = Command::new(env!("CARGO_BIN_EXE_vrvi"))
        .args(["solve", "-c", &cfg])
        .env("VRVI_SEED", "7,8")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("env_out/seed_7.csv").exists());
    assert!(dir.path().join("env_out/seed_8.csv").exists());
    assert!(!dir.path().join("env_out/seed_1.csv").exists());
}

#[test]
fn savrep_reaches_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tol",
        &format!("budget = 200000\nseeds = 1,2\ntol = 1e-8\n{SM}"),
    );
    let out = vrvi(&["solve", "-c", &cfg]);
    assert!(out.status.success());
    for s in [1, 2] {
        let d = Trace::read(&dir.path().join(format!("tol_out/seed_{s}.csv"))).column("dist_sq");
        assert!(*d.last().unwrap() <= 1e-8, "seed {s}: {:?}", d.last());
    }
}

#[test]
fn every_solver_runs_on_bilinear() {
    let dir = tempfile::tempdir().unwrap();
    for solver in ["savrep_m", "extragradient"] {
        let body = format!("solver = {solver}\nstart = random\nbudget = 20000\nseeds = 1\n[problem]\nkind = bilinear\nn_x = 4\nn_y = 4\nm1 = 4\nm2 = 3\n");
        let cfg = write_config(dir.path(), solver, &body);
        let out = vrvi(&["solve", "-c", &cfg]);
        assert!(
            out.status.success(),
            "{solver}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let q = Trace::read(&dir.path().join(format!("{solver}_out/seed_1.csv"))).column("q_gap");
        assert!(
            q.last().unwrap() < &(0.2 * q[0]),
            "{solver}: {} -> {}",
            q[0],
            q.last().unwrap()
        );
    }
}

#[test]
fn savrep_without_strong_monotonicity_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bil", "budget = 10\n[problem]\nkind = bilinear\n");
    assert_eq!(vrvi(&["solve", "-c", &cfg]).status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad",
        "budget = many\n[problem]\nkind = np\ndual_cap = 10\n",
    );
    let out = vrvi(&["solve", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    assert_eq!(vrvi(&["solve", "-c", "/nonexistent/x.cfg"]).status.code(), Some(2));
}

#[test]
fn verify_suites_and_injected_violation() {
    let ok = vrvi(&["verify", "params"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    assert_eq!(vrvi(&["verify", "projections"]).status.code(), Some(0));
    let bad = vrvi(&["verify", "params", "--inject-violation"]);
    assert_eq!(bad.status.code(), Some(4));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.contains("FAIL") && text.contains("gamma"), "{text}");
    assert_eq!(vrvi(&["verify", "nonsense"]).status.code(), Some(2));
}

#[test]
fn gen_then_solve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = write_config(dir.path(), "gen", SM);
    let bin = dir.path().join("p.bin");
    let out = vrvi(&["gen", "-c", &gen_cfg, "-o", bin.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(&std::fs::read(&bin).unwrap()[..5], b"VRVI1");

    let direct = write_config(dir.path(), "direct", &format!("budget = 5000\nseeds = 2\n{SM}"));
    let body = format!(
        "budget = 5000\nseeds = 2\n[problem]\nkind = file\npath = {}\n",
        bin.display()
    );
    let file = write_config(dir.path(), "file", &body);
    assert!(vrvi(&["solve", "-c", &direct]).status.success());
    assert!(vrvi(&["solve", "-c", &file]).status.success());
    let a = std::fs::read(dir.path().join("direct_out/seed_2.csv")).unwrap();
    let b = std::fs::read(dir.path().join("file_out/seed_2.csv")).unwrap();
    assert_eq!(a, b);
}

const NP: &str = "\
[problem]
kind = np
dual_cap = 10
n_features = 8
n0 = 60
n1 = 60
m1 = 4
m2 = 4
";

fn bench(dir: &Path, name: &str, mu: &str) -> std::path::PathBuf {
    let body = format!("budget = 60000\nseeds = 1\n{NP}[perturbation]\nmu = {mu}\n");
    let cfg = write_config(dir, name, &body);
    let out = vrvi(&["bench-np", "-c", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join(format!("{name}_out"))
}

#[test]
fn bench_np_perturbation_and_epoch_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let small = bench(dir.path(), "mu5", "1e-5");
    let large = bench(dir.path(), "mu3", "1e-3");

    let d5 = Trace::read(&small.join("savrep_seed_1.csv")).column("dist_sq");
    let d3 = Trace::read(&large.join("savrep_seed_1.csv")).column("dist_sq");
    assert!(
        d5.last().unwrap() < d3.last().unwrap(),
        "{:?} vs {:?}",
        d5.last(),
        d3.last()
    );

    // the residual of the constrained KKT operator settles at a nonzero level
    let r = Trace::read(&small.join("savrep_seed_1.csv")).column("res_norm");
    assert!(r.last().unwrap() < &(0.5 * r[0]));

    let m = Trace::read(&small.join("savrep_m_seed_1.csv"));
    let q = m.column("q_gap");
    let epochs = m.column("epoch");
    assert!(epochs.windows(2).all(|w| w[1] == w[0] + 1.0));
    assert!(q.len() > 10);
    for k in 3..q.len() - 1 {
        assert!(q[k + 1] < q[k], "epoch {k}: {} -> {}", q[k], q[k + 1]);
    }
    let viol = m.column("cons_viol");
    assert!(viol.iter().all(|v| *v >= 0.0));
}

#[test]
fn bench_np_rejects_other_problems() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "x",
        &format!("budget = 10\n{SM}[perturbation]\nmu = 1e-3\n"),
    );
    assert_eq!(vrvi(&["bench-np", "-c", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "y", &format!("budget = 10\n{NP}"));
    assert_eq!(vrvi(&["bench-np", "-c", &cfg]).status.code(), Some(2));
}
