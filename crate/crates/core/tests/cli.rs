use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chimera-bm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let s = ok(&bin(&["generate", "--fcl", "1", "--seed", "3"], &a));
    assert!(s.contains("32 nodes, 80 edges; 16 minima, 8 ground, gap 4"), "{s}");
    ok(&bin(&["generate", "--fcl", "1", "--seed", "3"], &b));
    for f in ["model.json", "catalog.json", "spec.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(a.join("manifest.json").exists());
}

#[test]
fn grid_generation() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(&bin(
        &[
            "generate",
            "--fcl-grid",
            "--n",
            "5",
            "--intra=-1.5,-2.5",
            "--inter=-0.5,-0.25,0.38",
            "--frustrate-all",
        ],
        dir.path(),
    ));
    assert!(s.starts_with("200 nodes, 560 edges"), "{s}");
}

#[test]
fn sample_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = d.join("gen");
    ok(&bin(&["generate", "--fcl", "2"], &gen));
    let model = gen.join("model.json");
    let catalog = gen.join("catalog.json");
    let m = model.to_str().unwrap();
    let c = catalog.to_str().unwrap();

    let smp = d.join("sample");
    let s = ok(&bin(
        &[
            "sample",
            "--model",
            m,
            "--catalog",
            c,
            "--sampler",
            "exact",
            "--count",
            "5000",
        ],
        &smp,
    ));
    assert!(s.contains("KL over modes"), "{s}");
    let text = std::fs::read_to_string(smp.join("samples.txt")).unwrap();
    assert!(text.starts_with("n=32 count=5000"));
    assert!(smp.join("histogram.csv").exists());

    let tr = d.join("train");
    ok(&bin(
        &[
            "train",
            "--model",
            m,
            "--method",
            "seeded",
            "--iterations",
            "20",
            "--eval-every",
            "5",
            "--chains",
            "200",
        ],
        &tr,
    ));
    let trace = std::fs::read_to_string(tr.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 5);

    let ev = d.join("eval");
    let learned = tr.join("learned.json");
    let test = tr.join("test.txt");
    let samples = smp.join("samples.txt");
    let s = ok(&bin(
        &[
            "eval",
            "--model",
            learned.to_str().unwrap(),
            "--test",
            test.to_str().unwrap(),
            "--truth",
            m,
            "--catalog",
            c,
            "--samples",
            samples.to_str().unwrap(),
        ],
        &ev,
    ));
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    for k in ["test_log_likelihood", "empirical_kl", "kl_estimate", "kl_over_modes"] {
        assert!(v[k].as_f64().unwrap().is_finite(), "{k}");
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["generate", "--fcl", "9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = bin(&["reproduce", "no-such-figure"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("annealed-schedule"));
    let missing = dir.path().join("missing.json");
    let o = bin(
        &["eval", "--model", missing.to_str().unwrap(), "--test", "x.txt"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn training_divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&bin(&["generate", "--fcl", "1"], &gen));
    let o = bin(
        &[
            "train",
            "--model",
            gen.join("model.json").to_str().unwrap(),
            "--method",
            "exact",
            "--eta",
            "1e308",
            "--iterations",
            "5",
        ],
        &dir.path().join("train"),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
