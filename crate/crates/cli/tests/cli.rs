use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vflgan_cli::commands::{
    cmd_audit, cmd_eval, cmd_generate, cmd_train, CheckpointChoice, TrainReport,
};
use vflgan_cli::config::{RunConfig, Selection};
use vflgan_cli::manifest::{RunManifest, RunStatus};
use vflgan_cli::CliError;

const BIN: &str = env!("CARGO_BIN_EXE_vflgan");

fn vflgan(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `alpha·T/(2σ²) + ln(1/δ)/(α−1)` minimized over integer orders.
fn grid_oracle(sigma: f64, steps: f64, delta: f64) -> (f64, u32) {
    (2..=512u32)
        .map(|a| {
            let af = a as f64;
            (
                steps * af / (2.0 * sigma * sigma) + (1.0 / delta).ln() / (af - 1.0),
                a,
            )
        })
        .fold((f64::INFINITY, 0), |b, x| if x.0 < b.0 { x } else { b })
}

fn field(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

struct Toy {
    dir: tempfile::TempDir,
}

impl Toy {
    /// 40 records of two correlated numbers and a three-level category.
    fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from("a,b,c\n");
        for i in 0..40 {
            let a = ((i * 7919) % 97) as f64 / 10.0;
            let b = 0.5 * a + ((i * 31) % 11) as f64 / 5.0;
            csv.push_str(&format!("{a},{b},{}\n", ["x", "y", "z"][i % 3]));
        }
        std::fs::write(dir.path().join("toy.csv"), csv).unwrap();
        let cfg = format!(
            r#"config_version = 1
seed = 3
variant = "VFLGAN"

[data]
path = "toy.csv"

[data.schema]
target = "c"
attributes = [
  {{ name = "a", kind = "continuous" }},
  {{ name = "b", kind = "continuous" }},
  {{ name = "c", kind = "categorical", categories = ["x", "y", "z"] }},
]

[split]
parties = [[0, 2], [1]]

[gan]
latent_dim = 4
gen_hidden = [8]
disc_hidden = [8]
feature_width = 4
disc2_hidden = [4]
server_hidden = [4]
batch_size = 8
disc_steps = 2
epochs = 5
{extra}
"#
        );
        std::fs::write(dir.path().join("toy.toml"), cfg).unwrap();
        Toy { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("toy.toml")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn accountant_report_matches_grid_oracle() {
    let o = vflgan(&[
        "accountant",
        "report",
        "--sigma",
        "1",
        "--gamma",
        "1",
        "--steps",
        "1",
        "--delta",
        "1e-5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let (eps, alpha) = grid_oracle(1.0, 1.0, 1e-5);
    assert!((field(&out, "epsilon") - eps).abs() < 1e-12);
    assert!(out.contains(&format!("(alpha {alpha})")));
    assert_eq!(alpha, 6);
    assert!((eps - 5.3026).abs() < 1e-4);
    // Full curve: header plus one line per order 2..=512.
    let curve: Vec<&str> = out
        .lines()
        .skip_while(|l| *l != "alpha,rdp_epsilon")
        .skip(1)
        .collect();
    assert_eq!(curve.len(), 511);
    assert_eq!(curve[0], "2,1");
}

#[test]
fn accountant_calibrate_round_trips_through_report() {
    let o = vflgan(&[
        "accountant",
        "calibrate",
        "--epsilon",
        "10",
        "--delta",
        "5e-4",
        "--gamma",
        "0.04",
        "--steps",
        "1500",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let (sigma, eps) = (field(&out, "sigma"), field(&out, "epsilon"));
    assert!(eps <= 10.0 && eps > 9.9, "ε′ = {eps}");
    let o = vflgan(&[
        "accountant",
        "report",
        "--sigma",
        &sigma.to_string(),
        "--gamma",
        "0.04",
        "--steps",
        "1500",
        "--delta",
        "5e-4",
    ]);
    assert_eq!(field(&stdout(&o), "epsilon"), eps);
}

#[test]
fn invalid_accountant_input_exits_nonzero() {
    let o = vflgan(&[
        "accountant",
        "report",
        "--sigma",
        "1",
        "--gamma",
        "1.5",
        "--steps",
        "1",
        "--delta",
        "1e-5",
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "), "{}", stderr(&o));
    let o = vflgan(&[
        "accountant",
        "calibrate",
        "--epsilon",
        "1e-9",
        "--delta",
        "1e-5",
        "--gamma",
        "1",
        "--steps",
        "1000",
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("infeasible"), "{}", stderr(&o));
}

#[test]
fn train_writes_the_run_layout_and_is_deterministic() {
    let toy = Toy::new("");
    let a = cmd_train(&toy.config(), None, Some(toy.out("a"))).unwrap();
    let b = cmd_train(&toy.config(), None, Some(toy.out("b"))).unwrap();
    let m = RunManifest::load(&a).unwrap();
    assert_eq!(m.status, RunStatus::Complete);
    assert_eq!(m.rows, 40);
    m.verify(&a).unwrap();
    for rel in [
        "config.toml",
        "checkpoints/encoder.json",
        "checkpoints/best.ckpt",
        "checkpoints/best.ckpt.toml",
        "checkpoints/final.ckpt",
        "checkpoints/final.ckpt.toml",
        "logs/train_log.csv",
        "reports/train.json",
    ] {
        assert!(m.file(rel).is_some(), "{rel} not in manifest");
        assert_eq!(
            read(&a.join(rel)),
            read(&b.join(rel)),
            "{rel} differs between identical runs"
        );
    }
    let log = String::from_utf8(read(&a.join("logs/train_log.csv"))).unwrap();
    assert_eq!(log.lines().count(), 1 + 5);
    assert_eq!(read(&a.join("config.toml")), read(&toy.config()));

    let c = cmd_train(&toy.config(), Some(4), Some(toy.out("c"))).unwrap();
    assert_ne!(
        read(&a.join("checkpoints/final.ckpt")),
        read(&c.join("checkpoints/final.ckpt"))
    );
    let report: TrainReport = serde_json::from_slice(&read(&c.join("reports/train.json"))).unwrap();
    assert_eq!(report.seed, 4);
}

#[test]
fn train_refuses_a_used_directory_and_bad_configs_before_writing() {
    let toy = Toy::new("");
    let dir = cmd_train(&toy.config(), None, Some(toy.out("run"))).unwrap();
    assert!(matches!(
        cmd_train(&toy.config(), None, Some(dir)),
        Err(CliError::DirtyOutput(_))
    ));

    let bad = Toy::new("batch_size = 400");
    let out = bad.out("never");
    assert!(cmd_train(&bad.config(), None, Some(out.clone())).is_err());
    assert!(!out.exists());

    let text = std::fs::read_to_string(toy.config()).unwrap();
    for (from, to) in [
        ("config_version = 1", "config_version = 2"),
        ("epochs = 5", "epochs = 5\nwarmup = 1"),
        ("parties = [[0, 2], [1]]", "parties = [[0, 2], [1, 2]]"),
    ] {
        let path = toy.out("bad.toml");
        std::fs::write(&path, text.replace(from, to)).unwrap();
        assert!(
            cmd_train(&path, None, Some(toy.out("bad"))).is_err(),
            "{to}"
        );
        assert!(!toy.out("bad").exists());
    }
    let o = vflgan(&["train", "--config", toy.out("bad.toml").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn divergent_training_leaves_a_failed_manifest() {
    let toy = Toy::new("lr_g = 1e300\nlr_d = 1e300\nlr_ds = 1e300");
    let out = toy.out("run");
    let err = cmd_train(&toy.config(), None, Some(out.clone())).unwrap_err();
    assert!(err.to_string().contains("epoch"), "{err}");
    let m = RunManifest::load(&out).unwrap();
    assert_eq!(m.status, RunStatus::Failed);
    assert!(m.error.unwrap().contains("epoch"));
}

#[test]
fn dp_runs_record_the_calibrated_budget() {
    let toy = Toy::new("[dp]\nepsilon = 10.0\ndelta = 1e-3");
    let dir = cmd_train(&toy.config(), None, Some(toy.out("run"))).unwrap();
    let dp = RunManifest::load(&dir).unwrap().dp.expect("dp resolved");
    assert!(dp.accountant.epsilon <= 10.0);
    assert!(dp.accountant.internal_epsilon >= dp.accountant.epsilon);
    assert_eq!(dp.config.sampling_rate, 8.0 / 40.0);
    assert_eq!(dp.config.steps, 10);
    assert_eq!(dp.config.clip, 1.0);

    let text = std::fs::read_to_string(toy.config())
        .unwrap()
        .replace("\"VFLGAN\"", "\"VERTIGAN\"");
    std::fs::write(toy.config(), text).unwrap();
    assert!(matches!(
        cmd_train(&toy.config(), None, Some(toy.out("v"))),
        Err(CliError::Config(_))
    ));
}

#[test]
fn generate_sizes_seeds_and_tampering() {
    let toy = Toy::new("");
    let run = cmd_train(&toy.config(), None, Some(toy.out("run"))).unwrap();

    let p = cmd_generate(&run, None, 0, CheckpointChoice::Best, None).unwrap();
    assert_eq!(p, run.join("reports/synthetic.csv"));
    let text = String::from_utf8(read(&p)).unwrap();
    assert_eq!(text.lines().next(), Some("a,b,c"));
    assert_eq!(text.lines().count(), 41);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| ["x", "y", "z"].contains(&l.rsplit(',').next().unwrap())));
    RunManifest::load(&run).unwrap().verify(&run).unwrap();

    let same = cmd_generate(
        &run,
        None,
        0,
        CheckpointChoice::Best,
        Some(toy.out("same.csv")),
    )
    .unwrap();
    assert_eq!(read(&same), read(&p));
    let other = cmd_generate(
        &run,
        None,
        1,
        CheckpointChoice::Best,
        Some(toy.out("other.csv")),
    )
    .unwrap();
    assert_ne!(read(&other), read(&p));
    let empty = cmd_generate(
        &run,
        Some(0),
        0,
        CheckpointChoice::Final,
        Some(toy.out("empty.csv")),
    )
    .unwrap();
    assert_eq!(String::from_utf8(read(&empty)).unwrap(), "a,b,c\n");

    let ckpt = run.join("checkpoints/best.ckpt");
    let mut bytes = read(&ckpt);
    bytes[20] ^= 1;
    std::fs::write(&ckpt, bytes).unwrap();
    let err = cmd_generate(
        &run,
        None,
        0,
        CheckpointChoice::Best,
        Some(toy.out("x.csv")),
    )
    .unwrap_err();
    assert!(err.to_string().contains("digest"), "{err}");
    std::fs::remove_file(&ckpt).unwrap();
    let o = vflgan(&["generate", "--run", run.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing"), "{}", stderr(&o));
}

#[test]
fn eval_of_the_real_table_against_itself() {
    let toy = Toy::new("");
    let cfg = RunConfig::load(&toy.config()).unwrap();
    let real = toy.dir.path().join("toy.csv");
    let r = cmd_eval(&cfg, &real, None, None, 0, &toy.out("eval")).unwrap();
    assert!(r.fd.abs() < 1e-9, "fd {}", r.fd);
    assert!(r.utility.total_difference < 0.05);
    let csv = String::from_utf8(read(&toy.out("eval/eval.csv"))).unwrap();
    assert_eq!(csv.lines().next(), Some("metric,value"));
    assert_eq!(csv.lines().count(), 1 + 10);
    assert!(toy.out("eval/eval.json").exists());

    let err = cmd_eval(&cfg, &real, None, Some("colour"), 0, &toy.out("eval")).unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");

    std::fs::write(toy.out("wrong.csv"), "a,c,b\n1,x,2\n").unwrap();
    assert!(cmd_eval(&cfg, &toy.out("wrong.csv"), None, None, 0, &toy.out("eval")).is_err());
}

#[test]
fn eval_from_a_run_joins_its_manifest() {
    let toy = Toy::new("");
    let run = cmd_train(&toy.config(), None, Some(toy.out("run"))).unwrap();
    let synth = cmd_generate(&run, None, 0, CheckpointChoice::Best, None).unwrap();
    let o = vflgan(&[
        "eval",
        "--run",
        run.to_str().unwrap(),
        "--synth",
        synth.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(field(&stdout(&o), "total_difference").is_finite());
    let m = RunManifest::load(&run).unwrap();
    assert!(m.file("reports/eval.json").is_some());
    m.verify(&run).unwrap();
}

const SMALL_AUDIT: &str = "[audit]\nmethods = [\"ASSD\", \"ASIF\"]\n[audit.attack]\nshadows = 3\ntrain_per_world = 1\ntest_per_world = 2\nrepeats = 2\ntrees = 5";

#[test]
fn audit_selects_deterministically_and_persists_reports() {
    let toy = Toy::new(SMALL_AUDIT);
    let (a, ra) = cmd_audit(
        &toy.config(),
        Some(Selection::Nn),
        None,
        None,
        Some(toy.out("a")),
    )
    .unwrap();
    let (b, rb) = cmd_audit(
        &toy.config(),
        Some(Selection::Nn),
        None,
        None,
        Some(toy.out("b")),
    )
    .unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ra.len(), 2);
    assert_eq!(ra[0].target, ra[1].target);
    for rel in [
        "reports/selection.json",
        "reports/audit_assd.json",
        "reports/audit_asif.json",
        "reports/features_assd_naive.csv",
        "reports/features_asif_correlation.csv",
    ] {
        assert_eq!(read(&a.join(rel)), read(&b.join(rel)), "{rel}");
    }
    let m = RunManifest::load(&a).unwrap();
    assert_eq!(m.status, RunStatus::Complete);
    m.verify(&a).unwrap();
    let features = String::from_utf8(read(&a.join("reports/features_assd_naive.csv"))).unwrap();
    assert_eq!(features.lines().count(), 1 + 6);
    for r in &ra {
        for k in r
            .attack
            .results
            .iter()
            .chain(&r.null.as_ref().unwrap().results)
        {
            assert_eq!(k.aucs.len(), 2);
            assert!((0.0..=1.0).contains(&k.auc_mean));
        }
    }

    let (_, rt) = cmd_audit(&toy.config(), None, Some(7), None, Some(toy.out("t"))).unwrap();
    assert_eq!(rt[0].target, 7);
}

#[test]
fn audit_validation_happens_before_side_effects() {
    let toy = Toy::new(&SMALL_AUDIT.replace("shadows = 3", "shadows = 1"));
    let out = toy.out("run");
    assert!(cmd_audit(
        &toy.config(),
        Some(Selection::Nn),
        None,
        None,
        Some(out.clone())
    )
    .is_err());
    assert!(!out.exists());

    let toy = Toy::new(SMALL_AUDIT);
    let err = cmd_audit(&toy.config(), None, None, None, Some(out.clone())).unwrap_err();
    assert!(err.to_string().contains("target"), "{err}");
    assert!(cmd_audit(&toy.config(), None, Some(40), None, Some(out.clone())).is_err());
    assert!(!out.exists());
    let o = vflgan(&[
        "audit",
        "--config",
        toy.config().to_str().unwrap(),
        "--select",
        "nn",
        "--target",
        "1",
    ]);
    assert!(!o.status.success());
}

fn red_wine_run(extra: &str, name: &str) -> (tempfile::TempDir, PathBuf) {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(root.join("configs/red_wine.toml"))
        .unwrap()
        .replace("../data/", &format!("{}/data/", root.display()))
        + extra;
    let cfg = dir.path().join("red_wine.toml");
    std::fs::write(&cfg, text).unwrap();
    let run = cmd_train(&cfg, None, Some(dir.path().join(name))).unwrap();
    (dir, run)
}

#[test]
fn red_wine_config_logs_every_epoch() {
    let (_dir, run) = red_wine_run("", "run");
    let log = String::from_utf8(read(&run.join("logs/train_log.csv"))).unwrap();
    assert_eq!(log.lines().count(), 1 + 300);
    assert_eq!(RunManifest::load(&run).unwrap().rows, 1599);
}

#[test]
fn red_wine_dp_budget_is_met() {
    let (_dir, run) = red_wine_run("\n[dp]\nepsilon = 10.0\ndelta = 5e-4\n", "dp");
    let dp = RunManifest::load(&run).unwrap().dp.unwrap();
    assert!(
        dp.accountant.epsilon <= 10.0,
        "ε′ = {}",
        dp.accountant.epsilon
    );
    assert_eq!(dp.config.steps, 1500);
}
