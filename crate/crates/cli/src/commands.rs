use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vflgan_core::audit::{
    find_vulnerable_nn, find_vulnerable_outlier, null_attack, run_attack, train_shadows_asif,
    train_shadows_assd, write_feature_csv, AuditMethod, AuditReport, GanShadowTrainer,
};
use vflgan_core::data::{fit_encoder, fit_encoder_and_encode, load_csv, Encoder};
use vflgan_core::dp::{calibrate, report, AccountantReport};
use vflgan_core::fedgan::{
    load_checkpoint, party_data, save_checkpoint, synthesize_table, train, CheckpointMeta,
    Generators, Variant,
};
use vflgan_core::metrics::{frechet_between, utility_fourway, UtilityReport};
use vflgan_core::RngStream;

use crate::config::{ResolvedDp, RunConfig, Selection};
use crate::error::{CliError, Result};
use crate::manifest::{create_run_dir, RunManifest, MANIFEST_FILE};

pub const ENCODER_FILE: &str = "checkpoints/encoder.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointChoice {
    /// Lowest-FD epoch.
    Best,
    /// Last epoch.
    Final,
}

impl CheckpointChoice {
    pub fn path(self) -> &'static str {
        match self {
            CheckpointChoice::Best => "checkpoints/best.ckpt",
            CheckpointChoice::Final => "checkpoints/final.ckpt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: Variant,
    pub seed: u64,
    pub rows: usize,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub best_fd: Option<f64>,
    pub final_fd: Option<f64>,
    pub dp: Option<ResolvedDp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows_real: usize,
    pub rows_synthetic: usize,
    pub target: String,
    pub fd: f64,
    pub utility: UtilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub mode: Option<Selection>,
    pub target: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Json(path.to_path_buf(), e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json(path.to_path_buf(), e))
}

fn rel_name(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn output_dir(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    out.or_else(|| cfg.output_dir.clone()).ok_or_else(|| {
        CliError::Config("no output directory (set output_dir or pass --out)".into())
    })
}

/// Copies the config, runs `body`, and seals the manifest whatever the
/// outcome.
fn with_run_dir(
    dir: &Path,
    config_path: &Path,
    mut manifest: RunManifest,
    body: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<()> {
    create_run_dir(dir)?;
    let copy = dir.join("config.toml");
    std::fs::copy(config_path, &copy).map_err(|e| CliError::Io(copy, e))?;
    manifest.record(dir, "config.toml")?;
    manifest.save(dir)?;
    let result = body(&mut manifest);
    manifest.finish(&result);
    manifest.save(dir)?;
    result
}

/// Trains the configured variant into a fresh run directory.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<PathBuf> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = output_dir(&cfg, out)?;
    let data = cfg.load_data()?;
    cfg.validate(&data)?;
    let split = cfg.split()?;
    let dp = cfg.resolve_dp(data.len())?;
    let manifest = RunManifest::new("train", cfg.clone(), data.len(), dp.clone());

    with_run_dir(&dir, config_path, manifest, |manifest| {
        let enc = fit_encoder_and_encode(&data)?;
        write_json(&dir.join(ENCODER_FILE), &enc.encoder)?;
        let parts = party_data(&enc, &split, cfg.gan.temperature)?;
        let out = train(
            cfg.variant,
            &parts,
            &cfg.gan,
            dp.as_ref().map(|d| &d.config),
            &RngStream::from_seed(cfg.seed),
        )?;
        let meta = |epoch| CheckpointMeta {
            variant: cfg.variant,
            seed: cfg.seed,
            epoch,
            config: cfg.gan.clone(),
        };
        let last = (cfg.gan.epochs > 0).then_some(cfg.gan.epochs);
        save_checkpoint(
            &dir.join(CheckpointChoice::Best.path()),
            &out.best,
            &meta(out.best_epoch),
        )?;
        save_checkpoint(
            &dir.join(CheckpointChoice::Final.path()),
            &out.generators,
            &meta(last),
        )?;
        out.log.write_csv(&dir.join("logs/train_log.csv"))?;
        let report = TrainReport {
            variant: cfg.variant,
            seed: cfg.seed,
            rows: data.len(),
            epochs: cfg.gan.epochs,
            best_epoch: out.best_epoch,
            best_fd: out.log.best().map(|r| r.fd),
            final_fd: out.log.records.last().map(|r| r.fd),
            dp: dp.clone(),
        };
        write_json(&dir.join("reports/train.json"), &report)?;
        for rel in [
            ENCODER_FILE,
            "checkpoints/best.ckpt",
            "checkpoints/best.ckpt.toml",
            "checkpoints/final.ckpt",
            "checkpoints/final.ckpt.toml",
            "logs/train_log.csv",
            "reports/train.json",
        ] {
            manifest.record(&dir, rel)?;
        }
        Ok(())
    })?;
    Ok(dir)
}

/// Loads a verified checkpoint and the encoder of a training run.
pub fn load_run(
    run_dir: &Path,
    which: CheckpointChoice,
) -> Result<(RunManifest, Generators, Encoder)> {
    let manifest = RunManifest::load(run_dir)?;
    manifest.verify(run_dir)?;
    for rel in [which.path(), ENCODER_FILE] {
        if manifest.file(rel).is_none() {
            return Err(CliError::Manifest(format!("{rel} is not part of this run")));
        }
    }
    let (generators, _) = load_checkpoint(&run_dir.join(which.path()))?;
    let encoder: Encoder = read_json(&run_dir.join(ENCODER_FILE))?;
    Ok((manifest, generators, encoder))
}

/// Writes `n` decoded synthetic records (default: the training size) and
/// returns the CSV path. Files written inside the run directory join its
/// manifest.
pub fn cmd_generate(
    run_dir: &Path,
    n: Option<usize>,
    seed: u64,
    which: CheckpointChoice,
    out: Option<PathBuf>,
) -> Result<PathBuf> {
    let (mut manifest, generators, encoder) = load_run(run_dir, which)?;
    let split = manifest.config.split()?;
    let n = n.unwrap_or(manifest.rows);
    let table = synthesize_table(
        &generators,
        &split,
        &encoder,
        n,
        &RngStream::from_seed(seed),
    )?;
    let synth = encoder.decode(&table)?;
    let path = out.unwrap_or_else(|| run_dir.join("reports/synthetic.csv"));
    synth.write_csv(&path)?;
    if let Ok(rel) = path.strip_prefix(run_dir) {
        manifest.record(run_dir, &rel_name(rel))?;
        manifest.save(run_dir)?;
    }
    Ok(path)
}

/// FD and four-way utility of `synth_path` against the configured real
/// table; writes `eval.json` and `eval.csv` into `out_dir`.
pub fn cmd_eval(
    cfg: &RunConfig,
    synth_path: &Path,
    real_path: Option<&Path>,
    target: Option<&str>,
    seed: u64,
    out_dir: &Path,
) -> Result<EvalReport> {
    let schema = cfg.schema()?;
    let real = match real_path {
        Some(p) => load_csv(p, &schema)?,
        None => cfg.load_data()?,
    };
    let synth = load_csv(synth_path, &schema)?;
    let target = target
        .map(str::to_string)
        .or_else(|| schema.target.clone())
        .ok_or_else(|| {
            CliError::Config("no target attribute (set schema.target or pass --target)".into())
        })?;
    schema.index_of(&target)?;
    let encoder = fit_encoder(&real)?;
    let fd = frechet_between(
        &encoder.encode(&real)?.matrix,
        &encoder.encode(&synth)?.matrix,
    )?;
    let utility = utility_fourway(&real, &synth, &target, &RngStream::from_seed(seed))?;
    let report = EvalReport {
        rows_real: real.len(),
        rows_synthetic: synth.len(),
        target,
        fd,
        utility,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(out_dir.to_path_buf(), e))?;
    write_json(&out_dir.join("eval.json"), &report)?;
    let csv_path = out_dir.join("eval.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(vflgan_core::Error::from)?;
    let mut rows = vec![("fd".to_string(), report.fd)];
    for (name, s) in report.utility.settings() {
        let name = name.to_lowercase();
        rows.push((format!("{name}_accuracy"), s.accuracy));
        rows.push((format!("{name}_f1"), s.f1));
    }
    rows.push(("total_difference".into(), report.utility.total_difference));
    let mut write = || -> csv::Result<()> {
        w.write_record(["metric", "value"])?;
        for (k, v) in &rows {
            w.write_record([k.as_str(), &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(vflgan_core::Error::from)?;
    if let Some(run_dir) = out_dir.ancestors().find(|d| d.join(MANIFEST_FILE).exists()) {
        let mut manifest = RunManifest::load(run_dir)?;
        for name in ["eval.json", "eval.csv"] {
            let rel = out_dir.join(name);
            manifest.record(
                run_dir,
                &rel_name(rel.strip_prefix(run_dir).expect("ancestor")),
            )?;
        }
        manifest.save(run_dir)?;
    }
    Ok(report)
}

fn method_label(m: AuditMethod) -> &'static str {
    match m {
        AuditMethod::Assd => "assd",
        AuditMethod::Asif => "asif",
    }
}

/// Shadow-model audit of one record into a fresh run directory.
pub fn cmd_audit(
    config_path: &Path,
    select: Option<Selection>,
    target: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(PathBuf, Vec<AuditReport>)> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut section = cfg
        .audit
        .clone()
        .ok_or_else(|| CliError::Config("the config has no [audit] section".into()))?;
    if select.is_some() || target.is_some() {
        section.select = select;
        section.target = target;
    }
    cfg.audit = Some(section.clone());
    let dir = output_dir(&cfg, out)?;
    let data = cfg.load_data()?;
    cfg.validate(&data)?;
    let dp = cfg.resolve_dp(data.len())?;
    let enc = fit_encoder_and_encode(&data)?;
    let target = match (section.target, section.select) {
        (Some(t), None) if t < data.len() => t,
        (Some(t), None) => {
            return Err(CliError::Config(format!(
                "target {t} outside a table of {} rows",
                data.len()
            )))
        }
        (None, Some(Selection::Outlier)) => find_vulnerable_outlier(&data)?.index,
        (None, Some(Selection::Nn)) => find_vulnerable_nn(&enc)?.index,
        _ => {
            return Err(CliError::Config(
                "choose a target: audit.target, audit.select, --target or --select".into(),
            ))
        }
    };
    let trainer = GanShadowTrainer {
        encoder: enc.encoder.clone(),
        split: cfg.split()?,
        variant: cfg.variant,
        gan: cfg.gan.clone(),
        dp: dp.as_ref().map(|d| d.config),
    };
    let manifest = RunManifest::new("audit", cfg.clone(), data.len(), dp.clone());
    let mut reports = Vec::new();

    with_run_dir(&dir, config_path, manifest, |manifest| {
        write_json(
            &dir.join("reports/selection.json"),
            &SelectionReport {
                mode: section.select,
                target,
            },
        )?;
        manifest.record(&dir, "reports/selection.json")?;
        let root = RngStream::from_seed(cfg.seed);
        for &method in &section.methods {
            let label = method_label(method);
            let rng = root.child(label, 0, 0);
            let vectors = match method {
                AuditMethod::Assd => {
                    train_shadows_assd(&enc, target, &section.attack, &trainer, &rng)?
                }
                AuditMethod::Asif => {
                    train_shadows_asif(&enc, target, &section.attack, &trainer, &rng)?
                }
            };
            for &kind in &section.attack.kinds {
                let rel = format!("reports/features_{label}_{}.csv", kind.name());
                write_feature_csv(&vectors, kind, &dir.join(&rel))?;
                manifest.record(&dir, &rel)?;
            }
            let attack = run_attack(&vectors, &section.attack, &rng)?;
            let null = if section.null {
                Some(null_attack(&vectors, &section.attack, &rng)?)
            } else {
                None
            };
            let report = AuditReport {
                method,
                target,
                config: section.attack.clone(),
                dp_sigma: dp.as_ref().map(|d| d.config.sigma),
                attack,
                null,
            };
            let rel = format!("reports/audit_{label}.json");
            write_json(&dir.join(&rel), &report)?;
            manifest.record(&dir, &rel)?;
            reports.push(report);
        }
        Ok(())
    })?;
    Ok((dir, reports))
}

pub fn cmd_calibrate(epsilon: f64, delta: f64, gamma: f64, steps: u64) -> Result<AccountantReport> {
    let sigma = calibrate(epsilon, delta, gamma, steps)?;
    Ok(report(sigma, gamma, steps, delta)?)
}

pub fn cmd_report(sigma: f64, gamma: f64, steps: u64, delta: f64) -> Result<AccountantReport> {
    Ok(report(sigma, gamma, steps, delta)?)
}
