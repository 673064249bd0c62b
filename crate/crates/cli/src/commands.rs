use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use affect_core::augment::balance_dataset;
use affect_core::bvh::{read_bvh, Skeleton};
use affect_core::dataset::{class_counts, load_samples, save_samples, Sample};
use affect_core::experiment::report::{
    ablation_table, accuracy_bars_svg, confusion_csv, confusion_svg, MetricsFile,
};
use affect_core::experiment::{
    ablation_matrix, extract_windows, plan_folds, run_cross_validation, with_workers,
    AblationRow, GridCell, NeuralClassifier,
};
use affect_core::features::io::{read_features, write_features};
use affect_core::features::{ExtractConfig, FeatureSet, FeatureWindow};
use affect_core::neural::checkpoint::Checkpoint;
use affect_core::neural::fit;
use affect_core::synthgen::generate_dataset;
use affect_core::{AffectLabel, Error, Result};

use crate::config::{AppConfig, Overrides};
use crate::manifest::{now_ms, RunManifest, RUN_MANIFEST_VERSION};
use crate::Command;

pub const CONFUSION_HEADER: &str = "# affect-confusion 1";

/// State shared by every command: resolved config and the bookkeeping for
/// the run manifest.
struct Run {
    command: &'static str,
    cfg: AppConfig,
    hash: String,
    out: PathBuf,
    workers: usize,
    argv: Vec<String>,
    started: u128,
    inputs: Vec<PathBuf>,
    artifacts: Vec<PathBuf>,
}

impl Run {
    /// `<command>-<config hash>-s<seed>`, the stem of every artifact name.
    fn stem(&self) -> String {
        format!("{}-{}-s{}", self.command, self.hash, self.cfg.seed)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    fn load_data(&mut self) -> Result<Vec<Sample>> {
        let manifest = self.cfg.manifest()?.to_path_buf();
        let samples = load_samples(&manifest)?;
        self.inputs.push(manifest);
        Ok(samples)
    }

    /// Originals plus, when augmentation is on, balancing synthetics. A
    /// dataset that already carries synthetics keeps them.
    fn training_data(&mut self, augment: bool) -> Result<Vec<Sample>> {
        let samples = self.load_data()?;
        let (originals, synthetics): (Vec<Sample>, Vec<Sample>) =
            samples.into_iter().partition(|s| !s.is_synthetic());
        if !augment {
            return Ok(originals);
        }
        let synthetics = if synthetics.is_empty() {
            balance_dataset(&originals, &self.cfg.augment, &self.cfg.ranges()?)?
        } else {
            synthetics
        };
        Ok(originals.into_iter().chain(synthetics).collect())
    }

    /// Every artifact must exist and be non-empty before the manifest is
    /// written; the manifest is the last artifact.
    fn finish(mut self) -> Result<PathBuf> {
        for p in &self.artifacts {
            let len = std::fs::metadata(p).map_err(|e| Error::io(p, e))?.len();
            if len == 0 {
                return Err(Error::Config(format!("{} was written empty", p.display())));
            }
        }
        let config_name = format!("{}.config.toml", self.stem());
        let config_path = self.write(&config_name, &self.cfg.to_toml())?;
        let manifest_path = self.out.join(format!("{}.run.json", self.stem()));
        let mut artifacts = self.artifacts.clone();
        artifacts.push(manifest_path.clone());
        let manifest = RunManifest {
            format_version: RUN_MANIFEST_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            rerun: format!(
                "affect {} --config {} --out {}",
                self.command,
                config_path.display(),
                self.out.display()
            ),
            argv: self.argv,
            config_hash: self.hash,
            seed: self.cfg.seed,
            config: self.cfg,
            inputs: self.inputs,
            artifacts,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
        };
        manifest.write(&manifest_path)?;
        RunManifest::read(&manifest_path)?;
        println!("run manifest: {}", manifest_path.display());
        Ok(manifest_path)
    }
}

pub fn run(
    command: &Command,
    config: Option<&Path>,
    overrides: &Overrides,
    out: &Path,
    workers: usize,
    argv: Vec<String>,
) -> Result<()> {
    let mut cfg = AppConfig::load(config)?;
    cfg.apply(overrides)?;
    if let Command::Ablate = command {
        narrow_grid(&mut cfg, overrides)?;
    }
    let mut run = Run {
        command: name(command),
        hash: cfg.hash(),
        cfg,
        out: out.to_path_buf(),
        workers,
        argv,
        started: now_ms(),
        inputs: config.map(|p| vec![p.to_path_buf()]).unwrap_or_default(),
        artifacts: Vec::new(),
    };
    match command {
        Command::Inspect { bvh } => inspect(&mut run, bvh)?,
        Command::Synth => synth(&mut run)?,
        Command::Extract => extract(&mut run)?,
        Command::Augment => augment(&mut run)?,
        Command::Train => train(&mut run)?,
        Command::Crossval => crossval(&mut run)?,
        Command::Ablate => ablate(&mut run)?,
        Command::Report { metrics } => report(&mut run, metrics)?,
    }
    run.finish()?;
    Ok(())
}

fn name(command: &Command) -> &'static str {
    match command {
        Command::Inspect { .. } => "inspect",
        Command::Synth => "synth",
        Command::Extract => "extract",
        Command::Augment => "augment",
        Command::Train => "train",
        Command::Crossval => "crossval",
        Command::Ablate => "ablate",
        Command::Report { .. } => "report",
    }
}

/// Flags given to `ablate` pin the matching grid axis to one value.
fn narrow_grid(cfg: &mut AppConfig, o: &Overrides) -> Result<()> {
    if let Some(c) = o.cell {
        cfg.ablate.cells = vec![c];
    }
    if let Some(b) = o.branches {
        cfg.ablate.branches = vec![b];
    }
    if o.variant.is_some() {
        cfg.ablate.features = vec![cfg.features.set];
    }
    if let Some(a) = o.augment {
        cfg.ablate.augmented = vec![a];
    }
    if cfg.ablate.grid().is_empty() {
        return Err(Error::Config("the ablation grid is empty".into()));
    }
    Ok(())
}

pub fn hierarchy_summary(skeleton: &Skeleton) -> String {
    let mut depth = vec![0usize; skeleton.len()];
    let mut out = String::new();
    for (i, j) in skeleton.joints().iter().enumerate() {
        if let Some(p) = j.parent {
            depth[i] = depth[p] + 1;
        }
        let channels: Vec<&str> = j.channels.iter().map(|c| c.name()).collect();
        out.push_str(&format!(
            "{}{} [{}]{}\n",
            "  ".repeat(depth[i] + 1),
            j.name,
            channels.join(" "),
            if j.end_site.is_some() { " +end" } else { "" }
        ));
    }
    out
}

fn inspect(run: &mut Run, path: &Path) -> Result<()> {
    let (skeleton, motion) = read_bvh(path)?;
    run.inputs.push(path.to_path_buf());
    let rotation = skeleton.rotation_channel_count();
    let summary = format!(
        "file: {}\njoints: {}\nchannels: {} ({} rotation, {} position)\nframes: {}\nframe time: {}\nhierarchy:\n{}",
        path.display(),
        skeleton.len(),
        skeleton.channel_count(),
        rotation,
        skeleton.channel_count() - rotation,
        motion.frame_count(),
        motion.frame_time(),
        hierarchy_summary(&skeleton)
    );
    print!("{summary}");
    let stem = run.stem();
    run.write(&format!("{stem}.txt"), &summary)?;
    Ok(())
}

fn synth(run: &mut Run) -> Result<()> {
    let samples = generate_dataset(&run.cfg.synth.config)?;
    let dir = run.out.join(run.stem());
    let written = save_samples(&dir, &samples)?;
    let manifest = written.last().expect("manifest path").clone();
    load_samples(&manifest)?;
    println!("{} samples, manifest: {}", samples.len(), manifest.display());
    run.artifacts.extend(written);
    Ok(())
}

fn file_tag(set: FeatureSet) -> String {
    set.to_string().replace(',', "_")
}

fn extract(run: &mut Run) -> Result<()> {
    let samples = run.training_data(run.cfg.data.augment)?;
    let base = run.cfg.extract()?;
    let hash = base.schema.hash();
    let mut sets = vec![run.cfg.features.set];
    for &s in &run.cfg.ablate.features {
        if !sets.contains(&s) {
            sets.push(s);
        }
    }
    let stem = run.stem();
    for set in sets {
        let config = ExtractConfig { set, ..base.clone() };
        let windows = with_workers(run.workers, || extract_windows(&samples, &config))??;
        let text = write_features(&hash, set, &windows)?;
        read_features(&text)?;
        let path = run.write(&format!("{stem}/{}.features", file_tag(set)), &text)?;
        println!("{set}: {} windows -> {}", windows.len(), path.display());
    }
    Ok(())
}

fn augment(run: &mut Run) -> Result<()> {
    let samples = run.load_data()?;
    let originals: Vec<Sample> = samples.into_iter().filter(|s| !s.is_synthetic()).collect();
    let synthetics = balance_dataset(&originals, &run.cfg.augment, &run.cfg.ranges()?)?;
    let all: Vec<Sample> = originals.iter().cloned().chain(synthetics.iter().cloned()).collect();
    let dir = run.out.join(run.stem());
    let written = save_samples(&dir, &all)?;
    let manifest = written.last().expect("manifest path").clone();
    let back = load_samples(&manifest)?;
    if back.len() != all.len() {
        return Err(Error::Config(format!("{} did not round-trip", manifest.display())));
    }
    let totals = class_counts(&all);
    println!(
        "{} originals + {} synthetics = {} (per class {:?}), manifest: {}",
        originals.len(),
        synthetics.len(),
        all.len(),
        totals,
        manifest.display()
    );
    run.artifacts.extend(written);
    Ok(())
}

fn train(run: &mut Run) -> Result<()> {
    let samples = run.training_data(run.cfg.data.augment)?;
    let extract = run.cfg.extract()?;
    let windows = with_workers(run.workers, || extract_windows(&samples, &extract))??;
    let refs: Vec<&FeatureWindow> = windows.iter().collect();
    let config = run.cfg.train.clone();
    let trained = with_workers(run.workers, || fit(&refs, &config))??;
    let hash = extract.schema.hash();
    let checkpoint = Checkpoint::new(&trained, &config, &hash, &extract.set.to_string());
    let path = run.out.join(format!("{}.checkpoint.json", run.stem()));
    std::fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
    checkpoint.save(&path)?;
    Checkpoint::load(&path)?.restore(&hash)?;
    run.artifacts.push(path.clone());
    println!(
        "trained on {} windows, final loss {:.4}, checkpoint: {}",
        windows.len(),
        trained.loss_history.last().copied().unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

fn write_metrics(run: &mut Run, rows: Vec<AblationRow>) -> Result<MetricsFile> {
    let metrics = MetricsFile::new(run.hash.clone(), run.cfg.seed, rows);
    let text = metrics.to_json();
    if MetricsFile::from_json(&text)? != metrics {
        return Err(Error::Config("metrics did not round-trip".into()));
    }
    let stem = run.stem();
    let path = run.write(&format!("{stem}.metrics.json"), &text)?;
    println!("metrics: {}", path.display());
    Ok(metrics)
}

pub fn confusion_file(report: &affect_core::experiment::EvalReport) -> String {
    format!("{CONFUSION_HEADER}\n{}", confusion_csv(report))
}

fn crossval(run: &mut Run) -> Result<()> {
    let samples = run.training_data(run.cfg.data.augment)?;
    let extract = run.cfg.extract()?;
    let plan = plan_folds(&samples, run.cfg.data.folds, run.cfg.seed)?;
    let classifier = NeuralClassifier { config: run.cfg.train.clone() };
    let report = with_workers(run.workers, || -> Result<_> {
        let windows = extract_windows(&samples, &extract)?;
        run_cross_validation(&windows, &plan, &classifier)
    })??;
    let cell = GridCell {
        cell: run.cfg.train.cell,
        branches: run.cfg.train.branches,
        features: run.cfg.features.set,
        augmented: run.cfg.data.augment,
    };
    let csv = confusion_file(&report);
    let stem = run.stem();
    run.write(&format!("{stem}.confusion.csv"), &csv)?;
    let metrics = write_metrics(run, vec![AblationRow { cell, report }])?;
    print!("{}", ablation_table(&metrics.rows));
    Ok(())
}

fn ablate(run: &mut Run) -> Result<()> {
    let grid = run.cfg.ablate.grid();
    let any_augmented = grid.iter().any(|c| c.augmented);
    let samples = run.training_data(any_augmented)?;
    let plan = plan_folds(&samples, run.cfg.data.folds, run.cfg.seed)?;
    let extract = run.cfg.extract()?;
    let train = run.cfg.train.clone();
    let rows = with_workers(run.workers, || ablation_matrix(&samples, &grid, &train, &extract, &plan))??;
    let table = ablation_table(&rows);
    let stem = run.stem();
    run.write(&format!("{stem}.table.md"), &table)?;
    write_metrics(run, rows)?;
    print!("{table}");
    Ok(())
}

fn report(run: &mut Run, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let metrics = MetricsFile::from_json(&text)?;
    run.inputs.push(path.to_path_buf());
    let dir = format!("report-{}-s{}", metrics.config_hash, metrics.seed);
    let table = ablation_table(&metrics.rows);
    run.write(&format!("{dir}/table.md"), &table)?;
    let mut seen = BTreeSet::new();
    for (i, row) in metrics.rows.iter().enumerate() {
        let title = row.cell.to_string();
        seen.insert(title.clone());
        run.write(&format!("{dir}/row{i:02}-accuracy.svg"), &accuracy_bars_svg(&title, &row.report))?;
        run.write(&format!("{dir}/row{i:02}-confusion.svg"), &confusion_svg(&title, &row.report))?;
        run.write(&format!("{dir}/row{i:02}-confusion.csv"), &confusion_file(&row.report))?;
    }
    print!("{table}");
    println!(
        "{} rows, {} distinct configurations, classes {}",
        metrics.rows.len(),
        seen.len(),
        AffectLabel::ALL.map(|l| l.name()).join("/")
    );
    Ok(())
}
