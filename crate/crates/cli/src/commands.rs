use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cybersick_core::attribution::{
    attribute, completeness_gap, AttributionConfig, Baseline, Differentiable, Method, TemporalImportance,
};
use cybersick_core::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use cybersick_core::data::fseq::{read_matrix_file, write_matrix_file, ATTRIBUTION_MAGIC, FEATURE_MAGIC};
use cybersick_core::data::{generate_synthetic, load_manifest, BinningScheme, Dataset, DatasetManifest, SyntheticSpec};
use cybersick_core::nn::ModelParams;
use cybersick_core::train::{evaluate, run_cross_validation, PreparedData, TrainConfig};
use cybersick_core::{Error, Result};
use serde_json::{json, Map, Value};

use crate::{AttributeArgs, Command, DataArgs, EvalArgs, SynthArgs, TrainArgs, ValidateArgs};

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("input file {} does not exist", path.display())))
    }
}

/// Missing inputs are caller errors; I/O failures after this check are not.
fn check_inputs(command: &Command) -> Result<()> {
    let data = |d: &DataArgs| -> Result<()> {
        require_file(&d.data)?;
        d.config.as_deref().map_or(Ok(()), require_file)
    };
    match command {
        Command::Synth(a) => a.config.as_deref().map_or(Ok(()), require_file),
        Command::Validate(a) => data(&a.data),
        Command::Train(a) => data(&a.data),
        Command::Eval(a) => data(&a.data).and_then(|_| require_file(&a.checkpoint)),
        Command::Attribute(a) => {
            data(&a.data)?;
            require_file(&a.checkpoint)?;
            match a.baseline.as_str() {
                "zeros" => Ok(()),
                path => require_file(Path::new(path)),
            }
        }
        Command::ExportPlot(a) => a.inputs.iter().try_for_each(|p| require_file(p)),
    }
}

pub fn execute(command: Command) -> Result<()> {
    check_inputs(&command)?;
    match command {
        Command::Synth(a) => synth(a),
        Command::Validate(a) => validate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Attribute(a) => attribute_cmd(a),
        Command::ExportPlot(a) => crate::plot::export(&a.inputs, &a.out),
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => {
            serde_json::from_value(read_json(path)?).map_err(|e| Error::json(path.display().to_string(), e))?
        }
        None => SyntheticSpec::default(),
    };
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut spec.session_count, args.sessions);
    set(&mut spec.frames_per_sample, args.frames);
    set(&mut spec.feature_dim, args.dim);
    set(&mut spec.class_count, args.classes);
    spec.seed = args.seed.unwrap_or(spec.seed);
    spec.motif_strength = args.strength.unwrap_or(spec.motif_strength);
    spec.noise_sigma = args.sigma.unwrap_or(spec.noise_sigma);
    let (manifest, ds) = generate_synthetic(&spec, &args.out)?;
    write_text(&args.out.join("synth.json"), &pretty(&spec))?;
    println!(
        "wrote {} sessions ({} samples, D={}, {} classes) to {}",
        manifest.sessions.len(),
        ds.len(),
        ds.feature_dim,
        ds.class_count(),
        args.out.display()
    );
    Ok(())
}

/// Defaults, then `--config`, then flags.
fn resolve_config(args: &DataArgs, base: TrainConfig) -> Result<TrainConfig> {
    let mut config = base;
    if let Some(path) = &args.config {
        let Value::Object(map) = read_json(path)? else {
            return Err(Error::Config(format!(
                "{}: config must be a flat JSON object",
                path.display()
            )));
        };
        config.apply_json(&map)?;
    }
    args.flags.apply(&mut config)?;
    config.validate()?;
    Ok(config)
}

/// Loads the manifest and re-bins labels when `class-count` differs from the
/// manifest's scheme.
fn load_data(
    args: &DataArgs,
    config: &TrainConfig,
    binning: Option<&BinningScheme>,
) -> Result<(DatasetManifest, Dataset)> {
    let (manifest, mut ds) = load_manifest(&args.data)?;
    let wanted = match binning {
        Some(b) if b.class_count() == config.class_count => Some(b.clone()),
        _ if ds.class_count() == config.class_count => None,
        _ => Some(BinningScheme::for_class_count(config.class_count)?),
    };
    if let Some(b) = wanted {
        ds.rebin(b)?;
    }
    Ok((manifest, ds))
}

fn validate(args: ValidateArgs) -> Result<()> {
    let config = resolve_config(&args.data, TrainConfig::default())?;
    let (manifest, ds) = load_data(&args.data, &config, None)?;
    let data = PreparedData::from_dataset(&ds, &config.reduction)?;
    let frames: Vec<usize> = ds.samples.iter().map(|s| s.frames.nrows()).collect();
    let steps: Vec<usize> = data.inputs.iter().map(|x| x.nrows()).collect();
    let mut out = String::new();
    writeln!(out, "manifest      {}", args.data.data.display()).unwrap();
    writeln!(out, "sessions      {}", manifest.sessions.len()).unwrap();
    writeln!(out, "samples       {}", ds.len()).unwrap();
    writeln!(out, "feature_dim   {}", ds.feature_dim).unwrap();
    writeln!(out, "binning       {:?}", ds.binning.edges()).unwrap();
    writeln!(out, "class_counts  {:?}", ds.class_counts()).unwrap();
    writeln!(
        out,
        "frames        {}..={}",
        frames.iter().min().unwrap_or(&0),
        frames.iter().max().unwrap_or(&0)
    )
    .unwrap();
    writeln!(
        out,
        "input         {}..={} steps x {} ({} k={})",
        steps.iter().min().unwrap_or(&0),
        steps.iter().max().unwrap_or(&0),
        data.input_width,
        config.reduction.mode,
        config.reduction.window
    )
    .unwrap();
    print!("{out}");
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let config = resolve_config(&args.data, TrainConfig::default())?;
    let (_, ds) = load_data(&args.data, &config, None)?;
    let data = PreparedData::from_dataset(&ds, &config.reduction)?;
    let cv = run_cross_validation(&data, &config, args.jobs)?;
    let report = cv.report();
    let out = &args.out;

    write_text(&out.join("report.json"), &report.to_json())?;
    write_text(&out.join("metrics.csv"), &cv.metrics_csv())?;
    let splits: Vec<_> = cv.folds.iter().map(|f| &f.split).collect();
    write_text(&out.join("splits.json"), &pretty(&splits))?;
    for fold in &cv.folds {
        let n = fold.split.fold_index + 1;
        let model = &fold.training.model;
        let meta = CheckpointMeta {
            shape: model.shape(),
            dropout: model.dropout_rate,
            feature_dim: ds.feature_dim,
            reduction: config.reduction,
            binning: ds.binning.clone(),
            hyperparameters: config.to_json(),
            fold: n,
            best_epoch: fold.training.best_epoch,
        };
        save_checkpoint(&out.join(format!("checkpoints/fold_{n}.ssm")), model, Some(&meta))?;
    }
    let run_manifest = json!({
        "command": "train",
        "version": env!("CARGO_PKG_VERSION"),
        "data": args.data.data.display().to_string(),
        "config": Value::Object(config.to_json()),
        "feature_dim": ds.feature_dim,
        "binning": ds.binning,
        "sample_count": ds.len(),
        "class_counts": ds.class_counts(),
        "input_width": data.input_width,
        "outputs": ["report.json", "metrics.csv", "splits.json", "checkpoints/"],
    });
    write_text(&out.join("run_manifest.json"), &pretty(&run_manifest))?;
    print!("{}", report.table());
    Ok(())
}

struct Loaded {
    model: ModelParams,
    config: TrainConfig,
    dataset: Dataset,
    data: PreparedData,
}

/// Checkpoint plus data prepared the way the checkpoint was trained. The
/// sidecar's hyperparameters sit under `--config` and flags.
fn load_for_model(args: &DataArgs, checkpoint: &Path) -> Result<Loaded> {
    let (model, meta) = load_checkpoint(checkpoint)?;
    let mut base = TrainConfig::default();
    if let Some(m) = &meta {
        base.apply_json(&m.hyperparameters)?;
        base.reduction = m.reduction;
    }
    let config = resolve_config(args, base)?;
    let (_, dataset) = load_data(args, &config, meta.as_ref().map(|m| &m.binning))?;
    let data = PreparedData::from_dataset(&dataset, &config.reduction)?;
    let shape = model.shape();
    if data.input_width != shape.input_width {
        return Err(Error::Shape(format!(
            "checkpoint expects input width {} but the data reduces to width {} (D={}, {} k={})",
            shape.input_width, data.input_width, dataset.feature_dim, config.reduction.mode, config.reduction.window
        )));
    }
    if data.class_count != shape.classes {
        return Err(Error::Shape(format!(
            "checkpoint has {} output classes but the data has {}",
            shape.classes, data.class_count
        )));
    }
    Ok(Loaded {
        model,
        config,
        dataset,
        data,
    })
}

fn select_ids(ids: &[usize], n: usize) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Ok((0..n).collect());
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
        return Err(Error::Lookup(bad));
    }
    Ok(ids.to_vec())
}

fn eval(args: EvalArgs) -> Result<()> {
    let loaded = load_for_model(&args.data, &args.checkpoint)?;
    let ids = select_ids(&args.ids, loaded.data.len())?;
    let report = evaluate(&loaded.model, &ids, &loaded.data)?;
    println!(
        "accuracy {:.2}%  loss {:.4}  samples {}",
        100.0 * report.test_accuracy,
        report.test_loss,
        report.sample_count
    );
    if let Some(out) = &args.out {
        let doc = json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "data": args.data.data.display().to_string(),
            "config": Value::Object(loaded.config.to_json()),
            "test_accuracy": report.test_accuracy,
            "test_loss": report.test_loss,
            "sample_count": report.sample_count,
            "confusion_matrix": report.confusion_matrix,
        });
        write_text(&out.join("eval.json"), &pretty(&doc))?;
    }
    Ok(())
}

fn attribute_cmd(args: AttributeArgs) -> Result<()> {
    let loaded = load_for_model(&args.data, &args.checkpoint)?;
    let ids = select_ids(&args.ids, loaded.data.len())?;
    let baseline = match args.baseline.as_str() {
        "zeros" => Baseline::Zeros,
        path => Baseline::Custom(read_matrix_file(FEATURE_MAGIC, &PathBuf::from(path))?),
    };
    let config = AttributionConfig {
        method: args.method.parse()?,
        target: args.target.parse()?,
        ig_steps: args.ig_steps,
        baseline,
        aggregation: args.aggregation.parse()?,
    };
    let mut curves = Vec::with_capacity(ids.len());
    let mut rows = Vec::with_capacity(ids.len());
    for &id in &ids {
        let x = loaded.data.inputs[id].view();
        let map = attribute(&loaded.model, x, &config)?;
        let curve = map.importance(config.aggregation);
        let stem = format!("sample_{id:05}");
        write_text(&args.out.join(format!("attributions/{stem}.csv")), &curve.to_csv())?;
        write_matrix_file(
            ATTRIBUTION_MAGIC,
            map.scores.view(),
            &args.out.join(format!("attributions/{stem}.attr")),
        )?;

        let f = map.objective(&loaded.model);
        let sample = &loaded.dataset.samples[id];
        let mut row = Map::new();
        row.insert("id".into(), id.into());
        row.insert("session_id".into(), sample.session_id.clone().into());
        row.insert("minute_index".into(), sample.minute_index.into());
        row.insert("label".into(), sample.label.0.into());
        row.insert("explained_class".into(), map.class.into());
        row.insert("output".into(), f.value(x)?.into());
        row.insert("score_sum".into(), map.scores.sum().into());
        if config.method == Method::IntegratedGradients {
            let gap = completeness_gap(&f, x, map.scores.view(), map.baseline.view())?;
            row.insert("baseline_output".into(), f.value(map.baseline.view())?.into());
            row.insert("completeness_gap".into(), gap.into());
        }
        rows.push(Value::Object(row));
        curves.push(curve);
    }
    let lengths_match = curves.windows(2).all(|w| w[0].per_step.len() == w[1].per_step.len());
    if lengths_match && !curves.is_empty() {
        write_text(
            &args.out.join("mean_importance.csv"),
            &TemporalImportance::mean(&curves)?.to_csv(),
        )?;
    }
    let summary = json!({
        "checkpoint": args.checkpoint.display().to_string(),
        "method": config.method.to_string(),
        "target": config.target.to_string(),
        "ig_steps": config.ig_steps,
        "aggregation": config.aggregation.to_string(),
        "samples": rows,
    });
    write_text(&args.out.join("attributions.json"), &pretty(&summary))?;
    println!("wrote {} attribution maps to {}", ids.len(), args.out.display());
    Ok(())
}
