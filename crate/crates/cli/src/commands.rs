use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use morpho_core::activations::curve_csv;
use morpho_core::gradsuite::{self, SuiteConfig};
use morpho_core::representation::{analyze, fixtures, OperatorTable, Window};
use morpho_core::{Rng, Scalar};
use morpho_train::data::Dataset;
use morpho_train::experiments::{export_last_layer_features, load_model, run_seed, run_table1_protocol, save_model};
use morpho_train::model::{Model, ModelSpec, Nonlinearity};
use morpho_train::optim::AdamConfig;
use morpho_train::train::{Metrics, TrainConfig, TrainableScope};
use morpho_train::TrainError;
use serde::Serialize;
use serde_json::json;

use crate::args::{BasisCmd, DataArgs, ExportCmd, FitArgs, GradcheckCmd, ModelArgs, Precision, Scope, Table1Cmd, TrainCmd};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input: exit code 2.
    Input(String),
    /// The command ran but a check failed or training diverged: exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Failed(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Input(m) | Self::Failed(m) => m,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => Self::Failed(e.to_string()),
            e => Self::Input(e.to_string()),
        }
    }
}

impl From<morpho_core::Error> for CliError {
    fn from(e: morpho_core::Error) -> Self {
        Self::Input(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    write_file(path, text + "\n")
}

fn load_data(args: &DataArgs) -> Result<(Dataset, Dataset)> {
    let train = Dataset::load_split(&args.data_dir, true)?;
    let test = Dataset::load_split(&args.data_dir, false)?;
    let cut = |ds: Dataset, n: usize| -> Result<Dataset> {
        if n == 0 || n >= ds.len() {
            Ok(ds)
        } else {
            Ok(ds.subset(n, &mut Rng::new(0), true)?)
        }
    };
    Ok((cut(train, args.subset)?, cut(test, args.test_subset)?))
}

fn parse_variant(s: &str, n: usize, m: usize) -> Result<Nonlinearity> {
    if s.contains(':') {
        Ok(s.parse()?)
    } else {
        Ok(Nonlinearity::from_tag(s, n, m)?)
    }
}

fn model_spec(args: &ModelArgs, input: (usize, usize)) -> Result<ModelSpec> {
    let spec = ModelSpec {
        pool: args.pool_size,
        stride: args.stride,
        dropout: args.dropout,
        input,
        ..ModelSpec::new(parse_variant(&args.variant, args.n_terms, args.m_terms)?).with_filters(args.filters)
    };
    spec.validate()?;
    Ok(spec)
}

fn train_config(fit: &FitArgs, seed: u64) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        adam: AdamConfig {
            lr: fit.lr,
            ..Default::default()
        },
        batch_size: fit.batch_size,
        micro_batch: fit.micro_batch,
        max_epochs: fit.epochs,
        patience: fit.patience,
        seed,
        scope: match fit.trainable_scope {
            Scope::All => TrainableScope::All,
            Scope::ActivationsOnly => TrainableScope::ActivationsOnly,
        },
        time_budget_secs: fit.time_budget,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(cmd: &TrainCmd) -> Result<()> {
    let (train_ds, test_ds) = load_data(&cmd.data)?;
    let spec = model_spec(&cmd.model, train_ds.image_shape())?;
    let cfg = train_config(&cmd.fit, cmd.seed)?;
    match cmd.fit.precision {
        Precision::F32 => train_as::<f32>(cmd, &spec, &cfg, &train_ds, &test_ds),
        Precision::F64 => train_as::<f64>(cmd, &spec, &cfg, &train_ds, &test_ds),
    }
}

fn train_as<T: Scalar + Serialize>(
    cmd: &TrainCmd,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
) -> Result<()> {
    fs::create_dir_all(&cmd.out).map_err(|e| CliError::Input(format!("cannot create {}: {e}", cmd.out.display())))?;
    let epochs_path = cmd.out.join("epochs.jsonl");
    let mut epochs_file =
        File::create(&epochs_path).map_err(|e| CliError::Input(format!("cannot write {}: {e}", epochs_path.display())))?;
    let (model, metrics) = run_seed::<T>(spec, train_ds, test_ds, cfg, cmd.seed, |e| {
        let line = serde_json::to_string(e).unwrap_or_default();
        println!("{line}");
        let _ = writeln!(epochs_file, "{line}");
    })?;
    let metrics_path = cmd.metrics.clone().unwrap_or_else(|| cmd.out.join("metrics.json"));
    write_json(
        &metrics_path,
        &json!({ "config": cmd, "model": spec, "train": cfg, "metrics": metrics }),
    )?;
    write_file(&cmd.out.join("summary.csv"), format!("{}\n{}\n", Metrics::CSV_HEADER, metrics.csv_row()))?;
    save_model(&model, &cmd.out.join("model.json"))?;
    if cmd.export_features {
        export_last_layer_features(&model, test_ds, &cmd.out.join("features.csv"))?;
    }
    println!(
        "{}: best test accuracy {:.2}% at epoch {} (untrained {:.2}%)",
        metrics.nonlinearity,
        100.0 * metrics.best_test_accuracy,
        metrics.best_epoch,
        100.0 * metrics.initial_test_accuracy
    );
    if metrics.frozen_checksum_before != metrics.frozen_checksum_after {
        return Err(CliError::Failed("frozen parameters changed during training".into()));
    }
    Ok(())
}

pub fn gradcheck(cmd: &GradcheckCmd) -> Result<()> {
    let suite = SuiteConfig {
        seed: cmd.seed,
        trials: cmd.trials,
        step: cmd.step,
        tolerance: cmd.tolerance,
        max_terms: cmd.max_terms,
        fault: cmd.inject_fault.clone(),
        ..Default::default()
    };
    let report = gradsuite::run(&suite)?;
    let passed = report.passed();
    write_json(
        &cmd.out.join("gradcheck.json"),
        &json!({
            "config": cmd,
            "suite": suite,
            "passed": passed,
            "max_rel_error": report.max_rel_error(),
            "report": report,
        }),
    )?;
    println!(
        "{} gradient checks, max relative error {:.3e}",
        report.checks.len(),
        report.max_rel_error()
    );
    if passed {
        println!("PASS");
        return Ok(());
    }
    let failures = report.failures();
    for f in &failures {
        eprintln!("FAIL {} index {} relative error {:.3e}", f.label, f.worst_index, f.max_rel_error);
    }
    Err(CliError::Failed(format!("{} checks exceed tolerance {:e}", failures.len(), cmd.tolerance)))
}

fn parse_points(s: &str) -> Result<Vec<[i64; 2]>> {
    let bad = || CliError::Input(format!("cannot parse point list `{s}`; use e.g. `0,0;0,1`"));
    s.split(';')
        .map(|p| {
            let (r, c) = p.split_once(',').ok_or_else(bad)?;
            Ok([r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?])
        })
        .collect()
}

fn named_points(s: &str) -> Result<Vec<[i64; 2]>> {
    let square = |r: i64| (-r..=r).flat_map(|a| (-r..=r).map(move |b| [a, b])).collect();
    Ok(match s {
        "horiz2" => vec![[0, 0], [0, 1]],
        "vert2" => vec![[0, 0], [1, 0]],
        "diag2" => vec![[0, 0], [1, 1]],
        "diag3" => vec![[-1, -1], [0, 0], [1, 1]],
        "cross5" => vec![[-1, 0], [0, -1], [0, 0], [0, 1], [1, 0]],
        "square3" | "3x3" => square(1),
        other => parse_points(other)?,
    })
}

fn fixture(cmd: &BasisCmd) -> Result<OperatorTable> {
    let window = match cmd.window.as_str() {
        "square3" | "3x3" => Window::square(1)?,
        "cross5" => Window::cross5(),
        other => Window::new(parse_points(other)?)?,
    };
    let op = match cmd.op.as_str() {
        "erosion" => fixtures::erosion(window, &named_points(&cmd.se)?)?,
        "dilation" => fixtures::dilation(window, &named_points(&cmd.se)?)?,
        "opening" => fixtures::opening(window, &named_points(&cmd.se)?)?,
        "median" => fixtures::median(window)?,
        "identity" => fixtures::identity(window)?,
        other => {
            return Err(CliError::Input(format!(
                "unknown operator `{other}`; expected erosion, dilation, opening, median or identity"
            )))
        }
    };
    Ok(op)
}

pub fn basis(cmd: &BasisCmd) -> Result<()> {
    let op = fixture(cmd)?;
    let report = analyze(&op);
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    let doc = json!({ "config": cmd, "verdict": verdict, "report": report });
    write_json(&cmd.out.join("basis.json"), &doc)?;
    println!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Failed(report.witnesses.join("; ")))
    }
}

pub fn export_activation(cmd: &ExportCmd) -> Result<()> {
    let model: Model<f64> = match &cmd.model_file {
        Some(path) => load_model(path)?,
        None => Model::build(model_spec(&cmd.model, (28, 28))?, &mut Rng::new(cmd.seed))?,
    };
    if !(1..=2).contains(&cmd.layer) {
        return Err(CliError::Input(format!("layer must be 1 or 2, got {}", cmd.layer)));
    }
    let curves = model.activation_curves(cmd.layer);
    if curves.is_empty() {
        return Err(CliError::Input(format!(
            "{} has no per-unit activation curve",
            model.spec.nonlinearity
        )));
    }
    let units: Vec<&dyn Fn(f64) -> f64> = curves.iter().map(|c| c.as_ref()).collect();
    let csv = curve_csv(&units, cmd.from, cmd.to, cmd.step)?;
    let csv_path = cmd.out.join(format!("activation_layer{}.csv", cmd.layer));
    write_file(&csv_path, &csv)?;
    write_json(
        &cmd.out.join(format!("activation_layer{}.json", cmd.layer)),
        &json!({ "config": cmd, "model": model.spec, "units": units.len(), "csv": csv_path }),
    )?;
    println!("{} curves written to {}", units.len(), csv_path.display());
    Ok(())
}

fn table1_variants(cmd: &Table1Cmd) -> Result<Vec<Nonlinearity>> {
    let mut variants = cmd
        .variants
        .iter()
        .map(|v| parse_variant(v, 2, 2))
        .collect::<Result<Vec<_>>>()?;
    variants.retain(|&v| v != Nonlinearity::ReluMaxPool);
    variants.insert(0, Nonlinearity::ReluMaxPool);
    Ok(variants)
}

pub fn table1(cmd: &Table1Cmd) -> Result<()> {
    let variants = table1_variants(cmd)?;
    if cmd.seeds.is_empty() {
        return Err(CliError::Input("at least one seed is required".into()));
    }
    let (train_ds, test_ds) = load_data(&cmd.data)?;
    let base = ModelSpec {
        pool: cmd.pool_size,
        stride: cmd.stride,
        input: train_ds.image_shape(),
        ..ModelSpec::new(Nonlinearity::ReluMaxPool).with_filters(cmd.filters)
    };
    base.validate()?;
    let cfg = train_config(&cmd.fit, 0)?;
    println!("{}", Metrics::CSV_HEADER);
    let on_run = |m: &Metrics| println!("{}", m.csv_row());
    let report = match cmd.fit.precision {
        Precision::F32 => run_table1_protocol::<f32>(&base, &variants, &train_ds, &test_ds, &cfg, &cmd.seeds, on_run)?,
        Precision::F64 => run_table1_protocol::<f64>(&base, &variants, &train_ds, &test_ds, &cfg, &cmd.seeds, on_run)?,
    };
    let runs: String = std::iter::once(Metrics::CSV_HEADER.to_string())
        .chain(report.runs.iter().map(Metrics::csv_row))
        .map(|l| l + "\n")
        .collect();
    write_file(&cmd.out.join("runs.csv"), runs)?;
    write_file(&cmd.out.join("table1.csv"), report.to_csv())?;
    write_json(&cmd.out.join("table1.json"), &json!({ "config": cmd, "train": cfg, "report": report }))?;
    print!("{}", report.to_csv());
    Ok(())
}
