use std::path::{Path, PathBuf};

use imave::fit::SmootherConfig;
use imave::metrics::{coefficient_ratios, summarize_ratios};
use imave::selection::default_max_dimension;
use imave::simulation::{Assignment, LOGISTIC_ASSIGNMENT};
use imave::{
    contrast_smoother, estimate_propensity, generate_data, imave2_fit, imave_fit, multiarm_fit, run_replication_study,
    select_dimension, validate_dataset, ContrastSpec, CvConfig, CvResult, Dataset, Error, EtaMode, FitConfig,
    MetricReport, PropensityKind, PropensityMode, PropensityModel, ScenarioSpec, StudyConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::error::CliError;
use crate::json::to_canonical;
use crate::model::{model_file, ModelContext, ModelFile, Standardization, TruthFile, SCHEMA_VERSION};
use crate::table;

type Outcome = Result<(), CliError>;

pub fn execute(command: &Command) -> Outcome {
    match command {
        Command::Fit(a) => fit(a, false),
        Command::Fit2(a) => fit(a, true),
        Command::Predict(a) => predict(a),
        Command::Dimselect(a) => dimselect(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Study(a) => study(a),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Outcome {
    let text = to_canonical(value).map_err(|e| CliError::Parse(e.to_string()))?;
    table::emit(path, &text)
}

struct Prepared {
    ds: Dataset,
    propensity: PropensityModel,
    standardization: Option<Standardization>,
}

fn prepare(args: &DataArgs) -> Result<Prepared, CliError> {
    let mut raw = table::read_observations(&args.input)?;
    raw.levels = args.levels.clone();
    let ds = validate_dataset(&raw)?;
    let (ds, propensity) = match (args.propensity, ds.pi().is_some()) {
        (PropensityArg::Known, _) | (PropensityArg::Auto, true) => {
            ds.require_pi()?;
            (ds, PropensityModel::known())
        }
        _ => {
            let est = estimate_propensity(&ds)?;
            if est.separation_detected {
                eprintln!("warning: treatment is separated by the covariates; using a constant propensity");
            }
            (ds.with_propensity(&est.model)?, est.model)
        }
    };
    if !args.standardize {
        return Ok(Prepared { ds, propensity, standardization: None });
    }
    let (ds, center, scale) = ds.standardized();
    Ok(Prepared { ds, propensity, standardization: Some(Standardization { center, scale }) })
}

fn default_contrast(k: usize) -> Result<ContrastSpec, Error> {
    if k == 2 {
        Ok(ContrastSpec::binary())
    } else {
        ContrastSpec::successive_differences(k)
    }
}

fn fit(args: &FitArgs, second_stage: bool) -> Outcome {
    let Prepared { ds, propensity, standardization } = prepare(&args.data)?;
    let cfg = args.tuning.fit_config();
    let contrast = match &args.contrast {
        Some(path) => read_json::<ContrastSpec>(path)?,
        None => default_contrast(ds.k())?,
    };
    let eta = match args.eta {
        EtaArg::Zero => EtaMode::Zero,
        EtaArg::SongPi => EtaMode::SongPi,
    };
    let binary = contrast == ContrastSpec::binary();
    let (result, estimator) = if second_stage {
        if args.eta != EtaArg::Zero {
            return Err(CliError::Usage("fit2 chooses its own offset; --eta applies to fit".into()));
        }
        if !ds.is_binary() || !binary {
            return Err(Error::NotBinary.into());
        }
        (imave2_fit(&ds, args.d, &cfg)?, "imave2")
    } else if binary && ds.is_binary() {
        (imave_fit(&ds, args.d, eta, &cfg)?, "imave")
    } else {
        (multiarm_fit(&ds, &contrast, args.d, eta, &cfg)?.fit, "multiarm")
    };
    let ctx = ModelContext {
        estimator,
        kernel: cfg.smoother.kernel,
        h_g: cfg.smoother.h_g,
        levels: ds.labels().to_vec(),
        contrast,
        propensity,
        standardization,
        n: ds.n(),
    };
    write_json(args.output.as_deref(), &model_file(&result, ctx))
}

/// The training data exactly as the model saw it.
fn training_data(model: &ModelFile, path: &Path) -> Result<Dataset, CliError> {
    let mut raw = table::read_observations(path)?;
    raw.levels = Some(model.levels.clone());
    let mut ds = validate_dataset(&raw)?;
    if !matches!(model.propensity.kind, PropensityKind::Known) {
        ds = ds.with_propensity(&model.propensity)?;
    }
    if let Some(s) = &model.standardization {
        let mut raw = ds.to_raw();
        raw.x.iter_mut().for_each(|row| s.apply(row));
        ds = validate_dataset(&raw)?;
    }
    Ok(ds)
}

fn predict(args: &PredictArgs) -> Outcome {
    let model: ModelFile = read_json(&args.model)?;
    if model.schema_version != SCHEMA_VERSION {
        return Err(CliError::Parse(format!("unsupported model schema version {}", model.schema_version)));
    }
    let ds = training_data(&model, &args.train)?;
    let b = model.index()?;
    if b.p() != ds.p() {
        return Err(Error::DimensionMismatch(format!("model has p = {}, training data p = {}", b.p(), ds.p())).into());
    }
    let cfg = FitConfig {
        smoother: SmootherConfig { kernel: model.kernel, h_g: model.h_g, h_eta: None },
        ..FitConfig::default()
    };
    let smoother = contrast_smoother(&ds, &model.contrast, &b, &cfg)?;
    let x = match &args.input {
        Some(path) => {
            let mut x = table::read_covariates(path, ds.p())?;
            if let Some(s) = &model.standardization {
                s.apply(&mut x);
            }
            x
        }
        None => ds.x_rows().to_vec(),
    };
    let (d, m) = (b.d(), model.contrast.contrasts());
    let mut header: Vec<String> = (1..=d).map(|k| format!("u{k}")).collect();
    if m == 1 {
        header.push("g".into());
    } else {
        header.extend((1..=m).map(|k| format!("g{k}")));
    }
    header.push("fallback".into());
    let coords = b.project_rows(&x);
    let rows: Vec<Vec<String>> = coords
        .chunks(d)
        .map(|u| {
            let s = smoother.at(u);
            let mut row: Vec<String> = u.iter().map(f64::to_string).collect();
            row.extend(s.values.iter().map(f64::to_string));
            row.push(u8::from(s.fallback).to_string());
            row
        })
        .collect();
    match &args.output {
        Some(path) => table::write_rows(path, &header, &rows),
        None => {
            let mut text = header.join(",") + "\n";
            for row in &rows {
                text += &(row.join(",") + "\n");
            }
            table::emit(None, &text)
        }
    }
}

#[derive(Serialize)]
struct CvFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    result: &'a CvResult,
}

fn dimselect(args: &DimselectArgs) -> Outcome {
    let Prepared { ds, .. } = prepare(&args.data)?;
    let cfg = args.tuning.fit_config();
    let d_max = args.d_max.unwrap_or_else(|| default_max_dimension(ds.p()));
    let cv = CvConfig { folds: args.folds, stratified: !args.no_stratify, seed: args.tuning.seed };
    let result = select_dimension(&ds, d_max, &cv, &cfg)?;
    write_json(args.output.as_deref(), &CvFile { schema_version: SCHEMA_VERSION, result: &result })
}

fn default_truth_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".truth.json");
    PathBuf::from(name)
}

fn simulate(args: &SimulateArgs) -> Outcome {
    let mut spec = ScenarioSpec::standard(args.scenario.into(), args.n, args.seed);
    if let Some(tau) = args.tau {
        spec.tau = tau;
    }
    if let Some(gamma) = args.gamma {
        spec.gamma = gamma;
    }
    if let Some(sigma) = args.sigma {
        spec.sigma = sigma;
    }
    if args.assignment == AssignmentArg::Logistic {
        let mut c = vec![0.0; spec.p()];
        c.iter_mut().zip(LOGISTIC_ASSIGNMENT).for_each(|(a, b)| *a = b);
        spec.assignment = Assignment::Logistic(c);
    }
    let sim = generate_data(&spec)?;
    table::write_observations(&args.output, &sim.dataset.to_raw())?;
    let truth = args.truth.clone().unwrap_or_else(|| default_truth_path(&args.output));
    write_json(Some(&truth), &TruthFile::new(spec, &sim))
}

fn evaluate(args: &EvaluateArgs) -> Outcome {
    let scores = table::read_column(&args.predictions, &args.column)?;
    let truth = args.truth.as_deref().map(read_json::<TruthFile>).transpose()?;
    let test = match &args.test {
        Some(path) => Some(validate_dataset(&table::read_observations(path)?)?),
        None => None,
    };
    let mut report = MetricReport::evaluate(
        &scores,
        truth.as_ref().map(|t| t.g.as_slice()),
        test.as_ref(),
        args.rank_statistic.into(),
    )?;
    if let Some(path) = &args.model {
        let model: ModelFile = read_json(path)?;
        if model.d == 1 {
            report.ratios = summarize_ratios(&[coefficient_ratios(&model.b.to_matrix()?)]);
        }
    }
    write_json(args.output.as_deref(), &report)
}

fn study(args: &StudyArgs) -> Outcome {
    let cfg = StudyConfig {
        shapes: args.scenarios.iter().map(|&s| s.into()).collect(),
        sizes: args.sizes.clone(),
        reps: args.reps,
        seed: args.tuning.seed,
        propensity: match args.propensity {
            StudyPropensityArg::Known => PropensityMode::Known,
            StudyPropensityArg::Estimated => PropensityMode::Estimated,
        },
        test_size: args.test_size,
        rank_statistic: args.rank_statistic.into(),
        fit: args.tuning.fit_config(),
    };
    let summary = run_replication_study(&cfg)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    table::write_records(&args.out_dir.join("table1.csv"), &summary.table)?;
    table::write_records(&args.out_dir.join("metrics.csv"), &summary.metrics)?;
    if !summary.failures.is_empty() {
        eprintln!("warning: {} replicate(s) failed and were skipped", summary.failures.len());
    }
    Ok(())
}
