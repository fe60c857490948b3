use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use insident::data::{Column, ColumnKind, PositiveRule};
use insident::eval::{baseline_random_summary, EvalReport};
use insident::synth::{self, AnomalyKind, SynthConfig};
use insident::{
    detect_threshold, detect_top_n, information_loss, load_table, score_all, summarize_with,
    CentroidUpdate, ClusterModel, Dataset, LabelMode, LoadOptions, Schema, SelectionMode, SummaryOptions, Table,
    TrainConfig,
};
use serde::Serialize;

use crate::args::{
    AnomalyArg, CentroidArg, DetectArgs, EvaluateArgs, InputArgs, LabelsArg, Preset, SelectionArg, SummarizeArgs,
    SynthArgs, TrainArgs,
};
use crate::Failure;

type Result<T> = std::result::Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// First record of the file, used to size an ad hoc schema.
fn first_record(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Failure::from(insident::Error::from(e)))
        .map_err(|f| match f {
            Failure::Io(m) => Failure::Io(format!("{}: {m}", path.display())),
            other => other,
        })?;
    match reader.records().next() {
        Some(r) => Ok(r.map_err(insident::Error::from)?.iter().map(str::to_string).collect()),
        None => Err(insident::Error::Empty.into()),
    }
}

fn column_index(spec: &str, names: Option<&[String]>, width: usize, flag: &str) -> Result<usize> {
    if let Ok(i) = spec.parse::<usize>() {
        if i < width {
            return Ok(i);
        }
        return Err(invalid(format!("--{flag}: column {i} out of range for {width} columns")));
    }
    names
        .and_then(|n| n.iter().position(|c| c == spec))
        .ok_or_else(|| invalid(format!("--{flag}: no column named {spec:?}")))
}

pub fn resolve_schema(a: &InputArgs) -> Result<Schema> {
    let adhoc = a.header || a.label_col.is_some() || !a.categorical.is_empty() || !a.ignore.is_empty();
    if (a.preset.is_some() || a.schema.is_some()) && adhoc {
        return Err(invalid("column flags cannot be combined with --preset or --schema"));
    }
    match (a.preset, &a.schema) {
        (Some(Preset::Kdd99), _) => return Ok(Schema::kdd99()),
        (Some(Preset::Synth), _) => {
            let header = first_record(&a.input)?;
            let dim = header.len().saturating_sub(1);
            if dim == 0 || header.last().map(String::as_str) != Some("label") {
                return Err(invalid("--preset synth expects a header ending in \"label\""));
            }
            return Ok(synth::schema(dim));
        }
        (None, Some(path)) => return Ok(Schema::from_json_file(path)?),
        (None, None) => {}
    }

    let first = first_record(&a.input)?;
    let width = first.len();
    let names = a.header.then_some(first.as_slice());
    let mut columns: Vec<Column> = (0..width)
        .map(|i| {
            let name = names.map_or_else(|| format!("c{i}"), |n| n[i].clone());
            Column::new(name, ColumnKind::Numeric)
        })
        .collect();
    for spec in &a.categorical {
        columns[column_index(spec, names, width, "categorical")?].kind = ColumnKind::Categorical;
    }
    for spec in &a.ignore {
        columns[column_index(spec, names, width, "ignore")?].kind = ColumnKind::Ignore;
    }
    let mut schema = Schema::new(columns).with_header(a.header);
    if let Some(spec) = &a.label_col {
        let col = column_index(spec, names, width, "label-col")?;
        schema.columns[col].kind = ColumnKind::Ignore;
        let rule = match (&a.anomaly_value, &a.normal_value) {
            (Some(v), _) => PositiveRule::Equals(v.clone()),
            (None, Some(v)) => PositiveRule::NotEquals(v.clone()),
            (None, None) => return Err(invalid("--label-col needs --anomaly-value or --normal-value")),
        };
        schema = schema.with_label(col, rule);
    } else if a.anomaly_value.is_some() || a.normal_value.is_some() {
        return Err(invalid("label values given without --label-col"));
    }
    Ok(schema)
}

fn load(a: &InputArgs, seed: u64) -> Result<(Schema, Table, Dataset)> {
    let schema = resolve_schema(a)?;
    if a.subsample == Some(0) {
        return Err(invalid("--subsample must be at least 1"));
    }
    let options = LoadOptions {
        subsample: a.subsample.map(|n| (n, seed)),
    };
    let (table, dataset, _) = load_table(&a.input, &schema, &options)?;
    Ok((schema, table, dataset))
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let config = TrainConfig {
        k: a.k,
        beta: a.beta,
        lr_w: a.lr_w,
        lr_c: a.lr_c,
        max_iterations: a.max_iter,
        tol: a.tol,
        seed: a.seed,
        centroid_update: match a.centroid_update {
            CentroidArg::Gradient => CentroidUpdate::Gradient,
            CentroidArg::Exact => CentroidUpdate::Exact,
        },
        label_mode: match a.labels {
            LabelsArg::Auto => LabelMode::Auto,
            LabelsArg::Pseudo => LabelMode::Pseudo,
        },
    };
    config.validate()?;
    Ok(config)
}

fn train(dataset: &Dataset, config: &TrainConfig) -> Result<ClusterModel> {
    if config.k > dataset.len() {
        return Err(invalid(format!("--k {} exceeds the {} input rows", config.k, dataset.len())));
    }
    Ok(insident::train(dataset, config)?)
}

/// A row count (`"250"`) or a fraction of `n` in `(0, 1]` (`"0.01"`,
/// rounded up).
pub fn parse_size(text: &str, n: usize, flag: &str) -> Result<usize> {
    let bad = || invalid(format!("--{flag} {text}: expected a row count in 1..={n} or a fraction in (0, 1]"));
    if let Ok(count) = text.parse::<usize>() {
        return if (1..=n).contains(&count) { Ok(count) } else { Err(bad()) };
    }
    let frac: f64 = text.parse().map_err(|_| bad())?;
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(bad());
    }
    let size = (frac * n as f64).ceil() as usize;
    Ok(size.clamp(1, n))
}

fn parse_top_n(text: &str, dataset: &Dataset) -> Result<usize> {
    if text == "auto" {
        return dataset.anomaly_count().map_err(|_| invalid("--top-n auto needs a labeled input"));
    }
    let n: usize = text
        .parse()
        .map_err(|_| invalid(format!("--top-n {text}: expected a count or \"auto\"")))?;
    if n > dataset.len() {
        return Err(invalid(format!("--top-n {n} exceeds the {} input rows", dataset.len())));
    }
    Ok(n)
}

#[derive(Serialize)]
struct InputConfig<'a> {
    path: &'a Path,
    schema: &'a Schema,
    subsample: Option<usize>,
    rows: usize,
    encoded_dim: usize,
    labeled: bool,
}

impl<'a> InputConfig<'a> {
    fn new(a: &'a InputArgs, schema: &'a Schema, dataset: &Dataset) -> Self {
        InputConfig {
            path: &a.input,
            schema,
            subsample: a.subsample,
            rows: dataset.len(),
            encoded_dim: dataset.dim(),
            labeled: dataset.labels().is_some(),
        }
    }
}

#[derive(Serialize)]
struct Outputs {
    dir: PathBuf,
    files: Vec<&'static str>,
}

pub fn summarize(a: &SummarizeArgs) -> Result<()> {
    let config = train_config(&a.train)?;
    if !(a.epsilon >= 0.0) {
        return Err(invalid("--epsilon must be nonnegative"));
    }
    let (schema, table, dataset) = load(&a.input, config.seed)?;
    let size = parse_size(&a.size, dataset.len(), "size")?;
    let model = train(&dataset, &config)?;
    let options = SummaryOptions {
        selection: match a.selection {
            SelectionArg::Stratified => SelectionMode::Stratified,
            SelectionArg::Random => SelectionMode::Random { seed: config.seed },
        },
        force_top_scored: a.force_top,
    };
    let summary = summarize_with(&model, &dataset, size, &options)?;
    let report = EvalReport::for_summary(&dataset, &summary, a.epsilon, Some(&model))?;

    prepare_dir(&a.out)?;
    table.write_rows(&a.out.join("summary.csv"), &summary.members)?;
    let mut sidecar = String::from("row_id,cluster\n");
    for &p in &summary.members {
        let _ = writeln!(sidecar, "{},{}", dataset.row_ids()[p], model.assignments[p]);
    }
    write_file(&a.out.join("summary_clusters.csv"), &sidecar)?;
    model.save(&a.out.join("model.json"))?;
    write_file(&a.out.join("report.txt"), &report.to_key_values())?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'static str,
        input: InputConfig<'a>,
        train: &'a TrainConfig,
        size: usize,
        size_arg: &'a str,
        summary: &'a SummaryOptions,
        epsilon: f64,
        outputs: Outputs,
    }
    let resolved = Resolved {
        command: "summarize",
        input: InputConfig::new(&a.input, &schema, &dataset),
        train: &config,
        size,
        size_arg: &a.size,
        summary: &options,
        epsilon: a.epsilon,
        outputs: Outputs {
            dir: a.out.clone(),
            files: vec!["summary.csv", "summary_clusters.csv", "model.json", "report.txt", "config.json"],
        },
    };
    write_file(&a.out.join("config.json"), &to_json(&resolved))?;
    print!("{report}");
    Ok(())
}

pub fn detect(a: &DetectArgs) -> Result<()> {
    let config = train_config(&a.train)?;
    if let Some(q) = a.quantile {
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid(format!("--quantile {q}: expected a value in [0, 1]")));
        }
    }
    let (schema, _, dataset) = load(&a.input, config.seed)?;
    let top_n = match (&a.top_n, a.quantile) {
        (Some(t), _) => Some(parse_top_n(t, &dataset)?),
        (None, Some(_)) => None,
        (None, None) => return Err(invalid("one of --top-n or --quantile is required")),
    };
    let model = train(&dataset, &config)?;
    let scores = score_all(&model, &dataset);
    let flagged = match top_n {
        Some(n) => detect_top_n(&scores, n)?,
        None => detect_threshold(&scores, a.quantile.expect("checked above"))?,
    };

    prepare_dir(&a.out)?;
    let mut is_flagged = vec![false; dataset.len()];
    let position_of: std::collections::HashMap<usize, usize> =
        dataset.row_ids().iter().enumerate().map(|(p, &id)| (id, p)).collect();
    for id in &flagged {
        is_flagged[position_of[id]] = true;
    }
    let mut csv = String::from("row_id,cluster,score,flagged\n");
    for s in &scores {
        let _ = writeln!(csv, "{},{},{},{}", s.row_id, s.cluster, s.score, u8::from(is_flagged[s.position]));
    }
    write_file(&a.out.join("scores.csv"), &csv)?;
    model.save(&a.out.join("model.json"))?;

    let mut report = EvalReport {
        n: dataset.len(),
        ..Default::default()
    };
    if dataset.labels().is_some() {
        report = report.with_detection(&dataset, &flagged)?;
    }
    write_file(&a.out.join("report.txt"), &report.to_key_values())?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'static str,
        input: InputConfig<'a>,
        train: &'a TrainConfig,
        top_n: Option<usize>,
        top_n_arg: Option<&'a str>,
        quantile: Option<f64>,
        flagged: usize,
        outputs: Outputs,
    }
    let resolved = Resolved {
        command: "detect",
        input: InputConfig::new(&a.input, &schema, &dataset),
        train: &config,
        top_n,
        top_n_arg: a.top_n.as_deref(),
        quantile: a.quantile,
        flagged: flagged.len(),
        outputs: Outputs {
            dir: a.out.clone(),
            files: vec!["scores.csv", "model.json", "report.txt", "config.json"],
        },
    };
    write_file(&a.out.join("config.json"), &to_json(&resolved))?;
    print!("{report}");
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn loss_cell(r: insident::Result<f64>) -> Result<String> {
    match r {
        Ok(v) => Ok(v.to_string()),
        Err(insident::Error::UndefinedLoss) => Ok("undefined".into()),
        Err(e) => Err(e.into()),
    }
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let config = train_config(&a.train)?;
    if !(a.epsilon >= 0.0) {
        return Err(invalid("--epsilon must be nonnegative"));
    }
    let (schema, _, dataset) = load(&a.input, config.seed)?;
    let sizes = a
        .sizes
        .iter()
        .map(|s| parse_size(s, dataset.len(), "sizes"))
        .collect::<Result<Vec<usize>>>()?;
    let model = train(&dataset, &config)?;
    let labeled = dataset.labels().is_some();
    let original = if labeled {
        Some(insident::data::anomaly_fraction(&dataset)?)
    } else {
        None
    };

    let mut curve = String::from(
        "size,conciseness,info_loss,orig_anom_frac,summ_anom_frac,random_info_loss,random_summ_anom_frac\n",
    );
    let mut table = String::new();
    let _ = writeln!(table, "{:>10} {:>12} {:>14} {:>14} {:>14}", "size", "conciseness", "info loss", "anom frac", "random loss");
    for &s in &sizes {
        let summary = summarize_with(&model, &dataset, s, &SummaryOptions::default())?;
        let random = baseline_random_summary(&dataset, s, config.seed)?;
        let frac = |members: &[usize]| -> Result<Option<f64>> {
            if labeled {
                Ok(Some(insident::data::anomaly_fraction(&dataset.subset(members))?))
            } else {
                Ok(None)
            }
        };
        let conc = insident::conciseness(dataset.len(), s)?;
        let loss = loss_cell(information_loss(&dataset, &summary, a.epsilon, Some(&model)))?;
        let random_loss = loss_cell(information_loss(&dataset, &random, a.epsilon, Some(&model)))?;
        let summ_frac = frac(&summary.members)?;
        let _ = writeln!(
            curve,
            "{s},{conc},{loss},{},{},{random_loss},{}",
            opt(original),
            opt(summ_frac),
            opt(frac(&random.members)?)
        );
        let _ = writeln!(
            table,
            "{:>10} {:>12.2} {:>14} {:>14} {:>14}",
            s,
            conc,
            loss,
            summ_frac.map_or_else(|| "-".into(), |f| format!("{:.4}%", 100.0 * f)),
            random_loss
        );
    }
    prepare_dir(&a.out)?;
    write_file(&a.out.join("curve.csv"), &curve)?;
    model.save(&a.out.join("model.json"))?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'static str,
        input: InputConfig<'a>,
        train: &'a TrainConfig,
        sizes: &'a [usize],
        epsilon: f64,
        outputs: Outputs,
    }
    let resolved = Resolved {
        command: "evaluate",
        input: InputConfig::new(&a.input, &schema, &dataset),
        train: &config,
        sizes: &sizes,
        epsilon: a.epsilon,
        outputs: Outputs {
            dir: a.out.clone(),
            files: vec!["curve.csv", "model.json", "config.json"],
        },
    };
    write_file(&a.out.join("config.json"), &to_json(&resolved))?;
    if let Some(f) = original {
        println!("original anomaly fraction {:.4}%", 100.0 * f);
    }
    print!("{table}");
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        n: a.n,
        blobs: a.blobs,
        dim: a.dim,
        anom_frac: a.anom_frac,
        seed: a.seed,
        anomalies: match a.anomalies {
            AnomalyArg::Uniform => AnomalyKind::Uniform,
            AnomalyArg::Contextual => AnomalyKind::Contextual,
        },
    };
    let data = synth::generate(&config)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }
    synth::write_csv(&data, &a.out)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'static str,
        synth: &'a SynthConfig,
        anomalies: usize,
        output: &'a Path,
    }
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".config.json");
    let resolved = Resolved {
        command: "synth",
        synth: &config,
        anomalies: config.anomaly_count(),
        output: &a.out,
    };
    write_file(Path::new(&sidecar), &to_json(&resolved))?;
    println!("wrote {} rows ({} anomalies) to {}", config.n, config.anomaly_count(), a.out.display());
    Ok(())
}
