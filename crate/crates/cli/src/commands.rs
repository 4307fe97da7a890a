use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gpsselect::criteria::{self, AiccForm, Criterion, CriterionTable, SelectionResult};
use gpsselect::dataset::{load_csv, standardize, StandardizedDesign};
use gpsselect::dof::{self, DfSeries};
use gpsselect::oracle::{self, OracleReport};
use gpsselect::path::{self, DeltaT, PathOptions, SolutionPath};
use gpsselect::penalty::PenaltySpec;
use gpsselect::sim::{self, ErrorTarget, SimCell, SimConfig, Tau2Mode};
use gpsselect::{GpsError, Result};
use serde::Serialize;

use crate::args::*;
use crate::manifest::{self, RunManifest, CSV_MANIFEST_PREFIX};

/// Text produced by a command, plus an error to report after the text has
/// been written (used when verification finds a failing check).
#[derive(Debug)]
pub struct Rendered {
    pub text: String,
    pub deferred: Option<GpsError>,
}

impl Rendered {
    fn ok(text: String) -> Self {
        Self {
            text,
            deferred: None,
        }
    }
}

pub fn run(command: &Command) -> Result<Rendered> {
    match command {
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Replay(a) => replay(a),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| GpsError::Internal(format!("cannot serialize output: {e}")))
}

fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value)
        .map(|s| s + "\n")
        .map_err(|e| GpsError::Internal(format!("cannot serialize output: {e}")))
}

fn csv_header(manifest: &RunManifest) -> Result<String> {
    let line = serde_json::to_string(manifest)
        .map_err(|e| GpsError::Internal(format!("cannot serialize manifest: {e}")))?;
    Ok(format!("{CSV_MANIFEST_PREFIX}{line}\n"))
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Expands `all` and parses each name.
pub fn parse_criteria(names: &[String]) -> Result<Vec<Criterion>> {
    let mut out = Vec::new();
    for name in names {
        for part in name.split(',') {
            let part = part.trim();
            let items: Vec<Criterion> = if part.eq_ignore_ascii_case("all") {
                Criterion::ALL.to_vec()
            } else {
                vec![part.parse()?]
            };
            for c in items {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(GpsError::InvalidParameter("no criterion given".into()));
    }
    Ok(out)
}

fn parse_penalties(names: &[String], alpha: Option<f64>) -> Result<Vec<PenaltySpec>> {
    names
        .iter()
        .flat_map(|n| n.split(','))
        .map(|n| PenaltySpec::from_parts(n.trim(), alpha))
        .collect()
}

fn aicc_form(sign: AiccSign) -> AiccForm {
    match sign {
        AiccSign::Plus => AiccForm::Plus,
        AiccSign::Minus => AiccForm::Minus,
    }
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Serialize)]
struct FitDocument {
    manifest: RunManifest,
    summary: FitSummary,
    steps: Vec<StepRecord>,
    criteria: Vec<CriterionRecord>,
    selections: Vec<SelectionRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_validation: Option<CvRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<TraceRecord>,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    n: usize,
    p: usize,
    penalty: String,
    delta_t: f64,
    alpha: f64,
    tau2: Option<f64>,
    path_length: usize,
    stop: path::StopReason,
    variables_selected: Vec<String>,
    df_method: DfChoice,
    /// Largest difference between the two trackers, with `--df both`.
    df_tracker_max_abs_diff: Option<f64>,
}

#[derive(Debug, Serialize)]
struct StepRecord {
    step: usize,
    t: f64,
    l1: f64,
    df: f64,
    df_zou: usize,
    /// Nonzero standardized coefficients.
    coefficients: BTreeMap<String, f64>,
}

/// Non-finite criterion values are written as `null`.
#[derive(Debug, Serialize)]
struct CriterionRecord {
    step: usize,
    rss: f64,
    df: f64,
    cp: Option<f64>,
    aic: Option<f64>,
    aicc: f64,
    bic: Option<f64>,
    gcv: f64,
}

#[derive(Debug, Serialize)]
struct SelectionRecord {
    criterion: String,
    step: usize,
    t: f64,
    l1: f64,
    df: f64,
    intercept: f64,
    coefficients: BTreeMap<String, f64>,
    standardized: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct CvRecord {
    folds: usize,
    best_fraction: f64,
    grid: Vec<f64>,
    mean_error: Vec<f64>,
    std_error: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct TraceRecord {
    variable: usize,
    name: String,
    points: Vec<TracePoint>,
}

#[derive(Debug, Serialize)]
struct TracePoint {
    step: usize,
    l1: f64,
    beta: f64,
    gradient: f64,
}

fn resolve_trace_var(spec: &str, design: &StandardizedDesign) -> Result<usize> {
    if let Some(j) = design.predictor_names.iter().position(|n| n == spec) {
        return Ok(j);
    }
    match spec.parse::<usize>() {
        Ok(j) if (1..=design.p()).contains(&j) => Ok(j - 1),
        _ => Err(GpsError::InvalidParameter(format!(
            "--trace-var `{spec}` is neither a predictor name nor an index in 1..={}",
            design.p()
        ))),
    }
}

fn named(values: impl IntoIterator<Item = (usize, f64)>, names: &[String]) -> BTreeMap<String, f64> {
    values.into_iter().map(|(j, v)| (names[j].clone(), v)).collect()
}

pub fn fit(args: &FitArgs) -> Result<Rendered> {
    if args.thin == 0 {
        return Err(GpsError::InvalidParameter("--thin must be positive".into()));
    }
    let input = manifest::digest_file(&args.data)?;
    let raw = load_csv(&args.data, &args.response)?;
    let penalty = PenaltySpec::from_parts(&args.penalty, args.alpha)?;
    let crits = parse_criteria(&args.criterion)?;
    let opts = PathOptions {
        step_budget: args.steps,
        max_vars: args.max_vars,
        max_iterations: None,
        delta_t: args.delta_t.map_or(DeltaT::Auto, DeltaT::Fixed),
    };
    let design = standardize(&raw)?;
    let fitted = path::fit(&design, &penalty, &opts)?;

    let (df, tracker_gap) = match args.df {
        DfChoice::Dense => (dof::dense_series(&fitted, &design)?, None),
        DfChoice::Reduced => (dof::reduced_replay(&fitted, &design)?, None),
        DfChoice::Both => {
            let reduced = dof::reduced_replay(&fitted, &design)?;
            let dense = dof::dense_series(&fitted, &design)?;
            let gap = reduced.max_abs_diff(&dense);
            (reduced, Some(gap))
        }
    };

    let needs_tau2 = crits.iter().any(Criterion::needs_tau2);
    let tau2 = match args.tau2.trim() {
        "auto" if needs_tau2 => Some(criteria::estimate_tau2(&design)?),
        "auto" => criteria::estimate_tau2(&design).ok(),
        v => match v.parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Some(t),
            _ => {
                return Err(GpsError::InvalidParameter(format!(
                    "--tau2 must be `auto` or a positive number, got `{v}`"
                )))
            }
        },
    };
    let table = criteria::evaluate(&fitted, &df, tau2, aicc_form(args.aicc_form))?;

    let mut selections = Vec::new();
    let mut cv_record = None;
    for &c in &crits {
        let sel = if c == Criterion::Cv {
            let cv = criteria::cross_validate(&raw, &penalty, &opts, args.folds, args.seed)?;
            let step = fitted.step_at_l1_fraction(cv.best_fraction);
            cv_record = Some(CvRecord {
                folds: cv.folds,
                best_fraction: cv.best_fraction,
                grid: cv.grid,
                mean_error: cv.mean_error,
                std_error: cv.std_error,
            });
            SelectionResult::at_step(c, step, &fitted, &df, &design)?
        } else {
            criteria::select(c, &table, &fitted, &df, &design)?
        };
        selections.push(sel);
    }

    let mut indices = fitted.thinned_indices(args.thin);
    indices.extend(selections.iter().map(|s| s.step));
    indices.sort_unstable();
    indices.dedup();

    let trace_var = args
        .trace_var
        .as_deref()
        .map(|v| resolve_trace_var(v, &design))
        .transpose()?;

    let names = &design.predictor_names;
    let betas = fitted.betas_at(&indices);
    let steps: Vec<StepRecord> = indices
        .iter()
        .zip(&betas)
        .map(|(&s, b)| StepRecord {
            step: s,
            t: fitted.steps[s].t,
            l1: fitted.steps[s].l1,
            df: df.values[s],
            df_zou: dof::zou_df(b.view()),
            coefficients: named(b.iter().copied().enumerate().filter(|(_, v)| *v != 0.0), names),
        })
        .collect();
    let criteria_rows = criterion_records(&table, &indices);
    let trace = match trace_var {
        Some(j) => {
            let g = fitted.gradient_trace(j, &design)?;
            Some(TraceRecord {
                variable: j + 1,
                name: names[j].clone(),
                points: indices
                    .iter()
                    .zip(&betas)
                    .map(|(&s, b)| TracePoint {
                        step: s,
                        l1: fitted.steps[s].l1,
                        beta: b[j],
                        gradient: g[s],
                    })
                    .collect(),
            })
        }
        None => None,
    };

    if let Some(dir) = &args.plot_data {
        write_plot_data(dir, &fitted, &df, &design, &indices, &betas, trace.as_ref())?;
    }

    let mut manifest = RunManifest::new(Command::Fit(args.clone()), Some(input));
    manifest.resolve("delta_t", fitted.delta_t);
    manifest.resolve("tau2", tau2);
    manifest.resolve("penalty", penalty);

    let selection_records: Vec<SelectionRecord> = selections
        .iter()
        .map(|s| SelectionRecord {
            criterion: s.criterion.to_string(),
            step: s.step,
            t: s.t,
            l1: s.l1,
            df: s.df,
            intercept: s.intercept,
            coefficients: named(s.beta.iter().copied().enumerate(), names),
            standardized: named(s.beta_std.iter().copied().enumerate(), names),
        })
        .collect();

    let text = match args.format {
        Format::Json => to_json(&FitDocument {
            manifest,
            summary: FitSummary {
                n: design.n(),
                p: design.p(),
                penalty: penalty.to_string(),
                delta_t: fitted.delta_t,
                alpha: fitted.alpha,
                tau2,
                path_length: fitted.len(),
                stop: fitted.stop,
                variables_selected: fitted.selected.iter().map(|&j| names[j].clone()).collect(),
                df_method: args.df,
                df_tracker_max_abs_diff: tracker_gap,
            },
            steps,
            criteria: criteria_rows,
            selections: selection_records,
            cross_validation: cv_record,
            trace,
        })?,
        Format::Csv => {
            let mut s = csv_header(&manifest)?;
            let _ = write!(s, "criterion,step,t,l1,df,intercept");
            for n in names {
                let _ = write!(s, ",{n}");
            }
            s.push('\n');
            for sel in &selections {
                let _ = write!(
                    s,
                    "{},{},{},{},{},{}",
                    sel.criterion, sel.step, sel.t, sel.l1, sel.df, sel.intercept
                );
                for b in &sel.beta {
                    let _ = write!(s, ",{b}");
                }
                s.push('\n');
            }
            s
        }
    };
    Ok(Rendered::ok(text))
}

fn criterion_records(table: &CriterionTable, indices: &[usize]) -> Vec<CriterionRecord> {
    let finite = |v: f64| v.is_finite().then_some(v);
    indices
        .iter()
        .map(|&s| {
            let r = &table.rows[s];
            CriterionRecord {
                step: s,
                rss: r.rss,
                df: r.df,
                cp: r.cp.and_then(finite),
                aic: r.aic.and_then(finite),
                aicc: r.aicc,
                bic: r.bic.and_then(finite),
                gcv: r.gcv,
            }
        })
        .collect()
}

fn write_plot_data(
    dir: &Path,
    fitted: &SolutionPath,
    df: &DfSeries,
    design: &StandardizedDesign,
    indices: &[usize],
    betas: &[ndarray::Array1<f64>],
    trace: Option<&TraceRecord>,
) -> Result<()> {
    let io = |path: &Path, e: std::io::Error| GpsError::Io {
        path: path.display().to_string(),
        source: e,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, e))
    };
    for (j, name) in design.predictor_names.iter().enumerate() {
        let mut body = String::from("# l1 coefficient\n");
        for (&s, b) in indices.iter().zip(betas) {
            let _ = writeln!(body, "{} {}", fitted.steps[s].l1, b[j]);
        }
        write(format!("path_{name}.txt"), body)?;
    }
    let mut body = String::from("# l1 df\n");
    for &s in indices {
        let _ = writeln!(body, "{} {}", fitted.steps[s].l1, df.values[s]);
    }
    write("df.txt".into(), body)?;
    if let Some(t) = trace {
        let mut body = String::from("# l1 gradient\n");
        for p in &t.points {
            let _ = writeln!(body, "{} {}", p.l1, p.gradient);
        }
        write(format!("gradient_{}.txt", t.name), body)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Serialize)]
struct SimulateDocument {
    manifest: RunManifest,
    example: u8,
    n: usize,
    p: usize,
    replicates: usize,
    rows: Vec<CellRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paired_difference: Option<PairedRecord>,
}

#[derive(Debug, Serialize)]
struct CellRecord {
    penalty: String,
    rule: String,
    mse: f64,
    sd: f64,
    mse_std_error: f64,
    zz: Option<f64>,
    nn: Option<f64>,
}

impl From<&SimCell> for CellRecord {
    fn from(c: &SimCell) -> Self {
        Self {
            penalty: c.penalty.clone(),
            rule: c.rule.clone(),
            mse: c.mse,
            sd: c.sd,
            mse_std_error: c.mse_std_error,
            zz: c.zz,
            nn: c.nn,
        }
    }
}

/// Mean of `SE(gps) - SE(zou)` with its two-sided 95% interval.
#[derive(Debug, Serialize)]
struct PairedRecord {
    mean: f64,
    std_error: f64,
    lower: f64,
    upper: f64,
}

pub fn sim_config(args: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg = SimConfig::example(args.example);
    cfg.replicates = args.reps;
    cfg.seed = args.seed;
    cfg.penalties = parse_penalties(&args.penalty, args.alpha)?;
    cfg.criteria = parse_criteria(&args.criterion)?;
    cfg.tau2_mode = match args.tau2 {
        Tau2Source::True => Tau2Mode::True,
        Tau2Source::Estimated => Tau2Mode::Estimated,
    };
    cfg.path = PathOptions::default().with_budget(args.steps);
    cfg.cv_folds = args.folds;
    cfg.aicc_form = aicc_form(args.aicc_form);
    cfg.error_target = match args.error_target {
        Target::Slopes => ErrorTarget::Slopes,
        Target::FullMean => ErrorTarget::FullMean,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn simulate(args: &SimulateArgs) -> Result<Rendered> {
    let cfg = sim_config(args)?;
    let (model, n) = cfg.scenario.resolve()?;
    let (rows, paired) = if args.compare_df {
        let r = sim::compare_df(&cfg)?;
        let (lower, upper) = r.difference_interval();
        (
            vec![CellRecord::from(&r.gps), CellRecord::from(&r.zou)],
            Some(PairedRecord {
                mean: r.mean_difference,
                std_error: r.difference_std_error,
                lower,
                upper,
            }),
        )
    } else {
        let r = sim::run_example(&cfg)?;
        (r.cells.iter().map(CellRecord::from).collect(), None)
    };
    let manifest = RunManifest::new(Command::Simulate(args.clone()), None);
    let text = match args.format {
        Format::Json => to_json(&SimulateDocument {
            manifest,
            example: args.example,
            n,
            p: model.p(),
            replicates: cfg.replicates,
            rows,
            paired_difference: paired,
        })?,
        Format::Csv => {
            let mut s = csv_header(&manifest)?;
            s.push_str("penalty,rule,mse,sd,mse_std_error,zz,nn\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.penalty,
                    r.rule,
                    r.mse,
                    r.sd,
                    r.mse_std_error,
                    opt_cell(r.zz),
                    opt_cell(r.nn)
                );
            }
            s
        }
    };
    Ok(Rendered::ok(text))
}

// ---------------------------------------------------------------- bench

#[derive(Debug, Serialize)]
struct BenchDocument {
    manifest: RunManifest,
    rows: Vec<BenchRecord>,
    /// Log-log slopes of time against N.
    timing: Option<BenchSlopes>,
}

#[derive(Debug, Serialize)]
struct BenchRecord {
    n: usize,
    reps: usize,
    steps: usize,
    timing: BenchTiming,
}

#[derive(Debug, Serialize)]
struct BenchTiming {
    dense_seconds: f64,
    reduced_seconds: f64,
    ratio: f64,
}

#[derive(Debug, Serialize)]
struct BenchSlopes {
    dense_slope: f64,
    reduced_slope: f64,
}

pub fn bench(args: &BenchArgs) -> Result<Rendered> {
    if args.n.is_empty() {
        return Err(GpsError::InvalidParameter("--n needs at least one size".into()));
    }
    let opts = PathOptions::default().with_budget(args.steps);
    let rows = sim::bench_timing(&args.n, args.reps, args.seed, &opts)?;
    let slopes = (rows.len() >= 2).then(|| BenchSlopes {
        dense_slope: sim::loglog_slope(&rows.iter().map(|r| (r.n, r.dense_seconds)).collect::<Vec<_>>()),
        reduced_slope: sim::loglog_slope(&rows.iter().map(|r| (r.n, r.reduced_seconds)).collect::<Vec<_>>()),
    });
    let manifest = RunManifest::new(Command::Bench(args.clone()), None);
    let text = match args.format {
        Format::Json => to_json(&BenchDocument {
            manifest,
            rows: rows
                .iter()
                .map(|r| BenchRecord {
                    n: r.n,
                    reps: r.reps,
                    steps: r.steps,
                    timing: BenchTiming {
                        dense_seconds: r.dense_seconds,
                        reduced_seconds: r.reduced_seconds,
                        ratio: r.ratio,
                    },
                })
                .collect(),
            timing: slopes,
        })?,
        Format::Csv => {
            let mut s = csv_header(&manifest)?;
            s.push_str("n,reps,steps,dense_seconds,reduced_seconds,ratio\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.n, r.reps, r.steps, r.dense_seconds, r.reduced_seconds, r.ratio
                );
            }
            s
        }
    };
    Ok(Rendered::ok(text))
}

// ---------------------------------------------------------------- verify

pub fn verify(args: &VerifyArgs) -> Result<Rendered> {
    let penalties = parse_penalties(&args.penalty, args.alpha)?;
    let (design, input) = match &args.data {
        Some(path) => {
            let input = manifest::digest_file(path)?;
            (standardize(&load_csv(path, &args.response)?)?, Some(input))
        }
        None => (standardize(&sim::random_instance(args.n, args.p, args.seed)?)?, None),
    };
    let opts = PathOptions::default().with_budget(args.steps);
    let mut reports: Vec<OracleReport> = Vec::new();
    for pen in &penalties {
        reports.extend(oracle::verify(&design, pen, &opts, args.seed)?);
    }
    let manifest = RunManifest::new(Command::Verify(args.clone()), input);
    let mut text = match args.format {
        Format::Json => to_json_line(&serde_json::json!({ "manifest": manifest }))?,
        Format::Csv => {
            let mut s = csv_header(&manifest)?;
            s.push_str("penalty,metric,main,oracle,tolerance,pass\n");
            s
        }
    };
    for r in &reports {
        match args.format {
            Format::Json => text.push_str(&to_json_line(r)?),
            Format::Csv => {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    r.penalty, r.metric, r.main, r.oracle, r.tolerance, r.pass
                );
            }
        }
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    let deferred = (failed > 0).then(|| {
        GpsError::Internal(format!("{failed} of {} oracle checks failed", reports.len()))
    });
    Ok(Rendered { text, deferred })
}

// ---------------------------------------------------------------- replay

pub fn replay(args: &ReplayArgs) -> Result<Rendered> {
    let text = fs::read_to_string(&args.manifest).map_err(|source| GpsError::Io {
        path: args.manifest.display().to_string(),
        source,
    })?;
    let m = manifest::extract(&text)?;
    if m.tool != manifest::TOOL {
        return Err(GpsError::InvalidParameter(format!(
            "manifest was written by `{}`, not {}",
            m.tool,
            manifest::TOOL
        )));
    }
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest was written by version {}, replaying with {}",
            m.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    if let Some(input) = &m.input {
        let now = manifest::digest_file(Path::new(&input.path))?;
        if now.sha256 != input.sha256 {
            return Err(GpsError::InvalidParameter(format!(
                "{} has changed since the run (sha256 {} != {})",
                input.path, now.sha256, input.sha256
            )));
        }
    }
    if let Command::Replay(_) = m.invocation {
        return Err(GpsError::InvalidParameter("cannot replay a replay".into()));
    }
    let out = run(&m.invocation)?;
    if let Ok(again) = manifest::extract(&out.text) {
        if again.resolved != m.resolved {
            log::warn!("resolved values differ from the recorded run");
        }
    }
    Ok(out)
}
