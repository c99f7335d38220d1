use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use super::config::{ModeKind, RunConfig};
use crate::approx::{build_approximant, convergence_report, ApproxError, ContinuousFunctionSpec, ReportSettings};
use crate::export::{self, OperationReport};
use crate::measure::{
    chaos_game, image_measure_residual, rn_derivative_estimate, self_similarity_residual,
    separation_overlap, separation_threshold, CellPartition, EmpiricalMeasure, MeasureError,
    SelfSimilarWeights,
};
use crate::opspace::{covariance_defect, isometry_defect, range_defect, MultMode, OpError};

/// Tolerance for the algebraic identities checked by `verify-relations`.
pub const RELATION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Sample,
    CheckSeparation,
    VerifyRelations,
    Approx,
    Report,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Sample => "sample",
            Task::CheckSeparation => "check-separation",
            Task::VerifyRelations => "verify-relations",
            Task::Approx => "approx",
            Task::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error("function {function:?}: {msg}")]
    Function { function: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub task: Task,
    pub config: serde_json::Value,
    pub elapsed_ms: u128,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

struct Sink<'a> {
    dir: &'a Path,
    files: Vec<String>,
    checks: Vec<Check>,
}

impl Sink<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), TaskError> {
        let path = self.dir.join(name);
        export::write_atomic(&path, bytes).map_err(|source| TaskError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), TaskError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn csv(&mut self, name: &str, bytes: std::io::Result<Vec<u8>>) -> Result<(), TaskError> {
        let bytes = bytes.map_err(|source| TaskError::Io {
            path: name.to_string(),
            source,
        })?;
        self.write(name, &bytes)
    }

    fn operation(&mut self, name: &str, report: OperationReport) -> Result<(), TaskError> {
        self.checks.push(Check {
            name: name.to_string(),
            value: report.residual.unwrap_or(0.0),
            tolerance: report.tolerance,
            pass: report.pass,
        });
        self.write_json(&format!("{name}.json"), &report)
    }
}

/// Residual tolerance for the empirical measure checks: 0.02 at `N = 10^5`,
/// scaled by `N^{-1/2}`.
pub fn sampling_tolerance(samples: usize) -> f64 {
    0.02 * (1e5 / samples as f64).sqrt()
}

/// Tolerance on single-cell density estimates: six standard deviations
/// of a ratio of counts on a cell of mass `n^{-k}`.
pub fn rn_tolerance(n: usize, k: usize, samples: usize) -> f64 {
    6.0 * n as f64 * ((n as f64).powi(k as i32) / samples as f64).sqrt()
}

fn function_spec(cfg: &RunConfig) -> Result<ContinuousFunctionSpec, TaskError> {
    let l = cfg
        .expr
        .lipschitz_bound(cfg.system.ambient_box())
        .map_err(|e| TaskError::Function {
            function: cfg.function.clone(),
            msg: e.to_string(),
        })?;
    let expr = cfg.expr.clone();
    Ok(ContinuousFunctionSpec::real(move |x| expr.eval(x)).with_lipschitz(l))
}

fn sample(cfg: &RunConfig, sink: &mut Sink) -> Result<(), TaskError> {
    let ifs = &cfg.system;
    let m = chaos_game(ifs, &cfg.weights, cfg.samples, cfg.burn_in, cfg.seed)?;
    sink.csv("samples.csv", export::measure_csv(&m))?;
    let tol = sampling_tolerance(cfg.samples);
    let k = cfg.level.max(1);
    let part = CellPartition::new(k);
    let residual = self_similarity_residual(&m, ifs, &cfg.weights, &part)?;
    sink.operation(
        "self_similarity_residual",
        OperationReport {
            operation: "self_similarity_residual".into(),
            parameters: json!({"level": k, "samples": cfg.samples, "seed": cfg.seed, "weights": cfg.weights.as_slice()}),
            residual: Some(residual),
            estimates: None,
            tolerance: tol,
            pass: residual <= tol,
        },
    )?;
    if !cfg.weights.is_hutchinson() {
        return Ok(());
    }
    let part = CellPartition::new(cfg.level);
    for i in 1..=ifs.n() {
        let r = image_measure_residual(&m, ifs, i, &part)?;
        sink.operation(
            &format!("image_measure_residual_{i}"),
            OperationReport {
                operation: "image_measure_residual".into(),
                parameters: json!({"branch": i, "level": cfg.level, "samples": cfg.samples, "seed": cfg.seed}),
                residual: Some(r),
                estimates: None,
                tolerance: tol,
                pass: r <= tol,
            },
        )?;
    }
    for i in 1..=ifs.n() {
        rn_check(cfg, &m, i, sink)?;
    }
    Ok(())
}

/// On `γᵢ(K)` the density of `γᵢ*m` is `n`; elsewhere it vanishes. The check
/// is only meaningful when the images are essentially disjoint, which the
/// separation task measures.
fn rn_check(cfg: &RunConfig, m: &EmpiricalMeasure, i: usize, sink: &mut Sink) -> Result<(), TaskError> {
    let ifs = &cfg.system;
    let n = ifs.n();
    let k = cfg.level.max(1);
    let cells = rn_derivative_estimate(m, ifs, i, &CellPartition::new(k))?;
    let tol = rn_tolerance(n, k, cfg.samples);
    let mut worst: f64 = 0.0;
    for c in &cells {
        if let Some(e) = c.estimate {
            let target = if c.word.letters()[0] == i { n as f64 } else { 0.0 };
            worst = worst.max((e - target).abs());
        }
    }
    let estimates: Vec<_> = cells
        .iter()
        .map(|c| json!({"word": c.word.to_string(), "mass": c.mass, "estimate": c.estimate}))
        .collect();
    sink.operation(
        &format!("rn_derivative_{i}"),
        OperationReport {
            operation: "rn_derivative_estimate".into(),
            parameters: json!({"branch": i, "level": k, "samples": cfg.samples, "seed": cfg.seed}),
            residual: Some(worst),
            estimates: Some(serde_json::Value::Array(estimates)),
            tolerance: tol,
            pass: worst <= tol,
        },
    )
}

fn separation(cfg: &RunConfig, sink: &mut Sink) -> Result<(), TaskError> {
    let ifs = &cfg.system;
    let w = SelfSimilarWeights::hutchinson(ifs.n());
    let m = chaos_game(ifs, &w, cfg.samples, cfg.burn_in, cfg.seed)?;
    let overlap = separation_overlap(ifs, &m);
    let tol = separation_threshold(cfg.samples);
    sink.operation(
        "separation",
        OperationReport {
            operation: "separation_overlap".into(),
            parameters: json!({"samples": cfg.samples, "seed": cfg.seed}),
            residual: Some(overlap),
            estimates: None,
            tolerance: tol,
            pass: overlap <= tol,
        },
    )
}

fn relations(cfg: &RunConfig, sink: &mut Sink) -> Result<(), TaskError> {
    let ifs = &cfg.system;
    let n = ifs.n();
    let k = cfg.level;
    let mut rows = Vec::new();
    let mut record = |sink: &mut Sink, relation: &str, branch: String, value: f64| {
        let check = Check::at_most(format!("{relation}{branch}"), value, RELATION_TOL);
        rows.push(vec![
            relation.to_string(),
            branch.trim_start_matches('_').to_string(),
            k.to_string(),
            format!("{value}"),
            format!("{RELATION_TOL}"),
            check.pass.to_string(),
        ]);
        sink.checks.push(check);
    };
    record(sink, "isometry_defect", String::new(), isometry_defect(n, k)?);
    if k >= 1 {
        record(sink, "range_defect", String::new(), range_defect(n, k)?);
    }
    let mode = match cfg.mode {
        ModeKind::Collocation => MultMode::Collocation { x0: cfg.x0.clone() },
        ModeKind::Average => MultMode::Average {
            mc_samples: cfg.mc_samples,
            seed: cfg.seed,
        },
    };
    let rule = mode.rule(ifs)?;
    let expr = &cfg.expr;
    let a = |x: &[f64]| Complex64::new(expr.eval(x), 0.0);
    for i in 1..=n {
        let d = covariance_defect(ifs, &a, i, k, rule.as_ref())?;
        record(sink, "covariance_defect", format!("_{i}"), d);
    }
    let header = ["relation", "branch", "level", "defect", "tolerance", "pass"];
    let mut w = csv::Writer::from_writer(Vec::new());
    let bytes = (|| -> std::io::Result<Vec<u8>> {
        w.write_record(header)?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))
    })();
    sink.csv("relations.csv", bytes)
}

/// Largest level whose approximant is also exported as a polynomial.
const POLYNOMIAL_EXPORT_MAX_TERMS: usize = 4096;

fn approx(cfg: &RunConfig, sink: &mut Sink) -> Result<(), TaskError> {
    let ifs = &cfg.system;
    let a = function_spec(cfg)?;
    let l = a.lipschitz().expect("set by function_spec");
    let settings = ReportSettings {
        samples_per_cell: cfg.samples_per_cell,
        seed: cfg.seed,
        ..ReportSettings::default()
    };
    let (k_min, k_max) = cfg.levels;
    let rows = convergence_report(ifs, &a, k_min, k_max, &cfg.x0, &settings)?;
    sink.csv("convergence.csv", export::convergence_csv(&rows))?;

    let mut increase: f64 = 0.0;
    for pair in rows.windows(2) {
        increase = increase.max(pair[1].certified_bound - pair[0].certified_bound);
    }
    sink.checks.push(Check::at_most("certified_bound_monotone", increase, 0.0));
    for r in &rows {
        sink.checks.push(Check::at_most(
            format!("error_sup_le_certified_k{}", r.k),
            r.error_sup - r.certified_bound,
            1e-12,
        ));
        // The sampled sup may miss the true sup by up to one Lipschitz step
        // between probes, so the matrix lower bound gets that much slack.
        let slack = l * ifs.cylinder_diameter_bound(r.k) / (cfg.samples_per_cell as f64).sqrt();
        sink.checks.push(Check::at_most(
            format!("matrix_error_le_error_sup_k{}", r.k),
            r.matrix_error - r.error_sup,
            slack + 1e-12,
        ));
    }

    let fits = ifs
        .n()
        .checked_pow(k_max as u32)
        .is_some_and(|d| d <= POLYNOMIAL_EXPORT_MAX_TERMS);
    if fits {
        let appr = build_approximant(ifs, &a, k_max, &cfg.x0)?;
        sink.write_json(
            "approximant.json",
            &json!({"level": k_max, "base_point": cfg.x0, "function": cfg.function,
                    "terms": export::polynomial_json(&appr.to_polynomial())}),
        )?;
    }
    Ok(())
}

/// Runs one task, writes its artifacts under `cfg.output` and a
/// `<task>_report.json` summary.
pub fn run_task(cfg: &RunConfig, task: Task) -> Result<RunReport, TaskError> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.output).map_err(|source| TaskError::Io {
        path: cfg.output.display().to_string(),
        source,
    })?;
    let mut sink = Sink {
        dir: &cfg.output,
        files: Vec::new(),
        checks: Vec::new(),
    };
    match task {
        Task::Sample => sample(cfg, &mut sink)?,
        Task::CheckSeparation => separation(cfg, &mut sink)?,
        Task::VerifyRelations => relations(cfg, &mut sink)?,
        Task::Approx => approx(cfg, &mut sink)?,
        Task::Report => {
            sample(cfg, &mut sink)?;
            separation(cfg, &mut sink)?;
            relations(cfg, &mut sink)?;
            approx(cfg, &mut sink)?;
        }
    }
    let report_name = format!("{}_report.json", task.to_string().replace('-', "_"));
    let mut report = RunReport {
        task,
        config: cfg.echo.clone(),
        elapsed_ms: 0,
        files: sink.files.clone(),
        pass: sink.checks.iter().all(|c| c.pass),
        checks: std::mem::take(&mut sink.checks),
    };
    report.files.push(report_name.clone());
    report.elapsed_ms = start.elapsed().as_millis();
    sink.write_json(&report_name, &report)?;
    Ok(report)
}
