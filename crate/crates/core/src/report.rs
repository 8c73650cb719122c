//! Cross-run summaries and perplexity curves from trainer metrics files.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::curriculum::{full_competence_step, CurriculumFile};
use crate::error::{Error, Result};
use crate::trainer::{load_metrics, MetricsRecord};

/// File name the trainer uses for a run's curriculum; read for run metadata.
pub const CURRICULUM_FILE: &str = "curriculum.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: String,
    pub method: String,
    pub lambda0: f64,
    pub increment: f64,
    pub final_valid_ppl: Option<f64>,
    pub best_valid_ppl: Option<f64>,
    /// `None` when competence never reaches 1.
    pub steps_to_full_competence: Option<u64>,
}

pub struct RunInput {
    pub name: String,
    pub method: String,
    pub lambda0: f64,
    pub increment: f64,
    pub records: Vec<MetricsRecord<f64>>,
}

impl RunInput {
    /// Loads a metrics file. Method and schedule come from the curriculum
    /// file next to it; without one they are inferred from the lambda column.
    pub fn load(metrics_path: &Path) -> Result<Self> {
        let records = load_metrics::<f64>(metrics_path)?;
        let dir = metrics_path.parent().unwrap_or(Path::new("."));
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .filter(|n| !n.is_empty())
            .unwrap_or_else(|| metrics_path.display().to_string());
        let curriculum = dir.join(CURRICULUM_FILE);
        let (method, lambda0, increment) = if curriculum.is_file() {
            let c = CurriculumFile::<f64>::load(&curriculum)?;
            (c.method, c.lambda0, c.increment)
        } else {
            let first = records.first().map_or(1.0, |r| r.lambda);
            let inc = match records.get(1) {
                Some(r) if first < 1.0 => r.lambda - first,
                _ => 0.0,
            };
            ("unknown".to_string(), first, inc)
        };
        Ok(RunInput {
            name,
            method,
            lambda0,
            increment,
            records,
        })
    }
}

pub fn summarize_run(input: &RunInput) -> RunSummary {
    let evals = || input.records.iter().filter_map(|r| r.valid_ppl);
    RunSummary {
        run: input.name.clone(),
        method: input.method.clone(),
        lambda0: input.lambda0,
        increment: input.increment,
        final_valid_ppl: evals().next_back(),
        best_valid_ppl: evals().fold(None, |best, p| Some(best.map_or(p, |b: f64| b.min(p)))),
        steps_to_full_competence: full_competence_step(input.lambda0, input.increment),
    }
}

/// One summary per run, sorted by best validation perplexity (runs without
/// any evaluation last).
pub fn summarize(inputs: &[RunInput]) -> Vec<RunSummary> {
    let mut rows: Vec<RunSummary> = inputs.iter().map(summarize_run).collect();
    rows.sort_by(|a, b| match (a.best_valid_ppl, b.best_valid_ppl) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    rows
}

pub fn summarize_files(paths: &[PathBuf]) -> Result<Vec<RunSummary>> {
    let inputs = paths.iter().map(|p| RunInput::load(p)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(&inputs))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn steps(v: Option<u64>) -> String {
    v.map_or_else(|| "unbounded".to_string(), |s| s.to_string())
}

pub const SUMMARY_HEADER: &str =
    "run,method,lambda0,increment,final_valid_ppl,best_valid_ppl,steps_to_full_competence";

pub fn write_summary_csv<W: Write>(rows: &[RunSummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.run,
            r.method,
            r.lambda0,
            r.increment,
            opt(r.final_valid_ppl),
            opt(r.best_valid_ppl),
            steps(r.steps_to_full_competence)
        )?;
    }
    Ok(())
}

/// Column-aligned table for terminals.
pub fn format_summary_table(rows: &[RunSummary]) -> String {
    let header = ["run", "method", "lambda0", "increment", "final_ppl", "best_ppl", "full@step"];
    let fmt_ppl = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let body: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.run.clone(),
                r.method.clone(),
                r.lambda0.to_string(),
                r.increment.to_string(),
                fmt_ppl(r.final_valid_ppl),
                fmt_ppl(r.best_valid_ppl),
                steps(r.steps_to_full_competence),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    for row in &body {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

/// Evaluation points of one run: `step,lambda,valid_ppl`.
pub fn write_curve<W: Write>(records: &[MetricsRecord<f64>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,lambda,valid_ppl")?;
    for r in records {
        if let Some(p) = r.valid_ppl {
            writeln!(out, "{},{},{}", r.step, r.lambda, p)?;
        }
    }
    Ok(())
}

/// Writes `summary.csv` and `curves/<run>.csv` under `out_dir`; returns the summaries.
pub fn write_report(inputs: &[RunInput], out_dir: &Path) -> Result<Vec<RunSummary>> {
    let rows = summarize(inputs);
    let curves = out_dir.join("curves");
    std::fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
    let summary_path = out_dir.join("summary.csv");
    let mut buf = Vec::new();
    write_summary_csv(&rows, &mut buf).expect("in-memory write");
    std::fs::write(&summary_path, buf).map_err(|e| Error::io(&summary_path, e))?;
    for input in inputs {
        let path = curves.join(format!("{}.csv", input.name));
        let mut buf = Vec::new();
        write_curve(&input.records, &mut buf).expect("in-memory write");
        std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    Ok(rows)
}
