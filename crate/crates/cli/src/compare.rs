use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use qcompare::io::fmt17;
use qcompare::report::{distance_series, time_to_threshold};

use crate::error::{config, CliResult};
use crate::output::{tool_info, RunFiles};
use crate::simulate::{read_field, read_metadata, read_system, rep_from_metadata, replay};

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    /// Completed run directories.
    #[arg(required = true, num_args = 2..)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Distance level for time-to-threshold.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub run: String,
    pub method: String,
    pub final_figure_of_merit: Option<f64>,
    pub time_to_threshold: Option<f64>,
    pub fluence: f64,
    pub spectral_width: f64,
    /// `1 − fidelity` per subsystem.
    pub residuals: BTreeMap<String, f64>,
}

fn opt17(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), fmt17)
}

pub fn run(args: &CompareArgs) -> CliResult<()> {
    let mut rows = Vec::new();
    let mut reference: Option<(PathBuf, Value)> = None;
    let mut labels: Vec<String> = Vec::new();
    for dir in &args.runs {
        let meta = read_metadata(dir)?;
        let spec = read_system(&dir.join("system.json"))?;
        let spec_json = serde_json::to_value(&spec)?;
        match &reference {
            None => {
                labels = spec.subsystems.iter().map(|s| s.label.clone()).collect();
                reference = Some((dir.clone(), spec_json));
            }
            Some((first, r)) if *r != spec_json => {
                return Err(config(format!(
                    "{} and {} describe different systems or targets",
                    first.display(),
                    dir.display()
                )));
            }
            _ => {}
        }
        let field = read_field(&dir.join("field.csv"))?;
        let rep = rep_from_metadata(&meta)?;
        let mut scratch = RunFiles::default();
        let rp = replay(&spec, &field, rep, Some("populations"), None, &mut scratch)?;
        let times: Vec<f64> = field.grid().points();
        let dist = distance_series(&spec, &rp.trajectories)?;
        rows.push(Row {
            run: dir.display().to_string(),
            method: meta.get("method").and_then(Value::as_str).unwrap_or("replay").to_string(),
            final_figure_of_merit: rp.summary.final_fidelity,
            time_to_threshold: time_to_threshold(&times, &dist, args.threshold),
            fluence: rp.summary.fluence,
            spectral_width: rp.summary.spectral_width,
            residuals: rp
                .summary
                .subsystems
                .iter()
                .filter_map(|s| s.fidelity.map(|f| (s.label.clone(), 1.0 - f)))
                .collect(),
        });
    }
    let mut files = RunFiles::default();
    files.json(
        "comparison.json",
        &json!({"tool": tool_info(), "args": args, "threshold": args.threshold, "rows": rows}),
    )?;
    let mut text = String::from("run,method,final_figure_of_merit,time_to_threshold,fluence,spectral_width");
    for l in &labels {
        text.push_str(&format!(",residual_{l}"));
    }
    text.push('\n');
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}",
            r.run.replace(',', "_"),
            r.method,
            opt17(r.final_figure_of_merit),
            opt17(r.time_to_threshold),
            fmt17(r.fluence),
            fmt17(r.spectral_width)
        ));
        for l in &labels {
            text.push_str(&format!(",{}", opt17(r.residuals.get(l).copied())));
        }
        text.push('\n');
    }
    files.bytes("comparison.csv", text.into_bytes());
    files.write_to(&args.out)?;
    for r in &rows {
        println!(
            "{}\t{}\tfom={}\tt_thr={}\tfluence={:.6e}\twidth={:.6e}",
            r.run,
            r.method,
            r.final_figure_of_merit.map_or("-".into(), |x| format!("{x:.6}")),
            r.time_to_threshold.map_or("-".into(), |x| format!("{x:.6}")),
            r.fluence,
            r.spectral_width
        );
    }
    Ok(())
}
