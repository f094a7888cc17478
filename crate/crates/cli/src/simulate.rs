use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use qcompare::dynamics::{ControlField, Trajectory};
use qcompare::io::{read_field_csv, write_columns};
use qcompare::report::{parse_quantities, simulate_system, summarize, trajectory_table, RunSummary, SystemSpec};
use qcompare::state::Rep;

use crate::error::{config, ensure_finite, CliResult};
use crate::output::{tool_info, RunFiles};

/// Relative tolerance when checking `--tf`/`--t0` against a field file.
const GRID_CHECK_TOL: f64 = 1e-9;
/// Default upper bound on trajectory rows.
const TRAJECTORY_ROWS: usize = 5000;

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// System JSON written by `design` (or hand-made).
    #[arg(long, required_unless_present = "from_run", conflicts_with = "from_run")]
    pub system: Option<PathBuf>,
    /// Field CSV `t,f1,...,fM`.
    #[arg(long, required_unless_present = "from_run", conflicts_with = "from_run")]
    pub field: Option<PathBuf>,
    /// Replay a run directory (system.json, field.csv, metadata.json).
    #[arg(long)]
    pub from_run: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// pure, density or bloch. Defaults to the run's representation or pure.
    #[arg(long)]
    pub rep: Option<Rep>,
    /// Expected grid; a mismatch with the field file is an error.
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub nt: Option<usize>,
    /// Comma list of populations, bloch, distance, rho<i><j>.
    #[arg(long)]
    pub quantities: Option<String>,
    /// Keep every n-th grid point in the trajectory file.
    #[arg(long)]
    pub stride: Option<usize>,
}

pub struct Replay {
    pub trajectories: Vec<Trajectory<f64>>,
    pub summary: RunSummary,
}

pub fn default_quantities(spec: &SystemSpec<f64>) -> &'static str {
    if spec.name == "bell" {
        "populations,rho14,distance"
    } else {
        "populations,distance"
    }
}

pub fn default_stride(steps: usize) -> usize {
    steps.div_ceil(TRAJECTORY_ROWS).max(1)
}

/// Propagates `field` through `spec` and adds trajectory.csv.
pub fn replay(
    spec: &SystemSpec<f64>,
    field: &ControlField<f64>,
    rep: Rep,
    quantities: Option<&str>,
    stride: Option<usize>,
    files: &mut RunFiles,
) -> CliResult<Replay> {
    let trajectories = simulate_system(spec, field, rep)?;
    let summary = summarize(spec, field, rep, &trajectories)?;
    ensure_finite("summary", [summary.fluence, summary.final_fidelity.unwrap_or(0.0), summary.distance.unwrap_or(0.0)])?;
    let q = parse_quantities(quantities.unwrap_or(default_quantities(spec)))?;
    let (header, cols) = trajectory_table(spec, &trajectories, &q, stride.unwrap_or(default_stride(field.grid().steps())))?;
    files.csv("trajectory.csv", |w| write_columns(w, &header, &cols))?;
    Ok(Replay { trajectories, summary })
}

pub fn read_system(path: &Path) -> CliResult<SystemSpec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    let spec: SystemSpec<f64> = serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

pub fn read_field(path: &Path) -> CliResult<ControlField<f64>> {
    let file = fs::File::open(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    read_field_csv(file).map_err(|e| config(format!("{}: {e}", path.display())))
}

pub fn read_metadata(dir: &Path) -> CliResult<Value> {
    let p = dir.join("metadata.json");
    let text = fs::read_to_string(&p).map_err(|e| config(format!("{}: {e}", p.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn rep_from_metadata(meta: &Value) -> CliResult<Rep> {
    match meta.get("rep").and_then(Value::as_str) {
        Some(r) => Ok(r.parse()?),
        None => Ok(Rep::Pure),
    }
}

fn check_grid(field: &ControlField<f64>, args: &SimulateArgs) -> CliResult<()> {
    let g = field.grid();
    let close = |a: f64, b: f64| (a - b).abs() <= GRID_CHECK_TOL * a.abs().max(b.abs()).max(1.0);
    if let Some(nt) = args.nt {
        if nt != g.steps() {
            return Err(config(format!("--nt {nt} but the field file has {} samples", g.steps())));
        }
    }
    if let Some(tf) = args.tf {
        if !close(tf, g.tf()) {
            return Err(config(format!("--tf {tf} but the field file ends at {}", g.tf())));
        }
    }
    if let Some(t0) = args.t0 {
        if !close(t0, g.t0()) {
            return Err(config(format!("--t0 {t0} but the field file starts at {}", g.t0())));
        }
    }
    Ok(())
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let (system_path, field_path, source, rep) = match &args.from_run {
        Some(dir) => {
            let meta = read_metadata(dir)?;
            let rep = match args.rep {
                Some(r) => r,
                None => rep_from_metadata(&meta)?,
            };
            (dir.join("system.json"), dir.join("field.csv"), meta, rep)
        }
        None => {
            let (Some(s), Some(f)) = (&args.system, &args.field) else {
                return Err(config("--system and --field are required without --from-run"));
            };
            (s.clone(), f.clone(), Value::Null, args.rep.unwrap_or(Rep::Pure))
        }
    };
    let spec = read_system(&system_path)?;
    let field = read_field(&field_path)?;
    check_grid(&field, args)?;
    let mut files = RunFiles::default();
    let out = replay(&spec, &field, rep, args.quantities.as_deref(), args.stride, &mut files)?;
    files.json("summary.json", &out.summary)?;
    let g = field.grid();
    let mut names = files.names();
    names.push("metadata.json".into());
    let meta = json!({
        "tool": tool_info(),
        "command": "simulate",
        "args": args,
        "system_file": system_path,
        "field_file": field_path,
        "source_run": source,
        "system": spec.name,
        "rep": rep,
        "grid": {"t0": g.t0(), "tf": g.tf(), "steps": g.steps(), "dt": g.dt()},
        "seeds": {},
        "files": names,
    });
    files.json("metadata.json", &meta)?;
    files.write_to(&args.out)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}
