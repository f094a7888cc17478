use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qcompare::dynamics::{ControlField, TimeGrid};
use qcompare::geometric::{design_bitflip_sequence, offresonance_report, PulseShape, SequenceOptions};
use qcompare::io::{write_convergence_csv, write_field_csv, write_report_csv, write_spectrum_csv, write_v_series_csv};
use qcompare::lyapunov::{find_plateaus, run_lyapunov, scan_kappa, Kick, KAPPA_GRID, KICK_FRACTION};
use qcompare::optimizer::{optimize, optimize_ensemble, OptimConfig, OptimOutcome};
use qcompare::pulses::{required_steps, spectrum};
use qcompare::report::SystemSpec;
use qcompare::scenarios::{
    build_bell_scenario, build_qd_scenario, ps_to_internal, BELL_KICK_AMPLITUDE, BELL_STEPS, BELL_TF, BELL_TRIAL_AMPLITUDE,
    BELL_TRIAL_FREQUENCY, QD_ITERATIVE_TF_PS, QD_LAMBDA, QD_TRIAL_AMPLITUDE,
};
use qcompare::state::{distance_to_pure_target, Rep, State};

use crate::error::{config, ensure_finite, CliResult};
use crate::output::{tool_info, RunFiles};
use crate::simulate::replay;

/// Plateau detection: minimum length as a fraction of the horizon and
/// maximum relative drop of V.
const PLATEAU_FRACTION: f64 = 0.05;
const PLATEAU_DROP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Bell,
    Qd5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Geometric,
    Iterative,
    Lyapunov,
}

#[derive(Args, Debug, Serialize)]
pub struct DesignArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioName,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Run directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Final time in internal units.
    #[arg(long, conflicts_with = "tf_ps")]
    pub tf: Option<f64>,
    /// Final time in picoseconds (qd5).
    #[arg(long)]
    pub tf_ps: Option<f64>,
    /// Number of grid intervals.
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Stop when |ΔJ| falls below this.
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    #[arg(long)]
    pub trial_amplitude: Option<f64>,
    #[arg(long)]
    pub trial_frequency: Option<f64>,
    /// One-based dot labels to flip (qd5).
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    pub targets: Vec<usize>,
    /// square or gaussian.
    #[arg(long, default_value = "gaussian")]
    pub pulse: PulseShape,
    #[arg(long, default_value_t = 2.0)]
    pub duration_ps: f64,
    /// Play all π pulses at once instead of back to back.
    #[arg(long)]
    pub simultaneous: bool,
    /// Grid refinement over the carrier sampling rule (geometric).
    #[arg(long, default_value_t = qcompare::geometric::DEFAULT_OVERSAMPLING)]
    pub oversample: usize,
    /// Feedback gain; scanned over a log grid when absent.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub kick_amplitude: Option<f64>,
    #[arg(long)]
    pub kick_duration: Option<f64>,
    #[arg(long)]
    pub no_kick: bool,
    /// Seed for every random draw. Required whenever randomness is used.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of the horizon used by the κ scan.
    #[arg(long, default_value_t = 0.1)]
    pub scan_fraction: f64,
    /// Representation for propagation and reports.
    #[arg(long)]
    pub rep: Option<Rep>,
    #[arg(long)]
    pub quantities: Option<String>,
    #[arg(long)]
    pub stride: Option<usize>,
}

struct Design {
    spec: SystemSpec<f64>,
    field: ControlField<f64>,
    scenario: Value,
    parameters: Value,
    extras: Value,
    seeds: Value,
}

fn zero_based(targets: &[usize], dots: usize) -> CliResult<Vec<usize>> {
    if targets.is_empty() {
        return Err(config("--targets is empty"));
    }
    targets
        .iter()
        .map(|&t| if (1..=dots).contains(&t) { Ok(t - 1) } else { Err(config(format!("target {t} outside 1..={dots}"))) })
        .collect()
}

fn log_extras(out: &OptimOutcome<f64>) -> Value {
    let last = out.log.last();
    json!({
        "iterations": out.log.len().saturating_sub(1),
        "best_iteration": out.best_iteration,
        "final_J": last.map(|r| r.j),
        "final_figure_of_merit": last.map(|r| r.figure_of_merit),
        "worst_relative_drop": out.log.worst_relative_drop(),
    })
}

fn bell_grid(args: &DesignArgs) -> CliResult<TimeGrid<f64>> {
    if args.tf_ps.is_some() {
        return Err(config("--tf-ps applies to qd5; use --tf for bell"));
    }
    Ok(TimeGrid::new(0.0, args.tf.unwrap_or(BELL_TF), args.nt.unwrap_or(BELL_STEPS))?)
}

fn bell_iterative(args: &DesignArgs, files: &mut RunFiles) -> CliResult<Design> {
    let mut b = build_bell_scenario::<f64>();
    b.alpha = args.alpha.unwrap_or(1.0);
    b.beta = args.beta.unwrap_or(1.0);
    b.lambda = args.lambda.unwrap_or(1.0);
    let grid = bell_grid(args)?;
    b.tf = grid.tf();
    b.steps = grid.steps();
    let (a, w) = (args.trial_amplitude.unwrap_or(BELL_TRIAL_AMPLITUDE), args.trial_frequency.unwrap_or(BELL_TRIAL_FREQUENCY));
    let trial = ControlField::from_fn(grid, 1, |_, t| a * (w * t).cos())?;
    let cfg = OptimConfig {
        alpha: b.alpha,
        beta: b.beta,
        lambda: b.lambda,
        grid,
        max_iterations: args.iters,
        objective_tolerance: args.tol,
        trial_field: trial,
    };
    let out = optimize(&b.system, &b.objective(), &cfg)?;
    ensure_finite("convergence log", out.log.records.iter().map(|r| r.j))?;
    files.csv("convergence.csv", |w| write_convergence_csv(w, &out.log))?;
    Ok(Design {
        spec: b.system_spec(),
        scenario: b.descriptor(),
        parameters: json!({
            "alpha": b.alpha, "beta": b.beta, "lambda": b.lambda, "iterations": args.iters, "tolerance": args.tol,
            "trial_field": {"shape": "cos", "amplitude": a, "frequency": w},
        }),
        extras: log_extras(&out),
        seeds: json!({}),
        field: out.field,
    })
}

fn bell_lyapunov(args: &DesignArgs, rep: Rep, files: &mut RunFiles) -> CliResult<Design> {
    let b = build_bell_scenario::<f64>();
    let grid = bell_grid(args)?;
    let kick = if args.no_kick {
        None
    } else {
        let amplitude = args.kick_amplitude.unwrap_or(BELL_KICK_AMPLITUDE);
        let duration = args.kick_duration.unwrap_or(KICK_FRACTION * grid.duration());
        if amplitude > 0.0 && duration > 0.0 {
            let seed = args.seed.ok_or_else(|| config("the random kick needs --seed (or pass --no-kick)"))?;
            Some(Kick { duration, amplitude, seed })
        } else {
            None
        }
    };
    let mut cfg = b.lyapunov_config(1.0, rep, kick);
    cfg.grid = grid;
    let initial = State::Pure(b.initial.clone());
    let scan = match args.kappa {
        Some(k) => {
            cfg.kappa = k;
            None
        }
        None => {
            let scan = scan_kappa(&b.system, &cfg, &initial, &KAPPA_GRID, args.scan_fraction)?;
            cfg.kappa = scan.chosen;
            Some(scan)
        }
    };
    let run = run_lyapunov(&b.system, &cfg, &initial)?;
    let times: Vec<f64> = grid.points();
    let v: Vec<f64> = run.potential.clone();
    ensure_finite("Lyapunov potential", v.iter().copied())?;
    files.csv("v_series.csv", |w| write_v_series_csv(w, &times, &v))?;
    let plateaus = find_plateaus(&times, &v, run.kick_steps, PLATEAU_FRACTION * grid.duration(), PLATEAU_DROP);
    let logged = distance_to_pure_target(run.trajectory.last(), &b.target)?;
    Ok(Design {
        spec: b.system_spec(),
        scenario: b.descriptor(),
        parameters: json!({
            "kappa": cfg.kappa,
            "kappa_source": if scan.is_some() { "scan" } else { "flag" },
            "kappa_scan": scan,
            "scan_fraction": args.scan_fraction,
            "law_rep": rep,
            "kick": kick,
        }),
        extras: json!({
            "kappa": cfg.kappa,
            "kick_steps": run.kick_steps,
            "stalled": run.stalled,
            "initial_V": v[0],
            "final_V": v[v.len() - 1],
            "max_increase_after_kick": run.max_increase_after_kick(),
            "plateaus": plateaus,
            "logged_final_distance": logged,
        }),
        seeds: json!({"kick": kick.map(|k| k.seed)}),
        field: run.field,
    })
}

fn qd_tf(args: &DesignArgs, default_ps: f64) -> f64 {
    match (args.tf, args.tf_ps) {
        (Some(t), _) => t,
        (None, Some(ps)) => ps_to_internal(ps),
        (None, None) => ps_to_internal(default_ps),
    }
}

fn qd_geometric(args: &DesignArgs, files: &mut RunFiles) -> CliResult<Design> {
    let qd = build_qd_scenario::<f64>();
    let targets = zero_based(&args.targets, qd.dots())?;
    let duration = ps_to_internal(args.duration_ps);
    let opts = SequenceOptions { simultaneous: args.simultaneous, oversampling: args.oversample.max(1) };
    let plan = design_bitflip_sequence(&qd, &targets, args.pulse, duration, &opts)?;
    let report = offresonance_report(&plan, &qd)?;
    files.json("plan.json", &plan)?;
    files.csv("report.csv", |w| write_report_csv(w, &report))?;
    Ok(Design {
        spec: qd.system_spec(&targets),
        scenario: qd.descriptor(),
        parameters: json!({
            "targets": args.targets, "pulse": args.pulse, "duration_ps": args.duration_ps, "duration": duration,
            "simultaneous": args.simultaneous, "oversample": opts.oversampling,
        }),
        extras: json!({"calibrations": plan.calibrations, "warnings": plan.warnings, "report": report}),
        seeds: json!({}),
        field: plan.field()?,
    })
}

fn qd_iterative(args: &DesignArgs, files: &mut RunFiles) -> CliResult<Design> {
    let qd = build_qd_scenario::<f64>();
    let targets = zero_based(&args.targets, qd.dots())?;
    let tf = qd_tf(args, QD_ITERATIVE_TF_PS);
    let (a, w) = (args.trial_amplitude.unwrap_or(QD_TRIAL_AMPLITUDE), args.trial_frequency.unwrap_or(1.0));
    let grid = match args.nt {
        None => qd.grid(tf, Some(w))?,
        Some(nt) => {
            let w_max = qd.transition_frequencies().into_iter().fold(w, f64::max);
            let need = required_steps(tf, w_max);
            if nt < need {
                return Err(config(format!("--nt {nt} under-resolves frequency {w_max}; need at least {need}")));
            }
            TimeGrid::new(0.0, tf, nt)?
        }
    };
    let cfg = OptimConfig {
        alpha: args.alpha.unwrap_or(1.0),
        beta: args.beta.unwrap_or(1.0),
        lambda: args.lambda.unwrap_or(QD_LAMBDA),
        grid,
        max_iterations: args.iters,
        objective_tolerance: args.tol,
        trial_field: ControlField::from_fn(grid, 1, |_, t| a * (w * t).sin())?,
    };
    let out = optimize_ensemble(&qd.members_for(&targets), &cfg)?;
    ensure_finite("convergence log", out.log.records.iter().map(|r| r.j))?;
    files.csv("convergence.csv", |w| write_convergence_csv(w, &out.log))?;
    Ok(Design {
        spec: qd.system_spec(&targets),
        scenario: qd.descriptor(),
        parameters: json!({
            "targets": args.targets, "alpha": cfg.alpha, "beta": cfg.beta, "lambda": cfg.lambda,
            "iterations": args.iters, "tolerance": args.tol, "tf": tf,
            "trial_field": {"shape": "sin", "amplitude": a, "frequency": w},
        }),
        extras: log_extras(&out),
        seeds: json!({}),
        field: out.field,
    })
}

pub fn run(args: &DesignArgs) -> CliResult<()> {
    let rep = args.rep.unwrap_or(if args.method == Method::Lyapunov { Rep::Bloch } else { Rep::Pure });
    let mut files = RunFiles::default();
    let d = match (args.scenario, args.method) {
        (ScenarioName::Bell, Method::Iterative) => bell_iterative(args, &mut files)?,
        (ScenarioName::Bell, Method::Lyapunov) => bell_lyapunov(args, rep, &mut files)?,
        (ScenarioName::Qd5, Method::Geometric) => qd_geometric(args, &mut files)?,
        (ScenarioName::Qd5, Method::Iterative) => qd_iterative(args, &mut files)?,
        (ScenarioName::Bell, Method::Geometric) => {
            return Err(config("geometric design needs uncoupled two-level subsystems (scenario qd5)"))
        }
        (ScenarioName::Qd5, Method::Lyapunov) => return Err(config("lyapunov design is available for scenario bell")),
    };
    ensure_finite("field", d.field.samples().iter().flatten().copied())?;
    files.csv("field.csv", |w| write_field_csv(w, &d.field))?;
    files.json("system.json", &d.spec)?;
    let spec_out = spectrum(&d.field)?;
    files.csv("spectrum.csv", |w| write_spectrum_csv(w, &spec_out))?;
    let rp = replay(&d.spec, &d.field, rep, args.quantities.as_deref(), args.stride, &mut files)?;
    let mut summary = serde_json::to_value(&rp.summary)?;
    summary["method"] = json!(args.method);
    summary["design"] = d.extras;
    summary["spectral_peaks"] = json!(spec_out.channels.iter().map(|c| c.peaks.clone()).collect::<Vec<_>>());
    files.json("summary.json", &summary)?;
    files.json("scenario.json", &d.scenario)?;
    let g = d.field.grid();
    let mut names = files.names();
    names.push("metadata.json".into());
    let meta = json!({
        "tool": tool_info(),
        "command": "design",
        "args": args,
        "scenario": d.scenario,
        "method": args.method,
        "parameters": d.parameters,
        "rep": rep,
        "grid": {"t0": g.t0(), "tf": g.tf(), "steps": g.steps(), "dt": g.dt()},
        "seeds": d.seeds,
        "files": names,
    });
    files.json("metadata.json", &meta)?;
    files.write_to(&args.out)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}
