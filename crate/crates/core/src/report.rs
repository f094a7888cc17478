//! Replayable run descriptions and the numbers reported for them.

use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate, ControlField, Direction, Trajectory};
use crate::error::{Error, Result};
use crate::operator::{build_pauli_basis, ControlSystem};
use crate::pulses::{fluence, spectrum};
use crate::scalar::Real;
use crate::state::{density_to_pure, distance_to_pure_target, fidelity_to_pure, PureState, Rep, State};

/// One independently propagated block of a system file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Subsystem<T: Real> {
    pub label: String,
    pub system: ControlSystem<T>,
    pub initial: State<T>,
    /// Pure target used for fidelity and distance.
    #[serde(default)]
    pub target: Option<State<T>>,
}

/// A system file: every subsystem is driven by the same field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SystemSpec<T: Real> {
    pub name: String,
    pub subsystems: Vec<Subsystem<T>>,
}

impl<T: Real> Subsystem<T> {
    pub fn target_pure(&self) -> Result<Option<PureState<T>>> {
        match &self.target {
            None => Ok(None),
            Some(State::Pure(p)) => Ok(Some(p.clone())),
            Some(s) => Ok(Some(density_to_pure(&s.to_density(None)?)?)),
        }
    }
}

impl<T: Real> SystemSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let first = self.subsystems.first().ok_or_else(|| Error::Config("system file has no subsystems".into()))?;
        for s in &self.subsystems {
            if s.system.channel_count() != first.system.channel_count() {
                return Err(Error::Config("subsystems disagree on the number of control channels".into()));
            }
            if s.initial.dim() != s.system.dim() {
                return Err(Error::Config(format!("{}: initial state dimension mismatch", s.label)));
            }
            if let Some(t) = s.target_pure()? {
                if t.dim() != s.system.dim() {
                    return Err(Error::Config(format!("{}: target dimension mismatch", s.label)));
                }
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.subsystems.first().map_or(0, |s| s.system.channel_count())
    }
}

/// Propagates every subsystem in `rep`.
pub fn simulate_system<T: Real>(spec: &SystemSpec<T>, field: &ControlField<T>, rep: Rep) -> Result<Vec<Trajectory<T>>> {
    spec.validate()?;
    if field.channels() != spec.channels() {
        return Err(Error::Config(format!("field has {} channels, system expects {}", field.channels(), spec.channels())));
    }
    spec.subsystems
        .iter()
        .map(|s| {
            let basis = build_pauli_basis::<T>(s.system.dim())?;
            let init = s.initial.convert(rep, &basis)?;
            propagate(&s.system, field, &init, Direction::Forward)
        })
        .collect()
}

/// Largest subsystem distance to target at every grid point.
pub fn distance_series<T: Real>(spec: &SystemSpec<T>, trajs: &[Trajectory<T>]) -> Result<Vec<f64>> {
    let n = trajs.first().map_or(0, |t| t.states.len());
    let mut out = vec![0.0f64; n];
    for (s, tr) in spec.subsystems.iter().zip(trajs) {
        if let Some(target) = s.target_pure()? {
            for (o, st) in out.iter_mut().zip(&tr.states) {
                *o = o.max(distance_to_pure_target(st, &target)?.as_f64());
            }
        }
    }
    Ok(out)
}

/// First time at which `values` drops to `threshold` or below.
pub fn time_to_threshold(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    times.iter().zip(values).find(|(_, v)| **v <= threshold).map(|(t, _)| *t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSummary {
    pub label: String,
    pub fidelity: Option<f64>,
    pub distance: Option<f64>,
    pub populations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub system: String,
    pub rep: Rep,
    pub steps: usize,
    pub t0: f64,
    pub tf: f64,
    pub fluence: f64,
    /// Mean target fidelity over subsystems that have a target.
    pub final_fidelity: Option<f64>,
    /// Largest final distance to target.
    pub distance: Option<f64>,
    pub spectral_width: f64,
    pub subsystems: Vec<SubsystemSummary>,
}

pub fn summarize<T: Real>(spec: &SystemSpec<T>, field: &ControlField<T>, rep: Rep, trajs: &[Trajectory<T>]) -> Result<RunSummary> {
    let mut subs = Vec::new();
    for (s, tr) in spec.subsystems.iter().zip(trajs) {
        let last = tr.last();
        let rho = last.to_density(None)?;
        let populations = (0..rho.dim()).map(|k| rho.matrix()[(k, k)].re.as_f64()).collect();
        let (fidelity, distance) = match s.target_pure()? {
            Some(t) => (Some(fidelity_to_pure(last, &t)?.as_f64()), Some(distance_to_pure_target(last, &t)?.as_f64())),
            None => (None, None),
        };
        subs.push(SubsystemSummary { label: s.label.clone(), fidelity, distance, populations });
    }
    let fids: Vec<f64> = subs.iter().filter_map(|s| s.fidelity).collect();
    let dists: Vec<f64> = subs.iter().filter_map(|s| s.distance).collect();
    let width = if field.grid().steps() >= 2 { spectrum(field)?.width() } else { 0.0 };
    Ok(RunSummary {
        system: spec.name.clone(),
        rep,
        steps: field.grid().steps(),
        t0: field.grid().t0().as_f64(),
        tf: field.grid().tf().as_f64(),
        fluence: fluence(field).as_f64(),
        final_fidelity: (!fids.is_empty()).then(|| fids.iter().sum::<f64>() / fids.len() as f64),
        distance: dists.iter().copied().reduce(f64::max),
        spectral_width: width,
        subsystems: subs,
    })
}

/// Columns selectable for trajectory files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Populations,
    /// `|ρ_ij|`, one-based.
    Coherence(usize, usize),
    Bloch,
    Distance,
}

impl std::str::FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "populations" => return Ok(Quantity::Populations),
            "bloch" => return Ok(Quantity::Bloch),
            "distance" => return Ok(Quantity::Distance),
            _ => {}
        }
        let bad = || Error::Parse(format!("unknown quantity '{s}' (populations, bloch, distance, rho<i><j>, rho<i>_<j>)"));
        let rest = s.strip_prefix("rho").ok_or_else(bad)?;
        let (i, j) = match rest.split_once('_') {
            Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
            None if rest.len() == 2 => (rest[..1].parse().map_err(|_| bad())?, rest[1..].parse().map_err(|_| bad())?),
            None => return Err(bad()),
        };
        if i == 0 || j == 0 {
            return Err(bad());
        }
        Ok(Quantity::Coherence(i, j))
    }
}

pub fn parse_quantities(list: &str) -> Result<Vec<Quantity>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Header and columns for a trajectory file, keeping every `stride`-th
/// grid point plus the last one.
pub fn trajectory_table<T: Real>(
    spec: &SystemSpec<T>,
    trajs: &[Trajectory<T>],
    quantities: &[Quantity],
    stride: usize,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let n = trajs.first().map_or(0, |t| t.states.len());
    let mut idx: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    if n > 0 && idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    let times = trajs[0].times();
    let mut header = vec!["t".to_string()];
    let mut cols = vec![idx.iter().map(|&k| times[k].as_f64()).collect::<Vec<_>>()];
    let multi = spec.subsystems.len() > 1;
    for (s, tr) in spec.subsystems.iter().zip(trajs) {
        let prefix = if multi { format!("{}_", s.label) } else { String::new() };
        let dim = s.system.dim();
        let basis = build_pauli_basis::<T>(dim)?;
        let target = s.target_pure()?;
        for q in quantities {
            match *q {
                Quantity::Populations => {
                    for k in 0..dim {
                        header.push(format!("{prefix}rho{}{}", k + 1, k + 1));
                    }
                    let mut c = vec![Vec::with_capacity(idx.len()); dim];
                    for &i in &idx {
                        let rho = tr.states[i].to_density(Some(&basis))?;
                        for (k, col) in c.iter_mut().enumerate() {
                            col.push(rho.matrix()[(k, k)].re.as_f64());
                        }
                    }
                    cols.extend(c);
                }
                Quantity::Coherence(a, b) => {
                    if a > dim || b > dim {
                        return Err(Error::Config(format!("rho{a}_{b} outside dimension {dim}")));
                    }
                    header.push(if a < 10 && b < 10 { format!("{prefix}abs_rho{a}{b}") } else { format!("{prefix}abs_rho{a}_{b}") });
                    let mut col = Vec::with_capacity(idx.len());
                    for &i in &idx {
                        col.push(tr.states[i].to_density(Some(&basis))?.matrix()[(a - 1, b - 1)].norm_sqr().sqrt().as_f64());
                    }
                    cols.push(col);
                }
                Quantity::Bloch => {
                    for k in 0..dim * dim - 1 {
                        header.push(format!("{prefix}s{}", k + 1));
                    }
                    let mut c = vec![Vec::with_capacity(idx.len()); dim * dim - 1];
                    for &i in &idx {
                        let sv = match tr.states[i].convert(Rep::Bloch, &basis)? {
                            State::Bloch(b) => b,
                            _ => unreachable!(),
                        };
                        for (k, col) in c.iter_mut().enumerate() {
                            col.push(sv.coords()[k].as_f64());
                        }
                    }
                    cols.extend(c);
                }
                Quantity::Distance => {
                    let Some(t) = &target else { continue };
                    header.push(format!("{prefix}distance"));
                    let mut col = Vec::with_capacity(idx.len());
                    for &i in &idx {
                        col.push(distance_to_pure_target(&tr.states[i], t)?.as_f64());
                    }
                    cols.push(col);
                }
            }
        }
    }
    Ok((header, cols))
}
