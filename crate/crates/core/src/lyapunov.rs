//! Control design by instantaneous descent of a Lyapunov potential
//! `V = ‖S − S_d(t)‖²`, realized as an open-loop pulse.
//!
//! The field on interval `k` is computed from the model state at `t_k` and
//! held for the step. With the Bloch law `f = κ s_dᵀ A₁ s` (or the equivalent
//! density law) the continuous-time potential obeys `dV/dt = −2κ·(s_dᵀA₁s)²`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate, step_state, ControlField, Direction, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::operator::{adjoint_representation, build_pauli_basis, ControlSystem, PauliBasis};
use crate::optimizer::{mixed_kernel, pure_kernel};
use crate::state::{state_distance, BlochVector, Rep, State};
use crate::scalar::Real;

/// Consecutive near-zero field samples that count as a stall.
pub const STALL_STEPS: usize = 100;
pub const STALL_FIELD: f64 = 1e-14;
/// Kick length as a fraction of the run.
pub const KICK_FRACTION: f64 = 0.02;
pub const KAPPA_GRID: [f64; 7] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];

/// Uniform random field in `[−amplitude, amplitude]` applied at the start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kick<T> {
    pub duration: T,
    pub amplitude: T,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct LyapunovConfig<T: Real> {
    pub kappa: T,
    pub rep: Rep,
    pub kick: Option<Kick<T>>,
    pub grid: TimeGrid<T>,
    pub target: State<T>,
}

impl<T: Real> LyapunovConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > T::zero()) || !self.kappa.is_finite() {
            return Err(Error::Config(format!("kappa = {} must be positive", self.kappa.as_f64())));
        }
        if let Some(k) = &self.kick {
            if k.duration < T::zero() || k.duration >= self.grid.duration() {
                return Err(Error::Config("kick must be shorter than the run".into()));
            }
            if !(k.amplitude >= T::zero()) {
                return Err(Error::Config("kick amplitude must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LyapunovRun<T: Real> {
    /// The field actually applied, replayable by plain propagation.
    pub field: ControlField<T>,
    pub trajectory: Trajectory<T>,
    /// `V(t_k)` for `k = 0 … Nt`.
    pub potential: Vec<T>,
    /// Intervals covered by the kick.
    pub kick_steps: usize,
    pub stalled: bool,
}

impl<T: Real> LyapunovRun<T> {
    /// Largest increase `V(t_{k+1}) − V(t_k)` after the kick.
    pub fn max_increase_after_kick(&self) -> f64 {
        self.potential[self.kick_steps..]
            .windows(2)
            .map(|w| (w[1] - w[0]).as_f64())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `‖state − target‖²` in their common representation.
pub fn lyapunov_potential<T: Real>(state: &State<T>, target: &State<T>) -> Result<T> {
    let d = state_distance(state, target)?;
    Ok(d * d)
}

/// `κ·s_dᵀ A₁ s`.
pub fn control_law<T: Real>(s: &BlochVector<T>, s_d: &BlochVector<T>, a1: &DMatrix<T>, kappa: T) -> T {
    s_d.coords().dot(&(a1 * s.coords())) * kappa
}

/// Drift-evolved target `S_d(t_k)` on every grid point.
pub fn target_trajectory<T: Real>(target: &State<T>, system: &ControlSystem<T>, grid: &TimeGrid<T>) -> Result<Vec<State<T>>> {
    let zero = ControlField::zeros(*grid, system.channel_count());
    Ok(propagate(system, &zero, target, Direction::Forward)?.states)
}

enum Law<T: Real> {
    Bloch(Vec<DMatrix<T>>),
    Density,
    Pure,
}

fn law_value<T: Real>(law: &Law<T>, system: &ControlSystem<T>, s: &State<T>, sd: &State<T>, kappa: T, m: usize) -> T {
    match (law, s, sd) {
        (Law::Bloch(a), State::Bloch(s), State::Bloch(sd)) => control_law(s, sd, &a[m], kappa),
        (Law::Density, State::Density(r), State::Density(rd)) => kappa * mixed_kernel(rd.matrix(), r.matrix(), system.controls()[m].matrix()),
        (Law::Pure, State::Pure(p), State::Pure(pd)) => kappa * pure_kernel(pd.vector(), p.vector(), system.controls()[m].matrix()),
        _ => unreachable!("states are converted to the law's representation"),
    }
}

/// Integrates the closed loop: kick first, then the feedback law with a
/// zero-order hold.
pub fn run_lyapunov<T: Real>(system: &ControlSystem<T>, config: &LyapunovConfig<T>, initial: &State<T>) -> Result<LyapunovRun<T>> {
    config.validate()?;
    let n = system.dim();
    if initial.dim() != n || config.target.dim() != n {
        return Err(Error::Shape("initial and target states must match the system dimension".into()));
    }
    let basis: PauliBasis<T> = build_pauli_basis(n)?;
    let s0 = initial.convert(config.rep, &basis)?;
    let target = config.target.convert(config.rep, &basis)?;
    let law = match config.rep {
        Rep::Bloch => Law::Bloch(
            system
                .controls()
                .iter()
                .map(|h| adjoint_representation(h, &basis))
                .collect::<Result<_>>()?,
        ),
        Rep::Density => Law::Density,
        Rep::Pure => Law::Pure,
    };
    let grid = config.grid;
    let (steps, dt) = (grid.steps(), grid.dt());
    let targets = target_trajectory(&target, system, &grid)?;
    let kick_steps = match &config.kick {
        Some(k) => (0..steps).take_while(|&i| grid.time(i) - grid.t0() < k.duration).count(),
        None => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.kick.map(|k| k.seed).unwrap_or(0));
    let mch = system.channel_count();
    let mut samples = vec![Vec::with_capacity(steps); mch];
    let mut states = Vec::with_capacity(steps + 1);
    let mut potential = Vec::with_capacity(steps + 1);
    let mut cur = s0;
    let v_tol = T::lit(T::tol(1e-12));
    let (mut quiet, mut stalled) = (0usize, false);
    let bloch_basis = matches!(config.rep, Rep::Bloch).then_some(&basis);
    for k in 0..steps {
        potential.push(lyapunov_potential(&cur, &targets[k])?);
        let f: Vec<T> = if k < kick_steps {
            let a = config.kick.unwrap().amplitude.as_f64();
            (0..mch).map(|_| T::lit(if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 })).collect()
        } else {
            (0..mch).map(|m| law_value(&law, system, &cur, &targets[k], config.kappa, m)).collect()
        };
        if k >= kick_steps && !stalled {
            if f.iter().all(|x| x.abs().as_f64() < STALL_FIELD) && potential[k] > v_tol {
                quiet += 1;
                if quiet >= STALL_STEPS {
                    stalled = true;
                    log::warn!(
                        "Lyapunov field stalled at zero for {STALL_STEPS} steps with V = {:e}: the law vanishes on this \
                         state{}",
                        potential[k].as_f64(),
                        if config.kick.is_none() { "; configure a kick" } else { "" }
                    );
                }
            } else {
                quiet = 0;
            }
        }
        let next = step_state(system, &cur, &f, dt, bloch_basis)?;
        for (ch, x) in samples.iter_mut().zip(&f) {
            ch.push(*x);
        }
        states.push(std::mem::replace(&mut cur, next));
    }
    potential.push(lyapunov_potential(&cur, &targets[steps])?);
    states.push(cur);
    Ok(LyapunovRun {
        field: ControlField::new(grid, samples)?,
        trajectory: Trajectory { grid, rep: config.rep, states },
        potential,
        kick_steps,
        stalled,
    })
}

/// Maximal intervals, each at least `min_length` long, over which `V`
/// falls by less than `rel_drop` of its value at the interval start.
/// Only samples from `start` on are considered.
pub fn find_plateaus(times: &[f64], v: &[f64], start: usize, min_length: f64, rel_drop: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut j = start;
    for i in start..v.len() {
        j = j.max(i);
        while j + 1 < v.len() && times[j + 1] - times[i] <= min_length {
            j += 1;
        }
        if times[j] - times[i] + 1e-12 < min_length {
            break;
        }
        if v[i] - v[j] < rel_drop * v[i].abs() {
            // Extend as far as the drop criterion allows.
            let mut e = j;
            while e + 1 < v.len() && v[i] - v[e + 1] < rel_drop * v[i].abs() {
                e += 1;
            }
            match out.last_mut() {
                Some(last) if times[i] <= last.1 => last.1 = last.1.max(times[e]),
                _ => out.push((times[i], times[e])),
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaScore {
    pub kappa: f64,
    pub decrease: f64,
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaScan {
    pub chosen: f64,
    pub scores: Vec<KappaScore>,
}

/// Runs the first `fraction` of the configured grid for each κ and picks
/// the one with the largest drop `V(0) − V(end)` among runs whose potential
/// never rises by more than `1e−6` per step after the kick.
pub fn scan_kappa<T: Real>(
    system: &ControlSystem<T>,
    base: &LyapunovConfig<T>,
    initial: &State<T>,
    kappas: &[f64],
    fraction: f64,
) -> Result<KappaScan> {
    let g = base.grid;
    let steps = ((g.steps() as f64 * fraction).round() as usize).max(1);
    let sub = TimeGrid::new(g.t0(), g.time(steps), steps)?;
    let mut scores = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let cfg = LyapunovConfig { kappa: T::lit(kappa), grid: sub, ..base.clone() };
        let run = run_lyapunov(system, &cfg, initial)?;
        let v = &run.potential;
        scores.push(KappaScore {
            kappa,
            decrease: (v[0] - v[v.len() - 1]).as_f64(),
            monotone: run.max_increase_after_kick() <= 1e-6,
        });
    }
    let pick = |only_monotone: bool| {
        scores
            .iter()
            .filter(|s| s.monotone || !only_monotone)
            .max_by(|a, b| a.decrease.total_cmp(&b.decrease))
            .map(|s| s.kappa)
    };
    let chosen = pick(true).or_else(|| pick(false)).ok_or_else(|| Error::Config("empty kappa grid".into()))?;
    Ok(KappaScan { chosen, scores })
}
