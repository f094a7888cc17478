//! The two reference problems: five uncoupled quantum dots driven by one
//! global field, and Bell-state preparation on two coupled spins.

use nalgebra::DVector;
use serde_json::{json, Value};

use crate::dynamics::{propagate, ControlField, Direction, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::lyapunov::{Kick, LyapunovConfig, KICK_FRACTION};
use crate::operator::{pauli, ControlSystem, Operator};
use crate::optimizer::{Member, Objective};
use crate::pulses::required_steps;
use crate::report::{Subsystem, SystemSpec};
use crate::scalar::{c, c_re, Real};
use crate::state::{distance_to_pure_target, pure_to_density, PureState, Rep, State};

/// `ħ` in eV·fs; one internal time unit is this many femtoseconds when
/// energies are measured in eV.
pub const HBAR_EV_FS: f64 = 0.6582119;

pub const QD_ENERGIES_EV: [f64; 5] = [1.32, 1.35, 1.375, 1.38, 1.397];
pub const QD_OBSERVABLE_DIAG: [f64; 10] = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0];
/// Trial field `0.559·sin(t)` for the iterative run, in internal units.
pub const QD_TRIAL_AMPLITUDE: f64 = 0.559;
pub const QD_LAMBDA: f64 = 4.0;
/// Final time of the iterative quantum-dot run, in picoseconds.
pub const QD_ITERATIVE_TF_PS: f64 = 4.0;

pub const BELL_TF: f64 = 200.0;
pub const BELL_STEPS: usize = 4000;
pub const BELL_DRIFT_ZZ: f64 = 0.1;
pub const BELL_X1: f64 = 0.9;
pub const BELL_X2: f64 = 1.0;
/// `f ≡ 0` is a stationary point of the Bell problem, so the iterative run
/// starts from a weak tone near the drift's transition frequency.
pub const BELL_TRIAL_AMPLITUDE: f64 = 0.01;
pub const BELL_TRIAL_FREQUENCY: f64 = 0.2;
/// Roughly a tenth of the peak of the iterative Bell design.
pub const BELL_KICK_AMPLITUDE: f64 = 0.0038;
pub const BELL_KICK_SEED: u64 = 7;

pub fn ps_to_internal(ps: f64) -> f64 {
    ps * 1000.0 / HBAR_EV_FS
}

pub fn internal_to_ps(t: f64) -> f64 {
    t * HBAR_EV_FS / 1000.0
}

/// `(1/√2)·[[0, 1−i], [1+i, 0]]`.
pub fn qd_coupling<T: Real>() -> Operator<T> {
    let h = T::one() / T::lit(2.0).sqrt();
    let z = c_re(T::zero());
    Operator::hermitian(nalgebra::DMatrix::from_row_slice(2, 2, &[z, c(h, -h), c(h, h), z])).expect("Hermitian by construction")
}

#[derive(Clone, Debug)]
pub struct QuantumDotScenario<T: Real> {
    pub energies_ev: [f64; 5],
    /// Direct sum of the five dot blocks.
    pub system: ControlSystem<T>,
    pub blocks: Vec<ControlSystem<T>>,
    pub observable: Operator<T>,
    pub block_observables: Vec<Operator<T>>,
    pub initial: Vec<PureState<T>>,
}

pub fn build_qd_scenario<T: Real>() -> QuantumDotScenario<T> {
    let blocks: Vec<ControlSystem<T>> = QD_ENERGIES_EV
        .iter()
        .map(|e| ControlSystem::new(Operator::diag(&[T::zero(), T::lit(*e)]), vec![qd_coupling()]).expect("valid block"))
        .collect();
    let drift = Operator::direct_sum(&blocks.iter().map(|b| b.drift().clone()).collect::<Vec<_>>());
    let control = Operator::direct_sum(&blocks.iter().map(|b| b.controls()[0].clone()).collect::<Vec<_>>());
    let diag: Vec<T> = QD_OBSERVABLE_DIAG.iter().map(|x| T::lit(*x)).collect();
    QuantumDotScenario {
        energies_ev: QD_ENERGIES_EV,
        system: ControlSystem::new(drift, vec![control]).expect("valid direct sum"),
        block_observables: diag.chunks(2).map(Operator::diag).collect(),
        observable: Operator::diag(&diag),
        blocks,
        initial: (0..5).map(|_| PureState::basis(2, 0)).collect(),
    }
}

impl<T: Real> QuantumDotScenario<T> {
    pub fn dots(&self) -> usize {
        self.blocks.len()
    }

    /// Transition angular frequencies in internal units (equal to the
    /// energies in eV because time is measured in `ħ/eV`).
    pub fn transition_frequencies(&self) -> Vec<T> {
        self.energies_ev.iter().map(|e| T::lit(*e)).collect()
    }

    /// Zero-based indices of the dots the observable wants excited.
    pub fn observable_targets(&self) -> Vec<usize> {
        self.block_observables
            .iter()
            .enumerate()
            .filter(|(_, a)| a.matrix()[(1, 1)].re > T::zero())
            .map(|(k, _)| k)
            .collect()
    }

    /// Grid over `[0, tf]` resolving the highest dot frequency (and any
    /// extra carrier) by the pulse sampling rule.
    pub fn grid(&self, tf: T, extra_carrier: Option<T>) -> Result<TimeGrid<T>> {
        let mut w = self.energies_ev.iter().copied().fold(0.0, f64::max);
        if let Some(x) = extra_carrier {
            w = w.max(x.as_f64());
        }
        TimeGrid::new(T::zero(), tf, required_steps(tf.as_f64(), w))
    }

    /// `0.559·sin(t)` sampled on `grid`.
    pub fn trial_field(&self, grid: TimeGrid<T>) -> ControlField<T> {
        ControlField::from_fn(grid, 1, |_, t| T::lit(QD_TRIAL_AMPLITUDE) * t.sin()).expect("finite trial field")
    }

    /// One optimizer member per dot with its own normalized state and its
    /// slice of the observable; the summed figure of merit peaks at 2.
    pub fn members(&self) -> Vec<Member<T>> {
        self.blocks
            .iter()
            .zip(&self.block_observables)
            .zip(&self.initial)
            .map(|((sys, a), s0)| Member {
                system: sys.clone(),
                objective: Objective::observable(a.clone(), State::Pure(s0.clone())),
            })
            .collect()
    }

    /// Members for an arbitrary target set: `diag(0, 1)` on targets and
    /// `diag(0, −1)` elsewhere. Targets {1, 3} reproduce `observable`.
    pub fn members_for(&self, targets: &[usize]) -> Vec<Member<T>> {
        self.blocks
            .iter()
            .zip(&self.initial)
            .enumerate()
            .map(|(k, (sys, s0))| {
                let sign = if targets.contains(&k) { T::one() } else { -T::one() };
                Member {
                    system: sys.clone(),
                    objective: Objective::observable(Operator::diag(&[T::zero(), sign]), State::Pure(s0.clone())),
                }
            })
            .collect()
    }

    /// `⊕_k X` on targets and `I` elsewhere.
    pub fn bitflip_unitary(&self, targets: &[usize]) -> Operator<T> {
        let blocks: Vec<Operator<T>> = (0..self.dots())
            .map(|k| if targets.contains(&k) { pauli::x() } else { Operator::identity(2) })
            .collect();
        Operator::direct_sum(&blocks)
    }

    /// Final per-dot states under `field`, each block propagated separately.
    pub fn final_states(&self, field: &ControlField<T>) -> Result<Vec<PureState<T>>> {
        self.blocks
            .iter()
            .zip(&self.initial)
            .map(|(sys, s0)| match propagate(sys, field, &State::Pure(s0.clone()), Direction::Forward)?.last() {
                State::Pure(p) => Ok(p.clone()),
                _ => unreachable!(),
            })
            .collect()
    }

    /// Final excited-state population of every dot.
    pub fn excitations(&self, field: &ControlField<T>) -> Result<Vec<T>> {
        Ok(self.final_states(field)?.iter().map(|p| p.vector()[1].norm_sqr()).collect())
    }

    /// Per-dot probability of the bit-flip outcome: excited for targets,
    /// ground otherwise.
    pub fn bitflip_fidelities(&self, field: &ControlField<T>, targets: &[usize]) -> Result<Vec<T>> {
        Ok(self
            .excitations(field)?
            .into_iter()
            .enumerate()
            .map(|(k, e)| if targets.contains(&k) { e } else { T::one() - e })
            .collect())
    }

    /// Sum over dots of `⟨A_k⟩` with per-dot normalized states.
    pub fn observable_value(&self, field: &ControlField<T>) -> Result<T> {
        Ok(self
            .final_states(field)?
            .iter()
            .zip(&self.block_observables)
            .fold(T::zero(), |acc, (p, a)| acc + p.vector().dotc(&(a.matrix() * p.vector())).re))
    }

    /// Per-dot system file with the bit-flip image of the ground state as
    /// target.
    pub fn system_spec(&self, targets: &[usize]) -> SystemSpec<T> {
        SystemSpec {
            name: "qd5".into(),
            subsystems: self
                .blocks
                .iter()
                .zip(&self.initial)
                .enumerate()
                .map(|(k, (sys, s0))| Subsystem {
                    label: format!("dot{}", k + 1),
                    system: sys.clone(),
                    initial: State::Pure(s0.clone()),
                    target: Some(State::Pure(PureState::basis(2, usize::from(targets.contains(&k))))),
                })
                .collect(),
        }
    }

    pub fn descriptor(&self) -> Value {
        json!({
            "name": "qd5",
            "dot_energies_ev": self.energies_ev,
            "hbar_ev_fs": HBAR_EV_FS,
            "time_unit_fs": HBAR_EV_FS,
            "coupling": "(1/sqrt 2)[[0, 1-i], [1+i, 0]] per dot",
            "observable_diag": QD_OBSERVABLE_DIAG,
            "expectation": "sum of per-dot expectations, each dot normalized separately",
            "initial": "all dots in the ground state",
            "trial_field": format!("{QD_TRIAL_AMPLITUDE}*sin(t), t in internal units"),
            "lambda": QD_LAMBDA,
            "iterative_tf_ps": QD_ITERATIVE_TF_PS,
            "system": serde_json::to_value(&self.system).unwrap_or(Value::Null),
        })
    }
}

#[derive(Clone, Debug)]
pub struct BellScenario<T: Real> {
    pub system: ControlSystem<T>,
    pub initial: PureState<T>,
    pub target: PureState<T>,
    pub projector: Operator<T>,
    pub alpha: T,
    pub beta: T,
    pub lambda: T,
    pub tf: T,
    pub steps: usize,
}

pub fn build_bell_scenario<T: Real>() -> BellScenario<T> {
    let (x, z, i2) = (pauli::x::<T>(), pauli::z::<T>(), Operator::<T>::identity(2));
    let drift = z.kron(&z).scale(T::lit(BELL_DRIFT_ZZ));
    let control = Operator::hermitian(
        x.kron(&i2).scale(T::lit(BELL_X1)).into_matrix() + i2.kron(&x).scale(T::lit(BELL_X2)).into_matrix(),
    )
    .expect("Hermitian by construction");
    let h = T::one() / T::lit(2.0).sqrt();
    let z0 = c_re(T::zero());
    let target = PureState::new(DVector::from_vec(vec![c_re(h), z0, z0, c_re(h)])).expect("normalized");
    let projector = Operator::hermitian(pure_to_density(&target).matrix().clone()).expect("projector");
    BellScenario {
        system: ControlSystem::new(drift, vec![control]).expect("valid Bell system"),
        initial: PureState::basis(4, 0),
        target,
        projector,
        alpha: T::one(),
        beta: T::one(),
        lambda: T::one(),
        tf: T::lit(BELL_TF),
        steps: BELL_STEPS,
    }
}

impl<T: Real> BellScenario<T> {
    pub fn grid(&self) -> TimeGrid<T> {
        TimeGrid::new(T::zero(), self.tf, self.steps).expect("valid default grid")
    }

    /// Projector objective `|Ψ_d⟩⟨Ψ_d|` from `|00⟩`.
    pub fn objective(&self) -> Objective<T> {
        Objective::state_overlap(State::Pure(self.target.clone()), State::Pure(self.initial.clone()))
    }

    pub fn trial_field(&self, grid: TimeGrid<T>) -> ControlField<T> {
        let (a, w) = (T::lit(BELL_TRIAL_AMPLITUDE), T::lit(BELL_TRIAL_FREQUENCY));
        ControlField::from_fn(grid, 1, |_, t| a * (w * t).cos()).expect("finite trial field")
    }

    /// Random kick over the first `KICK_FRACTION` of the horizon.
    pub fn default_kick(&self) -> Kick<T> {
        Kick { duration: T::lit(KICK_FRACTION) * self.tf, amplitude: T::lit(BELL_KICK_AMPLITUDE), seed: BELL_KICK_SEED }
    }

    pub fn lyapunov_config(&self, kappa: T, rep: Rep, kick: Option<Kick<T>>) -> LyapunovConfig<T> {
        LyapunovConfig { kappa, rep, kick, grid: self.grid(), target: State::Pure(self.target.clone()) }
    }

    pub fn system_spec(&self) -> SystemSpec<T> {
        SystemSpec {
            name: "bell".into(),
            subsystems: vec![Subsystem {
                label: "spins".into(),
                system: self.system.clone(),
                initial: State::Pure(self.initial.clone()),
                target: Some(State::Pure(self.target.clone())),
            }],
        }
    }

    pub fn descriptor(&self) -> Value {
        json!({
            "name": "bell",
            "hamiltonian": format!("f*({BELL_X1} sx(1) + {BELL_X2} sx(2)) + {BELL_DRIFT_ZZ} sz sz"),
            "basis_order": ["00", "01", "10", "11"],
            "initial": "|00>",
            "target": "(|00> + |11>)/sqrt 2",
            "alpha": self.alpha.as_f64(),
            "beta": self.beta.as_f64(),
            "lambda": self.lambda.as_f64(),
            "tf": self.tf.as_f64(),
            "steps": self.steps,
            "trial_field": format!("{BELL_TRIAL_AMPLITUDE}*cos({BELL_TRIAL_FREQUENCY} t)"),
            "kick": {"amplitude": BELL_KICK_AMPLITUDE, "duration": KICK_FRACTION * self.tf.as_f64(), "seed": BELL_KICK_SEED},
            "system": serde_json::to_value(&self.system).unwrap_or(Value::Null),
        })
    }
}

/// Time series reported for the Bell problem.
#[derive(Clone, Debug, Default)]
pub struct BellSeries {
    pub t: Vec<f64>,
    /// `ρ_kk`, k = 1…4.
    pub populations: [Vec<f64>; 4],
    /// `|ρ₁₄|`.
    pub coherence14: Vec<f64>,
    pub distance: Vec<f64>,
}

pub fn bell_report_quantities<T: Real>(traj: &Trajectory<T>, target: &PureState<T>) -> Result<BellSeries> {
    let mut out = BellSeries { t: traj.times().iter().map(|t| t.as_f64()).collect(), ..Default::default() };
    for s in &traj.states {
        if s.dim() != 4 {
            return Err(Error::Shape("Bell report needs a 4-level trajectory".into()));
        }
        let rho = s.to_density(None)?;
        let m = rho.matrix();
        for k in 0..4 {
            out.populations[k].push(m[(k, k)].re.as_f64());
        }
        out.coherence14.push(m[(0, 3)].norm_sqr().sqrt().as_f64());
        out.distance.push(distance_to_pure_target(s, target)?.as_f64());
    }
    Ok(out)
}
