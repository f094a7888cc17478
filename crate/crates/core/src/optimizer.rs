//! Monotonically convergent two-sweep optimization of control fields.
//!
//! One iteration turns `f` into `f'` through an intermediate `f̃`:
//!
//! * backward sweep: the costate (`A_v` for state objectives, the
//!   back-propagated target for gates) is carried from `t_F` to `t_0` under
//!   `f̃`, where `f̃_k = (1−β) f_k + (β/λ)·κ_k` and `κ_k` is the half-gradient
//!   of the terminal figure of merit taken at the stored forward state;
//! * forward sweep: the state is carried from `t_0` under
//!   `f'_k = (1−α) f̃_k + (α/λ)·κ_k`, with `κ_k` taken at the new state and
//!   the stored costate.
//!
//! `κ_k` uses the exact derivative of the step propagator, so each step of
//! either sweep raises `J = ⟨A_F⟩(t_F) − λ·Σ_m ∫ f_m² dt` by
//! `λ·dt·β(2−β)·(f* − f)²` to leading order; this is what makes the logged
//! `J` non-decreasing for `0 ≤ α, β < 2` on the discrete grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlField, TimeGrid};
use crate::error::{Error, Result};
use crate::operator::{hermiticity_error, unitarity_error, ControlSystem, Operator, StepPropagator};
use crate::pulses::fluence;
use crate::scalar::{c, c_re, Real, C};
use crate::state::{State, PureState};

/// What the optimizer maximizes at `t_F`.
#[derive(Clone, Debug)]
pub enum ObjectiveKind<T: Real> {
    /// `⟨A_F⟩(t_F)`.
    Observable(Operator<T>),
    /// `⟨A_F⟩(t_F)` with `A_F` the target's density matrix (the projector
    /// `|Ψ_d⟩⟨Ψ_d|` for a pure target).
    StateOverlap(State<T>),
    /// `Re Tr(U_target† U(t_F)) / N`.
    Gate(Operator<T>),
}

/// Objective kind plus initial condition `S₀` (ignored for gates, which
/// start from the identity).
#[derive(Clone, Debug)]
pub struct Objective<T: Real> {
    pub kind: ObjectiveKind<T>,
    pub initial: Option<State<T>>,
}

impl<T: Real> Objective<T> {
    pub fn observable(a_f: Operator<T>, initial: State<T>) -> Self {
        Self { kind: ObjectiveKind::Observable(a_f), initial: Some(initial) }
    }

    pub fn state_overlap(target: State<T>, initial: State<T>) -> Self {
        Self { kind: ObjectiveKind::StateOverlap(target), initial: Some(initial) }
    }

    pub fn gate(u_target: Operator<T>) -> Self {
        Self { kind: ObjectiveKind::Gate(u_target), initial: None }
    }
}

/// One subsystem of an ensemble driven by a shared field.
#[derive(Clone, Debug)]
pub struct Member<T: Real> {
    pub system: ControlSystem<T>,
    pub objective: Objective<T>,
}

#[derive(Clone, Debug)]
pub struct OptimConfig<T: Real> {
    pub alpha: T,
    pub beta: T,
    pub lambda: T,
    pub grid: TimeGrid<T>,
    pub max_iterations: usize,
    pub objective_tolerance: T,
    pub trial_field: ControlField<T>,
}

impl<T: Real> OptimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let in_range = |x: T| x >= T::zero() && x < T::lit(2.0);
        if !in_range(self.alpha) {
            return Err(Error::Config(format!("alpha = {} outside [0, 2)", self.alpha.as_f64())));
        }
        if !in_range(self.beta) {
            return Err(Error::Config(format!("beta = {} outside [0, 2)", self.beta.as_f64())));
        }
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda = {} must be positive", self.lambda.as_f64())));
        }
        if !(self.objective_tolerance >= T::zero()) {
            return Err(Error::Config("objective tolerance must be nonnegative".into()));
        }
        if *self.trial_field.grid() != self.grid {
            return Err(Error::Config("trial field is not sampled on the configured grid".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub figure_of_merit: f64,
    pub fluence: f64,
}

/// Record 0 describes the trial field; record `n` the field after `n`
/// iterations.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConvergenceLog {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Largest relative decrease `(J_n − J_{n+1}) / |J_n|` over the log
    /// (zero or negative when `J` never decreases).
    pub fn worst_relative_drop(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| (w[0].j - w[1].j) / w[0].j.abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct OptimOutcome<T: Real> {
    /// Field with the highest logged `J`.
    pub field: ControlField<T>,
    pub log: ConvergenceLog,
    pub best_iteration: usize,
}

/// `Im⟨χ|H_m|Ψ⟩ = Re[−i⟨χ|H_m|Ψ⟩]`, the pure-state kernel. With `χ = A_v Ψ`
/// it is half of `d⟨A⟩/df` per unit time.
pub fn pure_kernel<T: Real>(chi: &DVector<C<T>>, psi: &DVector<C<T>>, h_m: &DMatrix<C<T>>) -> T {
    chi.dotc(&(h_m * psi)).im
}

/// `Re[−i Tr(A_v [H_m, ρ_v])]`, which equals `d⟨A⟩/df` per unit time.
pub fn mixed_kernel<T: Real>(a: &DMatrix<C<T>>, rho: &DMatrix<C<T>>, h_m: &DMatrix<C<T>>) -> T {
    let comm = h_m * rho - rho * h_m;
    let tr = (a * comm).trace();
    (tr * c(T::zero(), -T::one())).re
}

/// `Re[−i Tr(U_A† H_m U_S)]`.
pub fn gate_kernel<T: Real>(u_a: &DMatrix<C<T>>, u_s: &DMatrix<C<T>>, h_m: &DMatrix<C<T>>) -> T {
    let tr = (u_a.adjoint() * h_m * u_s).trace();
    (tr * c(T::zero(), -T::one())).re
}

/// Arguments of [`gradient_kernel`] for each objective kind.
pub enum KernelInput<'a, T: Real> {
    Pure { chi: &'a DVector<C<T>>, psi: &'a DVector<C<T>> },
    Mixed { a: &'a DMatrix<C<T>>, rho: &'a DMatrix<C<T>> },
    Gate { u_a: &'a DMatrix<C<T>>, u_s: &'a DMatrix<C<T>> },
}

pub fn gradient_kernel<T: Real>(input: KernelInput<'_, T>, h_m: &Operator<T>) -> T {
    match input {
        KernelInput::Pure { chi, psi } => pure_kernel(chi, psi, h_m.matrix()),
        KernelInput::Mixed { a, rho } => mixed_kernel(a, rho, h_m.matrix()),
        KernelInput::Gate { u_a, u_s } => gate_kernel(u_a, u_s, h_m.matrix()),
    }
}

/// How a member's state and costate are carried. Pure states are stored as
/// `N × 1` matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Carrier {
    Pure,
    Density,
    Gate,
}

struct Prepared<T: Real> {
    drift: DMatrix<C<T>>,
    controls: Vec<DMatrix<C<T>>>,
    carrier: Carrier,
    initial: DMatrix<C<T>>,
    /// `A_F`, or `U_target` for gates.
    terminal: DMatrix<C<T>>,
    inv_dim: T,
}

impl<T: Real> Prepared<T> {
    fn new(member: &Member<T>) -> Result<Self> {
        let sys = &member.system;
        let n = sys.dim();
        let check_dim = |d: usize, what: &str| -> Result<()> {
            if d != n {
                return Err(Error::Shape(format!("{what} dimension {d} vs system dimension {n}")));
            }
            Ok(())
        };
        let initial_state = || -> Result<&State<T>> {
            member
                .objective
                .initial
                .as_ref()
                .ok_or_else(|| Error::Objective("state objectives need an initial state".into()))
        };
        let (carrier, initial, terminal) = match &member.objective.kind {
            ObjectiveKind::Gate(u) => {
                check_dim(u.dim(), "target gate")?;
                let err = unitarity_error(u.matrix());
                if err > 1e-8 {
                    return Err(Error::Objective(format!("target gate is not unitary (error {err:e})")));
                }
                (Carrier::Gate, DMatrix::identity(n, n), u.matrix().clone())
            }
            kind => {
                let a = match kind {
                    ObjectiveKind::Observable(a) => {
                        if !a.is_hermitian() {
                            return Err(Error::Objective(format!(
                                "A_F is not Hermitian (error {:e})",
                                hermiticity_error(a.matrix())
                            )));
                        }
                        a.matrix().clone()
                    }
                    ObjectiveKind::StateOverlap(target) => target.to_density(None)?.matrix().clone(),
                    ObjectiveKind::Gate(_) => unreachable!(),
                };
                check_dim(a.nrows(), "observable")?;
                let s0 = initial_state()?;
                check_dim(s0.dim(), "initial state")?;
                match s0 {
                    State::Pure(p) => (Carrier::Pure, DMatrix::from_column_slice(n, 1, p.vector().as_slice()), a),
                    other => (Carrier::Density, other.to_density(None)?.matrix().clone(), a),
                }
            }
        };
        Ok(Self {
            drift: sys.drift().matrix().clone(),
            controls: sys.controls().iter().map(|h| h.matrix().clone()).collect(),
            carrier,
            initial,
            terminal,
            inv_dim: T::one() / T::from_usize_lossy(n),
        })
    }

    fn hamiltonian(&self, f: &[T]) -> DMatrix<C<T>> {
        let mut h = self.drift.clone();
        for (x, hm) in f.iter().zip(&self.controls) {
            if *x != T::zero() {
                h += hm * c_re(*x);
            }
        }
        h
    }

    fn step(&self, x: &DMatrix<C<T>>, u: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        match self.carrier {
            Carrier::Pure | Carrier::Gate => u * x,
            Carrier::Density => u * x * u.adjoint(),
        }
    }

    fn step_back(&self, y: &DMatrix<C<T>>, u: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        match self.carrier {
            Carrier::Pure | Carrier::Density => u.adjoint() * y * u,
            Carrier::Gate => u.ad_mul(y),
        }
    }

    /// Terminal figure of merit from the final state.
    fn value(&self, x: &DMatrix<C<T>>) -> T {
        match self.carrier {
            Carrier::Pure => (x.adjoint() * &self.terminal * x)[(0, 0)].re,
            Carrier::Density => (&self.terminal * x).trace().re,
            Carrier::Gate => (self.terminal.adjoint() * x).trace().re * self.inv_dim,
        }
    }

    /// `∂/∂f_m` of the figure of merit obtained by stepping `x` with `p` and
    /// pairing with the costate `y`, for every channel.
    fn step_gradient(&self, y: &DMatrix<C<T>>, x: &DMatrix<C<T>>, p: &StepPropagator<T>, out: &mut [T]) {
        let u = p.unitary();
        let two = T::lit(2.0);
        match self.carrier {
            Carrier::Pure => {
                let yux = y * (u * x);
                for (g, hm) in out.iter_mut().zip(&self.controls) {
                    let dux = p.derivative(hm) * x;
                    *g += two * dux.dotc(&yux).re;
                }
            }
            Carrier::Density => {
                let xu = x * u.adjoint();
                for (g, hm) in out.iter_mut().zip(&self.controls) {
                    let du = p.derivative(hm);
                    *g += two * trace_of_product(&(y * du), &xu).re;
                }
            }
            Carrier::Gate => {
                for (g, hm) in out.iter_mut().zip(&self.controls) {
                    let du = p.derivative(hm);
                    *g += trace_of_product(&y.adjoint(), &(du * x)).re * self.inv_dim;
                }
            }
        }
    }
}

fn trace_of_product<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> C<T> {
    let mut acc = c_re(T::zero());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn prepare_all<T: Real>(members: &[Member<T>], channels: usize) -> Result<Vec<Prepared<T>>> {
    if members.is_empty() {
        return Err(Error::Objective("ensemble has no members".into()));
    }
    members
        .iter()
        .map(|m| {
            if m.system.channel_count() != channels {
                return Err(Error::Shape(format!(
                    "field has {} channels, system has {} controls",
                    channels,
                    m.system.channel_count()
                )));
            }
            Prepared::new(m)
        })
        .collect()
}

fn forward_final<T: Real>(p: &Prepared<T>, field: &ControlField<T>) -> DMatrix<C<T>> {
    let dt = field.grid().dt();
    let mut x = p.initial.clone();
    for k in 0..field.grid().steps() {
        let u = StepPropagator::new(&p.hamiltonian(&field.at(k)), dt);
        x = p.step(&x, u.unitary());
    }
    x
}

/// Summed terminal figure of merit of an ensemble.
pub fn ensemble_figure_of_merit<T: Real>(members: &[Member<T>], field: &ControlField<T>) -> Result<T> {
    let prepared = prepare_all(members, field.channels())?;
    Ok(prepared.iter().fold(T::zero(), |acc, p| acc + p.value(&forward_final(p, field))))
}

/// `J = Σ members ⟨A_F⟩(t_F) − λ·fluence` (gate members contribute
/// `Re Tr(U_target†U)/N`).
pub fn ensemble_objective_value<T: Real>(members: &[Member<T>], field: &ControlField<T>, lambda: T) -> Result<T> {
    Ok(ensemble_figure_of_merit(members, field)? - lambda * fluence(field))
}

pub fn objective_value<T: Real>(objective: &Objective<T>, system: &ControlSystem<T>, field: &ControlField<T>, lambda: T) -> Result<T> {
    let m = [Member { system: system.clone(), objective: objective.clone() }];
    ensemble_objective_value(&m, field, lambda)
}

/// Exact gradient `∂J/∂f_m(t_k)` of the discretized objective, indexed
/// `[channel][interval]`.
pub fn objective_gradient<T: Real>(members: &[Member<T>], field: &ControlField<T>, lambda: T) -> Result<Vec<Vec<T>>> {
    let prepared = prepare_all(members, field.channels())?;
    let grid = *field.grid();
    let (n, dt, mch) = (grid.steps(), grid.dt(), field.channels());
    let mut grad = vec![vec![T::zero(); n]; mch];
    for p in &prepared {
        let props: Vec<StepPropagator<T>> = (0..n).map(|k| StepPropagator::new(&p.hamiltonian(&field.at(k)), dt)).collect();
        let mut xs = Vec::with_capacity(n + 1);
        xs.push(p.initial.clone());
        for u in &props {
            let next = p.step(xs.last().unwrap(), u.unitary());
            xs.push(next);
        }
        let mut y = p.terminal.clone();
        let mut g = vec![T::zero(); mch];
        for k in (0..n).rev() {
            g.iter_mut().for_each(|x| *x = T::zero());
            p.step_gradient(&y, &xs[k], &props[k], &mut g);
            for m in 0..mch {
                grad[m][k] += g[m];
            }
            y = p.step_back(&y, props[k].unitary());
        }
    }
    let two = T::lit(2.0);
    for m in 0..mch {
        for k in 0..n {
            grad[m][k] -= two * lambda * dt * field.channel(m)[k];
        }
    }
    Ok(grad)
}

pub fn optimize<T: Real>(system: &ControlSystem<T>, objective: &Objective<T>, config: &OptimConfig<T>) -> Result<OptimOutcome<T>> {
    let m = [Member { system: system.clone(), objective: objective.clone() }];
    optimize_ensemble(&m, config)
}

/// Runs the two-sweep scheme on an ensemble sharing one field.
pub fn optimize_ensemble<T: Real>(members: &[Member<T>], config: &OptimConfig<T>) -> Result<OptimOutcome<T>> {
    config.validate()?;
    let prepared = prepare_all(members, config.trial_field.channels())?;
    let grid = config.grid;
    let (n, dt) = (grid.steps(), grid.dt());
    let mch = config.trial_field.channels();
    let (alpha, beta, lambda) = (config.alpha, config.beta, config.lambda);
    let two_lambda = T::lit(2.0) * lambda;
    let one = T::one();

    let mut field = config.trial_field.clone();
    // Forward pass under the trial field: states and propagators.
    let mut props: Vec<Vec<StepPropagator<T>>> = prepared
        .iter()
        .map(|p| (0..n).map(|k| StepPropagator::new(&p.hamiltonian(&field.at(k)), dt)).collect())
        .collect();
    let mut states: Vec<Vec<DMatrix<C<T>>>> = prepared
        .iter()
        .zip(&props)
        .map(|(p, us)| {
            let mut xs = Vec::with_capacity(n + 1);
            xs.push(p.initial.clone());
            for u in us {
                let next = p.step(xs.last().unwrap(), u.unitary());
                xs.push(next);
            }
            xs
        })
        .collect();
    let merit = |states: &[Vec<DMatrix<C<T>>>]| -> T {
        prepared.iter().zip(states).fold(T::zero(), |acc, (p, xs)| acc + p.value(&xs[n]))
    };

    let mut log = ConvergenceLog::default();
    let record = |iter: usize, fom: T, field: &ControlField<T>| {
        let flu = fluence(field);
        IterationRecord {
            iter,
            j: (fom - lambda * flu).as_f64(),
            figure_of_merit: fom.as_f64(),
            fluence: flu.as_f64(),
        }
    };
    log.records.push(record(0, merit(&states), &field));
    let mut best = (log.records[0].j, 0usize, field.clone());

    let mut costates: Vec<Vec<DMatrix<C<T>>>> = prepared.iter().map(|_| vec![DMatrix::zeros(0, 0); n + 1]).collect();
    let mut g = vec![T::zero(); mch];
    for iter in 1..=config.max_iterations {
        // Backward sweep: f → f̃.
        let mut tilde = field.clone();
        let mut tilde_props: Vec<Vec<Option<StepPropagator<T>>>> = prepared.iter().map(|_| vec![None; n]).collect();
        for (i, p) in prepared.iter().enumerate() {
            costates[i][n] = p.terminal.clone();
        }
        for k in (0..n).rev() {
            g.iter_mut().for_each(|x| *x = T::zero());
            for (i, p) in prepared.iter().enumerate() {
                p.step_gradient(&costates[i][k + 1], &states[i][k], &props[i][k], &mut g);
            }
            let fk = field.at(k);
            let samples = tilde.samples_mut();
            for m in 0..mch {
                samples[m][k] = (one - beta) * fk[m] + beta * g[m] / (dt * two_lambda);
            }
            let ftk = tilde.at(k);
            for (i, p) in prepared.iter().enumerate() {
                let sp = StepPropagator::new(&p.hamiltonian(&ftk), dt);
                costates[i][k] = p.step_back(&costates[i][k + 1], sp.unitary());
                tilde_props[i][k] = Some(sp);
            }
        }
        // Forward sweep: f̃ → f'.
        let mut next = tilde.clone();
        for k in 0..n {
            g.iter_mut().for_each(|x| *x = T::zero());
            for (i, p) in prepared.iter().enumerate() {
                p.step_gradient(&costates[i][k + 1], &states[i][k], tilde_props[i][k].as_ref().unwrap(), &mut g);
            }
            let ftk = tilde.at(k);
            let samples = next.samples_mut();
            for m in 0..mch {
                samples[m][k] = (one - alpha) * ftk[m] + alpha * g[m] / (dt * two_lambda);
            }
            let fk = next.at(k);
            for (i, p) in prepared.iter().enumerate() {
                let sp = StepPropagator::new(&p.hamiltonian(&fk), dt);
                states[i][k + 1] = p.step(&states[i][k], sp.unitary());
                props[i][k] = sp;
            }
        }
        field = next;
        let rec = record(iter, merit(&states), &field);
        let prev = log.records.last().unwrap().j;
        log.records.push(rec);
        log::debug!("iteration {iter}: J = {:.12} merit = {:.12}", rec.j, rec.figure_of_merit);
        if rec.j > best.0 {
            best = (rec.j, iter, field.clone());
        }
        if !rec.j.is_finite() {
            return Err(Error::Objective(format!("objective became non-finite at iteration {iter}")));
        }
        if (rec.j - prev).abs() < config.objective_tolerance.as_f64() {
            break;
        }
    }
    Ok(OptimOutcome { field: best.2, log, best_iteration: best.1 })
}

/// Propagates every member under `field` and returns the final pure states
/// (members with density or gate carriers are skipped).
pub fn final_pure_states<T: Real>(members: &[Member<T>], field: &ControlField<T>) -> Result<Vec<Option<PureState<T>>>> {
    let prepared = prepare_all(members, field.channels())?;
    Ok(prepared
        .iter()
        .map(|p| match p.carrier {
            Carrier::Pure => {
                let x = forward_final(p, field);
                Some(PureState::from_vector_unchecked(x.column(0).into_owned()))
            }
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagate, propagate_unitary, Direction};
    use crate::operator::{pauli, propagator};
    use crate::state::{observable_expectation, pure_to_density, PureState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Operator<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        Operator::hermitian((&a + a.adjoint()) * c_re(0.5)).unwrap()
    }

    fn random_pure(n: usize, rng: &mut ChaCha8Rng) -> PureState<f64> {
        PureState::normalized(DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).unwrap()
    }

    fn setup(seed: u64, n: usize, steps: usize) -> (ControlSystem<f64>, ControlField<f64>, Operator<f64>, PureState<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = ControlSystem::new(random_hermitian(n, &mut rng), vec![random_hermitian(n, &mut rng)]).unwrap();
        let grid = TimeGrid::new(0.0, 3.0, steps).unwrap();
        let (a, b) = (rng.gen_range(0.5..1.5), rng.gen_range(0.0..3.0));
        let field = ControlField::from_fn(grid, 1, |_, t: f64| 0.4 * (a * t + b).sin()).unwrap();
        (sys, field, random_hermitian(n, &mut rng), random_pure(n, &mut rng))
    }

    fn fd_gradient(members: &[Member<f64>], field: &ControlField<f64>, lambda: f64, k: usize, h: f64) -> f64 {
        let bump = |d: f64| {
            let mut f = field.clone();
            f.samples_mut()[0][k] += d;
            ensemble_objective_value(members, &f, lambda).unwrap()
        };
        (bump(h) - bump(-h)) / (2.0 * h)
    }

    #[test]
    fn kernels_vanish_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_pure(3, &mut rng);
        let h = random_hermitian(3, &mut rng);
        assert!(pure_kernel(psi.vector(), psi.vector(), h.matrix()).abs() < 1e-15);
        let z = DMatrix::zeros(3, 3);
        assert_eq!(pure_kernel(psi.vector(), psi.vector(), &z), 0.0);
        let rho = pure_to_density(&psi);
        assert_eq!(mixed_kernel(h.matrix(), rho.matrix(), &z), 0.0);
    }

    #[test]
    fn mixed_kernel_is_twice_pure_kernel_for_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_pure(4, &mut rng);
        let (a, h) = (random_hermitian(4, &mut rng), random_hermitian(4, &mut rng));
        let chi = a.matrix() * psi.vector();
        let rho = pure_to_density(&psi);
        let pk = pure_kernel(&chi, psi.vector(), h.matrix());
        let mk = mixed_kernel(a.matrix(), rho.matrix(), h.matrix());
        assert!((mk - 2.0 * pk).abs() < 1e-12);
        let via_enum = gradient_kernel(KernelInput::Mixed { a: a.matrix(), rho: rho.matrix() }, &h);
        assert_eq!(via_enum, mk);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        for (seed, n) in [(3, 2), (4, 3)] {
            let (sys, field, a, psi) = setup(seed, n, 60);
            for initial in [State::Pure(psi.clone()), State::Density(pure_to_density(&psi))] {
                let members = [Member { system: sys.clone(), objective: Objective::observable(a.clone(), initial) }];
                let grad = objective_gradient(&members, &field, 0.3).unwrap();
                for k in [0, 17, 59] {
                    let fd = fd_gradient(&members, &field, 0.3, k, 1e-5);
                    assert!((grad[0][k] - fd).abs() < 1e-8 * (1.0 + fd.abs()), "{} vs {}", grad[0][k], fd);
                }
            }
        }
    }

    #[test]
    fn gate_gradient_matches_finite_differences() {
        let (sys, field, _, _) = setup(5, 2, 50);
        let target = Operator::new(propagator(pauli::x::<f64>().matrix(), std::f64::consts::FRAC_PI_2)).unwrap();
        let members = [Member { system: sys, objective: Objective::gate(target) }];
        let grad = objective_gradient(&members, &field, 0.1).unwrap();
        for k in [3, 25, 49] {
            let fd = fd_gradient(&members, &field, 0.1, k, 1e-5);
            assert!((grad[0][k] - fd).abs() < 1e-8 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn objective_matches_propagation() {
        let (sys, field, a, psi) = setup(6, 3, 80);
        let obj = Objective::observable(a.clone(), State::Pure(psi.clone()));
        let traj = propagate(&sys, &field, &State::Pure(psi), Direction::Forward).unwrap();
        let expect = observable_expectation(&a, traj.last()).unwrap() - 0.5 * fluence(&field);
        assert!((objective_value(&obj, &sys, &field, 0.5).unwrap() - expect).abs() < 1e-12);
        let u = propagate_unitary(&sys, &field).unwrap();
        let gate = Objective::gate(u.last().clone());
        assert!((objective_value(&gate, &sys, &field, 0.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stationary_projector_objective_is_one() {
        let sys = ControlSystem::new(Operator::diag(&[0.0, 1.0]), vec![pauli::x()]).unwrap();
        let grid = TimeGrid::new(0.0, 5.0, 50).unwrap();
        let ground = State::Pure(PureState::basis(2, 0));
        let obj = Objective::state_overlap(ground.clone(), ground);
        let j: f64 = objective_value(&obj, &sys, &ControlField::zeros(grid, 1), 1.0).unwrap();
        assert!((j - 1.0f64).abs() < 1e-14);
    }

    fn config(field: ControlField<f64>, iters: usize, lambda: f64) -> OptimConfig<f64> {
        OptimConfig {
            alpha: 1.0,
            beta: 1.0,
            lambda,
            grid: *field.grid(),
            max_iterations: iters,
            objective_tolerance: 0.0,
            trial_field: field,
        }
    }

    #[test]
    fn zero_iterations_return_trial_field() {
        let (sys, field, a, psi) = setup(7, 2, 40);
        let out = optimize(&sys, &Objective::observable(a, State::Pure(psi)), &config(field.clone(), 0, 1.0)).unwrap();
        assert_eq!(out.field, field);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let (sys, field, a, psi) = setup(8, 2, 40);
        let obj = Objective::observable(a, State::Pure(psi));
        for (al, be, la) in [(2.0, 1.0, 1.0), (1.0, -0.1, 1.0), (1.0, 1.0, 0.0)] {
            let mut cfg = config(field.clone(), 1, 1.0);
            cfg.alpha = al;
            cfg.beta = be;
            cfg.lambda = la;
            assert!(matches!(optimize(&sys, &obj, &cfg), Err(Error::Config(_))));
        }
        let bad = Operator::new(DMatrix::from_row_slice(2, 2, &[c_re(0.0), c_re(1.0), c_re(0.0), c_re(0.0)])).unwrap();
        let obj = Objective::observable(bad, State::Pure(PureState::basis(2, 0)));
        assert!(matches!(optimize(&sys, &obj, &config(field, 1, 1.0)), Err(Error::Objective(_))));
    }

    #[test]
    fn objective_increases_monotonically() {
        for carrier in ["pure", "density", "gate"] {
            let (sys, field, a, psi) = setup(9, 3, 150);
            let obj = match carrier {
                "pure" => Objective::observable(a, State::Pure(psi)),
                "density" => Objective::observable(a, State::Density(pure_to_density(&psi))),
                _ => Objective::gate(Operator::new(propagator(a.matrix(), 1.0)).unwrap()),
            };
            let out = optimize(&sys, &obj, &config(field, 30, 0.2)).unwrap();
            let js: Vec<f64> = out.log.records.iter().map(|r| r.j).collect();
            for w in js.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{carrier}: {js:?}");
            }
            assert!(js[js.len() - 1] > js[0]);
            assert_eq!(out.best_iteration, 30);
        }
    }

    #[test]
    fn fixed_point_field_is_unchanged() {
        let sys = ControlSystem::new(Operator::diag(&[0.0, 1.0]), vec![Operator::diag(&[0.5, -0.5])]).unwrap();
        let grid = TimeGrid::new(0.0, 4.0, 40).unwrap();
        let ground = State::Pure(PureState::basis(2, 0));
        let obj = Objective::state_overlap(ground.clone(), ground);
        let out = optimize(&sys, &obj, &config(ControlField::zeros(grid, 1), 1, 1.0)).unwrap();
        assert!(out.field.peak() < 1e-8);
    }

    #[test]
    fn ensemble_sums_members_and_shares_field() {
        let (sys, field, a, psi) = setup(10, 2, 60);
        let m1 = Member { system: sys.clone(), objective: Objective::observable(a.clone(), State::Pure(psi.clone())) };
        let m2 = Member { system: sys.clone(), objective: Objective::observable(a.clone(), State::Pure(PureState::basis(2, 1))) };
        let total = ensemble_figure_of_merit(&[m1.clone(), m2.clone()], &field).unwrap();
        let parts = ensemble_figure_of_merit(&[m1.clone()], &field).unwrap() + ensemble_figure_of_merit(&[m2.clone()], &field).unwrap();
        assert!((total - parts).abs() < 1e-14);
        let out = optimize_ensemble(&[m1, m2], &config(field, 10, 0.5)).unwrap();
        assert!(out.log.worst_relative_drop() <= 1e-9);
    }

    #[test]
    fn runs_are_deterministic() {
        let (sys, field, a, psi) = setup(11, 2, 50);
        let obj = Objective::observable(a, State::Pure(psi));
        let a1 = optimize(&sys, &obj, &config(field.clone(), 5, 0.5)).unwrap();
        let a2 = optimize(&sys, &obj, &config(field, 5, 0.5)).unwrap();
        assert_eq!(a1.log.records, a2.log.records);
        assert_eq!(a1.field, a2.field);
    }

    #[test]
    fn target_phase_does_not_matter() {
        let (sys, field, _, psi) = setup(12, 3, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let target = random_pure(3, &mut rng);
        let shifted = PureState::new(target.vector() * crate::scalar::cis(1.234)).unwrap();
        let j1 = objective_value(&Objective::state_overlap(State::Pure(target), State::Pure(psi.clone())), &sys, &field, 1.0).unwrap();
        let j2 = objective_value(&Objective::state_overlap(State::Pure(shifted), State::Pure(psi)), &sys, &field, 1.0).unwrap();
        assert!((j1 - j2).abs() < 1e-12);
    }
}
