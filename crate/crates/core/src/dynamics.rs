//! Time grids, piecewise-constant control fields and exact step-wise
//! propagation of states and unitaries.
//!
//! Interval `k` spans `[t_k, t_{k+1})` and carries the field sample stored at
//! its left endpoint, so the step propagator `exp(−i H[f_k] dt)` is exact for
//! the stored field.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{adjoint_representation, build_pauli_basis, propagator, ControlSystem, HermitianEigen, Operator, PauliBasis};
use crate::scalar::{c, c_re, cis, Real, C};
use crate::state::{BlochVector, DensityMatrix, PureState, Rep, State};

/// Uniform grid `t_k = t0 + k·dt`, `k = 0 … steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    t0: T,
    tf: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, tf: T, steps: usize) -> Result<Self> {
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::Config(format!("time grid needs tF > t0 (got {} .. {})", t0.as_f64(), tf.as_f64())));
        }
        if steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        Ok(Self { t0, tf, steps })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn tf(&self) -> T {
        self.tf
    }

    /// Number of intervals `Nt`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn duration(&self) -> T {
        self.tf - self.t0
    }

    pub fn dt(&self) -> T {
        (self.tf - self.t0) / T::from_usize_lossy(self.steps)
    }

    /// `t_k`; `k` may run up to `steps` inclusive.
    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize_lossy(k) * self.dt()
    }

    /// Left endpoints `t_0 … t_{Nt−1}`.
    pub fn sample_times(&self) -> Vec<T> {
        (0..self.steps).map(|k| self.time(k)).collect()
    }

    /// All `Nt + 1` grid points.
    pub fn points(&self) -> Vec<T> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// `M` real channels sampled on the left endpoints of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlField<T: Real> {
    grid: TimeGrid<T>,
    samples: Vec<Vec<T>>,
}

impl<T: Real> ControlField<T> {
    pub fn new(grid: TimeGrid<T>, samples: Vec<Vec<T>>) -> Result<Self> {
        for (m, ch) in samples.iter().enumerate() {
            if ch.len() != grid.steps() {
                return Err(Error::Shape(format!(
                    "channel {} has {} samples, grid has {} intervals",
                    m + 1,
                    ch.len(),
                    grid.steps()
                )));
            }
            if let Some(k) = ch.iter().position(|x| !x.is_finite()) {
                return Err(Error::Config(format!("channel {} sample {} is not finite", m + 1, k)));
            }
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TimeGrid<T>, channels: usize) -> Self {
        Self { grid, samples: vec![vec![T::zero(); grid.steps()]; channels] }
    }

    /// Samples `g(m, t_k)` for every channel `m`.
    pub fn from_fn(grid: TimeGrid<T>, channels: usize, mut g: impl FnMut(usize, T) -> T) -> Result<Self> {
        let samples = (0..channels)
            .map(|m| grid.sample_times().into_iter().map(|t| g(m, t)).collect())
            .collect();
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    pub fn channel(&self, m: usize) -> &[T] {
        &self.samples[m]
    }

    pub fn samples(&self) -> &[Vec<T>] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.samples
    }

    /// Field values of all channels on interval `k`.
    pub fn at(&self, k: usize) -> Vec<T> {
        self.samples.iter().map(|ch| ch[k]).collect()
    }

    /// Largest `|f_m(t_k)|` over all channels and intervals.
    pub fn peak(&self) -> T {
        self.samples.iter().flatten().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|ch| ch.iter().map(|x| *x * a).collect()).collect(),
        }
    }

    /// Pointwise sum; grids and channel counts must agree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.channels() != other.channels() {
            return Err(Error::Shape("fields live on different grids or channel counts".into()));
        }
        Ok(Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x + *y).collect())
                .collect(),
        })
    }

    fn check_against(&self, system: &ControlSystem<T>) -> Result<()> {
        if self.channels() != system.channel_count() {
            return Err(Error::Shape(format!(
                "field has {} channels, system has {} controls",
                self.channels(),
                system.channel_count()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// States at every grid point, indexed by time regardless of direction.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub grid: TimeGrid<T>,
    pub rep: Rep,
    pub states: Vec<State<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn initial(&self) -> &State<T> {
        &self.states[0]
    }

    pub fn last(&self) -> &State<T> {
        &self.states[self.states.len() - 1]
    }

    pub fn times(&self) -> Vec<T> {
        self.grid.points()
    }
}

/// Propagators `U(t_k)` with `U(t0) = I`.
#[derive(Clone, Debug)]
pub struct UnitaryTrajectory<T: Real> {
    pub grid: TimeGrid<T>,
    pub unitaries: Vec<Operator<T>>,
}

impl<T: Real> UnitaryTrajectory<T> {
    pub fn last(&self) -> &Operator<T> {
        &self.unitaries[self.unitaries.len() - 1]
    }
}

/// Superoperator acting on column-stacked density matrices, added to the
/// coherent Liouvillian `−i[H, ·]`.
pub trait Dissipator<T: Real>: Send + Sync {
    /// `N² × N²` matrix in the column-stacking convention.
    fn superoperator(&self, dim: usize) -> DMatrix<C<T>>;
}

/// Optional non-Hamiltonian terms of the equation of motion.
#[derive(Default)]
pub struct Evolution<'a, T: Real> {
    pub dissipator: Option<&'a dyn Dissipator<T>>,
    /// Inhomogeneous Bloch term `b` in `ṡ = A s + b`.
    pub affine: Option<DVector<T>>,
}

/// Propagates `initial` under `field`. A backward run treats `initial` as
/// the state at `tF` and applies the adjoint steps in reverse order.
pub fn propagate<T: Real>(
    system: &ControlSystem<T>,
    field: &ControlField<T>,
    initial: &State<T>,
    direction: Direction,
) -> Result<Trajectory<T>> {
    propagate_with(system, field, initial, direction, &Evolution::default())
}

pub fn propagate_with<T: Real>(
    system: &ControlSystem<T>,
    field: &ControlField<T>,
    initial: &State<T>,
    direction: Direction,
    evolution: &Evolution<'_, T>,
) -> Result<Trajectory<T>> {
    field.check_against(system)?;
    if initial.dim() != system.dim() {
        return Err(Error::Shape(format!(
            "state dimension {} vs system dimension {}",
            initial.dim(),
            system.dim()
        )));
    }
    if evolution.affine.is_some() {
        return Err(Error::NotImplemented("affine Bloch term".into()));
    }
    if let Some(d) = evolution.dissipator {
        return propagate_dissipative(system, field, initial, direction, d);
    }
    let grid = *field.grid();
    let dt = grid.dt();
    let n = grid.steps();
    let basis = match initial {
        State::Bloch(_) => Some(build_pauli_basis(system.dim())?),
        _ => None,
    };
    let mut cache = StepCache::default();
    let mut states: Vec<Option<State<T>>> = vec![None; n + 1];
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..n).collect(),
        Direction::Backward => (0..n).rev().collect(),
    };
    let (start, _) = match direction {
        Direction::Forward => (0, n),
        Direction::Backward => (n, 0),
    };
    let mut cur = initial.clone();
    states[start] = Some(cur.clone());
    for k in order {
        let f = field.at(k);
        let next = match &cur {
            State::Pure(p) => {
                let u = cache.unitary(system, &f, dt);
                let v = match direction {
                    Direction::Forward => u * p.vector(),
                    Direction::Backward => u.ad_mul(p.vector()),
                };
                State::Pure(PureState::from_vector_unchecked(v))
            }
            State::Density(d) => {
                let u = cache.unitary(system, &f, dt);
                let m = match direction {
                    Direction::Forward => u * d.matrix() * u.adjoint(),
                    Direction::Backward => u.adjoint() * d.matrix() * u,
                };
                State::Density(DensityMatrix::from_matrix_unchecked(m))
            }
            State::Bloch(b) => {
                let r = cache.orthogonal(system, &f, dt, basis.as_ref().unwrap())?;
                let s = match direction {
                    Direction::Forward => r * b.coords(),
                    Direction::Backward => r.tr_mul(b.coords()),
                };
                State::Bloch(BlochVector::new(s, b.dim())?)
            }
        };
        let idx = match direction {
            Direction::Forward => k + 1,
            Direction::Backward => k,
        };
        states[idx] = Some(next.clone());
        cur = next;
    }
    Ok(Trajectory {
        grid,
        rep: initial.rep(),
        states: states.into_iter().map(Option::unwrap).collect(),
    })
}

/// `U(t_{k+1}) = exp(−iH[f_k]dt)·U(t_k)` from `U(t0) = I`.
pub fn propagate_unitary<T: Real>(system: &ControlSystem<T>, field: &ControlField<T>) -> Result<UnitaryTrajectory<T>> {
    field.check_against(system)?;
    let grid = *field.grid();
    let dt = grid.dt();
    let mut cache = StepCache::default();
    let mut u = DMatrix::identity(system.dim(), system.dim());
    let mut unitaries = Vec::with_capacity(grid.steps() + 1);
    unitaries.push(Operator::from_parts(u.clone(), true, true));
    for k in 0..grid.steps() {
        u = cache.unitary(system, &field.at(k), dt) * u;
        unitaries.push(Operator::from_parts(u.clone(), false, true));
    }
    Ok(UnitaryTrajectory { grid, unitaries })
}

/// Final unitary only, without storing the path.
pub fn final_unitary<T: Real>(system: &ControlSystem<T>, field: &ControlField<T>) -> Result<DMatrix<C<T>>> {
    field.check_against(system)?;
    let dt = field.grid().dt();
    let mut cache = StepCache::default();
    let mut u = DMatrix::identity(system.dim(), system.dim());
    for k in 0..field.grid().steps() {
        u = cache.unitary(system, &field.at(k), dt) * u;
    }
    Ok(u)
}

/// One forward step of `state` under the constant field `f`, with the same
/// numerics as [`propagate`]. Bloch states need the basis.
pub fn step_state<T: Real>(
    system: &ControlSystem<T>,
    state: &State<T>,
    f: &[T],
    dt: T,
    basis: Option<&PauliBasis<T>>,
) -> Result<State<T>> {
    let mut cache = StepCache::default();
    Ok(match state {
        State::Pure(p) => State::Pure(PureState::from_vector_unchecked(cache.unitary(system, f, dt) * p.vector())),
        State::Density(d) => {
            let u = cache.unitary(system, f, dt);
            State::Density(DensityMatrix::from_matrix_unchecked(u * d.matrix() * u.adjoint()))
        }
        State::Bloch(b) => {
            let basis = basis.ok_or_else(|| Error::Representation("Bloch step needs a basis".into()))?;
            State::Bloch(BlochVector::new(cache.orthogonal(system, f, dt, basis)? * b.coords(), b.dim())?)
        }
    })
}

/// Maps the state at time `t` by `exp(+i G t)`.
pub fn to_rotating_frame<T: Real>(traj: &Trajectory<T>, frame_generator: &Operator<T>) -> Result<Trajectory<T>> {
    if !frame_generator.is_hermitian() {
        return Err(Error::NotHermitian(crate::operator::hermiticity_error(frame_generator.matrix())));
    }
    if traj.states.first().map(|s| s.dim()) != Some(frame_generator.dim()) {
        return Err(Error::Shape("frame generator dimension mismatch".into()));
    }
    let eig = HermitianEigen::new(frame_generator.matrix());
    let states = traj
        .states
        .iter()
        .zip(traj.grid.points())
        .map(|(s, t)| {
            let w = eig.map(|l| cis(l * t));
            Ok(match s {
                State::Pure(p) => State::Pure(PureState::from_vector_unchecked(&w * p.vector())),
                State::Density(d) => State::Density(DensityMatrix::from_matrix_unchecked(&w * d.matrix() * w.adjoint())),
                State::Bloch(_) => {
                    return Err(Error::Representation(
                        "rotating-frame transform needs a pure or density trajectory".into(),
                    ))
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { grid: traj.grid, rep: traj.rep, states })
}

/// `exp(A dt)` for a real antisymmetric generator, through the Hermitian
/// matrix `iA`.
pub fn bloch_step_matrix<T: Real>(a: &DMatrix<T>, dt: T) -> DMatrix<T> {
    let ia = a.map(|x| c(T::zero(), x));
    propagator(&ia, dt).map(|z| z.re)
}

/// Reuses the last step propagator while the field value is unchanged.
#[derive(Default)]
struct StepCache<T: Real> {
    key: Option<Vec<T>>,
    u: Option<DMatrix<C<T>>>,
    r: Option<DMatrix<T>>,
}

impl<T: Real> StepCache<T> {
    fn refresh(&mut self, f: &[T]) {
        if self.key.as_deref() != Some(f) {
            self.key = Some(f.to_vec());
            self.u = None;
            self.r = None;
        }
    }

    fn unitary(&mut self, system: &ControlSystem<T>, f: &[T], dt: T) -> &DMatrix<C<T>> {
        self.refresh(f);
        self.u.get_or_insert_with(|| propagator(&system.hamiltonian(f), dt))
    }

    fn orthogonal(&mut self, system: &ControlSystem<T>, f: &[T], dt: T, basis: &PauliBasis<T>) -> Result<&DMatrix<T>> {
        self.refresh(f);
        if self.r.is_none() {
            let h = Operator::from_parts(system.hamiltonian(f), true, false);
            let a = adjoint_representation(&h, basis)?;
            self.r = Some(bloch_step_matrix(&a, dt));
        }
        Ok(self.r.as_ref().unwrap())
    }
}

fn propagate_dissipative<T: Real>(
    system: &ControlSystem<T>,
    field: &ControlField<T>,
    initial: &State<T>,
    direction: Direction,
    dissipator: &dyn Dissipator<T>,
) -> Result<Trajectory<T>> {
    let State::Density(rho0) = initial else {
        return Err(Error::Representation("dissipative evolution needs a density matrix".into()));
    };
    if direction == Direction::Backward {
        return Err(Error::NotImplemented("backward dissipative propagation".into()));
    }
    let n = system.dim();
    let d = dissipator.superoperator(n);
    if d.shape() != (n * n, n * n) {
        return Err(Error::Shape(format!("dissipator must be {0}x{0}", n * n)));
    }
    let grid = *field.grid();
    let dt = c_re(grid.dt());
    let id = DMatrix::<C<T>>::identity(n, n);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut vec_rho = DVector::from_column_slice(rho0.matrix().as_slice());
    states.push(initial.clone());
    for k in 0..grid.steps() {
        let h = system.hamiltonian(&field.at(k));
        let coherent = (id.kronecker(&h) - h.transpose().kronecker(&id)) * c(T::zero(), -T::one());
        let step = ((coherent + &d) * dt).exp();
        vec_rho = step * vec_rho;
        let m = DMatrix::from_column_slice(n, n, vec_rho.as_slice());
        states.push(State::Density(DensityMatrix::from_matrix_unchecked(m)));
    }
    Ok(Trajectory { grid, rep: Rep::Density, states })
}
