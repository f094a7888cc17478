//! Dense complex operators, the bilinear control model, and the algebra
//! built on top of them (generalized Pauli basis, adjoint representation,
//! exponentials, Lie-algebra rank).

mod basis;
mod expm;
mod lie;

pub use basis::{build_pauli_basis, PauliBasis, PauliLabel};
pub use expm::{matrix_exponential, propagator, HermitianEigen, StepPropagator};
pub use lie::{adjoint_representation, dynamical_lie_algebra_dim, LieAlgebraDim};

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{c, c_re, Real, C};

/// Hermiticity tolerance used when setting the flag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unitarity tolerance used when setting the flag.
pub const UNITARY_TOL: f64 = 1e-10;

/// Complex square matrix, tagged with the structural properties that were
/// verified at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T: Real> {
    m: DMatrix<C<T>>,
    hermitian: bool,
    unitary: bool,
}

impl<T: Real> Operator<T> {
    /// Wraps a square matrix, detecting the Hermitian and unitary flags.
    pub fn new(m: DMatrix<C<T>>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidDimension("operator of dimension 0".into()));
        }
        let hermitian = hermiticity_error(&m) < T::tol(HERMITIAN_TOL);
        let unitary = unitarity_error(&m) < T::tol(UNITARY_TOL);
        Ok(Self {
            m,
            hermitian,
            unitary,
        })
    }

    /// Like [`Operator::new`] but fails unless the matrix is Hermitian.
    pub fn hermitian(m: DMatrix<C<T>>) -> Result<Self> {
        let dev = if m.is_square() {
            hermiticity_error(&m)
        } else {
            f64::INFINITY
        };
        let op = Self::new(m)?;
        if !op.hermitian {
            return Err(Error::NotHermitian(dev));
        }
        Ok(op)
    }

    pub(crate) fn from_parts(m: DMatrix<C<T>>, hermitian: bool, unitary: bool) -> Self {
        Self {
            m,
            hermitian,
            unitary,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts(DMatrix::identity(n, n), true, true)
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_parts(DMatrix::zeros(n, n), true, false)
    }

    /// Real diagonal operator.
    pub fn diag(entries: &[T]) -> Self {
        let v = DVector::from_iterator(entries.len(), entries.iter().map(|&x| c_re(x)));
        Self::from_parts(DMatrix::from_diagonal(&v), true, is_unit_diag(entries))
    }

    /// Builds an operator from row-major real and imaginary parts.
    pub fn from_rows(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let n = re.len();
        if im.len() != n || re.iter().chain(im.iter()).any(|r| r.len() != n) {
            return Err(Error::Shape("re/im must both be square and equal in size".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| c(T::lit(re[i][j]), T::lit(im[i][j])));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.m
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn dagger(&self) -> Self {
        Self::from_parts(self.m.adjoint(), self.hermitian, self.unitary)
    }

    pub fn trace(&self) -> C<T> {
        self.m.trace()
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> DMatrix<C<T>> {
        commutator(&self.m, &other.m)
    }

    /// Hilbert–Schmidt inner product `Tr(self† other)`.
    pub fn inner(&self, other: &Self) -> C<T> {
        hs_inner(&self.m, &other.m)
    }

    pub fn scale(&self, a: T) -> Self {
        Self::from_parts(self.m.map(|z| z * a), self.hermitian, false)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_parts(
            self.m.kronecker(&other.m),
            self.hermitian && other.hermitian,
            self.unitary && other.unitary,
        )
    }

    /// Block-diagonal direct sum of operators.
    pub fn direct_sum(blocks: &[Self]) -> Self {
        let n: usize = blocks.iter().map(Self::dim).sum();
        let mut m = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            let d = b.dim();
            m.view_mut((off, off), (d, d)).copy_from(&b.m);
            off += d;
        }
        Self::from_parts(
            m,
            blocks.iter().all(|b| b.hermitian),
            blocks.iter().all(|b| b.unitary),
        )
    }

    /// Max entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.m, &other.m)
    }
}

/// Max entrywise modulus of `a − a†`.
pub fn hermiticity_error<T: Real>(a: &DMatrix<C<T>>) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// Max entrywise modulus of `a·a† − I`.
pub fn unitarity_error<T: Real>(a: &DMatrix<C<T>>) -> f64 {
    let n = a.nrows();
    max_abs_diff(&(a * a.adjoint()), &DMatrix::identity(n, n))
}

pub fn max_abs_diff<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).modulus().as_f64())
        .fold(0.0, f64::max)
}

pub fn commutator<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    a * b - b * a
}

/// `Tr(a† b)` without forming the product.
pub fn hs_inner<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> C<T> {
    a.iter()
        .zip(b.iter())
        .fold(C::<T>::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// `Tr(a b)` without forming the product.
pub fn trace_product<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> C<T> {
    let n = a.nrows();
    let mut acc = C::<T>::new(T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn is_unit_diag<T: Real>(entries: &[T]) -> bool {
    entries
        .iter()
        .all(|&x| (x.abs() - T::one()).abs().as_f64() < T::tol(UNITARY_TOL))
}

/// Drift plus control operators of a control-linear Hamiltonian
/// `H[f] = H₀ + Σ_m f_m H_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSystem<T: Real> {
    drift: Operator<T>,
    controls: Vec<Operator<T>>,
}

impl<T: Real> ControlSystem<T> {
    pub fn new(drift: Operator<T>, controls: Vec<Operator<T>>) -> Result<Self> {
        let n = drift.dim();
        if !drift.is_hermitian() {
            return Err(Error::NotHermitian(hermiticity_error(drift.matrix())));
        }
        for (m, h) in controls.iter().enumerate() {
            if h.dim() != n {
                return Err(Error::Shape(format!(
                    "control {} has dimension {}, drift has {}",
                    m + 1,
                    h.dim(),
                    n
                )));
            }
            if !h.is_hermitian() {
                return Err(Error::NotHermitian(hermiticity_error(h.matrix())));
            }
        }
        Ok(Self { drift, controls })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn drift(&self) -> &Operator<T> {
        &self.drift
    }

    pub fn controls(&self) -> &[Operator<T>] {
        &self.controls
    }

    pub fn channel_count(&self) -> usize {
        self.controls.len()
    }

    /// `H₀ + Σ_m fields[m]·H_m`.
    pub fn hamiltonian(&self, fields: &[T]) -> DMatrix<C<T>> {
        debug_assert_eq!(fields.len(), self.controls.len());
        let mut h = self.drift.matrix().clone();
        for (f, hm) in fields.iter().zip(&self.controls) {
            if *f != T::zero() {
                h += hm.matrix().map(|z| z * *f);
            }
        }
        h
    }

    /// Same system with every control operator replaced by zero.
    pub fn without_controls(&self) -> Self {
        let n = self.dim();
        Self {
            drift: self.drift.clone(),
            controls: vec![Operator::zeros(n); self.controls.len()],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorRecord {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl<T: Real> Serialize for Operator<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let rows = |f: &dyn Fn(&C<T>) -> T| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| (0..n).map(|j| f(&self.m[(i, j)]).as_f64()).collect())
                .collect()
        };
        OperatorRecord {
            dim: n,
            re: rows(&|z| z.re),
            im: rows(&|z| z.im),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Operator<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = OperatorRecord::deserialize(d)?;
        if rec.re.len() != rec.dim {
            return Err(serde::de::Error::custom(format!(
                "dim {} does not match {} rows",
                rec.dim,
                rec.re.len()
            )));
        }
        Self::from_rows(&rec.re, &rec.im).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ControlSystemRecord<T: Real> {
    dim: usize,
    drift: Operator<T>,
    controls: Vec<Operator<T>>,
}

impl<T: Real> Serialize for ControlSystem<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ControlSystemRecord {
            dim: self.dim(),
            drift: self.drift.clone(),
            controls: self.controls.clone(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for ControlSystem<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = ControlSystemRecord::<T>::deserialize(d)?;
        if rec.drift.dim() != rec.dim {
            return Err(serde::de::Error::custom("drift dimension mismatch"));
        }
        Self::new(rec.drift, rec.controls).map_err(serde::de::Error::custom)
    }
}

/// Conventional (unnormalized) Pauli matrices and the qubit ladder basis,
/// used to write down model Hamiltonians.
pub mod pauli {
    use super::Operator;
    use crate::scalar::{c, Real};
    use nalgebra::DMatrix;

    pub fn x<T: Real>() -> Operator<T> {
        let (o, l) = (T::zero(), T::one());
        Operator::from_parts(
            DMatrix::from_row_slice(2, 2, &[c(o, o), c(l, o), c(l, o), c(o, o)]),
            true,
            true,
        )
    }

    pub fn y<T: Real>() -> Operator<T> {
        let (o, l) = (T::zero(), T::one());
        Operator::from_parts(
            DMatrix::from_row_slice(2, 2, &[c(o, o), c(o, -l), c(o, l), c(o, o)]),
            true,
            true,
        )
    }

    pub fn z<T: Real>() -> Operator<T> {
        Operator::diag(&[T::one(), -T::one()])
    }
}
