//! The three state representations (state vector, density matrix, Bloch
//! vector), explicit conversions between them, and the metrics the designers
//! use to measure progress.
//!
//! Conversions are never implicit: every function that needs a particular
//! representation says so in its signature. The Bloch vector omits the
//! constant identity coordinate `s₀ = 1/√N`; reconstruction adds `I/N` back.

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::operator::{build_pauli_basis, hermiticity_error, hs_inner, trace_product, HermitianEigen, Operator, PauliBasis};
use crate::scalar::{c, c_re, Real, C};

/// Tolerance on `|‖c‖ − 1|` accepted when constructing a state vector.
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// Purity a density matrix needs before a state vector is extracted from it.
pub const PURITY_THRESHOLD: f64 = 1.0 - 1e-6;

/// Normalized state vector `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T: Real> {
    c: DVector<C<T>>,
}

impl<T: Real> PureState<T> {
    pub fn new(c: DVector<C<T>>) -> Result<Self> {
        let dev = (c.norm().as_f64() - 1.0).abs();
        if !(dev <= NORMALIZATION_TOL) {
            return Err(Error::Normalization(dev));
        }
        Ok(Self { c })
    }

    /// Scales a nonzero vector to unit norm.
    pub fn normalized(c: DVector<C<T>>) -> Result<Self> {
        let n = c.norm();
        if n == T::zero() || !n.is_finite() {
            return Err(Error::Normalization(f64::INFINITY));
        }
        Ok(Self { c: c / c_re(n) })
    }

    /// Computational basis state `|k⟩` in dimension `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut c = DVector::zeros(n);
        c[k] = c_re(T::one());
        Self { c }
    }

    pub(crate) fn from_vector_unchecked(c: DVector<C<T>>) -> Self {
        Self { c }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn vector(&self) -> &DVector<C<T>> {
        &self.c
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> C<T> {
        self.c.dotc(&other.c)
    }
}

/// Density operator `ρ`: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    rho: DMatrix<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(rho: DMatrix<C<T>>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::Shape("density matrix must be square".into()));
        }
        let tol = T::tol(1e-10);
        let herm = hermiticity_error(&rho);
        if herm > tol {
            return Err(Error::NotHermitian(herm));
        }
        let tr = rho.trace();
        if (tr.re.as_f64() - 1.0).abs() > tol || tr.im.as_f64().abs() > tol {
            return Err(Error::Normalization((tr.re.as_f64() - 1.0).abs()));
        }
        let min_eig = HermitianEigen::new(&rho)
            .values
            .iter()
            .fold(f64::INFINITY, |m, l| m.min(l.as_f64()));
        if min_eig < -tol {
            return Err(Error::Representation(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { rho })
    }

    /// Maximally mixed state `I/N`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            rho: DMatrix::identity(n, n) * c_re(T::one() / T::from_usize_lossy(n)),
        }
    }

    pub(crate) fn from_matrix_unchecked(rho: DMatrix<C<T>>) -> Self {
        Self { rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.rho
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> T {
        hs_inner(&self.rho, &self.rho).re
    }
}

/// Real coherence vector `s_k = Tr(σ_k ρ)`, `k = 1 … N²−1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector<T: Real> {
    s: DVector<T>,
    dim: usize,
}

impl<T: Real> BlochVector<T> {
    pub fn new(s: DVector<T>, dim: usize) -> Result<Self> {
        if dim < 2 || s.len() != dim * dim - 1 {
            return Err(Error::Shape(format!(
                "Bloch vector of length {} does not fit dimension {}",
                s.len(),
                dim
            )));
        }
        Ok(Self { s, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &DVector<T> {
        &self.s
    }

    /// Radius of the physical ball, `√(1 − 1/N)`; pure states sit on it.
    pub fn max_length(dim: usize) -> T {
        (T::one() - T::one() / T::from_usize_lossy(dim)).sqrt()
    }

    /// How far outside the physical ball the vector lies (0 when inside).
    pub fn excess_length(&self) -> T {
        let e = self.s.norm() - Self::max_length(self.dim);
        if e > T::zero() {
            e
        } else {
            T::zero()
        }
    }
}

/// A quantum state in one of the three representations.
#[derive(Clone, Debug, PartialEq)]
pub enum State<T: Real> {
    Pure(PureState<T>),
    Density(DensityMatrix<T>),
    Bloch(BlochVector<T>),
}

/// Representation tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rep {
    Pure,
    Density,
    Bloch,
}

impl std::fmt::Display for Rep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rep::Pure => "pure",
            Rep::Density => "density",
            Rep::Bloch => "bloch",
        })
    }
}

impl std::str::FromStr for Rep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" => Ok(Rep::Pure),
            "density" => Ok(Rep::Density),
            "bloch" => Ok(Rep::Bloch),
            other => Err(Error::Parse(format!("unknown representation '{other}'"))),
        }
    }
}

impl<T: Real> State<T> {
    pub fn rep(&self) -> Rep {
        match self {
            State::Pure(_) => Rep::Pure,
            State::Density(_) => Rep::Density,
            State::Bloch(_) => Rep::Bloch,
        }
    }

    /// Hilbert-space dimension `N`.
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(p) => p.dim(),
            State::Density(d) => d.dim(),
            State::Bloch(b) => b.dim(),
        }
    }

    /// Converts to a density matrix. Bloch input needs the basis it was
    /// expressed in.
    pub fn to_density(&self, basis: Option<&PauliBasis<T>>) -> Result<DensityMatrix<T>> {
        match self {
            State::Pure(p) => Ok(pure_to_density(p)),
            State::Density(d) => Ok(d.clone()),
            State::Bloch(b) => match basis {
                Some(basis) => bloch_to_density(b, basis),
                None => bloch_to_density(b, &build_pauli_basis(b.dim())?),
            },
        }
    }

    /// Converts this state into the requested representation.
    pub fn convert(&self, rep: Rep, basis: &PauliBasis<T>) -> Result<State<T>> {
        Ok(match (self, rep) {
            (s, r) if s.rep() == r => s.clone(),
            (_, Rep::Density) => State::Density(self.to_density(Some(basis))?),
            (_, Rep::Bloch) => State::Bloch(density_to_bloch(&self.to_density(Some(basis))?, basis)?),
            (_, Rep::Pure) => State::Pure(density_to_pure(&self.to_density(Some(basis))?)?),
        })
    }
}

/// `ρ = c c†`.
pub fn pure_to_density<T: Real>(c: &PureState<T>) -> DensityMatrix<T> {
    let v = c.vector();
    DensityMatrix::from_matrix_unchecked(v * v.adjoint())
}

/// `s_k = Tr(σ_k ρ)` in the basis order.
pub fn density_to_bloch<T: Real>(rho: &DensityMatrix<T>, basis: &PauliBasis<T>) -> Result<BlochVector<T>> {
    let s = basis.decompose(rho.matrix())?;
    Ok(BlochVector { s, dim: basis.dim() })
}

/// `ρ = I/N + Σ_k s_k σ_k`. Vectors slightly outside the physical ball are
/// accepted with a logged warning, since numerically propagated states drift.
pub fn bloch_to_density<T: Real>(s: &BlochVector<T>, basis: &PauliBasis<T>) -> Result<DensityMatrix<T>> {
    if s.dim() != basis.dim() {
        return Err(Error::Shape(format!(
            "Bloch vector dimension {} vs basis dimension {}",
            s.dim(),
            basis.dim()
        )));
    }
    let excess = s.excess_length().as_f64();
    if excess > 1e-10 {
        log::warn!("Bloch vector lies {excess:e} outside the physical ball");
    }
    let rho = basis.reconstruct(s.coords(), T::one())?;
    Ok(DensityMatrix::from_matrix_unchecked(rho))
}

/// Dominant eigenvector of a (nearly) pure density matrix.
pub fn density_to_pure<T: Real>(rho: &DensityMatrix<T>) -> Result<PureState<T>> {
    let purity = rho.purity().as_f64();
    if purity <= PURITY_THRESHOLD {
        return Err(Error::NotPure(purity));
    }
    let eig = HermitianEigen::new(rho.matrix());
    let (k, _) = eig
        .values
        .iter()
        .enumerate()
        .fold((0, T::min_value().unwrap()), |best, (i, &l)| if l > best.1 { (i, l) } else { best });
    let mut v: DVector<C<T>> = eig.vectors.column(k).into_owned();
    // Fix the global phase so the largest component is real positive.
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, T::zero()), |best, (i, z)| if z.modulus() > best.1 { (i, z.modulus()) } else { best });
    let phase = v[imax] / c_re(v[imax].modulus());
    v /= phase;
    PureState::normalized(v)
}

fn same_dim<T: Real>(a: &State<T>, b: &State<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dimensions {} and {} differ", a.dim(), b.dim())));
    }
    Ok(())
}

/// Norm of the difference in the states' common representation: Euclidean
/// on `c` and `s`, Hilbert–Schmidt on `ρ`.
pub fn state_distance<T: Real>(a: &State<T>, b: &State<T>) -> Result<T> {
    same_dim(a, b)?;
    match (a, b) {
        (State::Pure(x), State::Pure(y)) => Ok((x.vector() - y.vector()).norm()),
        (State::Density(x), State::Density(y)) => Ok((x.matrix() - y.matrix()).norm()),
        (State::Bloch(x), State::Bloch(y)) => Ok((x.coords() - y.coords()).norm()),
        _ => Err(Error::Representation(format!(
            "cannot compare {} with {} without converting",
            a.rep(),
            b.rep()
        ))),
    }
}

/// `min_φ ‖a − e^{iφ} b‖ = √(2 − 2|⟨a|b⟩|)`.
pub fn phase_invariant_pure_distance<T: Real>(a: &PureState<T>, b: &PureState<T>) -> T {
    let two = T::lit(2.0);
    let d2 = two - two * a.overlap(b).modulus();
    if d2 > T::zero() {
        d2.sqrt()
    } else {
        T::zero()
    }
}

/// Phase-invariant distance to a pure target for any representation, through
/// the fidelity `F = ⟨ψ_d|ρ|ψ_d⟩`: `√(2 − 2√F)`. Agrees with
/// [`phase_invariant_pure_distance`] on pure states.
pub fn distance_to_pure_target<T: Real>(state: &State<T>, target: &PureState<T>) -> Result<T> {
    let f = fidelity_to_pure(state, target)?;
    let two = T::lit(2.0);
    let d2 = two - two * f.max(T::zero()).sqrt();
    Ok(if d2 > T::zero() { d2.sqrt() } else { T::zero() })
}

/// `|⟨ψ_d|c⟩|²` or `⟨ψ_d|ρ|ψ_d⟩`.
pub fn fidelity_to_pure<T: Real>(state: &State<T>, target: &PureState<T>) -> Result<T> {
    if state.dim() != target.dim() {
        return Err(Error::Shape("target dimension mismatch".into()));
    }
    Ok(match state {
        State::Pure(p) => target.overlap(p).norm_sqr(),
        other => {
            let rho = other.to_density(None)?;
            let t = target.vector();
            t.dotc(&(rho.matrix() * t)).re
        }
    })
}

/// `Tr(Aρ)` (or `⟨c|A|c⟩`) for a Hermitian observable.
pub fn observable_expectation<T: Real>(a: &Operator<T>, state: &State<T>) -> Result<T> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian(hermiticity_error(a.matrix())));
    }
    if a.dim() != state.dim() {
        return Err(Error::Shape(format!(
            "observable dimension {} vs state dimension {}",
            a.dim(),
            state.dim()
        )));
    }
    Ok(match state {
        State::Pure(p) => p.vector().dotc(&(a.matrix() * p.vector())).re,
        State::Density(d) => trace_product(a.matrix(), d.matrix()).re,
        State::Bloch(b) => {
            let basis = build_pauli_basis(b.dim())?;
            let av = basis.decompose(a.matrix())?;
            av.dot(b.coords()) + a.trace().re / T::from_usize_lossy(b.dim())
        }
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "rep", rename_all = "lowercase")]
enum StateRecord {
    Pure { dim: usize, re: Vec<f64>, im: Vec<f64> },
    Density { dim: usize, re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
    Bloch { dim: usize, s: Vec<f64> },
}

impl<T: Real> Serialize for State<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rec = match self {
            State::Pure(p) => StateRecord::Pure {
                dim: p.dim(),
                re: p.vector().iter().map(|z| z.re.as_f64()).collect(),
                im: p.vector().iter().map(|z| z.im.as_f64()).collect(),
            },
            State::Density(d) => {
                let n = d.dim();
                let m = d.matrix();
                StateRecord::Density {
                    dim: n,
                    re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re.as_f64()).collect()).collect(),
                    im: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im.as_f64()).collect()).collect(),
                }
            }
            State::Bloch(b) => StateRecord::Bloch {
                dim: b.dim(),
                s: b.coords().iter().map(|x| x.as_f64()).collect(),
            },
        };
        rec.serialize(ser)
    }
}

impl<'de, T: Real> Deserialize<'de> for State<T> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = StateRecord::deserialize(de)?;
        let st = match rec {
            StateRecord::Pure { dim, re, im } => {
                if re.len() != dim || im.len() != dim {
                    return Err(D::Error::custom("pure state length mismatch"));
                }
                let v = DVector::from_iterator(dim, re.iter().zip(&im).map(|(a, b)| c(T::lit(*a), T::lit(*b))));
                PureState::new(v).map(State::Pure)
            }
            StateRecord::Density { dim, re, im } => {
                if re.len() != dim || im.len() != dim || re.iter().chain(&im).any(|r| r.len() != dim) {
                    return Err(D::Error::custom("density matrix shape mismatch"));
                }
                let m = DMatrix::from_fn(dim, dim, |i, j| c(T::lit(re[i][j]), T::lit(im[i][j])));
                DensityMatrix::new(m).map(State::Density)
            }
            StateRecord::Bloch { dim, s } => {
                BlochVector::new(DVector::from_iterator(s.len(), s.iter().map(|x| T::lit(*x))), dim).map(State::Bloch)
            }
        };
        st.map_err(D::Error::custom)
    }
}
