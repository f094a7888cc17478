use nalgebra::{DMatrix, DVector};

use super::Operator;
use crate::error::{Error, Result};
use crate::scalar::{c, Real, C};

/// Which generalized Pauli matrix a basis element is. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum PauliLabel {
    X { r: usize, s: usize },
    Y { r: usize, s: usize },
    Z { r: usize },
}

impl std::fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::X { r, s } => write!(f, "x{r}{s}"),
            Self::Y { r, s } => write!(f, "y{r}{s}"),
            Self::Z { r } => write!(f, "z{r}"),
        }
    }
}

/// Orthonormal traceless Hermitian basis of `su(N)`.
///
/// Ordering: every `σˣ_rs` with `(r, s)` lexicographic, then every `σʸ_rs`
/// in the same order, then `σᶻ_1 … σᶻ_{N-1}`. The identity component
/// `σ₀ = I/√N` is implicit.
#[derive(Clone, Debug)]
pub struct PauliBasis<T: Real> {
    dim: usize,
    elements: Vec<Operator<T>>,
    labels: Vec<PauliLabel>,
}

/// Builds the `N² − 1` normalized generalized Pauli matrices.
pub fn build_pauli_basis<T: Real>(n: usize) -> Result<PauliBasis<T>> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "Pauli basis needs N >= 2, got {n}"
        )));
    }
    let zero = c(T::zero(), T::zero());
    let h = T::one() / T::lit(2.0).sqrt();
    let pairs: Vec<(usize, usize)> = (1..n)
        .flat_map(|r| (r + 1..=n).map(move |s| (r, s)))
        .collect();

    let mut elements = Vec::with_capacity(n * n - 1);
    let mut labels = Vec::with_capacity(n * n - 1);
    for &(r, s) in &pairs {
        let mut m = DMatrix::from_element(n, n, zero);
        m[(r - 1, s - 1)] = c(h, T::zero());
        m[(s - 1, r - 1)] = c(h, T::zero());
        elements.push(Operator::from_parts(m, true, false));
        labels.push(PauliLabel::X { r, s });
    }
    for &(r, s) in &pairs {
        // (i/√2)(−|r⟩⟨s| + |s⟩⟨r|)
        let mut m = DMatrix::from_element(n, n, zero);
        m[(r - 1, s - 1)] = c(T::zero(), -h);
        m[(s - 1, r - 1)] = c(T::zero(), h);
        elements.push(Operator::from_parts(m, true, false));
        labels.push(PauliLabel::Y { r, s });
    }
    for r in 1..n {
        let rr = T::from_usize_lossy(r);
        let norm = (T::one() / (rr + rr * rr)).sqrt();
        let mut m = DMatrix::from_element(n, n, zero);
        for k in 0..r {
            m[(k, k)] = c(norm, T::zero());
        }
        m[(r, r)] = c(-rr * norm, T::zero());
        elements.push(Operator::from_parts(m, true, false));
        labels.push(PauliLabel::Z { r });
    }
    Ok(PauliBasis {
        dim: n,
        elements,
        labels,
    })
}

impl<T: Real> PauliBasis<T> {
    /// Hilbert-space dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis elements, `N² − 1`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Operator<T>] {
        &self.elements
    }

    pub fn labels(&self) -> &[PauliLabel] {
        &self.labels
    }

    /// `Tr(σ_k a)` for every basis element, exploiting the sparsity of `σ_k`.
    pub fn coefficients(&self, a: &DMatrix<C<T>>) -> Result<Vec<C<T>>> {
        self.check(a)?;
        let h = T::one() / T::lit(2.0).sqrt();
        let i = c(T::zero(), T::one());
        let out = self
            .labels
            .iter()
            .map(|label| match *label {
                PauliLabel::X { r, s } => (a[(s - 1, r - 1)] + a[(r - 1, s - 1)]) * h,
                PauliLabel::Y { r, s } => (a[(r - 1, s - 1)] - a[(s - 1, r - 1)]) * i * h,
                PauliLabel::Z { r } => {
                    let rr = T::from_usize_lossy(r);
                    let norm = (T::one() / (rr + rr * rr)).sqrt();
                    let head = (0..r).fold(c(T::zero(), T::zero()), |acc, k| acc + a[(k, k)]);
                    (head - a[(r, r)] * rr) * norm
                }
            })
            .collect();
        Ok(out)
    }

    /// Real coordinates `Tr(σ_k a)` of a Hermitian operator.
    pub fn decompose(&self, a: &DMatrix<C<T>>) -> Result<DVector<T>> {
        let coeffs = self.coefficients(a)?;
        Ok(DVector::from_iterator(coeffs.len(), coeffs.into_iter().map(|z| z.re)))
    }

    /// `(trace/N)·I + Σ_k s_k σ_k`.
    pub fn reconstruct(&self, s: &DVector<T>, trace: T) -> Result<DMatrix<C<T>>> {
        if s.len() != self.len() {
            return Err(Error::Shape(format!(
                "coordinate vector has length {}, basis has {}",
                s.len(),
                self.len()
            )));
        }
        let n = self.dim;
        let mut m = DMatrix::identity(n, n) * c(trace / T::from_usize_lossy(n), T::zero());
        for (sk, el) in s.iter().zip(&self.elements) {
            if *sk != T::zero() {
                m += el.matrix().map(|z| z * *sk);
            }
        }
        Ok(m)
    }

    fn check(&self, a: &DMatrix<C<T>>) -> Result<()> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::Shape(format!(
                "operator is {}x{}, basis dimension is {}",
                a.nrows(),
                a.ncols(),
                self.dim
            )));
        }
        Ok(())
    }
}
