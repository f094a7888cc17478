use nalgebra::{DMatrix, DVector, SVD};

use super::{commutator, ControlSystem, Operator, PauliBasis};
use crate::error::{Error, Result};
use crate::scalar::{c, Real, C};

/// Real matrix of `ad_H` in the given basis: `A_jk = Tr(σ_j·(−i)[H, σ_k])`.
///
/// For Hermitian `H` the result is antisymmetric; it generates the Bloch
/// equation `ṡ = A s`.
pub fn adjoint_representation<T: Real>(h: &Operator<T>, basis: &PauliBasis<T>) -> Result<DMatrix<T>> {
    if h.dim() != basis.dim() {
        return Err(Error::Shape(format!(
            "operator dimension {} vs basis dimension {}",
            h.dim(),
            basis.dim()
        )));
    }
    let n = basis.len();
    let mi = c(T::zero(), -T::one());
    let mut a = DMatrix::zeros(n, n);
    for (k, sk) in basis.elements().iter().enumerate() {
        let image = commutator(h.matrix(), sk.matrix()) * mi;
        for (j, z) in basis.coefficients(&image)?.into_iter().enumerate() {
            a[(j, k)] = z.re;
        }
    }
    Ok(a)
}

/// Outcome of the commutator-closure rank test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct LieAlgebraDim {
    /// Dimension found (a lower bound when `closed` is false).
    pub dimension: usize,
    /// True when closure was reached before `max_depth`.
    pub closed: bool,
    /// Number of bracket levels explored.
    pub depth: usize,
}

const RANK_THRESHOLD: f64 = 1e-10;

/// Dimension of the real Lie algebra generated by `{−iH₀, −iH_m}`.
///
/// Generators are projected onto their traceless part first, so the result
/// is the dimension inside `su(N)` (a trivially-commuting identity component
/// is not counted). Brackets are formed level by level with the original
/// generators; a candidate is kept when it raises the numerical rank
/// (singular values above `1e-10`) of the collected set.
pub fn dynamical_lie_algebra_dim<T: Real>(system: &ControlSystem<T>, max_depth: usize) -> LieAlgebraDim {
    let n = system.dim();
    let mi = c(T::zero(), -T::one());
    let generators: Vec<DMatrix<C<T>>> = std::iter::once(system.drift())
        .chain(system.controls())
        .map(|h| traceless(&(h.matrix() * mi)))
        .collect();

    let mut span: Vec<DVector<T>> = Vec::new();
    let mut frontier: Vec<DMatrix<C<T>>> = Vec::new();
    for g in &generators {
        if try_extend(&mut span, g) {
            frontier.push(g.clone());
        }
    }
    let full = n * n - 1;
    let mut depth = 0;
    while !frontier.is_empty() && span.len() < full && depth < max_depth {
        depth += 1;
        let mut next = Vec::new();
        for x in &frontier {
            for g in &generators {
                let cand = commutator(g, x);
                if try_extend(&mut span, &cand) {
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    LieAlgebraDim {
        dimension: span.len(),
        closed: frontier.is_empty() || span.len() == full,
        depth,
    }
}

fn traceless<T: Real>(a: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let n = a.nrows();
    let shift = a.trace() / c(T::from_usize_lossy(n), T::zero());
    a - DMatrix::identity(n, n) * shift
}

fn try_extend<T: Real>(span: &mut Vec<DVector<T>>, m: &DMatrix<C<T>>) -> bool {
    let v = DVector::from_iterator(2 * m.len(), m.iter().flat_map(|z| [z.re, z.im]));
    let norm = v.norm();
    if norm.as_f64() < RANK_THRESHOLD {
        return false;
    }
    let v = v / norm;
    let mut cols = span.clone();
    cols.push(v.clone());
    let stacked = DMatrix::from_columns(&cols);
    let rank = SVD::new(stacked, false, false)
        .singular_values
        .iter()
        .filter(|s| s.as_f64() > RANK_THRESHOLD)
        .count();
    if rank > span.len() {
        span.push(v);
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_pauli_basis, pauli, trace_product};
    use crate::scalar::c_re;

    #[test]
    fn zero_hamiltonian_gives_zero_generator() {
        let b = build_pauli_basis::<f64>(3).unwrap();
        let a = adjoint_representation(&Operator::zeros(3), &b).unwrap();
        assert!(a.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn qubit_sigma_z_rotates_xy_plane() {
        let b = build_pauli_basis::<f64>(2).unwrap();
        let h = b.elements()[2].clone();
        let a = adjoint_representation(&h, &b).unwrap();
        // Independent loop over the defining trace.
        for j in 0..3 {
            for k in 0..3 {
                let comm = commutator(h.matrix(), b.elements()[k].matrix()) * c(0.0, -1.0);
                let brute = trace_product(b.elements()[j].matrix(), &comm);
                assert!((brute.re - a[(j, k)]).abs() < 1e-14 && brute.im.abs() < 1e-14);
            }
        }
        let r = 2f64.sqrt();
        assert!((a[(1, 0)] - r).abs() < 1e-14);
        assert!((a[(0, 1)] + r).abs() < 1e-14);
        assert!(a[(2, 2)].abs() < 1e-14 && a[(0, 2)].abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let b = build_pauli_basis::<f64>(3).unwrap();
        assert!(matches!(
            adjoint_representation(&pauli::x(), &b),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_qubit_generates_su2() {
        let sys = ControlSystem::new(Operator::<f64>::diag(&[0.0, 1.0]), vec![pauli::x()]).unwrap();
        let d = dynamical_lie_algebra_dim(&sys, 10);
        assert_eq!(d.dimension, 3);
        assert!(d.closed);
    }

    #[test]
    fn drift_only_is_one_dimensional() {
        let sys = ControlSystem::new(Operator::<f64>::diag(&[0.0, 1.0, 3.0]), vec![]).unwrap();
        assert_eq!(dynamical_lie_algebra_dim(&sys, 10).dimension, 1);
    }

    #[test]
    fn depth_limit_reports_lower_bound() {
        let sys = ControlSystem::new(Operator::<f64>::diag(&[0.0, 1.0, 2.5]), vec![{
            let m = DMatrix::from_fn(3, 3, |i, j| if i + 1 == j || j + 1 == i { c_re(1.0) } else { c_re(0.0) });
            Operator::new(m).unwrap()
        }])
        .unwrap();
        let shallow = dynamical_lie_algebra_dim(&sys, 1);
        assert!(!shallow.closed);
        let deep = dynamical_lie_algebra_dim(&sys, 20);
        assert!(deep.closed);
        assert!(shallow.dimension < deep.dimension);
        assert_eq!(deep.dimension, 8);
    }
}
