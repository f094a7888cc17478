use nalgebra::{ComplexField, DMatrix, SymmetricEigen};

use super::{hermiticity_error, Operator, HERMITIAN_TOL};
use crate::error::{Error, Result};
use crate::scalar::{c, cis, Real, C};

/// Spectral decomposition `H = V·diag(values)·V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: DMatrix<C<T>>,
}

impl<T: Real> HermitianEigen<T> {
    /// Only the lower triangle of `h` is read on the general path; callers are
    /// responsible for passing a Hermitian matrix.
    pub fn new(h: &DMatrix<C<T>>) -> Self {
        if h.nrows() == 2 {
            return Self::two_level(h);
        }
        let eig = SymmetricEigen::new(h.clone());
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    fn two_level(h: &DMatrix<C<T>>) -> Self {
        let a = h[(0, 0)].re;
        let d = h[(1, 1)].re;
        let b = h[(0, 1)];
        let two = T::lit(2.0);
        let mean = (a + d) / two;
        let half = (a - d) / two;
        let bn = b.modulus();
        let r = (half * half + bn * bn).sqrt();
        let zero = c(T::zero(), T::zero());
        let one = c(T::one(), T::zero());
        if bn <= T::default_epsilon() * (T::one() + r) {
            let (v0, v1) = if a <= d {
                ([one, zero], [zero, one])
            } else {
                ([zero, one], [one, zero])
            };
            return Self {
                values: vec![a.min(d), a.max(d)],
                vectors: DMatrix::from_row_slice(2, 2, &[v0[0], v1[0], v0[1], v1[1]]),
            };
        }
        // (H − λ)v = 0 solved two ways; keep the better-conditioned one.
        let vec_for = |lam: T| -> [C<T>; 2] {
            let p = [b, c(lam - a, T::zero())];
            let q = [c(lam - d, T::zero()), b.conj()];
            let np = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt();
            let nq = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
            if np >= nq {
                [p[0] / np, p[1] / np]
            } else {
                [q[0] / nq, q[1] / nq]
            }
        };
        let lo = mean - r;
        let hi = mean + r;
        let v0 = vec_for(lo);
        let v1 = vec_for(hi);
        Self {
            values: vec![lo, hi],
            vectors: DMatrix::from_row_slice(2, 2, &[v0[0], v1[0], v0[1], v1[1]]),
        }
    }

    /// `V·diag(g(λ))·V†`.
    pub fn map(&self, g: impl Fn(T) -> C<T>) -> DMatrix<C<T>> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let gj = g(self.values[j]);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= gj);
        }
        scaled * self.vectors.adjoint()
    }
}

/// `exp(a)` for a complex square matrix.
///
/// Hermitian and skew-Hermitian inputs go through an eigendecomposition, which
/// keeps the result exactly unitary in the skew-Hermitian case; anything else
/// falls back to Padé scaling and squaring.
pub fn matrix_exponential<T: Real>(a: &DMatrix<C<T>>) -> Result<Operator<T>> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "matrix exponential of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = 1.0 + a.iter().map(|z| z.modulus().as_f64()).fold(0.0, f64::max);
    let tol = T::tol(HERMITIAN_TOL) * scale;
    if hermiticity_error(a) < tol {
        let eig = HermitianEigen::new(a);
        return Ok(Operator::from_parts(eig.map(|l| c(l.exp(), T::zero())), true, false));
    }
    let skew = a.iter().zip(a.adjoint().iter()).all(|(x, y)| (x + y).modulus().as_f64() < tol);
    if skew {
        // a = −iK with K = i·a Hermitian.
        let k = a.map(|z| z * c(T::zero(), T::one()));
        let eig = HermitianEigen::new(&k);
        return Ok(Operator::from_parts(eig.map(|l| cis(-l)), false, true));
    }
    Operator::new(a.exp())
}

/// `exp(−i·h·dt)` for Hermitian `h`.
pub fn propagator<T: Real>(h: &DMatrix<C<T>>, dt: T) -> DMatrix<C<T>> {
    HermitianEigen::new(h).map(|l| cis(-l * dt))
}

/// One piecewise-constant propagation step `U = exp(−i·H·dt)` that can also
/// differentiate itself with respect to a control amplitude.
#[derive(Clone, Debug)]
pub struct StepPropagator<T: Real> {
    eig: HermitianEigen<T>,
    dt: T,
    unitary: DMatrix<C<T>>,
}

impl<T: Real> StepPropagator<T> {
    pub fn new(h: &DMatrix<C<T>>, dt: T) -> Self {
        let eig = HermitianEigen::new(h);
        let unitary = eig.map(|l| cis(-l * dt));
        Self { eig, dt, unitary }
    }

    pub fn unitary(&self) -> &DMatrix<C<T>> {
        &self.unitary
    }

    /// Exact `∂U/∂f` along the direction `h_m`, via the Daleckii–Krein
    /// divided-difference formula in the eigenbasis of `H`.
    pub fn derivative(&self, h_m: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        let v = &self.eig.vectors;
        let mut g = v.adjoint() * h_m * v;
        let n = self.eig.values.len();
        let two = T::lit(2.0);
        for a in 0..n {
            for b in 0..n {
                let la = self.eig.values[a];
                let lb = self.eig.values[b];
                // (e^{−iλa dt} − e^{−iλb dt})/(λa − λb)
                //   = −i dt e^{−i(λa+λb)dt/2} sinc((λa−λb)dt/2)
                let x = (la - lb) * self.dt / two;
                let sinc = if x.abs() < T::lit(1e-4) {
                    T::one() - x * x / T::lit(6.0)
                } else {
                    x.sin() / x
                };
                let dd = cis(-(la + lb) * self.dt / two) * c(T::zero(), -self.dt * sinc);
                g[(a, b)] *= dd;
            }
        }
        v * g * v.adjoint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{max_abs_diff, pauli, unitarity_error};
    use crate::scalar::c_re;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C<f64>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&a + a.adjoint()) * c_re(0.5)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = matrix_exponential(&DMatrix::<C<f64>>::zeros(3, 3)).unwrap();
        assert!(max_abs_diff(u.matrix(), &DMatrix::identity(3, 3)) < 1e-15);
    }

    #[test]
    fn half_turn_about_x_is_minus_i_x() {
        let x = pauli::x::<f64>();
        let a = x.matrix() * c(0.0, -std::f64::consts::PI / 2.0);
        let u = matrix_exponential(&a).unwrap();
        assert!(u.is_unitary());
        let expect = x.matrix() * c(0.0, -1.0);
        assert!(max_abs_diff(u.matrix(), &expect) < 1e-12);
    }

    #[test]
    fn diagonal_phase() {
        let (eps, t) = (0.37, 2.5);
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c_re(0.0), c(0.0, -eps * t)]));
        let u = matrix_exponential(&a).unwrap();
        assert!((u.matrix()[(0, 0)] - c_re(1.0)).norm() < 1e-14);
        assert!((u.matrix()[(1, 1)] - cis(-eps * t)).norm() < 1e-14);
        assert!(u.matrix()[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn general_matrix_uses_pade_path() {
        // Nilpotent: exp(N) = I + N exactly.
        let mut n = DMatrix::<C<f64>>::zeros(2, 2);
        n[(0, 1)] = c_re(3.0);
        let u = matrix_exponential(&n).unwrap();
        assert!((u.matrix()[(0, 1)] - c_re(3.0)).norm() < 1e-12);
        assert!((u.matrix()[(0, 0)] - c_re(1.0)).norm() < 1e-12);
    }

    #[test]
    fn eigen_paths_agree_with_pade() {
        for n in [2, 3, 5] {
            let h = random_hermitian(n, n as u64);
            let a = &h * c(0.0, -0.8);
            let fast = matrix_exponential(&a).unwrap();
            assert!(fast.is_unitary());
            assert!(max_abs_diff(fast.matrix(), &a.exp()) < 1e-12);
            let herm = matrix_exponential(&h).unwrap();
            assert!(max_abs_diff(herm.matrix(), &h.exp()) < 1e-11);
        }
    }

    #[test]
    fn two_level_fast_path_handles_degenerate_and_reversed_diagonals() {
        for h in [
            DMatrix::from_row_slice(2, 2, &[c_re(2.0), c_re(0.0), c_re(0.0), c_re(-1.0)]),
            DMatrix::from_row_slice(2, 2, &[c_re(1.0), c(1e-9, 1e-9), c(1e-9, -1e-9), c_re(-1.0)]),
            DMatrix::from_row_slice(2, 2, &[c_re(0.5), c_re(0.0), c_re(0.0), c_re(0.5)]),
        ] {
            let e = HermitianEigen::new(&h);
            let back = e.map(|l| c_re(l));
            assert!(max_abs_diff(&back, &h) < 1e-14);
            assert!(unitarity_error(&e.vectors) < 1e-14);
        }
    }

    #[test]
    fn step_derivative_matches_finite_difference() {
        for n in [2, 4] {
            let h0 = random_hermitian(n, 10 + n as u64);
            let h1 = random_hermitian(n, 20 + n as u64);
            let (f, dt, eps) = (0.3, 0.7, 1e-6);
            let at = |x: f64| propagator(&(&h0 + &h1 * c_re(x)), dt);
            let fd = (at(f + eps) - at(f - eps)) * c_re(0.5 / eps);
            let step = StepPropagator::new(&(&h0 + &h1 * c_re(f)), dt);
            assert!(max_abs_diff(&step.derivative(&h1), &fd) < 1e-8);
        }
    }
}
