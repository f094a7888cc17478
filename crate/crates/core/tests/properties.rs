use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use qcompare::dynamics::{ControlField, TimeGrid};
use qcompare::operator::{
    adjoint_representation, build_pauli_basis, max_abs_diff, propagator, unitarity_error, ControlSystem, Operator,
};
use qcompare::pulses::{sample_pulse, sample_pulses, spectrum, PulseSpec};
use qcompare::scalar::C;
use qcompare::state::{
    bloch_to_density, density_to_bloch, observable_expectation, pure_to_density, state_distance, DensityMatrix,
    PureState, State,
};

fn hermitian(n: usize, v: &[f64]) -> DMatrix<C<f64>> {
    let mut m = DMatrix::from_element(n, n, C::new(0.0, 0.0));
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                m[(i, i)] = C::new(v[k], 0.0);
                k += 1;
            } else {
                m[(i, j)] = C::new(v[k], v[k + 1]);
                m[(j, i)] = m[(i, j)].conj();
                k += 2;
            }
        }
    }
    m
}

fn dim_and_entries(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0..1.0f64, n * n)))
}

fn pure_state(n: usize, v: &[f64]) -> PureState<f64> {
    let c = DVector::from_iterator(n, (0..n).map(|k| C::new(v[2 * k], v[2 * k + 1])));
    PureState::normalized(c).unwrap()
}

/// Random density matrix `GG†/Tr(GG†)`.
fn density(n: usize, v: &[f64]) -> DensityMatrix<f64> {
    let g = DMatrix::from_iterator(n, n, (0..n * n).map(|k| C::new(v[2 * k], v[2 * k + 1])));
    let mut r = &g * g.adjoint();
    let tr = r.trace();
    r /= tr;
    DensityMatrix::new((&r + r.adjoint()) * C::new(0.5, 0.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pauli_reconstruction((n, v) in dim_and_entries(6)) {
        let basis = build_pauli_basis::<f64>(n).unwrap();
        let mut h = hermitian(n, &v);
        let tr = h.trace();
        for i in 0..n {
            h[(i, i)] -= tr / C::new(n as f64, 0.0);
        }
        for i in 0..n {
            h[(i, i)] += C::new(1.0 / n as f64, 0.0);
        }
        let s = basis.decompose(&h).unwrap();
        let back = basis.reconstruct(&s, 1.0).unwrap();
        prop_assert!(max_abs_diff(&h, &back) < 1e-10);
    }

    #[test]
    fn exponential_inverts((n, v) in dim_and_entries(5), t in -10.0..10.0f64) {
        let h = hermitian(n, &v);
        let u = propagator(&h, t);
        let w = propagator(&h, -t);
        prop_assert!(max_abs_diff(&(u * w), &DMatrix::identity(n, n)) < 1e-10);
    }

    #[test]
    fn adjoint_representation_is_linear((n, v) in dim_and_entries(4), w in prop::collection::vec(-1.0..1.0f64, 16), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let basis = build_pauli_basis::<f64>(n).unwrap();
        let h1 = hermitian(n, &v);
        let h2 = hermitian(n, &w[..n * n]);
        let mix = Operator::hermitian(&h1 * C::new(a, 0.0) + &h2 * C::new(b, 0.0)).unwrap();
        let lhs = adjoint_representation(&mix, &basis).unwrap();
        let rhs = adjoint_representation(&Operator::hermitian(h1).unwrap(), &basis).unwrap() * a
            + adjoint_representation(&Operator::hermitian(h2).unwrap(), &basis).unwrap() * b;
        prop_assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn conversion_round_trip(n in 2usize..6, v in prop::collection::vec(-1.0..1.0f64, 12)) {
        prop_assume!(v[..2 * n].iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let basis = build_pauli_basis::<f64>(n).unwrap();
        let rho = pure_to_density(&pure_state(n, &v));
        let s = density_to_bloch(&rho, &basis).unwrap();
        let back = bloch_to_density(&s, &basis).unwrap();
        prop_assert!(max_abs_diff(rho.matrix(), back.matrix()) < 1e-10);
    }

    #[test]
    fn hilbert_schmidt_is_bloch_distance(n in 2usize..5, v in prop::collection::vec(-1.0..1.0f64, 32), w in prop::collection::vec(-1.0..1.0f64, 32)) {
        let basis = build_pauli_basis::<f64>(n).unwrap();
        let (a, b) = (density(n, &v), density(n, &w));
        let hs = state_distance(&State::Density(a.clone()), &State::Density(b.clone())).unwrap();
        let sa = State::Bloch(density_to_bloch(&a, &basis).unwrap());
        let sb = State::Bloch(density_to_bloch(&b, &basis).unwrap());
        prop_assert!((hs - state_distance(&sa, &sb).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn expectation_is_affine_in_bloch_coordinates(n in 2usize..5, v in prop::collection::vec(-1.0..1.0f64, 32), w in prop::collection::vec(-1.0..1.0f64, 16)) {
        let basis = build_pauli_basis::<f64>(n).unwrap();
        let rho = density(n, &v);
        let a = Operator::hermitian(hermitian(n, &w[..n * n])).unwrap();
        let avec = basis.decompose(a.matrix()).unwrap();
        let s = density_to_bloch(&rho, &basis).unwrap();
        let expect = avec.dot(s.coords()) + a.trace().re / n as f64;
        let got = observable_expectation(&a, &State::Density(rho)).unwrap();
        prop_assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn steps_are_unitary_and_bloch_steps_orthogonal((n, v) in dim_and_entries(4), f in -3.0..3.0f64, dt in 0.001..2.0f64) {
        let h0 = Operator::hermitian(hermitian(n, &v)).unwrap();
        let h1 = Operator::hermitian(hermitian(n, &v.iter().rev().copied().collect::<Vec<_>>())).unwrap();
        let sys = ControlSystem::new(h0, vec![h1]).unwrap();
        let h = sys.hamiltonian(&[f]);
        prop_assert!(unitarity_error(&propagator(&h, dt)) < 1e-10);
        let basis = build_pauli_basis::<f64>(n).unwrap();
        let a = adjoint_representation(&Operator::hermitian(h).unwrap(), &basis).unwrap();
        let e = qcompare::dynamics::bloch_step_matrix(&a, dt);
        let m = e.len().isqrt();
        prop_assert!((&e * e.transpose() - DMatrix::<f64>::identity(m, m)).amax() < 1e-10);
    }

    #[test]
    fn sampling_is_linear(a in -2.0..2.0f64, amp1 in -1.0..1.0f64, amp2 in -1.0..1.0f64, w1 in 0.0..3.0f64, w2 in 0.0..3.0f64) {
        let grid = TimeGrid::new(0.0, 20.0, 400).unwrap();
        let p1 = PulseSpec::gaussian(amp1, w1, 2.0, 14.0);
        let p2 = PulseSpec::square(amp2, w2, 5.0, 18.0);
        let scaled = PulseSpec { amplitude: a * amp1, ..p1.clone() };
        let lhs = sample_pulses(&[scaled, p2.clone()], &grid).unwrap();
        let rhs = sample_pulse(&p1, &grid).unwrap().scaled(a).add(&sample_pulse(&p2, &grid).unwrap()).unwrap();
        for (x, y) in lhs.channel(0).iter().zip(rhs.channel(0)) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn parseval(v in prop::collection::vec(-1.0..1.0f64, 2..300), dt in 0.01..1.0f64) {
        let n = v.len();
        let field = ControlField::new(TimeGrid::new(0.0, n as f64 * dt, n).unwrap(), vec![v.clone()]).unwrap();
        let time_energy: f64 = v.iter().map(|x| x * x).sum::<f64>() * dt;
        let sp = spectrum(&field).unwrap();
        let freq_energy = sp.channels[0].energy(n, dt);
        assert_relative_eq!(time_energy, freq_energy, max_relative = 1e-8, epsilon = 1e-300);
    }
}
