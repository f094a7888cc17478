use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcompare::dynamics::{propagate, propagate_unitary, ControlField, Direction, TimeGrid};
use qcompare::geometric::{calibrate_pi_amplitude, design_bitflip_sequence, PulseShape, SequenceOptions};
use qcompare::lyapunov::{run_lyapunov, LyapunovConfig};
use qcompare::operator::{commutator, pauli, ControlSystem, Operator};
use qcompare::optimizer::{optimize, OptimConfig};
use qcompare::pulses::spectrum;
use qcompare::scalar::C;
use qcompare::scenarios::{build_bell_scenario, build_qd_scenario, ps_to_internal, BELL_TRIAL_AMPLITUDE, BELL_TRIAL_FREQUENCY};
use qcompare::state::{fidelity_to_pure, observable_expectation, PureState, Rep, State};
use qcompare::{ControlField32, ControlSystem32, State32};

fn random_smooth_field(grid: TimeGrid<f64>, seed: u64, scale: f64) -> ControlField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..4).map(|_| (rng.gen_range(-scale..scale), rng.gen_range(0.0..1.0), rng.gen_range(0.0..6.3))).collect();
    ControlField::from_fn(grid, 1, |_, t| modes.iter().map(|(a, w, p)| a * (w * t + p).cos()).sum()).unwrap()
}

/// `X₁X₂` commutes with both Bell Hamiltonian terms, so its expectation is
/// frozen and the Bell overlap from `|00⟩` cannot exceed one half.
#[test]
fn bell_parity_is_conserved_and_caps_fidelity() {
    let b = build_bell_scenario::<f64>();
    let xx = pauli::x::<f64>().kron(&pauli::x());
    assert!(commutator(xx.matrix(), b.system.drift().matrix()).camax() < 1e-15);
    assert!(commutator(xx.matrix(), b.system.controls()[0].matrix()).camax() < 1e-15);
    assert!((observable_expectation(&xx, &State::Pure(b.target.clone())).unwrap() - 1.0).abs() < 1e-15);
    let grid = TimeGrid::new(0.0, 50.0, 1000).unwrap();
    for seed in 0..10 {
        let f = random_smooth_field(grid, seed, 1.0);
        let tr = propagate(&b.system, &f, &State::Pure(b.initial.clone()), Direction::Forward).unwrap();
        for s in tr.states.iter().step_by(50) {
            assert!(observable_expectation(&xx, s).unwrap().abs() < 1e-12);
            assert!(fidelity_to_pure(s, &b.target).unwrap() <= 0.5 + 1e-12);
        }
    }
}

#[test]
fn qd_direct_sum_stays_block_diagonal() {
    let qd = build_qd_scenario::<f64>();
    let grid = TimeGrid::new(0.0, 200.0, 2000).unwrap();
    let f = random_smooth_field(grid, 3, 0.5);
    let u = propagate_unitary(&qd.system, &f).unwrap();
    for m in u.unitaries.iter().step_by(100) {
        for i in 0..10 {
            for j in 0..10 {
                if i / 2 != j / 2 {
                    assert!(m.matrix()[(i, j)].norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn optimized_bell_pulse_lives_at_the_drift_scale() {
    let b = build_bell_scenario::<f64>();
    let grid = b.grid();
    let trial = ControlField::from_fn(grid, 1, |_, t| BELL_TRIAL_AMPLITUDE * (BELL_TRIAL_FREQUENCY * t).cos()).unwrap();
    let cfg = OptimConfig { alpha: 1.0, beta: 1.0, lambda: 1.0, grid, max_iterations: 30, objective_tolerance: 0.0, trial_field: trial };
    let out = optimize(&b.system, &b.objective(), &cfg).unwrap();
    let sp = spectrum(&out.field).unwrap();
    let peak = sp.channels[0].peaks[0];
    assert!((0.0..=1.0).contains(&peak), "dominant frequency {peak}");
}

#[test]
fn every_dot_calibrates_to_a_clean_pi_pulse() {
    let qd = build_qd_scenario::<f64>();
    for (block, w) in qd.blocks.iter().zip(qd.transition_frequencies()) {
        for shape in [PulseShape::Square, PulseShape::Gaussian] {
            let cal = calibrate_pi_amplitude(block, w, shape, 2000.0).unwrap();
            assert!(cal.transfer >= 0.999, "{w} {shape:?} {cal:?}");
        }
    }
}

#[test]
fn selective_sequences_commute_with_relabeling() {
    let qd = build_qd_scenario::<f64>();
    let d = ps_to_internal(10.0);
    let opts = SequenceOptions::default();
    let a = design_bitflip_sequence(&qd, &[0, 2], PulseShape::Gaussian, d, &opts).unwrap();
    let b = design_bitflip_sequence(&qd, &[2, 0], PulseShape::Gaussian, d, &opts).unwrap();
    let ea = qd.excitations(&a.field().unwrap()).unwrap();
    let eb = qd.excitations(&b.field().unwrap()).unwrap();
    for (x, y) in ea.iter().zip(&eb) {
        assert!((x - y).abs() < 1e-8, "{x} {y}");
    }
}

fn qubit_run(kappa: f64, nt: usize) -> f64 {
    let sys = ControlSystem::new(Operator::diag(&[0.0, 1.0]), vec![pauli::x()]).unwrap();
    let init = PureState::normalized(DVector::from_vec(vec![C::new(0.9, 0.0), C::new(0.3, 0.2)])).unwrap();
    let cfg = LyapunovConfig {
        kappa,
        rep: Rep::Bloch,
        kick: None,
        grid: TimeGrid::new(0.0, 20.0, nt).unwrap(),
        target: State::Pure(PureState::basis(2, 1)),
    };
    run_lyapunov(&sys, &cfg, &State::Pure(init)).unwrap().max_increase_after_kick()
}

#[test]
fn refining_dt_shrinks_lyapunov_excursions() {
    for kappa in [0.5, 5.0] {
        let (a, b) = (qubit_run(kappa, 200), qubit_run(kappa, 800));
        assert!(a > 0.0);
        assert!(b <= a / 4.0, "kappa {kappa}: {a} -> {b}");
    }
    let bell = build_bell_scenario::<f64>();
    let inc = |nt: usize| {
        let mut cfg = bell.lyapunov_config(0.1, Rep::Bloch, Some(bell.default_kick()));
        cfg.grid = TimeGrid::new(0.0, 200.0, nt).unwrap();
        run_lyapunov(&bell.system, &cfg, &State::Pure(bell.initial.clone())).unwrap().max_increase_after_kick()
    };
    let (a, b) = (inc(4000), inc(16000));
    assert!(a <= 1e-6);
    assert!(b <= 0.0 || b <= a / 4.0, "{a} -> {b}");
}

#[test]
fn kick_seed_determines_everything() {
    let b = build_bell_scenario::<f64>();
    let run = |seed| {
        let mut kick = b.default_kick();
        kick.seed = seed;
        let mut cfg = b.lyapunov_config(0.3, Rep::Density, Some(kick));
        cfg.grid = TimeGrid::new(0.0, 40.0, 800).unwrap();
        run_lyapunov(&b.system, &cfg, &State::Pure(b.initial.clone())).unwrap()
    };
    let (x, y, z) = (run(11), run(11), run(12));
    assert_eq!(x.field.samples(), y.field.samples());
    assert_eq!(x.potential, y.potential);
    assert_ne!(x.field.samples(), z.field.samples());
}

#[test]
fn lyapunov_field_replays_to_the_logged_state() {
    let b = build_bell_scenario::<f64>();
    for rep in [Rep::Pure, Rep::Density, Rep::Bloch] {
        let cfg = b.lyapunov_config(0.3, rep, Some(b.default_kick()));
        let init = State::Pure(b.initial.clone());
        let run = run_lyapunov(&b.system, &cfg, &init).unwrap();
        let replay = propagate(&b.system, &run.field, &run.trajectory.initial().clone(), Direction::Forward).unwrap();
        let f1 = fidelity_to_pure(run.trajectory.last(), &b.target).unwrap();
        let f2 = fidelity_to_pure(replay.last(), &b.target).unwrap();
        assert!((f1 - f2).abs() < 1e-9, "{rep}: {f1} vs {f2}");
    }
}

#[test]
fn single_precision_tracks_double_precision() {
    let b64 = build_bell_scenario::<f64>();
    let b32 = build_bell_scenario::<f32>();
    let sys32: &ControlSystem32 = &b32.system;
    let g64 = TimeGrid::new(0.0, 20.0, 400).unwrap();
    let f64field = random_smooth_field(g64, 5, 0.5);
    let f32field: ControlField32 = ControlField::new(
        TimeGrid::new(0.0f32, 20.0, 400).unwrap(),
        vec![f64field.channel(0).iter().map(|x| *x as f32).collect()],
    )
    .unwrap();
    let s64 = propagate(&b64.system, &f64field, &State::Pure(b64.initial.clone()), Direction::Forward).unwrap();
    let init32: State32 = State::Pure(b32.initial.clone());
    let s32 = propagate(sys32, &f32field, &init32, Direction::Forward).unwrap();
    let p64 = fidelity_to_pure(s64.last(), &b64.target).unwrap();
    let p32 = fidelity_to_pure(s32.last(), &b32.target).unwrap() as f64;
    assert!((p64 - p32).abs() < 1e-4, "{p64} {p32}");
}
