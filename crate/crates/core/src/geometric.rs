//! Frequency-selective π-pulse sequences for uncoupled two-level subsystems.

use serde::{Deserialize, Serialize};

use crate::dynamics::{final_unitary, ControlField, TimeGrid};
use crate::error::{Error, Result};
use crate::operator::ControlSystem;
use crate::pulses::{gaussian_area_factor, required_steps, sample_pulses, PulseSpec};
use crate::scalar::Real;
use crate::scenarios::QuantumDotScenario;

/// Calibrations below this transfer are rejected.
pub const MIN_TRANSFER: f64 = 0.9;
/// Grid refinement over the carrier sampling rule used for designed plans.
pub const DEFAULT_OVERSAMPLING: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Square,
    Gaussian,
}

impl std::str::FromStr for PulseShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(PulseShape::Square),
            "gaussian" => Ok(PulseShape::Gaussian),
            other => Err(Error::Parse(format!("unknown pulse shape '{other}' (square, gaussian)"))),
        }
    }
}

impl PulseShape {
    fn spec<T: Real>(self, amplitude: T, carrier: T, t0: T, t1: T) -> PulseSpec<T> {
        match self {
            PulseShape::Square => PulseSpec::square(amplitude, carrier, t0, t1),
            PulseShape::Gaussian => PulseSpec::gaussian(amplitude, carrier, t0, t1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiCalibration {
    pub amplitude: f64,
    /// Rotating-wave seed `∫E dt = π/μ`.
    pub rwa_amplitude: f64,
    /// `|⟨1|U|0⟩|²` at the calibrated amplitude.
    pub transfer: f64,
}

/// `|⟨1|H₁|0⟩|` of a two-level block.
pub fn transition_coupling<T: Real>(block: &ControlSystem<T>) -> Result<T> {
    if block.dim() != 2 || block.channel_count() != 1 {
        return Err(Error::Shape("π-pulse calibration needs a single-channel two-level block".into()));
    }
    Ok(block.controls()[0].matrix()[(1, 0)].norm_sqr().sqrt())
}

fn transfer<T: Real>(block: &ControlSystem<T>, spec: &PulseSpec<T>, grid: &TimeGrid<T>) -> Result<f64> {
    let field = sample_pulses(std::slice::from_ref(spec), grid)?;
    Ok(final_unitary(block, &field)?[(1, 0)].norm_sqr().as_f64())
}

/// Envelope amplitude that maximizes ground→excited transfer for a pulse
/// of the given shape on `support`, simulated on `steps` intervals.
pub fn calibrate_pi_pulse<T: Real>(
    block: &ControlSystem<T>,
    carrier: T,
    shape: PulseShape,
    support: [T; 2],
    steps: usize,
) -> Result<PiCalibration> {
    let mu = transition_coupling(block)?;
    let duration = support[1] - support[0];
    if !(duration > T::zero()) {
        return Err(Error::Calibration("pulse duration must be positive".into()));
    }
    if mu == T::zero() {
        return Err(Error::Calibration("control does not couple the two levels".into()));
    }
    let grid = TimeGrid::new(support[0], support[1], steps)?;
    let unit = shape.spec(T::one(), carrier, support[0], support[1]);
    let seed = (T::pi() / (mu * unit.nominal_area())).as_f64();
    let eval = |a: f64| -> Result<f64> { transfer(block, &shape.spec(T::lit(a), carrier, support[0], support[1]), &grid) };

    // Golden-section search for the first transfer maximum around the seed.
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.5 * seed, 1.5 * seed);
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    for _ in 0..80 {
        if hi - lo <= 1e-12 * seed {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = eval(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = eval(x1)?;
        }
    }
    let (amplitude, best) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if best < MIN_TRANSFER {
        return Err(Error::Calibration(format!(
            "best transfer {best:.4} below {MIN_TRANSFER} (pulse too short for the level structure)"
        )));
    }
    Ok(PiCalibration { amplitude, rwa_amplitude: seed, transfer: best })
}

/// Calibration on `[0, duration]` with the default grid refinement.
pub fn calibrate_pi_amplitude<T: Real>(block: &ControlSystem<T>, carrier: T, shape: PulseShape, duration: T) -> Result<PiCalibration> {
    if !(duration > T::zero()) {
        return Err(Error::Calibration("pulse duration must be positive".into()));
    }
    let steps = required_steps(duration.as_f64(), carrier.as_f64()) * DEFAULT_OVERSAMPLING;
    calibrate_pi_pulse(block, carrier, shape, [T::zero(), duration], steps)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometricPlan<T> {
    pub pulses: Vec<PulseSpec<T>>,
    pub total_duration: T,
    /// Zero-based subsystem index addressed by each pulse.
    pub target_labels: Vec<usize>,
    pub simultaneous: bool,
    pub calibrations: Vec<PiCalibration>,
    /// Grid intervals per pulse slot; the plan grid has `slots × this`.
    pub steps_per_pulse: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> GeometricPlan<T> {
    pub fn grid(&self) -> Result<TimeGrid<T>> {
        let slots = if self.simultaneous { 1 } else { self.pulses.len().max(1) };
        TimeGrid::new(T::zero(), self.total_duration, slots * self.steps_per_pulse)
    }

    pub fn field(&self) -> Result<ControlField<T>> {
        sample_pulses(&self.pulses, &self.grid()?)
    }

    /// Same plan with every amplitude set to zero.
    pub fn silenced(&self) -> Self {
        let mut p = self.clone();
        p.pulses.iter_mut().for_each(|s| s.amplitude = T::zero());
        p
    }
}

#[derive(Clone, Debug)]
pub struct SequenceOptions {
    pub simultaneous: bool,
    pub oversampling: usize,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self { simultaneous: false, oversampling: DEFAULT_OVERSAMPLING }
    }
}

/// One calibrated π pulse per target at its transition frequency, played
/// back to back (or all at once with `simultaneous`).
pub fn design_bitflip_sequence<T: Real>(
    scenario: &QuantumDotScenario<T>,
    targets: &[usize],
    shape: PulseShape,
    pulse_duration: T,
    options: &SequenceOptions,
) -> Result<GeometricPlan<T>> {
    if targets.is_empty() {
        return Err(Error::Config("at least one target is needed".into()));
    }
    let n = scenario.dots();
    if let Some(&bad) = targets.iter().find(|&&k| k >= n) {
        return Err(Error::Config(format!("target {} out of range 1..={}", bad + 1, n)));
    }
    if !(pulse_duration > T::zero()) {
        return Err(Error::Calibration("pulse duration must be positive".into()));
    }
    let freqs = scenario.transition_frequencies();
    let mut warnings = Vec::new();
    // Spectral FWHM of the envelope, a rough selectivity scale.
    let bandwidth = match shape {
        PulseShape::Square => 2.0 * std::f64::consts::PI / pulse_duration.as_f64(),
        PulseShape::Gaussian => 4.0 * std::f64::consts::LN_2 / (pulse_duration.as_f64() / 6.0),
    };
    for &t in targets {
        for k in (0..n).filter(|k| *k != t) {
            let gap = (freqs[t] - freqs[k]).abs().as_f64();
            if gap <= 1e-12 {
                warnings.push(format!("dot {} shares its transition frequency with dot {}", t + 1, k + 1));
            } else if !targets.contains(&k) && gap < bandwidth {
                warnings.push(format!(
                    "dot {} lies {gap:.4} from target dot {}, inside the pulse bandwidth {bandwidth:.4}",
                    k + 1,
                    t + 1
                ));
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let w_max = freqs.iter().fold(0.0f64, |m, w| m.max(w.as_f64()));
    let steps_per_pulse = required_steps(pulse_duration.as_f64(), w_max) * options.oversampling.max(1);
    let mut pulses = Vec::with_capacity(targets.len());
    let mut calibrations = Vec::with_capacity(targets.len());
    for (i, &t) in targets.iter().enumerate() {
        let start = if options.simultaneous { T::zero() } else { T::from_usize_lossy(i) * pulse_duration };
        let support = [start, start + pulse_duration];
        let cal = calibrate_pi_pulse(&scenario.blocks[t], freqs[t], shape, support, steps_per_pulse)?;
        pulses.push(shape.spec(T::lit(cal.amplitude), freqs[t], support[0], support[1]));
        calibrations.push(cal);
    }
    let slots = if options.simultaneous { 1 } else { targets.len() };
    Ok(GeometricPlan {
        pulses,
        total_duration: T::from_usize_lossy(slots) * pulse_duration,
        target_labels: targets.to_vec(),
        simultaneous: options.simultaneous,
        calibrations,
        steps_per_pulse,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DotReport {
    /// One-based subsystem label.
    pub dot: usize,
    pub excitation: f64,
    /// `1 − excitation` for targets, `excitation` otherwise.
    pub infidelity: f64,
}

/// Lab-frame simulation of the plan, one row per subsystem.
pub fn offresonance_report<T: Real>(plan: &GeometricPlan<T>, scenario: &QuantumDotScenario<T>) -> Result<Vec<DotReport>> {
    let field = plan.field()?;
    Ok(scenario
        .excitations(&field)?
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            let e = e.as_f64();
            let target = plan.target_labels.contains(&k);
            DotReport { dot: k + 1, excitation: e, infidelity: if target { 1.0 - e } else { e } }
        })
        .collect())
}

/// `A·fwhm·√(π/(4 ln 2))`, the area of a Gaussian spec without truncation.
pub fn gaussian_area<T: Real>(amplitude: T, fwhm: T) -> T {
    amplitude * fwhm * gaussian_area_factor::<T>()
}
