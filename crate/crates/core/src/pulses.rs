//! Parametric pulses, sampling onto grids, fluence and spectra.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlField, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Samples per carrier half-period required by [`sample_pulse`].
pub const SAMPLES_PER_HALF_PERIOD: f64 = 5.0;
/// Gaussian envelopes vanish beyond this many FWHM from the center.
pub const GAUSSIAN_CUTOFF_FWHM: f64 = 3.0;
/// Spectral peaks below this fraction of the global maximum are ignored.
pub const PEAK_THRESHOLD: f64 = 0.05;
pub const MAX_PEAKS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Envelope<T> {
    Square,
    Gaussian { center: T, fwhm: T },
}

/// `E(t)·cos(ωt + φ)` on `[t_start, t_end]`, zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec<T> {
    pub envelope: Envelope<T>,
    pub amplitude: T,
    pub carrier_frequency: T,
    pub carrier_phase: T,
    pub support: [T; 2],
}

impl<T: Real> PulseSpec<T> {
    pub fn square(amplitude: T, carrier_frequency: T, t_start: T, t_end: T) -> Self {
        Self {
            envelope: Envelope::Square,
            amplitude,
            carrier_frequency,
            carrier_phase: T::zero(),
            support: [t_start, t_end],
        }
    }

    /// Gaussian centered in `[t_start, t_end]` whose ±3·FWHM truncation
    /// fills the support exactly.
    pub fn gaussian(amplitude: T, carrier_frequency: T, t_start: T, t_end: T) -> Self {
        let two = T::lit(2.0);
        Self {
            envelope: Envelope::Gaussian {
                center: (t_start + t_end) / two,
                fwhm: (t_end - t_start) / (two * T::lit(GAUSSIAN_CUTOFF_FWHM)),
            },
            amplitude,
            carrier_frequency,
            carrier_phase: T::zero(),
            support: [t_start, t_end],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.support;
        if !(b > a) {
            return Err(Error::Config("pulse support needs t_end > t_start".into()));
        }
        if let Envelope::Gaussian { fwhm, .. } = self.envelope {
            if !(fwhm > T::zero()) {
                return Err(Error::Config("Gaussian FWHM must be positive".into()));
            }
        }
        if !self.amplitude.is_finite() || !self.carrier_frequency.is_finite() || !self.carrier_phase.is_finite() {
            return Err(Error::Config("pulse parameters must be finite".into()));
        }
        Ok(())
    }

    /// Envelope `E(t)` including amplitude, support clamp and truncation.
    pub fn envelope_at(&self, t: T) -> T {
        let [a, b] = self.support;
        if t < a || t > b {
            return T::zero();
        }
        match self.envelope {
            Envelope::Square => self.amplitude,
            Envelope::Gaussian { center, fwhm } => {
                let x = (t - center) / fwhm;
                if x.abs() > T::lit(GAUSSIAN_CUTOFF_FWHM) {
                    T::zero()
                } else {
                    self.amplitude * (-T::lit(4.0 * std::f64::consts::LN_2) * x * x).exp()
                }
            }
        }
    }

    pub fn value_at(&self, t: T) -> T {
        self.envelope_at(t) * (self.carrier_frequency * t + self.carrier_phase).cos()
    }

    /// Area `∫E dt` of the untruncated envelope over its support.
    pub fn nominal_area(&self) -> T {
        match self.envelope {
            Envelope::Square => self.amplitude * (self.support[1] - self.support[0]),
            Envelope::Gaussian { fwhm, .. } => self.amplitude * fwhm * gaussian_area_factor::<T>(),
        }
    }
}

/// `∫exp(−4 ln2 t²/w²) dt / w = √(π / (4 ln 2))`.
pub fn gaussian_area_factor<T: Real>() -> T {
    T::lit((std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt())
}

/// Smallest number of steps over `duration` that resolves `omega` with
/// `dt < π/(5ω)`.
pub fn required_steps(duration: f64, omega: f64) -> usize {
    if omega <= 0.0 {
        return 1;
    }
    (duration * SAMPLES_PER_HALF_PERIOD * omega / std::f64::consts::PI).floor() as usize + 1
}

fn check_resolution<T: Real>(omega: T, grid: &TimeGrid<T>) -> Result<()> {
    let w = omega.abs().as_f64();
    if w > 0.0 && grid.dt().as_f64() >= std::f64::consts::PI / (SAMPLES_PER_HALF_PERIOD * w) {
        return Err(Error::Resolution {
            omega: w,
            required_steps: required_steps(grid.duration().as_f64(), w),
        });
    }
    Ok(())
}

/// Single-channel field `f(t_k) = E(t_k)·cos(ω t_k + φ)`.
pub fn sample_pulse<T: Real>(spec: &PulseSpec<T>, grid: &TimeGrid<T>) -> Result<ControlField<T>> {
    sample_pulses(std::slice::from_ref(spec), grid)
}

/// Sum of several specs on one channel.
pub fn sample_pulses<T: Real>(specs: &[PulseSpec<T>], grid: &TimeGrid<T>) -> Result<ControlField<T>> {
    for s in specs {
        s.validate()?;
        check_resolution(s.carrier_frequency, grid)?;
    }
    ControlField::from_fn(*grid, 1, |_, t| specs.iter().fold(T::zero(), |acc, s| acc + s.value_at(t)))
}

/// `Σ_m ∫ f_m² dt`, exact for the piecewise-constant field.
pub fn fluence<T: Real>(field: &ControlField<T>) -> T {
    let dt = field.grid().dt();
    field.samples().iter().flatten().fold(T::zero(), |acc, x| acc + *x * *x) * dt
}

/// One-sided magnitude spectrum of one channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelSpectrum {
    /// Angular frequencies `2πk/(Nt·dt)`, `k = 0 … ⌊Nt/2⌋`.
    pub omega: Vec<f64>,
    /// `|X_k|·dt`.
    pub magnitude: Vec<f64>,
    /// Up to five peak frequencies, strongest first.
    pub peaks: Vec<f64>,
}

impl ChannelSpectrum {
    /// Weight of bin `k` when folding the two-sided spectrum.
    fn weight(&self, k: usize, n: usize) -> f64 {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else {
            2.0
        }
    }

    /// Mean frequency and central second moment of the power `|F(ω)|²`.
    pub fn moments(&self, samples: usize) -> (f64, f64) {
        let p: Vec<f64> = (0..self.omega.len())
            .map(|k| self.weight(k, samples) * self.magnitude[k].powi(2))
            .collect();
        let total: f64 = p.iter().sum();
        if total == 0.0 {
            return (0.0, 0.0);
        }
        let mean = p.iter().zip(&self.omega).map(|(p, w)| p * w).sum::<f64>() / total;
        let var = p.iter().zip(&self.omega).map(|(p, w)| p * (w - mean).powi(2)).sum::<f64>() / total;
        (mean, var)
    }

    /// `(1/(Nt·dt))·Σ_k w_k·m_k²`; equals the grid fluence of the channel.
    pub fn energy(&self, samples: usize, dt: f64) -> f64 {
        (0..self.magnitude.len())
            .map(|k| self.weight(k, samples) * self.magnitude[k].powi(2))
            .sum::<f64>()
            / (samples as f64 * dt)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub samples: usize,
    pub dt: f64,
    pub channels: Vec<ChannelSpectrum>,
}

impl Spectrum {
    /// Square root of the largest per-channel central second moment.
    pub fn width(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.moments(self.samples).1)
            .fold(0.0, f64::max)
            .sqrt()
    }
}

pub fn spectrum<T: Real>(field: &ControlField<T>) -> Result<Spectrum> {
    let n = field.grid().steps();
    if n < 2 {
        return Err(Error::Config("spectrum needs at least two samples".into()));
    }
    let dt = field.grid().dt().as_f64();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;
    let omega: Vec<f64> = (0..=half)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * dt))
        .collect();
    let channels = field
        .samples()
        .iter()
        .map(|ch| {
            let mut buf: Vec<Complex<f64>> = ch.iter().map(|x| Complex::new(x.as_f64(), 0.0)).collect();
            fft.process(&mut buf);
            let magnitude: Vec<f64> = buf[..=half].iter().map(|z| z.norm() * dt).collect();
            let peaks = find_peaks(&magnitude).into_iter().map(|k| omega[k]).collect();
            ChannelSpectrum { omega: omega.clone(), magnitude, peaks }
        })
        .collect();
    Ok(Spectrum { samples: n, dt, channels })
}

/// Indices of local maxima above the threshold, strongest first.
fn find_peaks(m: &[f64]) -> Vec<usize> {
    let top = m.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..m.len())
        .filter(|&k| {
            let left = k == 0 || m[k] > m[k - 1];
            let right = k + 1 == m.len() || m[k] >= m[k + 1];
            left && right && m[k] >= PEAK_THRESHOLD * top
        })
        .collect();
    idx.sort_by(|&a, &b| m[b].total_cmp(&m[a]));
    idx.truncate(MAX_PEAKS);
    idx
}
