//! Piecewise-constant and Gaussian control pulses, with JSON file I/O.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One piecewise-constant control step: non-negative amplitude and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseStep {
    /// Rabi amplitude Ω ≥ 0, rad/s.
    pub amplitude: f64,
    /// Drive phase ξ, rad.
    pub phase: f64,
}

impl PulseStep {
    /// Quadratures (Ωx, Ωy) = (Ω cos ξ, Ω sin ξ).
    pub fn quadratures(&self) -> (f64, f64) {
        (self.amplitude * self.phase.cos(), self.amplitude * self.phase.sin())
    }

    pub fn from_quadratures(omega_x: f64, omega_y: f64) -> Self {
        Self { amplitude: omega_x.hypot(omega_y), phase: omega_y.atan2(omega_x) }
    }
}

/// Piecewise-constant control sequence with uniform step duration.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    /// Step duration, s.
    pub dt: f64,
    pub steps: Vec<PulseStep>,
}

impl Pulse {
    pub fn new(dt: f64, steps: Vec<PulseStep>) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::Config("pulse dt must be positive and finite".into()));
        }
        if steps.iter().any(|s| s.amplitude < 0.0 || !s.amplitude.is_finite()) {
            return Err(Error::Config("pulse amplitudes must be non-negative".into()));
        }
        Ok(Self { dt, steps })
    }

    pub fn from_quadratures(dt: f64, xy: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            dt,
            xy.iter().map(|&(x, y)| PulseStep::from_quadratures(x, y)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total duration dt × number of steps, s.
    pub fn duration(&self) -> f64 {
        self.dt * self.steps.len() as f64
    }

    pub fn max_amplitude(&self) -> f64 {
        self.steps.iter().map(|s| s.amplitude).fold(0.0, f64::max)
    }

    /// Concatenate `self` followed by `other` (dt must match).
    pub fn concat(&self, other: &Pulse) -> Result<Pulse> {
        if (self.dt - other.dt).abs() > 1e-18 * self.dt.abs() {
            return Err(Error::Config("cannot concatenate pulses with different dt".into()));
        }
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        Pulse::new(self.dt, steps)
    }

    pub fn to_json(&self, meta: Value) -> PulseFile {
        PulseFile {
            dt_s: self.dt,
            steps: self.steps.iter().map(|s| [s.amplitude, s.phase]).collect(),
            meta,
        }
    }

    pub fn write_json(&self, path: &Path, meta: Value) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json(meta))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Pulse> {
        let file: PulseFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        file.into_pulse()
    }
}

/// On-disk pulse representation:
/// `{ "dt_s": ..., "steps": [[amp_rad_per_s, phase_rad], ...], "meta": {...} }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseFile {
    pub dt_s: f64,
    pub steps: Vec<[f64; 2]>,
    #[serde(default)]
    pub meta: Value,
}

impl PulseFile {
    pub fn into_pulse(self) -> Result<Pulse> {
        Pulse::new(
            self.dt_s,
            self.steps
                .iter()
                .map(|&[a, p]| PulseStep { amplitude: a, phase: p })
                .collect(),
        )
    }
}

/// Analytic Gaussian envelope at constant detuning, switched by a
/// rectangular window of length `tau_gate` and centered on it.
///
/// The drive sits on the y quadrature (constant phase ξ = −π/2): that
/// quadrature realizes the real rotation block of the target gate. A
/// time-symmetric x-quadrature pulse yields a (complex-)symmetric
/// propagator whose overlap with the target cannot exceed one half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    /// Window length, s.
    pub tau_gate: f64,
    /// Gaussian rms width, s.
    pub tau_rms: f64,
    /// Peak Rabi amplitude, rad/s.
    pub omega_max: f64,
    /// Constant detuning, rad/s.
    pub delta: f64,
}

/// Drive phase used for the Gaussian envelope.
pub const GAUSSIAN_PHASE: f64 = -FRAC_PI_2;

/// Default internal discretization step for Gaussian pulses, s.
pub const GAUSSIAN_DT: f64 = 1e-6;

impl GaussianPulse {
    pub fn new(tau_gate: f64, tau_rms: f64, omega_max: f64, delta: f64) -> Result<Self> {
        if tau_gate <= 0.0 || tau_rms <= 0.0 {
            return Err(Error::Config("tau_gate and tau_rms must be positive".into()));
        }
        if omega_max < 0.0 {
            return Err(Error::Config("omega_max must be non-negative".into()));
        }
        Ok(Self { tau_gate, tau_rms, omega_max, delta })
    }

    /// Envelope value at time `t` from the window start.
    pub fn envelope(&self, t: f64) -> f64 {
        if !(0.0..=self.tau_gate).contains(&t) {
            return 0.0;
        }
        let arg = (t - 0.5 * self.tau_gate) / self.tau_rms;
        self.omega_max * (-0.5 * arg * arg).exp()
    }

    /// Discretize on a uniform grid with midpoint sampling.
    pub fn discretize(&self, dt: f64) -> Result<Pulse> {
        if dt <= 0.0 {
            return Err(Error::Config("discretization step must be positive".into()));
        }
        let n = (self.tau_gate / dt).round().max(1.0) as usize;
        let dt_actual = self.tau_gate / n as f64;
        let steps = (0..n)
            .map(|k| PulseStep {
                amplitude: self.envelope((k as f64 + 0.5) * dt_actual),
                phase: GAUSSIAN_PHASE,
            })
            .collect();
        Pulse::new(dt_actual, steps)
    }
}
