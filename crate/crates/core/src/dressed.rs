//! Dressed frame of a classically driven two-level atom and the
//! time-dependent decay rates γ₊(t), γ₋(t), γ_z(t).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::ThermalBath;
use crate::error::{Error, Result};

/// Default number of grid intervals on `[0, τ_D]`.
pub const DEFAULT_STEPS: usize = 2048;

/// Smallest accepted number of grid intervals.
pub const MIN_STEPS: usize = 64;

/// Atomic transition `omega0`, laser frequency `omega_l`, and Rabi drive
/// strength `rabi` (Ω).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub omega0: f64,
    pub omega_l: f64,
    pub rabi: f64,
}

impl DriveConfig {
    pub fn new(omega0: f64, omega_l: f64, rabi: f64) -> Result<Self> {
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(Error::invalid(
                "omega0",
                format!("must be finite and > 0, got {omega0}"),
            ));
        }
        if !(omega_l >= 0.0) || !omega_l.is_finite() {
            return Err(Error::invalid(
                "omegaL",
                format!("must be finite and >= 0, got {omega_l}"),
            ));
        }
        if !(rabi >= 0.0) || !rabi.is_finite() {
            return Err(Error::invalid(
                "Omega",
                format!("must be finite and >= 0, got {rabi}"),
            ));
        }
        Ok(Self {
            omega0,
            omega_l,
            rabi,
        })
    }

    pub fn detuning(&self) -> f64 {
        self.omega0 - self.omega_l
    }
}

/// Dressed splitting ω_s and the basis-rotation coefficients C₊, C₋, C₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedFrame {
    pub omega_s: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub c_zero: f64,
}

impl DressedFrame {
    /// Resonance `ω_L + q ω_s` probed by the bath integral of channel `q`.
    pub fn resonance(&self, drive: &DriveConfig, q: i32) -> f64 {
        drive.omega_l + q as f64 * self.omega_s
    }
}

/// `ω_s = sqrt(Δ² + Ω²)`, `C± = (ω_s ± Δ)/(2ω_s)`, `C₀ = sqrt(C₊C₋)` with
/// Δ = ω0 - ω_L.
pub fn dressed_frame(drive: &DriveConfig) -> Result<DressedFrame> {
    let detuning = drive.detuning();
    let omega_s = detuning.hypot(drive.rabi);
    if omega_s == 0.0 {
        return Err(Error::Domain(
            "degenerate dressed frame: resonant drive (omega0 = omegaL) with Omega = 0 gives omega_s = 0"
                .into(),
        ));
    }
    // The smaller coefficient is formed without cancellation.
    let big = (omega_s + detuning.abs()) / (2.0 * omega_s);
    let small = drive.rabi * drive.rabi / (2.0 * omega_s * (omega_s + detuning.abs()));
    let (c_plus, c_minus) = if detuning >= 0.0 {
        (big, small)
    } else {
        (small, big)
    };
    Ok(DressedFrame {
        omega_s,
        c_plus,
        c_minus,
        c_zero: (c_plus * c_minus).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_z: f64,
}

/// Instantaneous TCL2 rates
///
/// ```text
/// γ₊ = 2C₊² Re Γ₊ + 2C₋² Re Γ'₋
/// γ₋ = 2C₋² Re Γ₋ + 2C₊² Re Γ'₊
/// γ_z = 2C₀² Re(Γ₀ + Γ'₀)
/// ```
pub fn decay_rates(
    bath: &ThermalBath,
    frame: &DressedFrame,
    drive: &DriveConfig,
    t: f64,
) -> Result<Rates> {
    if t == 0.0 {
        return Ok(Rates::default());
    }
    let (plus_q, plus_qp) = bath.re_gamma_pair(frame.resonance(drive, 1), t)?;
    let (minus_q, minus_qp) = bath.re_gamma_pair(frame.resonance(drive, -1), t)?;
    let (zero_q, zero_qp) = bath.re_gamma_pair(frame.resonance(drive, 0), t)?;

    let cp2 = frame.c_plus * frame.c_plus;
    let cm2 = frame.c_minus * frame.c_minus;
    let c02 = frame.c_zero * frame.c_zero;
    Ok(Rates {
        gamma_plus: 2.0 * cp2 * plus_q + 2.0 * cm2 * minus_qp,
        gamma_minus: 2.0 * cm2 * minus_q + 2.0 * cp2 * plus_qp,
        gamma_z: 2.0 * c02 * (zero_q + zero_qp),
    })
}

/// Uniform grid `t_k = k τ_D / steps`, `k = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tau_d: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(tau_d: f64, steps: usize) -> Result<Self> {
        if !(tau_d > 0.0) || !tau_d.is_finite() {
            return Err(Error::invalid(
                "tau",
                format!("must be finite and > 0, got {tau_d}"),
            ));
        }
        if steps < 1 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        Ok(Self { tau_d, steps })
    }

    pub fn step(&self) -> f64 {
        self.tau_d / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.tau_d
        } else {
            self.tau_d * k as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }

    /// Index of the grid point at `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.step();
        let k = x.round();
        if k < 0.0 || k > self.steps as f64 || (x - k).abs() > 1e-9 {
            None
        } else {
            Some(k as usize)
        }
    }
}

/// Rates sampled on a uniform grid over `[0, τ_D]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesTrajectory {
    pub grid: TimeGrid,
    pub samples: Vec<Rates>,
    pub frame: DressedFrame,
    pub drive: DriveConfig,
    pub bath: ThermalBath,
}

/// Samples [`decay_rates`] at every point of `[0, τ_D]` split into `steps`
/// intervals. Grid points are evaluated in parallel; output order is fixed.
pub fn rates_trajectory(
    bath: &ThermalBath,
    frame: &DressedFrame,
    drive: &DriveConfig,
    tau_d: f64,
    steps: usize,
) -> Result<RatesTrajectory> {
    if steps < MIN_STEPS {
        return Err(Error::invalid(
            "steps",
            format!("must be at least {MIN_STEPS}, got {steps}"),
        ));
    }
    let grid = TimeGrid::new(tau_d, steps)?;
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|k| decay_rates(bath, frame, drive, grid.time(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RatesTrajectory {
        grid,
        samples,
        frame: *frame,
        drive: *drive,
        bath: *bath,
    })
}
