//! Thermal bosonic reservoirs: spectral densities, Bose occupation, and the
//! finite-time bath correlation integrals
//!
//! ```text
//! Γ_q(t)  = ∫ dω J(ω) n̄(ω)       (e^{iΔt} - 1)/(iΔ),   Δ = ω - resonance
//! Γ'_q(t) = ∫ dω J(ω) (n̄(ω) + 1) (e^{iΔt} - 1)/(iΔ)
//! ```
//!
//! evaluated on `[ir_cutoff, uv_cutoff]` with adaptive Gauss-Kronrod
//! quadrature. Units: k_B = ħ = 1, all frequencies share one unit.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, ComplexPair, QuadConfig, RealPair};

/// Below this |Δt| the phase kernel switches to its Taylor series.
const KERNEL_SERIES_CUTOFF: f64 = 1e-6;

/// Default infrared cutoff, in units of the spectral width.
pub const DEFAULT_IR_CUTOFF: f64 = 1e-6;

/// Uniform UV margin, in spectral widths (Lorentzian) or mode frequencies
/// (effective-Ohmic).
pub const UV_MARGIN: f64 = 40.0;

/// Requested relative tolerance of the frequency integrals.
pub const GAMMA_REL_TOL: f64 = 1e-8;

/// `J(ω) = (1/2π) γ0 λ² / ((ω0 - ω)² + λ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianSpectrum {
    pub gamma0: f64,
    pub lambda: f64,
    pub omega0: f64,
}

impl LorentzianSpectrum {
    pub fn new(gamma0: f64, lambda: f64, omega0: f64) -> Result<Self> {
        positive("gamma0", gamma0)?;
        positive("lambda", lambda)?;
        positive("omega0", omega0)?;
        let s = Self {
            gamma0,
            lambda,
            omega0,
        };
        if !s.is_weak_coupling() {
            log::warn!(
                "gamma0 = {gamma0} is not below lambda/2 = {}; weak-coupling rates may be unreliable",
                lambda / 2.0
            );
        }
        Ok(s)
    }

    pub fn is_weak_coupling(&self) -> bool {
        self.gamma0 < 0.5 * self.lambda
    }

    fn density(&self, omega: f64) -> f64 {
        let d = self.omega0 - omega;
        self.gamma0 * self.lambda * self.lambda / (2.0 * PI * (d * d + self.lambda * self.lambda))
    }
}

/// Effective density seen by a qubit coupled through a damped cavity mode:
/// `J(ω) = 2αωω0⁴ / ((ω0² - ω²)² + (2πγωω0)²)` with `α = 8γg²/ω0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveOhmicSpectrum {
    gamma: f64,
    g: f64,
    omega0: f64,
    alpha: f64,
}

impl EffectiveOhmicSpectrum {
    pub fn new(gamma: f64, g: f64, omega0: f64) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("g", g)?;
        positive("omega0", omega0)?;
        let s = Self {
            gamma,
            g,
            omega0,
            alpha: 8.0 * gamma * g * g / omega0,
        };
        if !s.is_weak_coupling() {
            log::warn!("g = {g} is not much smaller than gamma = {gamma}");
        }
        Ok(s)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `g ≪ γ`, read as g at most a tenth of γ.
    pub fn is_weak_coupling(&self) -> bool {
        self.g <= 0.1 * self.gamma
    }

    /// Half width of the resonance, `πγω0`.
    pub fn width(&self) -> f64 {
        PI * self.gamma * self.omega0
    }

    fn density(&self, omega: f64) -> f64 {
        let w0 = self.omega0;
        let w0sq = w0 * w0;
        let detune = w0sq - omega * omega;
        let damp = 2.0 * PI * self.gamma * omega * w0;
        2.0 * self.alpha * omega * w0sq * w0sq / (detune * detune + damp * damp)
    }
}

// The derived α is never deserialized; it is rebuilt from (γ, g, ω0).
impl<'de> Deserialize<'de> for EffectiveOhmicSpectrum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            gamma: f64,
            g: f64,
            omega0: f64,
        }
        let raw = Raw::deserialize(d)?;
        EffectiveOhmicSpectrum::new(raw.gamma, raw.g, raw.omega0).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralModel {
    Lorentzian(LorentzianSpectrum),
    EffectiveOhmic(EffectiveOhmicSpectrum),
}

impl SpectralModel {
    /// Frequency at which J peaks (to the accuracy needed for panel splits).
    pub fn peak(&self) -> f64 {
        match self {
            SpectralModel::Lorentzian(l) => l.omega0,
            SpectralModel::EffectiveOhmic(o) => o.omega0,
        }
    }

    /// Characteristic width of the peak.
    pub fn width(&self) -> f64 {
        match self {
            SpectralModel::Lorentzian(l) => l.lambda,
            SpectralModel::EffectiveOhmic(o) => o.width(),
        }
    }

    pub fn default_ir_cutoff(&self) -> f64 {
        match self {
            SpectralModel::Lorentzian(l) => DEFAULT_IR_CUTOFF * l.lambda,
            SpectralModel::EffectiveOhmic(o) => DEFAULT_IR_CUTOFF * o.omega0,
        }
    }

    pub fn default_uv_cutoff(&self) -> f64 {
        match self {
            SpectralModel::Lorentzian(l) => l.omega0 + UV_MARGIN * l.lambda,
            SpectralModel::EffectiveOhmic(o) => UV_MARGIN * o.omega0,
        }
    }

    /// Whether `J(0⁺) > 0`, which makes thermal integrals log-divergent in
    /// the infrared and the result sensitive to `ir_cutoff`.
    pub fn ir_exposed(&self) -> bool {
        matches!(self, SpectralModel::Lorentzian(_))
    }

    pub fn density(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!(
                "spectral density requires omega > 0, got {omega}"
            )));
        }
        Ok(self.density_unchecked(omega))
    }

    #[inline]
    fn density_unchecked(&self, omega: f64) -> f64 {
        match self {
            SpectralModel::Lorentzian(l) => l.density(omega),
            SpectralModel::EffectiveOhmic(o) => o.density(omega),
        }
    }
}

/// `J(ω)` for any spectral model; `omega` must be positive.
pub fn spectral_density(spectrum: &SpectralModel, omega: f64) -> Result<f64> {
    spectrum.density(omega)
}

/// Mean thermal occupation `1/(e^{ω/T} - 1)`, exactly zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "Bose occupation requires omega > 0, got {omega}"
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!(
            "Bose occupation requires T >= 0, got {temperature}"
        )));
    }
    Ok(occupation(omega, temperature))
}

#[inline]
fn occupation(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        0.0
    } else {
        1.0 / (omega / temperature).exp_m1()
    }
}

/// Closed form of `∫₀ᵗ e^{iΔ(t - t₁)} dt₁ = (e^{iΔt} - 1)/(iΔ)`, continuous in Δ.
pub fn phase_kernel(delta: f64, t: f64) -> Complex64 {
    let x = delta * t;
    if x.abs() < KERNEL_SERIES_CUTOFF {
        return Complex64::new(t * (1.0 - x * x / 6.0), t * x / 2.0);
    }
    let half = (0.5 * x).sin();
    Complex64::new(x.sin() / delta, 2.0 * half * half / delta)
}

/// Real part of [`phase_kernel`], `sin(Δt)/Δ`.
#[inline]
fn phase_kernel_re(delta: f64, t: f64) -> f64 {
    let x = delta * t;
    if x.abs() < KERNEL_SERIES_CUTOFF {
        t * (1.0 - x * x / 6.0)
    } else {
        x.sin() / delta
    }
}

/// Values of `Γ_q(t)` and `Γ'_q(t)` at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaPair {
    pub gamma_q: Complex64,
    pub gamma_q_prime: Complex64,
}

impl GammaPair {
    pub const ZERO: GammaPair = GammaPair {
        gamma_q: Complex64::new(0.0, 0.0),
        gamma_q_prime: Complex64::new(0.0, 0.0),
    };
}

/// A spectral model at a temperature, with the frequency window the bath
/// integrals are truncated to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalBath {
    pub spectrum: SpectralModel,
    pub temperature: f64,
    pub ir_cutoff: f64,
    pub uv_cutoff: f64,
}

impl ThermalBath {
    /// Bath with the default cutoffs of `spectrum`.
    pub fn new(spectrum: SpectralModel, temperature: f64) -> Result<Self> {
        Self::with_cutoffs(
            spectrum,
            temperature,
            spectrum.default_ir_cutoff(),
            spectrum.default_uv_cutoff(),
        )
    }

    pub fn with_cutoffs(
        spectrum: SpectralModel,
        temperature: f64,
        ir_cutoff: f64,
        uv_cutoff: f64,
    ) -> Result<Self> {
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(Error::invalid(
                "T",
                format!("must be finite and >= 0, got {temperature}"),
            ));
        }
        if !(ir_cutoff > 0.0) {
            return Err(Error::invalid(
                "ir_cutoff",
                format!("must be > 0, got {ir_cutoff}"),
            ));
        }
        if !(uv_cutoff > ir_cutoff) || !uv_cutoff.is_finite() {
            return Err(Error::invalid(
                "uv_cutoff",
                format!("must be finite and exceed ir_cutoff = {ir_cutoff}, got {uv_cutoff}"),
            ));
        }
        if temperature >= 0.5 * spectrum.peak() {
            log::warn!(
                "T = {temperature} is not small compared with the peak frequency {}",
                spectrum.peak()
            );
        }
        Ok(Self {
            spectrum,
            temperature,
            ir_cutoff,
            uv_cutoff,
        })
    }

    /// Returns a copy with the infrared cutoff replaced.
    pub fn with_ir_cutoff(&self, ir_cutoff: f64) -> Result<Self> {
        Self::with_cutoffs(self.spectrum, self.temperature, ir_cutoff, self.uv_cutoff)
    }

    /// `Γ_q(t)` and `Γ'_q(t)` for the given resonance `ω_L + q ω_s`.
    pub fn gamma_pair(&self, resonance: f64, t: f64) -> Result<GammaPair> {
        self.gamma_pair_with(resonance, t, &gamma_quad_config())
            .map(|(g, _)| g)
    }

    /// As [`ThermalBath::gamma_pair`] with explicit quadrature settings;
    /// also returns the quadrature error estimate.
    pub fn gamma_pair_with(
        &self,
        resonance: f64,
        t: f64,
        config: &QuadConfig,
    ) -> Result<(GammaPair, f64)> {
        check_time_and_resonance(t, resonance)?;
        if t == 0.0 {
            return Ok((GammaPair::ZERO, 0.0));
        }

        let spectrum = self.spectrum;
        let temperature = self.temperature;
        let integrand = |omega: f64| {
            let j = spectrum.density_unchecked(omega);
            let n = occupation(omega, temperature);
            let k = phase_kernel(omega - resonance, t);
            ComplexPair(k * (j * n), k * (j * (n + 1.0)))
        };
        let breaks = self.breakpoints(resonance, t);
        let result = quad::integrate(integrand, &breaks, config)?;
        let ComplexPair(mut gamma_q, gamma_q_prime) = result.value;
        if temperature == 0.0 {
            gamma_q = Complex64::new(0.0, 0.0);
        }
        Ok((
            GammaPair {
                gamma_q,
                gamma_q_prime,
            },
            result.error,
        ))
    }

    /// Real parts `(Re Γ_q(t), Re Γ'_q(t))` only, which is all the decay
    /// rates need; cheaper than [`ThermalBath::gamma_pair`].
    pub fn re_gamma_pair(&self, resonance: f64, t: f64) -> Result<(f64, f64)> {
        check_time_and_resonance(t, resonance)?;
        if t == 0.0 {
            return Ok((0.0, 0.0));
        }
        let spectrum = self.spectrum;
        let temperature = self.temperature;
        let integrand = |omega: f64| {
            let j = spectrum.density_unchecked(omega);
            let n = occupation(omega, temperature);
            let k = phase_kernel_re(omega - resonance, t);
            RealPair(k * j * n, k * j * (n + 1.0))
        };
        let breaks = self.breakpoints(resonance, t);
        let result = quad::integrate(integrand, &breaks, &gamma_quad_config())?;
        let RealPair(re_q, re_q_prime) = result.value;
        Ok((if temperature == 0.0 { 0.0 } else { re_q }, re_q_prime))
    }

    /// Panel boundaries: cutoffs, resonance, spectral peak, decades above
    /// the IR cutoff, and a quarter-period cap on panel width at time `t`.
    fn breakpoints(&self, resonance: f64, t: f64) -> Vec<f64> {
        let (lo, hi) = (self.ir_cutoff, self.uv_cutoff);
        let mut pts = vec![lo, hi];
        for p in [resonance, self.spectrum.peak()] {
            if p > lo && p < hi {
                pts.push(p);
            }
        }
        // The thermal weight behaves like T/ω near the origin.
        let ir_top = self.spectrum.width().min(self.spectrum.peak()).min(1.0);
        let mut w = 10.0 * lo;
        while w < ir_top && w < hi {
            pts.push(w);
            w *= 10.0;
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

        let max_width = FRAC_PI_2 / t;
        let mut out = Vec::with_capacity(pts.len() + ((hi - lo) / max_width) as usize + 1);
        out.push(pts[0]);
        for win in pts.windows(2) {
            let span = win[1] - win[0];
            let pieces = (span / max_width).ceil().max(1.0) as usize;
            for k in 1..pieces {
                out.push(win[0] + span * k as f64 / pieces as f64);
            }
            out.push(win[1]);
        }
        out
    }
}

fn check_time_and_resonance(t: f64, resonance: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    if !resonance.is_finite() {
        return Err(Error::Domain(format!(
            "resonance must be finite, got {resonance}"
        )));
    }
    Ok(())
}

pub(crate) fn gamma_quad_config() -> QuadConfig {
    QuadConfig {
        rel_tol: GAMMA_REL_TOL,
        abs_tol: 1e-16,
        max_panels: 20_000,
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}
