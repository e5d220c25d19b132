//! Trace-distance quantum speed limit.
//!
//! For an evolution `ρ_t` with generator `L_t(ρ_t) = dρ_t/dt` over a driving
//! time τ_D:
//!
//! ```text
//! Λ¹ = (1/τ_D)  ∫ ‖ρ_t − ρ_0‖₁ ‖L_t(ρ_t)‖₁ dt
//! Λ² = (√n/τ_D) ∫ ‖ρ_t − ρ_0‖₁ ‖L_t(ρ_t)‖₂ dt
//! Λ^∞ = (n/τ_D) ∫ ‖ρ_t − ρ_0‖₁ ‖L_t(ρ_t)‖_∞ dt
//! τ_QSL = max{1/Λ¹, 1/Λ², 1/Λ^∞} · 2|1 − D(τ_D, 0)|,   D = 1 − ¼‖ρ_t − ρ_0‖₁²
//! ```
//!
//! with `n = 2^N`. Time integrals use the composite trapezoid rule on the
//! trajectory grid.

use serde::{Deserialize, Serialize};

use crate::channel::{
    delta_singular_values, rate_singular_values, ChannelTrajectory, InitialState,
};
use crate::error::{Error, Result};
use crate::linalg::SingularValues;

/// Below this trace-norm distance the endpoint counts as unchanged.
pub const ZERO_DISTANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchattenP {
    One,
    Two,
    Inf,
}

pub fn schatten_norm(values: &SingularValues, p: SchattenP) -> f64 {
    let it = values.entries().iter();
    match p {
        SchattenP::One => it.map(|&(s, m)| s * m as f64).sum(),
        SchattenP::Two => it.map(|&(s, m)| s * s * m as f64).sum::<f64>().sqrt(),
        SchattenP::Inf => it.map(|&(s, _)| s).fold(0.0, f64::max),
    }
}

/// `D = 1 − ¼‖ρ_t − ρ_0‖₁²` from the singular values of `ρ_t − ρ_0`.
pub fn trace_distance_measure(delta: &SingularValues) -> f64 {
    let d = schatten_norm(delta, SchattenP::One);
    1.0 - 0.25 * d * d
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QslFlags {
    /// ρ_{τ_D} equals ρ_0 to within [`ZERO_DISTANCE`]; ratio reported as 1.
    pub degenerate_endpoint: bool,
    /// Smallest Choi eigenvalue of the map on `[0, τ_D]`; negative values
    /// flag a transient loss of complete positivity.
    pub min_choi_eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QslReport {
    pub ratio: f64,
    pub tau_qsl: f64,
    pub tau_d: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(rename = "lambdaInf")]
    pub lambda_inf: f64,
    /// `2|1 − D(τ_D, 0)|`.
    pub distance_term: f64,
    pub n_dim: u64,
    pub flags: QslFlags,
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => h * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Speed-limit report for `N` qubits starting in `state`, through the
/// generic singular-value machinery.
pub fn qsl_time(
    traj: &ChannelTrajectory,
    state: InitialState,
    n: usize,
    tau_d: f64,
) -> Result<QslReport> {
    let end = traj.index_of(tau_d)?;
    let h = traj.grid.step();
    let n_dim = 1u64
        .checked_shl(n as u32)
        .filter(|_| n < 64)
        .ok_or_else(|| Error::Resource(format!("N = {n} is too large")))?;

    let mut w1 = Vec::with_capacity(end + 1);
    let mut w2 = Vec::with_capacity(end + 1);
    let mut winf = Vec::with_capacity(end + 1);
    let mut last_distance = 0.0;
    let mut min_choi = f64::INFINITY;
    for point in &traj.points[..=end] {
        let delta = delta_singular_values(point, state, n)?;
        let rate = rate_singular_values(point, state, n)?;
        let d1 = schatten_norm(&delta, SchattenP::One);
        w1.push(d1 * schatten_norm(&rate, SchattenP::One));
        w2.push(d1 * schatten_norm(&rate, SchattenP::Two));
        winf.push(d1 * schatten_norm(&rate, SchattenP::Inf));
        last_distance = d1;
        min_choi = min_choi.min(point.choi_min_eigenvalue());
    }

    let dim = n_dim as f64;
    let lambda1 = trapezoid(&w1, h) / tau_d;
    let lambda2 = dim.sqrt() * trapezoid(&w2, h) / tau_d;
    let lambda_inf = dim * trapezoid(&winf, h) / tau_d;
    let distance_term = 0.5 * last_distance * last_distance;

    let mut flags = QslFlags {
        degenerate_endpoint: false,
        min_choi_eigenvalue: min_choi,
    };
    let ratio = if last_distance < ZERO_DISTANCE {
        flags.degenerate_endpoint = true;
        1.0
    } else {
        let slowest = [lambda1, lambda2, lambda_inf]
            .into_iter()
            .map(|l| 1.0 / l)
            .fold(0.0, f64::max);
        slowest * distance_term / tau_d
    };
    Ok(QslReport {
        ratio,
        tau_qsl: ratio * tau_d,
        tau_d,
        lambda1,
        lambda2,
        lambda_inf,
        distance_term,
        n_dim,
        flags,
    })
}

/// Single qubit from `|1⟩`: `½(P_τ − 1)² / ∫|(P_t − 1) Ṗ_t| dt` with
/// `P_t = a(t)`.
pub fn qsl_population(traj: &ChannelTrajectory, tau_d: f64) -> Result<f64> {
    let end = traj.index_of(tau_d)?;
    let pts = &traj.points[..=end];
    let last = pts[end].a;
    if 2.0 * (1.0 - last).abs() < ZERO_DISTANCE {
        return Ok(1.0);
    }
    let integrand: Vec<f64> = pts.iter().map(|p| ((p.a - 1.0) * p.da).abs()).collect();
    Ok(0.5 * (last - 1.0).powi(2) / trapezoid(&integrand, traj.grid.step()))
}

/// Two-qubit GHZ ratio through the closed-form expressions for the trace
/// norms of `ρ_t − ρ_0` and `dρ_t/dt`.
pub fn qsl_two_qubit_closed(traj: &ChannelTrajectory, tau_d: f64) -> Result<f64> {
    let end = traj.index_of(tau_d)?;
    let pts = &traj.points[..=end];

    let distance = |a: f64, b: num_complex::Complex64, c: f64| {
        let u = a * a + c * c - 1.0;
        let v = (1.0 - a).powi(2) + (1.0 - c).powi(2) - 1.0;
        let bb = ((b * b - 1.0) * (b.conj() * b.conj() - 1.0)).re;
        let x = 0.5 * (u * u + v * v + 2.0 * bb + 2.0 * (u * v - bb).abs()).sqrt();
        a * (1.0 - a) + c * (1.0 - c) + x
    };

    let p = &pts[end];
    let num = distance(p.a, p.b, p.c);
    if num < ZERO_DISTANCE {
        return Ok(1.0);
    }
    let integrand: Vec<f64> = pts
        .iter()
        .map(|p| {
            let (a, c, da, dc) = (p.a, p.c, p.da, p.dc);
            let s = a * da + c * dc;
            let w = s - da - dc;
            let bdb = (p.b * p.db).norm_sqr();
            let y = (s * s + w * w + 2.0 * bdb + 2.0 * (s * w - bdb).abs()).sqrt();
            distance(a, p.b, c) * ((da * (1.0 - 2.0 * a) + dc * (1.0 - 2.0 * c)).abs() + y)
        })
        .collect();
    Ok(0.5 * num * num / trapezoid(&integrand, traj.grid.step()))
}
