//! The single-qubit dynamical map generated by the TCL2 rates, and its
//! action on N-qubit GHZ states.
//!
//! In the dressed basis `{|1⟩, |0⟩}` the map is
//!
//! ```text
//! ε(|1⟩⟨1|) = a|1⟩⟨1| + (1-a)|0⟩⟨0|      ε(|1⟩⟨0|) = b |1⟩⟨0|
//! ε(|0⟩⟨0|) = c|1⟩⟨1| + (1-c)|0⟩⟨0|      ε(|0⟩⟨1|) = b̄ |0⟩⟨1|
//! ```
//!
//! with `a = ½ + ½e^{-p}(δ+1)`, `c = ½ + ½e^{-p}(δ-1)`, `b = e^{-r}e^{-iω_s t}`
//! and cumulants
//!
//! ```text
//! p(t) = ∫₀ᵗ (γ₊ + γ₋),  r(t) = ½∫₀ᵗ (γ₊ + γ₋ + 4γ_z),  δ(t) = ∫₀ᵗ e^{p(t₁)} (γ₊ - γ₋) dt₁
//! ```
//!
//! Matrices index the dressed basis with `|1⟩` first. For N qubits, bit `j`
//! of a row index is 0 when qubit `j` is in `|1⟩`, so `|1…1⟩` is row 0.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dressed::{Rates, RatesTrajectory, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_2x2_singular_values, is_hermitian, SingularValues};

/// Largest N materialized by [`dense_state`].
pub const DENSE_LIMIT: usize = 8;

/// Largest N accepted by the structured GHZ spectra (multiplicities fit u64).
pub const MAX_QUBITS: usize = 60;

const DENSITY_TOL: f64 = 1e-10;

/// How the δ(t) cumulant weights the rate difference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConvention {
    /// `δ(t) = ∫₀ᵗ e^{p(t₁)} (γ₊ - γ₋)(t₁) dt₁`; consistent with the
    /// population rate equation.
    #[default]
    Integrated,
    /// `δ(t) = e^{p(t)} ∫₀ᵗ (γ₊ - γ₋)(t₁) dt₁`, kept for comparison only.
    Literal,
}

impl FromStr for DeltaConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integrated" => Ok(Self::Integrated),
            "literal" => Ok(Self::Literal),
            other => Err(Error::invalid(
                "delta-convention",
                format!("expected `integrated` or `literal`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for DeltaConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Integrated => "integrated",
            Self::Literal => "literal",
        })
    }
}

/// Map parameters, their time derivatives, and the cumulants at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPoint {
    pub t: f64,
    pub a: f64,
    pub b: Complex64,
    pub c: f64,
    pub da: f64,
    pub db: Complex64,
    pub dc: f64,
    pub p: f64,
    pub r: f64,
    pub delta: f64,
}

impl ChannelPoint {
    /// The identity map at `t = 0`.
    pub fn identity() -> Self {
        Self {
            t: 0.0,
            a: 1.0,
            b: Complex64::new(1.0, 0.0),
            c: 0.0,
            da: 0.0,
            db: Complex64::new(0.0, 0.0),
            dc: 0.0,
            p: 0.0,
            r: 0.0,
            delta: 0.0,
        }
    }

    /// Smallest eigenvalue of the Choi matrix; negative when the map is not
    /// completely positive at this instant.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        // Choi matrix = diag(1-a, c) ⊕ [[a, b], [b̄, 1-c]].
        let x = self.a;
        let y = 1.0 - self.c;
        let mean = 0.5 * (x + y);
        let radius = (0.5 * (x - y)).hypot(self.b.norm());
        (mean - radius).min(1.0 - self.a).min(self.c)
    }
}

/// The map sampled on the grid of a rates trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrajectory {
    pub grid: TimeGrid,
    pub points: Vec<ChannelPoint>,
    pub omega_s: f64,
    pub convention: DeltaConvention,
}

impl ChannelTrajectory {
    /// Integrates the cumulants of `samples` (one per grid point) by the
    /// composite trapezoid rule; derivatives are analytic in the rates.
    pub fn from_rates(
        grid: TimeGrid,
        samples: &[Rates],
        omega_s: f64,
        convention: DeltaConvention,
    ) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Domain(format!(
                "{} rate samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        let h = grid.step();
        let mut points = Vec::with_capacity(samples.len());
        let (mut p, mut r, mut delta_acc) = (0.0f64, 0.0f64, 0.0f64);
        for (k, s) in samples.iter().enumerate() {
            let sum = s.gamma_plus + s.gamma_minus;
            let diff = s.gamma_plus - s.gamma_minus;
            let r_rate = 0.5 * (sum + 4.0 * s.gamma_z);
            if k > 0 {
                let prev = &samples[k - 1];
                let prev_sum = prev.gamma_plus + prev.gamma_minus;
                let prev_diff = prev.gamma_plus - prev.gamma_minus;
                let prev_p = p;
                p += 0.5 * h * (prev_sum + sum);
                r += 0.5 * h * (0.5 * (prev_sum + 4.0 * prev.gamma_z) + r_rate);
                delta_acc += match convention {
                    DeltaConvention::Integrated => {
                        0.5 * h * (prev_p.exp() * prev_diff + p.exp() * diff)
                    }
                    DeltaConvention::Literal => 0.5 * h * (prev_diff + diff),
                };
            }

            let t = grid.time(k);
            let decay = (-p).exp();
            let (delta, da, dc) = match convention {
                DeltaConvention::Integrated => {
                    let delta = delta_acc;
                    (
                        delta,
                        0.5 * (diff - sum * decay * (delta + 1.0)),
                        0.5 * (diff - sum * decay * (delta - 1.0)),
                    )
                }
                DeltaConvention::Literal => {
                    let delta = p.exp() * delta_acc;
                    // e^{-p} dδ/dt = ṗ ∫(γ₊ - γ₋) + (γ₊ - γ₋)
                    let scaled_rate = sum * delta_acc + diff;
                    (
                        delta,
                        0.5 * (scaled_rate - sum * decay * (delta + 1.0)),
                        0.5 * (scaled_rate - sum * decay * (delta - 1.0)),
                    )
                }
            };
            let b = Complex64::from_polar((-r).exp(), -omega_s * t);
            points.push(ChannelPoint {
                t,
                a: 0.5 + 0.5 * decay * (delta + 1.0),
                b,
                c: 0.5 + 0.5 * decay * (delta - 1.0),
                da,
                db: -Complex64::new(r_rate, omega_s) * b,
                dc,
                p,
                r,
                delta,
            });
        }
        Ok(Self {
            grid,
            points,
            omega_s,
            convention,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Excited-state population `P_t = a(t)` at every grid point.
    pub fn population(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points.iter().map(|p| (p.t, p.a, p.da))
    }

    /// Grid index of `tau_d`; errors if the trajectory does not reach it.
    pub fn index_of(&self, tau_d: f64) -> Result<usize> {
        if !(tau_d > 0.0) {
            return Err(Error::Domain(format!("tau_D must be > 0, got {tau_d}")));
        }
        if tau_d > self.grid.tau_d * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "trajectory ends at t = {} before tau_D = {tau_d}",
                self.grid.tau_d
            )));
        }
        self.grid.index_of(tau_d).ok_or_else(|| {
            Error::Domain(format!(
                "tau_D = {tau_d} is not a point of the grid with step {}",
                self.grid.step()
            ))
        })
    }
}

/// Channel trajectory with the default δ convention.
pub fn channel_trajectory(rates: &RatesTrajectory) -> Result<ChannelTrajectory> {
    channel_trajectory_with(rates, DeltaConvention::Integrated)
}

pub fn channel_trajectory_with(
    rates: &RatesTrajectory,
    convention: DeltaConvention,
) -> Result<ChannelTrajectory> {
    ChannelTrajectory::from_rates(rates.grid, &rates.samples, rates.frame.omega_s, convention)
}

/// Largest |centered difference of a − (γ₊(1−a) − γ₋a)| over interior grid
/// points.
pub fn rate_equation_residual(traj: &ChannelTrajectory, samples: &[Rates]) -> f64 {
    let h = traj.grid.step();
    (1..traj.points.len().saturating_sub(1))
        .map(|k| {
            let fd = (traj.points[k + 1].a - traj.points[k - 1].a) / (2.0 * h);
            let s = &samples[k];
            let pop = traj.points[k].a;
            (fd - (s.gamma_plus * (1.0 - pop) - s.gamma_minus * pop)).abs()
        })
        .fold(0.0, f64::max)
}

/// Applies the single-qubit map at `point` to a density matrix.
pub fn apply_channel(point: &ChannelPoint, rho: &Matrix2<Complex64>) -> Result<Matrix2<Complex64>> {
    validate_density(rho)?;
    let (a, b, c) = (point.a, point.b, point.c);
    let r11 = rho[(0, 0)];
    let r00 = rho[(1, 1)];
    Ok(Matrix2::new(
        r11 * a + r00 * c,
        rho[(0, 1)] * b,
        rho[(1, 0)] * b.conj(),
        r11 * (1.0 - a) + r00 * (1.0 - c),
    ))
}

fn validate_density(rho: &Matrix2<Complex64>) -> Result<()> {
    if !is_hermitian(rho, DENSITY_TOL) {
        return Err(Error::Domain("density matrix is not Hermitian".into()));
    }
    let trace = rho.trace();
    if (trace - Complex64::new(1.0, 0.0)).norm() > DENSITY_TOL {
        return Err(Error::Domain(format!(
            "density matrix trace is {trace}, not 1"
        )));
    }
    let x = rho[(0, 0)].re;
    let y = rho[(1, 1)].re;
    let min_eig = 0.5 * (x + y) - (0.5 * (x - y)).hypot(rho[(0, 1)].norm());
    if min_eig < -DENSITY_TOL {
        return Err(Error::Domain(format!(
            "density matrix has negative eigenvalue {min_eig}"
        )));
    }
    Ok(())
}

/// Initial states supported by the speed-limit machinery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Single qubit in the dressed state `|1⟩`.
    Excited,
    /// `(|1…1⟩ + |0…0⟩)/√2`.
    Ghz,
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "excited" => Ok(Self::Excited),
            "ghz" => Ok(Self::Ghz),
            other => Err(Error::invalid(
                "state",
                format!("expected `excited` or `ghz`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Excited => "excited",
            Self::Ghz => "ghz",
        })
    }
}

pub(crate) fn check_qubits(state: InitialState, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    if n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "N = {n} exceeds the supported maximum of {MAX_QUBITS}"
        )));
    }
    if state == InitialState::Excited && n != 1 {
        return Err(Error::invalid(
            "N",
            format!("the excited initial state is single-qubit, got N = {n}"),
        ));
    }
    Ok(())
}

/// Singular values of `ρ_t − ρ_0` for the given initial state.
pub fn delta_singular_values(
    point: &ChannelPoint,
    state: InitialState,
    n: usize,
) -> Result<SingularValues> {
    check_qubits(state, n)?;
    Ok(match state {
        InitialState::Excited => [((1.0 - point.a).abs(), 2)].into_iter().collect(),
        InitialState::Ghz => ghz_delta_singular_values(point, n),
    })
}

/// Singular values of `dρ_t/dt` for the given initial state.
pub fn rate_singular_values(
    point: &ChannelPoint,
    state: InitialState,
    n: usize,
) -> Result<SingularValues> {
    check_qubits(state, n)?;
    Ok(match state {
        InitialState::Excited => [(point.da.abs(), 2)].into_iter().collect(),
        InitialState::Ghz => ghz_rate_singular_values(point, n),
    })
}

fn binomials(n: usize) -> Vec<u64> {
    let mut row = vec![1u64; n + 1];
    for k in 1..n {
        // C(n, k) = C(n, k-1) (n-k+1) / k, exact in u128
        row[k] = (row[k - 1] as u128 * (n - k + 1) as u128 / k as u128) as u64;
    }
    row
}

/// `u^k (1-u)^m`
fn weight(u: f64, k: usize, m: usize) -> f64 {
    u.powi(k as i32) * (1.0 - u).powi(m as i32)
}

/// d/dt of `u^k (1-u)^m` given `du`.
fn weight_rate(u: f64, du: f64, k: usize, m: usize) -> f64 {
    let up = if k > 0 {
        k as f64 * u.powi(k as i32 - 1) * (1.0 - u).powi(m as i32)
    } else {
        0.0
    };
    let down = if m > 0 {
        m as f64 * u.powi(k as i32) * (1.0 - u).powi(m as i32 - 1)
    } else {
        0.0
    };
    du * (up - down)
}

/// Spectrum of `ρ_t − ρ_0` for the N-qubit GHZ state under `ε_t^{⊗N}`.
///
/// The difference is diagonal apart from the `{|1…1⟩, |0…0⟩}` corner, so
/// basis states with `k` excitations (0 < k < N) contribute
/// `½[aᵏ(1−a)^{N−k} + cᵏ(1−c)^{N−k}]` with multiplicity C(N, k), and the
/// corner is a 2×2 Hermitian block. Cost is O(N).
pub fn ghz_delta_singular_values(point: &ChannelPoint, n: usize) -> SingularValues {
    let (a, b, c) = (point.a, point.b, point.c);
    let binom = binomials(n);
    let mut out = SingularValues::new();
    for (k, &multiplicity) in binom.iter().enumerate().take(n).skip(1) {
        let d = 0.5 * (weight(a, k, n - k) + weight(c, k, n - k));
        out.push(d.abs(), multiplicity);
    }
    let x = 0.5 * (weight(a, n, 0) + weight(c, n, 0)) - 0.5;
    let y = 0.5 * (weight(a, 0, n) + weight(c, 0, n)) - 0.5;
    let z = 0.5 * (b.powu(n as u32) - 1.0);
    for s in hermitian_2x2_singular_values(x, y, z) {
        out.push(s, 1);
    }
    out
}

/// Spectrum of `dρ_t/dt` for the GHZ evolution, from the analytic
/// derivatives `(da, db, dc)`.
pub fn ghz_rate_singular_values(point: &ChannelPoint, n: usize) -> SingularValues {
    let (a, b, c) = (point.a, point.b, point.c);
    let (da, db, dc) = (point.da, point.db, point.dc);
    let binom = binomials(n);
    let mut out = SingularValues::new();
    for (k, &multiplicity) in binom.iter().enumerate().take(n).skip(1) {
        let d = 0.5 * (weight_rate(a, da, k, n - k) + weight_rate(c, dc, k, n - k));
        out.push(d.abs(), multiplicity);
    }
    let x = 0.5 * (weight_rate(a, da, n, 0) + weight_rate(c, dc, n, 0));
    let y = 0.5 * (weight_rate(a, da, 0, n) + weight_rate(c, dc, 0, n));
    let z = 0.5 * n as f64 * b.powu(n as u32 - 1) * db;
    for s in hermitian_2x2_singular_values(x, y, z) {
        out.push(s, 1);
    }
    out
}

/// The N-qubit GHZ projector in the dressed basis.
pub fn ghz_projector(n: usize) -> Result<DMatrix<Complex64>> {
    check_dense(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    let half = Complex64::new(0.5, 0.0);
    for &i in &[0, dim - 1] {
        for &j in &[0, dim - 1] {
            m[(i, j)] = half;
        }
    }
    Ok(m)
}

fn check_dense(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    if n > DENSE_LIMIT {
        return Err(Error::Resource(format!(
            "dense states are limited to N <= {DENSE_LIMIT}, got N = {n}"
        )));
    }
    Ok(())
}

/// Applies the single-qubit map to qubit `qubit` of a dense operator.
pub fn apply_to_qubit(
    point: &ChannelPoint,
    m: &DMatrix<Complex64>,
    qubit: usize,
) -> DMatrix<Complex64> {
    let dim = m.nrows();
    let mask = 1usize << qubit;
    let (a, b, c) = (point.a, point.b, point.c);
    let mut out = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for k in 0..dim {
            let v = m[(i, k)];
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            match (i & mask == 0, k & mask == 0) {
                // |1⟩⟨1|
                (true, true) => {
                    out[(i, k)] += v * a;
                    out[(i | mask, k | mask)] += v * (1.0 - a);
                }
                // |0⟩⟨0|
                (false, false) => {
                    out[(i & !mask, k & !mask)] += v * c;
                    out[(i, k)] += v * (1.0 - c);
                }
                (true, false) => out[(i, k)] += v * b,
                (false, true) => out[(i, k)] += v * b.conj(),
            }
        }
    }
    out
}

/// Dense `ε_t^{⊗N}(|GHZ⟩⟨GHZ|)`, applying the map qubit by qubit.
pub fn dense_state(point: &ChannelPoint, n: usize) -> Result<DMatrix<Complex64>> {
    let mut m = ghz_projector(n)?;
    for q in 0..n {
        m = apply_to_qubit(point, &m, q);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_singular_values;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn random_point(rng: &mut StdRng) -> ChannelPoint {
        let a: f64 = rng.gen_range(0.0..1.0);
        let c: f64 = rng.gen_range(0.0..1.0);
        let b = Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(-3.2..3.2));
        ChannelPoint {
            t: 1.0,
            a,
            b,
            c,
            da: rng.gen_range(-1.0..1.0),
            db: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            dc: rng.gen_range(-1.0..1.0),
            p: 0.0,
            r: 0.0,
            delta: 0.0,
        }
    }

    fn constant_rates(gp: f64, gm: f64, gz: f64, steps: usize, tau: f64) -> (TimeGrid, Vec<Rates>) {
        let grid = TimeGrid::new(tau, steps).unwrap();
        let mut v = vec![
            Rates {
                gamma_plus: gp,
                gamma_minus: gm,
                gamma_z: gz
            };
            grid.len()
        ];
        v[0] = Rates {
            gamma_plus: gp,
            gamma_minus: gm,
            gamma_z: gz,
        };
        (grid, v)
    }

    #[test]
    fn first_point_is_identity() {
        let (grid, rates) = constant_rates(0.02, 0.1, 0.03, 64, 2.0);
        let traj =
            ChannelTrajectory::from_rates(grid, &rates, 0.7, DeltaConvention::Integrated).unwrap();
        let p0 = traj.points[0];
        assert_eq!((p0.a, p0.b, p0.c), (1.0, Complex64::new(1.0, 0.0), 0.0));
        assert_eq!((p0.p, p0.r, p0.delta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_decay_closed_form() {
        // γ₊ = 0, γ₋ = γ: p = γt, δ = 1 - e^{γt}, a = e^{-γt}, c = 0.
        let gamma = 0.3;
        let (grid, rates) = constant_rates(0.0, gamma, 0.0, 2048, 2.0);
        let traj =
            ChannelTrajectory::from_rates(grid, &rates, 0.0, DeltaConvention::Integrated).unwrap();
        for p in &traj.points {
            let exact = (-gamma * p.t).exp();
            assert!(
                (p.a - exact).abs() < 1e-6,
                "t={} a={} exact={}",
                p.t,
                p.a,
                exact
            );
            assert!(p.c.abs() < 1e-6);
            assert!((p.da + gamma * exact).abs() < 1e-6);
        }
    }

    #[test]
    fn population_identity_and_coherence_magnitude() {
        let (grid, rates) = constant_rates(0.05, 0.2, 0.07, 128, 2.0);
        let traj =
            ChannelTrajectory::from_rates(grid, &rates, 0.4, DeltaConvention::Integrated).unwrap();
        for p in &traj.points {
            assert!((p.a - p.c - (-p.p).exp()).abs() < 1e-15);
            assert!((p.b.norm() - (-p.r).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        // Time-varying rates with a sign change in γ₋.
        let grid = TimeGrid::new(2.0, 1024).unwrap();
        let rates: Vec<Rates> = grid
            .times()
            .map(|t| Rates {
                gamma_plus: 0.05 * t * (1.0 + (3.0 * t).sin()),
                gamma_minus: 0.2 * (2.0 * t).sin(),
                gamma_z: 0.02 * t,
            })
            .collect();
        let traj =
            ChannelTrajectory::from_rates(grid, &rates, 1.3, DeltaConvention::Integrated).unwrap();
        let h = grid.step();
        for k in 1..traj.len() - 1 {
            let pts = &traj.points;
            let fd_a = (pts[k + 1].a - pts[k - 1].a) / (2.0 * h);
            let fd_c = (pts[k + 1].c - pts[k - 1].c) / (2.0 * h);
            let fd_b = (pts[k + 1].b - pts[k - 1].b) / (2.0 * h);
            assert!((fd_a - pts[k].da).abs() < 1e-5);
            assert!((fd_c - pts[k].dc).abs() < 1e-5);
            assert!((fd_b - pts[k].db).norm() < 1e-5);
        }
    }

    #[test]
    fn residual_separates_conventions() {
        let grid = TimeGrid::new(2.0, 512).unwrap();
        let rates: Vec<Rates> = grid
            .times()
            .map(|t| Rates {
                gamma_plus: 0.1 * t,
                gamma_minus: 0.3 * t * (-t).exp(),
                gamma_z: 0.0,
            })
            .collect();
        let good =
            ChannelTrajectory::from_rates(grid, &rates, 0.0, DeltaConvention::Integrated).unwrap();
        let bad =
            ChannelTrajectory::from_rates(grid, &rates, 0.0, DeltaConvention::Literal).unwrap();
        let rg = rate_equation_residual(&good, &rates);
        let rb = rate_equation_residual(&bad, &rates);
        assert!(rg < 1e-5, "{rg}");
        assert!(rb > 1e-3, "{rb}");
    }

    #[test]
    fn apply_identity_and_populations() {
        let rho = Matrix2::new(
            Complex64::new(0.6, 0.0),
            Complex64::new(0.2, 0.1),
            Complex64::new(0.2, -0.1),
            Complex64::new(0.4, 0.0),
        );
        let out = apply_channel(&ChannelPoint::identity(), &rho).unwrap();
        assert_eq!(out, rho);

        let mut p = ChannelPoint::identity();
        p.a = 0.8;
        p.c = 0.1;
        p.b = Complex64::new(0.5, -0.3);
        let excited = Matrix2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        let out = apply_channel(&p, &excited).unwrap();
        assert_eq!(out[(0, 0)].re, 0.8);
        assert!((out[(1, 1)].re - 0.2).abs() < 1e-15);

        let mixed = Matrix2::identity() * Complex64::new(0.5, 0.0);
        let out = apply_channel(&p, &mixed).unwrap();
        assert!((out[(0, 0)].re - 0.45).abs() < 1e-15);
        assert!((out[(1, 1)].re - 0.55).abs() < 1e-15);
    }

    #[test]
    fn excited_population_matches_closed_state() {
        // Upper entry ½(1 + e^{-p}[1 + δ]).
        let (grid, rates) = constant_rates(0.04, 0.15, 0.0, 256, 2.0);
        let traj =
            ChannelTrajectory::from_rates(grid, &rates, 0.2, DeltaConvention::Integrated).unwrap();
        let pt = traj.points[200];
        let excited = Matrix2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        let out = apply_channel(&pt, &excited).unwrap();
        let closed = 0.5 * (1.0 + (-pt.p).exp() * (1.0 + pt.delta));
        assert!((out[(0, 0)].re - closed).abs() < 1e-15);
    }

    #[test]
    fn apply_rejects_non_density_input() {
        let p = ChannelPoint::identity();
        let not_unit = Matrix2::identity() * Complex64::new(1.0, 0.0);
        assert!(apply_channel(&p, &not_unit).is_err());
        let not_herm = Matrix2::new(
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.2, 0.0),
            Complex64::new(0.5, 0.0),
        );
        assert!(apply_channel(&p, &not_herm).is_err());
        let negative = Matrix2::new(
            Complex64::new(1.2, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-0.2, 0.0),
        );
        assert!(apply_channel(&p, &negative).is_err());
    }

    proptest! {
        #[test]
        fn channel_preserves_trace_and_hermiticity(
            a in 0.0f64..1.0, c in 0.0f64..1.0, br in 0.0f64..1.0, bp in -3.2f64..3.2,
            pop in 0.0f64..1.0, cr in -1.0f64..1.0, ci in -1.0f64..1.0,
        ) {
            let mut p = ChannelPoint::identity();
            p.a = a;
            p.c = c;
            p.b = Complex64::from_polar(br, bp);
            let max = (pop * (1.0 - pop)).sqrt();
            let coh = Complex64::new(cr, ci) * (max / 2f64.sqrt());
            let rho = Matrix2::new(
                Complex64::new(pop, 0.0), coh, coh.conj(), Complex64::new(1.0 - pop, 0.0),
            );
            let out = apply_channel(&p, &rho).unwrap();
            prop_assert!((out.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            prop_assert!(is_hermitian(&out, 1e-15));
        }
    }

    #[test]
    fn dense_projector_at_identity() {
        let m = dense_state(&ChannelPoint::identity(), 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let corner = (i == 0 || i == 3) && (j == 0 || j == 3);
                let expected = if corner { 0.5 } else { 0.0 };
                assert_eq!(m[(i, j)], Complex64::new(expected, 0.0));
            }
        }
        assert!(dense_state(&ChannelPoint::identity(), DENSE_LIMIT + 1).is_err());
    }

    #[test]
    fn dense_two_qubit_diagonal() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..10 {
            let p = random_point(&mut rng);
            let (a, c) = (p.a, p.c);
            let m = dense_state(&p, 2).unwrap();
            let expected = [
                0.5 * (a * a + c * c),
                0.5 * (a * (1.0 - a) + c * (1.0 - c)),
                0.5 * (a * (1.0 - a) + c * (1.0 - c)),
                0.5 * ((1.0 - a).powi(2) + (1.0 - c).powi(2)),
            ];
            for i in 0..4 {
                assert!((m[(i, i)].re - expected[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dense_trace_is_one() {
        let mut rng = StdRng::seed_from_u64(11);
        for n in 1..=6 {
            let p = random_point(&mut rng);
            let m = dense_state(&p, n).unwrap();
            assert!((m.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            assert!((&m - m.adjoint()).iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn identity_point_has_zero_spectra() {
        let p = ChannelPoint::identity();
        for n in 1..=5 {
            assert!(ghz_delta_singular_values(&p, n)
                .expanded()
                .iter()
                .all(|&s| s == 0.0));
            assert!(ghz_rate_singular_values(&p, n)
                .expanded()
                .iter()
                .all(|&s| s == 0.0));
        }
    }

    #[test]
    fn single_qubit_ghz_is_corner_only() {
        let mut rng = StdRng::seed_from_u64(3);
        let p = random_point(&mut rng);
        let s = ghz_delta_singular_values(&p, 1);
        assert_eq!(s.dimension(), 2);
        assert_eq!(s.entries().len(), 2);
        let dense = dense_state(&p, 1).unwrap() - ghz_projector(1).unwrap();
        let d = dense_singular_values(&dense);
        let e = s.expanded();
        assert!((e[0] - d[0]).abs() < 1e-14 && (e[1] - d[1]).abs() < 1e-14);
    }

    #[test]
    fn structured_delta_matches_dense() {
        let mut rng = StdRng::seed_from_u64(42);
        for n in 2..=6 {
            for _ in 0..5 {
                let p = random_point(&mut rng);
                let s = ghz_delta_singular_values(&p, n).expanded();
                let dense = dense_state(&p, n).unwrap() - ghz_projector(n).unwrap();
                let d = dense_singular_values(&dense);
                assert_eq!(s.len(), d.len());
                for (x, y) in s.iter().zip(&d) {
                    assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn structured_rate_matches_finite_difference_of_dense() {
        let mut rng = StdRng::seed_from_u64(99);
        let h = 1e-5;
        for n in 2..=6 {
            for _ in 0..3 {
                let p = random_point(&mut rng);
                let shifted = |sign: f64| {
                    let mut q = p;
                    q.a += sign * h * p.da;
                    q.b += p.db * (sign * h);
                    q.c += sign * h * p.dc;
                    dense_state(&q, n).unwrap()
                };
                let fd = (shifted(1.0) - shifted(-1.0)) / Complex64::new(2.0 * h, 0.0);
                let d = dense_singular_values(&fd);
                let s = ghz_rate_singular_values(&p, n).expanded();
                for (x, y) in s.iter().zip(&d) {
                    assert!((x - y).abs() < 1e-6, "n={n}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn binomial_rows() {
        assert_eq!(binomials(1), vec![1, 1]);
        assert_eq!(binomials(4), vec![1, 4, 6, 4, 1]);
        assert_eq!(binomials(60)[30], 118_264_581_564_861_424);
    }

    #[test]
    fn choi_diagnostic() {
        assert_eq!(ChannelPoint::identity().choi_min_eigenvalue(), 0.0);
        let mut p = ChannelPoint::identity();
        p.a = 0.9;
        p.c = 0.05;
        p.b = Complex64::new(0.99, 0.0);
        // |b|² > a(1-c): not completely positive.
        assert!(p.choi_min_eigenvalue() < 0.0);
        p.b = Complex64::new(0.5, 0.0);
        assert!(p.choi_min_eigenvalue() >= 0.0);
    }

    #[test]
    fn qubit_count_limits() {
        let p = ChannelPoint::identity();
        assert!(delta_singular_values(&p, InitialState::Ghz, 0).is_err());
        assert!(delta_singular_values(&p, InitialState::Excited, 2).is_err());
        assert!(delta_singular_values(&p, InitialState::Ghz, MAX_QUBITS + 1).is_err());
        assert!(delta_singular_values(&p, InitialState::Ghz, 40).is_ok());
    }

    #[test]
    fn parses_conventions_and_states() {
        assert_eq!(
            "literal".parse::<DeltaConvention>().unwrap(),
            DeltaConvention::Literal
        );
        assert!("other".parse::<DeltaConvention>().is_err());
        assert_eq!("ghz".parse::<InitialState>().unwrap(), InitialState::Ghz);
    }
}
