//! Globally adaptive Gauss-Kronrod (G10/K21) quadrature over a set of
//! mandatory panels.
//!
//! The integrand may be real, complex, or a [`ComplexPair`]; both components
//! of a pair share the same panel refinement so that paired
//! integrals (thermal and vacuum parts of a bath correlation) are evaluated on
//! identical nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

// QUADPACK qk21 abscissae (descending) and weights, kept verbatim.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_745_184_253,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Values that can be integrated: a vector space over the reals with a norm.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

/// Pair of complex values sharing one set of quadrature nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexPair(pub Complex64, pub Complex64);

impl Add for ComplexPair {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        ComplexPair(self.0 + rhs.0, self.1 + rhs.1)
    }
}

impl Sub for ComplexPair {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        ComplexPair(self.0 - rhs.0, self.1 - rhs.1)
    }
}

impl Mul<f64> for ComplexPair {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        ComplexPair(self.0 * rhs, self.1 * rhs)
    }
}

impl QuadValue for ComplexPair {
    fn zero() -> Self {
        ComplexPair(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    }
    fn norm(&self) -> f64 {
        self.0.norm().max(self.1.norm())
    }
}

/// Pair of real values sharing one set of quadrature nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealPair(pub f64, pub f64);

impl Add for RealPair {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        RealPair(self.0 + rhs.0, self.1 + rhs.1)
    }
}

impl Sub for RealPair {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        RealPair(self.0 - rhs.0, self.1 - rhs.1)
    }
}

impl Mul<f64> for RealPair {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        RealPair(self.0 * rhs, self.1 * rhs)
    }
}

impl QuadValue for RealPair {
    fn zero() -> Self {
        RealPair(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        self.0.abs().max(self.1.abs())
    }
}

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of panels after all bisections.
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-15,
            max_panels: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    /// Sum of per-panel |K21 - G10| estimates.
    pub error: f64,
    pub panels: usize,
    pub evaluations: usize,
}

struct Panel<T> {
    lo: f64,
    hi: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Panel<T> {}

impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Largest error first; ties broken by position so refinement order is
// reproducible.
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Applies the 21-point Kronrod rule and its embedded 10-point Gauss rule on
/// `[lo, hi]`, returning the Kronrod value and |K - G|.
pub fn gauss_kronrod_21<T, F>(f: &F, lo: f64, hi: f64) -> (T, f64)
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

/// Integrates `f` over the union of consecutive panels delimited by
/// `breakpoints` (sorted, at least two entries). Panels are bisected,
/// worst-first, until the summed error estimate falls below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T, F>(f: F, breakpoints: &[f64], config: &QuadConfig) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if breakpoints.len() < 2 {
        return Err(Error::Domain(
            "quadrature needs at least two breakpoints".into(),
        ));
    }
    if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "quadrature breakpoints must be strictly increasing".into(),
        ));
    }

    let mut heap = BinaryHeap::with_capacity(2 * breakpoints.len());
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        let (value, error) = gauss_kronrod_21(&f, w[0], w[1]);
        evaluations += 21;
        heap.push(Panel {
            lo: w[0],
            hi: w[1],
            value,
            error,
        });
    }

    let (mut total, mut error) = sum_panels(&heap);
    loop {
        let target = config.abs_tol.max(config.rel_tol * total.norm());
        if error <= target {
            let (value, error) = sum_panels(&heap);
            return Ok(QuadResult {
                value,
                error,
                panels: heap.len(),
                evaluations,
            });
        }
        if heap.len() >= config.max_panels {
            return Err(Error::Quadrature {
                achieved: error / total.norm().max(f64::MIN_POSITIVE),
                requested: config.rel_tol,
                panels: heap.len(),
            });
        }

        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // Panel collapsed to adjacent floats; nothing left to refine.
            return Err(Error::Quadrature {
                achieved: error / total.norm().max(f64::MIN_POSITIVE),
                requested: config.rel_tol,
                panels: heap.len() + 1,
            });
        }
        total = total - worst.value;
        error -= worst.error;
        for (lo, hi) in [(worst.lo, mid), (mid, worst.hi)] {
            let (value, err) = gauss_kronrod_21(&f, lo, hi);
            evaluations += 21;
            total = total + value;
            error += err;
            heap.push(Panel {
                lo,
                hi,
                value,
                error: err,
            });
        }
        // Running sums drift; refresh them occasionally.
        if heap.len() % 256 == 0 {
            (total, error) = sum_panels(&heap);
        }
    }
}

// Summation in panel order keeps the result independent of heap layout.
fn sum_panels<T: QuadValue>(heap: &BinaryHeap<Panel<T>>) -> (T, f64) {
    let mut panels: Vec<&Panel<T>> = heap.iter().collect();
    panels.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    panels
        .iter()
        .fold((T::zero(), 0.0), |(v, e), p| (v + p.value, e + p.error))
}
