//! Adaptive Gauss-Kronrod quadrature.
//!
//! Finite intervals use a globally adaptive 10/21-point Gauss-Kronrod rule
//! (QUADPACK error heuristics). Semi-infinite ranges are cut into
//! geometrically growing segments, each integrated adaptively, with the
//! remainder extrapolated from the ratio of successive segment contributions.
//! That handles both power-law bodies (constant ratio) and Boltzmann cutoffs
//! (ratio collapsing to zero) without a change of variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for the odd Kronrod abscissae XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

/// Result of a quadrature: value, error estimate and work counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

impl Estimate {
    fn zero() -> Self {
        Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            subdivisions: 0,
        }
    }

    fn absorb(&mut self, other: Estimate) {
        self.value += other.value;
        self.error += other.error;
        self.evaluations += other.evaluations;
        self.subdivisions += other.subdivisions;
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = f_center.abs() * WGK[10];
    let mut values = [0.0; 20];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        values[2 * j] = f1;
        values[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((values[2 * j] - mean).abs() + (values[2 * j + 1] - mean).abs());
    }
    let value = kronrod * half;
    let abs_value = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel {
        lo,
        hi,
        value,
        error,
    }
}

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Upper bound on the number of geometric segments in a tail integral.
    pub max_segments: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_subdivisions: 1000,
            max_segments: 1100,
        }
    }
}

impl Quadrature {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Quadrature {
            rel_tol,
            ..Default::default()
        }
    }

    /// Integrate `f` over the finite interval `[lo, hi]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<Estimate> {
        self.integrate_with_abs(&f, lo, hi, self.abs_tol)
    }

    fn integrate_with_abs<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        lo: f64,
        hi: f64,
        abs_tol: f64,
    ) -> Result<Estimate> {
        if lo == hi {
            return Ok(Estimate::zero());
        }
        let first = gauss_kronrod(f, lo, hi);
        let mut heap = BinaryHeap::new();
        let mut total = first.value;
        let mut total_err = first.error;
        heap.push(first);
        let mut subdivisions = 0;
        let mut evaluations = 21;
        loop {
            let target = abs_tol.max(self.rel_tol * total.abs());
            if total_err <= target {
                break;
            }
            if subdivisions >= self.max_subdivisions {
                return Err(Error::QuadratureNonConvergence {
                    lo,
                    hi,
                    estimate: total,
                    error: total_err,
                    subdivisions,
                });
            }
            let worst = heap.pop().expect("heap holds at least one panel");
            let mid = 0.5 * (worst.lo + worst.hi);
            if mid <= worst.lo || mid >= worst.hi {
                // interval collapsed to adjacent floats; accept what we have
                heap.push(worst);
                if total_err <= 1e3 * target {
                    break;
                }
                return Err(Error::QuadratureNonConvergence {
                    lo,
                    hi,
                    estimate: total,
                    error: total_err,
                    subdivisions,
                });
            }
            let left = gauss_kronrod(f, worst.lo, mid);
            let right = gauss_kronrod(f, mid, worst.hi);
            evaluations += 42;
            subdivisions += 1;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
            if subdivisions % 64 == 0 {
                // resum to stop drift in the running totals
                total = heap.iter().map(|p| p.value).sum();
                total_err = heap.iter().map(|p| p.error).sum();
            }
        }
        let value = heap.iter().map(|p| p.value).sum();
        let error = heap.iter().map(|p| p.error).sum();
        Ok(Estimate {
            value,
            error,
            evaluations,
            subdivisions,
        })
    }

    /// Integrate `f` over `[lo, inf)`.
    ///
    /// Segments are `[lo + h0 (2^k - 1), lo + h0 (2^{k+1} - 1)]`; `h0` should be
    /// the smallest length scale on which the integrand varies near `lo`.
    pub fn integrate_upper<F: Fn(f64) -> f64>(&self, f: F, lo: f64, h0: f64) -> Result<Estimate> {
        let segments = (0..).map(move |k: i32| {
            let a = lo + h0 * (2f64.powi(k) - 1.0);
            let b = lo + h0 * (2f64.powi(k + 1) - 1.0);
            (a, b)
        });
        self.integrate_segments(&f, segments, lo, f64::INFINITY)
    }

    /// Integrate `f` over `(0, hi]`, resolving behaviour at the origin with
    /// segments `[hi 2^{-k-1}, hi 2^{-k}]`.
    pub fn integrate_lower<F: Fn(f64) -> f64>(&self, f: F, hi: f64) -> Result<Estimate> {
        let segments = (0..).map(move |k: i32| (hi * 2f64.powi(-k - 1), hi * 2f64.powi(-k)));
        self.integrate_segments(&f, segments, 0.0, hi)
    }

    fn integrate_segments<F, I>(&self, f: &F, segments: I, lo: f64, hi: f64) -> Result<Estimate>
    where
        F: Fn(f64) -> f64,
        I: Iterator<Item = (f64, f64)>,
    {
        let mut acc = Estimate::zero();
        let mut prev = f64::NAN;
        for (k, (a, b)) in segments.enumerate().take(self.max_segments) {
            if !(a.is_finite() && b.is_finite()) || a == b {
                break;
            }
            let abs_tol = self.abs_tol.max(1e-3 * self.rel_tol * acc.value.abs());
            let seg = self.integrate_with_abs(f, a.min(b), a.max(b), abs_tol)?;
            let cur = seg.value.abs();
            acc.absorb(seg);
            if k >= 3 && acc.value != 0.0 {
                if cur == 0.0 {
                    return Ok(acc);
                }
                let ratio = cur / prev;
                if ratio < 1.0 {
                    let remainder = cur * ratio / (1.0 - ratio);
                    if remainder <= 1e-2 * self.rel_tol * acc.value.abs() {
                        acc.value += remainder * seg.value.signum();
                        acc.error += remainder;
                        return Ok(acc);
                    }
                }
            }
            prev = cur;
        }
        Err(Error::QuadratureNonConvergence {
            lo,
            hi,
            estimate: acc.value,
            error: f64::INFINITY,
            subdivisions: acc.subdivisions,
        })
    }
}
