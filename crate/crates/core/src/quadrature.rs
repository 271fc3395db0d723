//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{GwiError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_evals: 1_000_000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    if !kron.is_finite() {
        return Err(GwiError::InvalidInput(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    Ok((kron * half, ((kron - gauss) * half).abs()))
}

/// Integrates `f` over the union of consecutive segments between
/// `breakpoints` (which must be increasing), refining the segment with the
/// largest error estimate until the global tolerance is met.
pub fn integrate_segments<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<Integral> {
    if breakpoints.len() < 2 {
        return Err(GwiError::InvalidInput("need at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in breakpoints.windows(2) {
        if !(w[1] > w[0]) {
            return Err(GwiError::InvalidInput("breakpoints must increase".into()));
        }
        let (value, error) = kronrod(&mut f, w[0], w[1])?;
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            return Ok(Integral {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        if evaluations >= opts.max_evals {
            return Err(GwiError::QuadratureFailure {
                evaluations,
                estimate: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        if worst.error == 0.0 {
            // Only unsplittable segments remain.
            return Ok(Integral {
                value: total,
                error: total_err.max(0.0),
                evaluations,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Segment can no longer be split in floating point; accept it.
            total_err -= worst.error;
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        let (lv, le) = kronrod(&mut f, worst.a, mid)?;
        let (rv, re) = kronrod(&mut f, mid, worst.b)?;
        evaluations += 30;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Integral> {
    integrate_segments(f, &[a, b], opts)
}

/// Integral over `[a, ∞)` through the map `t = a + scale * w / (1 - w)`,
/// `w ∈ [0, 1)`. Gauss–Kronrod nodes never touch `w = 1`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    opts: QuadOptions,
) -> Result<Integral> {
    integrate_segments(
        move |w: f64| {
            let one_minus = 1.0 - w;
            let t = a + scale * w / one_minus;
            let v = f(t);
            if v == 0.0 {
                0.0
            } else {
                scale * v / (one_minus * one_minus)
            }
        },
        &[0.0, 0.5, 0.9, 0.99, 1.0],
        opts,
    )
}
