//! Adaptive composite Gauss–Legendre quadrature for compactly supported
//! integrands.
//!
//! Every panel is integrated with a fixed 16-node Gauss–Legendre rule. A panel
//! is accepted once the difference between its one-panel and two-half-panel
//! estimates is small; otherwise the panel with the largest estimated error is
//! bisected. Refinement stops when the summed error drops below
//! `max(tol, tol * |value|)`, or fails once [`MAX_PANELS`] is exceeded.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Hard cap on the number of panels a single integration may create.
pub const MAX_PANELS: usize = 1 << 20;

/// Number of Gauss–Legendre nodes used on every panel.
pub const NODES: usize = 16;

// Positive abscissae of the 16-point Gauss–Legendre rule on [-1, 1] and their
// weights; the rule is symmetric.
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_440_185_319_335_424_958_06,
    0.281_603_550_779_258_913_230_460_501_460_496_1,
    0.458_016_777_657_227_386_342_419_442_983_577_6,
    0.617_876_244_402_643_748_446_671_764_048_791,
    0.755_404_408_355_003_033_895_101_194_847_442_3,
    0.865_631_202_387_831_743_880_467_897_712_393_1,
    0.944_575_023_073_232_576_077_988_415_534_608_3,
    0.989_400_934_991_649_932_596_154_173_450_332_6,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_496_285_396_723_208_283_1,
    0.182_603_415_044_923_588_866_763_667_969_219_9,
    0.169_156_519_395_002_538_189_312_079_030_359_9,
    0.149_595_988_816_576_732_081_501_730_547_478_5,
    0.124_628_971_255_533_872_052_476_282_192_016_4,
    0.095_158_511_682_492_784_809_925_107_602_246_2,
    0.062_253_523_938_647_892_862_843_836_994_377_7,
    0.027_152_459_411_754_094_851_780_572_456_018_1,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x} (value {value})")]
    NonFinite { x: f64, value: f64 },
    #[error(
        "quadrature did not converge within {panels} panels \
         (best estimate {estimate}, error estimate {error})"
    )]
    NoConvergence {
        estimate: f64,
        error: f64,
        panels: usize,
    },
    #[error("invalid integration request: {0}")]
    InvalidArgument(String),
}

/// Outcome of a successful integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Absolute, nonnegative estimate of the integration error.
    pub error_estimate: f64,
    /// Number of panels in the final partition.
    pub panels: usize,
}

/// A real integrand that vanishes identically outside `support`.
pub struct Integrand<F> {
    eval: F,
    support: (f64, f64),
}

impl<F: Fn(f64) -> f64> Integrand<F> {
    pub fn new(eval: F, support: (f64, f64)) -> Self {
        Self { eval, support }
    }

    /// An integrand with no declared support restriction.
    pub fn unbounded(eval: F) -> Self {
        Self::new(eval, (f64::NEG_INFINITY, f64::INFINITY))
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Evaluates the integrand, returning exactly zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            0.0
        } else {
            (self.eval)(x)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    abs: f64,
    error: f64,
}

impl Panel {
    fn fine(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
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
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Applies the 16-point rule on `[a, b]`; returns `(integral, integral of |f|)`.
fn gauss16<F: Fn(f64) -> f64>(f: &Integrand<F>, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for (&x, &w) in GL16_X.iter().zip(GL16_W.iter()) {
        for x in [mid - half * x, mid + half * x] {
            let v = f.eval(x);
            if !v.is_finite() {
                return Err(QuadError::NonFinite { x, value: v });
            }
            sum += w * v;
            abs_sum += w * v.abs();
        }
    }
    Ok((sum * half, abs_sum * half))
}

fn make_panel<F: Fn(f64) -> f64>(
    f: &Integrand<F>,
    a: f64,
    b: f64,
    coarse: f64,
) -> Result<Panel, QuadError> {
    let m = 0.5 * (a + b);
    let (left, left_abs) = gauss16(f, a, m)?;
    let (right, right_abs) = gauss16(f, m, b)?;
    let mut error = (coarse - (left + right)).abs();
    // Below this level the difference is rounding noise and further
    // bisection cannot reduce it.
    let noise = 50.0 * f64::EPSILON * (left_abs + right_abs);
    if error <= noise || m <= a || m >= b {
        error = 0.0;
    }
    Ok(Panel {
        a,
        b,
        left,
        right,
        abs: left_abs + right_abs,
        error,
    })
}

/// Integrates `f` over `[a, b]` to the requested tolerance.
///
/// Only the part of `[a, b]` inside the integrand's support is visited. The
/// result is deterministic for fixed inputs.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &Integrand<F>,
    interval: (f64, f64),
    tol: f64,
) -> Result<QuadResult, QuadError> {
    let (a, b) = interval;
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(QuadError::InvalidArgument(format!(
            "interval [{a}, {b}] must be finite with a <= b"
        )));
    }
    if !(tol > 0.0) {
        return Err(QuadError::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let lo = a.max(f.support.0);
    let hi = b.min(f.support.1);
    if !(lo < hi) {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
        });
    }

    let (coarse, _) = gauss16(f, lo, hi)?;
    let first = make_panel(f, lo, hi, coarse)?;
    let mut done_value = 0.0;
    let mut done_error = 0.0;
    let mut total_value = first.fine();
    let mut total_error = first.error;
    let mut total_abs = first.abs;
    let mut panels = 1usize;
    let mut heap = BinaryHeap::new();
    if first.error > 0.0 {
        heap.push(first);
    } else {
        done_value += first.fine();
    }

    // Nothing below the rounding noise of the whole integral is resolvable.
    let target = |value: f64, abs: f64| tol.max(tol * value.abs()).max(50.0 * f64::EPSILON * abs);
    loop {
        if total_error <= target(total_value, total_abs) {
            // The running sum drifts by rounding; confirm against the heap.
            total_error = heap.iter().map(|p| p.error).sum();
            if total_error <= target(total_value, total_abs) {
                break;
            }
        }
        let Some(worst) = heap.pop() else { break };
        if panels + 1 > MAX_PANELS {
            return Err(QuadError::NoConvergence {
                estimate: total_value,
                error: total_error,
                panels,
            });
        }
        let m = 0.5 * (worst.a + worst.b);
        let l = make_panel(f, worst.a, m, worst.left)?;
        let r = make_panel(f, m, worst.b, worst.right)?;
        panels += 1;
        for p in [l, r].iter().copied() {
            if p.error > 0.0 {
                heap.push(p);
            } else {
                done_value += p.fine();
            }
        }
        total_value += l.fine() + r.fine() - worst.fine();
        total_error += l.error + r.error - worst.error;
        total_abs += l.abs + r.abs - worst.abs;
        if panels % 1024 == 0 {
            total_error = heap.iter().map(|p| p.error).sum();
        }
    }

    // Sum the retained panels in a fixed order so results do not depend on
    // heap layout.
    let mut rest: Vec<Panel> = heap.into_vec();
    rest.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = done_value + rest.iter().map(Panel::fine).sum::<f64>();
    done_error += rest.iter().map(|p| p.error).sum::<f64>();
    Ok(QuadResult {
        value,
        error_estimate: done_error,
        panels,
    })
}

/// Convenience wrapper for closures that are already zero outside `interval`.
pub fn integrate_fn<F: Fn(f64) -> f64>(f: F, interval: (f64, f64), tol: f64) -> Result<QuadResult, QuadError> {
    integrate(&Integrand::new(f, interval), interval, tol)
}
