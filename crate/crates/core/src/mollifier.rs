//! Test functions built from the smooth bump and members of the moment
//! classes `A_q`.
//!
//! A [`TestFunction`] is a finite combination `sum_k w_k psi^(k)(x - shift)` of
//! derivatives of the bump `psi(x) = exp(1/((x/h)^2 - 1))`. That form is closed
//! under differentiation and translation and it is exactly the shape produced
//! by the moment-class construction, so values and derivatives of any order
//! come straight from bump jets.
//!
//! Moments are obtained by integrating by parts onto the bump,
//! `int u^i psi^(j)(u) du = (-1)^j i!/(i-j)! B_{i-j}` with `B` the bump's own
//! moments, because direct quadrature of high derivatives cancels
//! catastrophically (`int |psi^(8)|` is already about `1e11`).

use std::sync::Arc;

use thiserror::Error;

use crate::jets::{eval_jet, Jet, SmoothPrimitive};
use crate::quadrature::{integrate, Integrand, QuadError};

/// Tolerance for moment quadrature.
pub const MOMENT_TOL: f64 = 1e-12;
/// Allowed deviation of `m_0` from one for a class member.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Allowed magnitude of the vanishing moments `m_1..m_q` for a class member.
pub const VANISHING_TOL: f64 = 1e-8;
/// Largest class order the factorial-weighted triangular solve supports.
pub const MAX_CLASS: usize = 12;

/// Interior sample count for the finiteness check after construction.
const FINITE_PROBES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MollifierError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("moment system is singular: base has zeroth moment {0}")]
    SingularSystem(f64),
    #[error("class order {0} exceeds the supported maximum {MAX_CLASS}")]
    ClassTooLarge(usize),
    #[error("constructed function fails the A_{q} moment test: moment {r} = {value}")]
    ClassCheck { q: usize, r: usize, value: f64 },
    #[error("moment quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
}

/// Symmetry of a test function about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

#[derive(Debug)]
struct Inner {
    halfwidth: f64,
    shift: f64,
    /// Weights on `psi, psi', psi'', ...` of the raw (unnormalized) bump.
    weights: Vec<f64>,
    /// Construction coefficients relative to the base this function was
    /// built from.
    lambda: Vec<f64>,
    claimed_class: Option<usize>,
    moments: Vec<f64>,
    /// Moments `B_0..` of the raw bump about its own center.
    bump_moments: Vec<f64>,
    parity: Parity,
}

/// An immutable, cheaply clonable test function.
#[derive(Debug, Clone)]
pub struct TestFunction {
    inner: Arc<Inner>,
}

impl TestFunction {
    fn build(
        halfwidth: f64,
        shift: f64,
        weights: Vec<f64>,
        lambda: Vec<f64>,
        claimed_class: Option<usize>,
    ) -> Result<Self, MollifierError> {
        let parity = if shift != 0.0 {
            Parity::None
        } else {
            let even = weights.iter().enumerate().all(|(k, w)| k % 2 == 0 || *w == 0.0);
            let odd = weights.iter().enumerate().all(|(k, w)| k % 2 == 1 || *w == 0.0);
            match (even, odd) {
                (true, false) | (true, true) => Parity::Even,
                (false, true) => Parity::Odd,
                (false, false) => Parity::None,
            }
        };
        let mut tf = TestFunction {
            inner: Arc::new(Inner {
                halfwidth,
                shift,
                weights,
                lambda,
                claimed_class,
                moments: Vec::new(),
                bump_moments: Vec::new(),
                parity,
            }),
        };
        let cache_order = claimed_class.unwrap_or(0).max(1) + 1;
        let bump_moments = (0..=cache_order)
            .map(|r| raw_bump_moment(halfwidth, r))
            .collect::<Result<Vec<_>, _>>()?;
        Arc::get_mut(&mut tf.inner).expect("fresh Arc").bump_moments = bump_moments;
        let moments = (0..=cache_order)
            .map(|r| tf.compute_moment(r))
            .collect::<Result<Vec<_>, _>>()?;
        Arc::get_mut(&mut tf.inner).expect("fresh Arc").moments = moments;
        Ok(tf)
    }

    pub fn support(&self) -> (f64, f64) {
        let Inner { halfwidth, shift, .. } = *self.inner;
        (shift - halfwidth, shift + halfwidth)
    }

    pub fn halfwidth(&self) -> f64 {
        self.inner.halfwidth
    }

    pub fn shift(&self) -> f64 {
        self.inner.shift
    }

    /// Construction coefficients `lambda_k` on the base and its derivatives.
    pub fn lambda(&self) -> &[f64] {
        &self.inner.lambda
    }

    /// Weights on derivatives of the raw bump `exp(1/((x/h)^2 - 1))`.
    pub fn weights(&self) -> &[f64] {
        &self.inner.weights
    }

    pub fn claimed_class(&self) -> Option<usize> {
        self.inner.claimed_class
    }

    pub fn parity(&self) -> Parity {
        self.inner.parity
    }

    /// Cached moments `m_0..m_r` computed at construction.
    pub fn moment_cache(&self) -> &[f64] {
        &self.inner.moments
    }

    /// Value and derivatives up to order `n` at `x`.
    pub fn jet(&self, x: f64, n: usize) -> Jet {
        let inner = &*self.inner;
        let z = x - inner.shift;
        if z.abs() >= inner.halfwidth {
            return Jet::zero(n);
        }
        let k_max = inner.weights.len() - 1;
        let base = eval_jet(&SmoothPrimitive::Bump(inner.halfwidth), z, k_max + n);
        let coeffs = base.coeffs();
        let out = (0..=n)
            .map(|m| {
                inner
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * coeffs[k + m])
                    .sum()
            })
            .collect();
        Jet::from_raw(out)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x, 0).value()
    }

    pub fn derivative(&self, x: f64, n: usize) -> f64 {
        self.jet(x, n).derivative(n)
    }

    fn bump_moment(&self, i: usize) -> Result<f64, MollifierError> {
        match self.inner.bump_moments.get(i) {
            Some(&b) => Ok(b),
            None => raw_bump_moment(self.inner.halfwidth, i),
        }
    }

    fn compute_moment(&self, r: usize) -> Result<f64, MollifierError> {
        let odd_r = r % 2 == 1;
        match self.inner.parity {
            Parity::Even if odd_r => return Ok(0.0),
            Parity::Odd if !odd_r => return Ok(0.0),
            _ => {}
        }
        // Centered moments mu_i = int u^i phi(u + shift) du, then the binomial
        // expansion of (u + shift)^r.
        let weights = &self.inner.weights;
        let mut centered = Vec::with_capacity(r + 1);
        for i in 0..=r {
            let mut mu = 0.0;
            for (j, w) in weights.iter().enumerate().take(i + 1) {
                let falling: f64 = ((i - j + 1)..=i).map(|t| t as f64).product();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                mu += w * sign * falling * self.bump_moment(i - j)?;
            }
            centered.push(mu);
        }
        let shift = self.inner.shift;
        if shift == 0.0 {
            return Ok(centered[r]);
        }
        let mut binom = 1.0;
        let mut total = 0.0;
        for (i, mu) in centered.iter().enumerate() {
            total += binom * shift.powi((r - i) as i32) * mu;
            binom = binom * (r - i) as f64 / (i + 1) as f64;
        }
        Ok(total)
    }

    /// Moment `int z^r phi(z) dz` by direct quadrature of `z^r phi(z)`.
    ///
    /// Independent of the integration-by-parts route used by [`moment`](Self::moment),
    /// but only accurate while `int |phi|` stays moderate (low class orders).
    pub fn moment_by_quadrature(&self, r: usize) -> Result<f64, MollifierError> {
        let support = self.support();
        let f = Integrand::new(|z: f64| z.powi(r as i32) * self.value(z), support);
        Ok(integrate(&f, support, MOMENT_TOL)?.value)
    }

    /// Moment `int z^r phi(z) dz`, from the cache when available.
    pub fn moment(&self, r: usize) -> Result<f64, MollifierError> {
        match self.inner.moments.get(r) {
            Some(&m) => Ok(m),
            None => self.compute_moment(r),
        }
    }
}

/// `int u^i exp(1/((u/h)^2 - 1)) du`; odd orders vanish by symmetry.
fn raw_bump_moment(halfwidth: f64, i: usize) -> Result<f64, MollifierError> {
    if i % 2 == 1 {
        return Ok(0.0);
    }
    let bump = SmoothPrimitive::Bump(halfwidth);
    let support = (-halfwidth, halfwidth);
    let f = Integrand::new(|u: f64| u.powi(i as i32) * bump.value(u), support);
    Ok(integrate(&f, support, MOMENT_TOL)?.value)
}

/// Moments `m_0..=m_{r_max}` of `phi`.
pub fn moments(phi: &TestFunction, r_max: usize) -> Result<Vec<f64>, MollifierError> {
    (0..=r_max).map(|r| phi.moment(r)).collect()
}

/// Whether `phi` passes the numerical membership test for `A_q`.
pub fn satisfies_class(phi: &TestFunction, q: usize) -> Result<bool, MollifierError> {
    let m = moments(phi, q)?;
    Ok((m[0] - 1.0).abs() <= NORMALIZATION_TOL && m[1..].iter().all(|v| v.abs() <= VANISHING_TOL))
}

/// The even bump on `(-h, h)` normalized to unit mass. Its first moment
/// vanishes by symmetry, so it is tagged as a member of `A_1`.
pub fn make_bump(halfwidth: f64) -> Result<TestFunction, MollifierError> {
    if !(halfwidth > 0.0) || !halfwidth.is_finite() {
        return Err(MollifierError::InvalidParameter(format!(
            "halfwidth must be positive and finite, got {halfwidth}"
        )));
    }
    if !(halfwidth * halfwidth).is_normal() || !(1.0 / halfwidth).is_normal() {
        return Err(MollifierError::InvalidParameter(format!(
            "halfwidth {halfwidth} is outside the representable range"
        )));
    }
    let raw = TestFunction::build(halfwidth, 0.0, vec![1.0], vec![1.0], None)?;
    let mass = raw.moment(0)?;
    TestFunction::build(halfwidth, 0.0, vec![1.0 / mass], vec![1.0], Some(1))
}

/// Builds `phi = sum_{k=0}^{q} lambda_k base^(k)` with `m_0(phi) = 1` and
/// `m_r(phi) = 0` for `1 <= r <= q`.
///
/// Integration by parts gives `int z^r base^(k) dz = (-1)^k r!/(r-k)! M_{r-k}`
/// for `r >= k` (zero otherwise), where `M` are the base moments, so the
/// conditions form a lower-triangular system solved front to back.
pub fn construct_aq(q: usize, base: &TestFunction) -> Result<TestFunction, MollifierError> {
    if q > MAX_CLASS {
        return Err(MollifierError::ClassTooLarge(q));
    }
    let base_moments = moments(base, q)?;
    let m0 = base_moments[0];
    if m0 == 0.0 || !m0.is_finite() {
        return Err(MollifierError::SingularSystem(m0));
    }
    // falling[r][k] = r! / (r-k)!
    let falling = |r: usize, k: usize| -> f64 { ((r - k + 1)..=r).map(|i| i as f64).product() };
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };

    let mut lambda = vec![0.0; q + 1];
    lambda[0] = 1.0 / m0;
    for r in 1..=q {
        let partial: f64 = (0..r)
            .map(|k| lambda[k] * sign(k) * falling(r, k) * base_moments[r - k])
            .sum();
        lambda[r] = -partial / (sign(r) * falling(r, r) * m0);
    }

    // Fold the base's own derivative weights into raw-bump weights.
    let base_w = base.weights();
    let mut weights = vec![0.0; base_w.len() + q];
    for (k, l) in lambda.iter().enumerate() {
        for (j, w) in base_w.iter().enumerate() {
            weights[j + k] += l * w;
        }
    }
    let phi = TestFunction::build(base.halfwidth(), base.shift(), weights, lambda, Some(q))?;

    let m = moments(&phi, q)?;
    if (m[0] - 1.0).abs() > NORMALIZATION_TOL {
        return Err(MollifierError::ClassCheck { q, r: 0, value: m[0] });
    }
    if let Some((r, &value)) = m.iter().enumerate().skip(1).find(|(_, v)| v.abs() > VANISHING_TOL) {
        return Err(MollifierError::ClassCheck { q, r, value });
    }
    let (a, b) = phi.support();
    let mut probe = (1..FINITE_PROBES).map(|i| a + (b - a) * i as f64 / FINITE_PROBES as f64);
    if let Some(x) = probe.find(|&x| !(phi.value(x).is_finite() && phi.derivative(x, 1).is_finite())) {
        return Err(MollifierError::InvalidParameter(format!(
            "constructed function is not finite at x = {x}"
        )));
    }
    Ok(phi)
}

/// `phi^y(x) = phi(x - y)`.
pub fn translate(phi: &TestFunction, y: f64) -> Result<TestFunction, MollifierError> {
    if y == 0.0 {
        return Ok(phi.clone());
    }
    let inner = &*phi.inner;
    TestFunction::build(
        inner.halfwidth,
        inner.shift + y,
        inner.weights.clone(),
        inner.lambda.clone(),
        None,
    )
}

/// A test function viewed through the scaling `phi_eps(x) = phi(x/eps)/eps`.
///
/// Anything that can be fed to a generalized function implements this;
/// an unscaled [`TestFunction`] is the case `eps = 1`.
pub trait Kernel: Send + Sync {
    fn parent(&self) -> &TestFunction;
    fn epsilon(&self) -> f64;

    fn support(&self) -> (f64, f64) {
        let (a, b) = self.parent().support();
        let eps = self.epsilon();
        (eps * a, eps * b)
    }

    fn value(&self, x: f64) -> f64 {
        let eps = self.epsilon();
        self.parent().value(x / eps) / eps
    }

    /// Derivatives up to order `n`: `phi_eps^(m)(x) = eps^(-1-m) phi^(m)(x/eps)`.
    fn jet(&self, x: f64, n: usize) -> Jet {
        let eps = self.epsilon();
        let j = self.parent().jet(x / eps, n);
        let mut divisor = eps;
        let coeffs = j
            .into_coeffs()
            .into_iter()
            .map(|c| {
                let v = c / divisor;
                divisor *= eps;
                v
            })
            .collect();
        Jet::from_raw(coeffs)
    }
}

impl Kernel for TestFunction {
    fn parent(&self) -> &TestFunction {
        self
    }
    fn epsilon(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct ScaledTestFunction {
    parent: TestFunction,
    epsilon: f64,
}

impl Kernel for ScaledTestFunction {
    fn parent(&self) -> &TestFunction {
        &self.parent
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl ScaledTestFunction {
    /// Moment `int x^r phi_eps(x) dx = eps^r m_r(phi)`, computed by quadrature
    /// over the scaled support.
    pub fn moment(&self, r: usize) -> Result<f64, MollifierError> {
        let support = Kernel::support(self);
        let f = Integrand::new(|x: f64| x.powi(r as i32) * Kernel::value(self, x), support);
        Ok(integrate(&f, support, MOMENT_TOL)?.value)
    }
}

pub fn scale(phi: &TestFunction, epsilon: f64) -> Result<ScaledTestFunction, MollifierError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(MollifierError::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    Ok(ScaledTestFunction {
        parent: phi.clone(),
        epsilon,
    })
}
