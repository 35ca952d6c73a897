//! Truncated derivative jets and the smooth primitives evaluated with them.
//!
//! A [`Jet`] of order `n` at a point holds `(f(x), f'(x), ..., f^(n)(x))`.
//! Products follow the Leibniz rule, and elementary functions are propagated
//! through their defining differential equations, so every coefficient is
//! exact up to rounding.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet orders differ ({left} vs {right})")]
    OrderMismatch { left: usize, right: usize },
    #[error("jet coefficient {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("a jet needs at least one coefficient")]
    Empty,
}

/// Derivatives `f^(k)(x)` for `k = 0..=order` at a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

/// Binomial coefficients `C(k, 0..=k)`.
fn binomial_row(k: usize) -> Vec<f64> {
    let mut row = vec![1.0; k + 1];
    for j in 1..k {
        row[j] = row[j - 1] * (k - j + 1) as f64 / j as f64;
    }
    // integer-valued; rounding removes the division residue
    row.iter_mut().for_each(|c| *c = c.round());
    row
}

impl Jet {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, JetError> {
        if coeffs.is_empty() {
            return Err(JetError::Empty);
        }
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(JetError::NonFinite { index, value });
        }
        Ok(Self { coeffs })
    }

    /// Unchecked constructor for coefficients produced by jet arithmetic.
    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::from_raw(vec![0.0; order + 1])
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut j = Self::zero(order);
        j.coeffs[0] = c;
        j
    }

    /// The independent variable `x` itself.
    pub fn variable(x: f64, order: usize) -> Self {
        let mut j = Self::constant(x, order);
        if order >= 1 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn derivative(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Drops the first `k` coefficients: the jet of `f^(k)` of order `n - k`.
    pub fn shift_down(&self, k: usize) -> Self {
        Self::from_raw(self.coeffs[k..].to_vec())
    }

    /// Truncates to order `n` (no-op when already of lower order).
    pub fn truncate(mut self, n: usize) -> Self {
        self.coeffs.truncate(n + 1);
        self
    }

    fn check_order(&self, other: &Jet) -> Result<(), JetError> {
        if self.order() == other.order() {
            Ok(())
        } else {
            Err(JetError::OrderMismatch {
                left: self.order(),
                right: other.order(),
            })
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_order(other)?;
        Ok(self.add(other))
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_order(other)?;
        Ok(self.mul(other))
    }

    pub(crate) fn add(&self, other: &Jet) -> Jet {
        debug_assert_eq!(self.order(), other.order());
        Jet::from_raw(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect())
    }

    /// Leibniz product: `(fg)^(k) = sum_j C(k, j) f^(j) g^(k-j)`.
    pub(crate) fn mul(&self, other: &Jet) -> Jet {
        debug_assert_eq!(self.order(), other.order());
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        for (k, slot) in out.iter_mut().enumerate() {
            let row = binomial_row(k);
            *slot = (0..=k).map(|j| row[j] * self.coeffs[j] * other.coeffs[k - j]).sum();
        }
        Jet::from_raw(out)
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet::from_raw(self.coeffs.iter().map(|a| c * a).collect())
    }

    pub fn offset(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += c;
        j
    }

    /// `1 / f`, from `f * (1/f) = 1` differentiated `k` times.
    pub fn recip(&self) -> Jet {
        let n = self.order();
        let t = &self.coeffs;
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0 / t[0];
        for k in 1..=n {
            let row = binomial_row(k);
            let s: f64 = (1..=k).map(|j| row[j] * t[j] * v[k - j]).sum();
            v[k] = -s * v[0];
        }
        Jet::from_raw(v)
    }

    /// `exp(f)`, from `g' = f' g`.
    pub fn exp(&self) -> Jet {
        let n = self.order();
        let u = &self.coeffs;
        let mut g = vec![0.0; n + 1];
        g[0] = u[0].exp();
        for k in 0..n {
            let row = binomial_row(k);
            g[k + 1] = (0..=k).map(|j| row[j] * u[j + 1] * g[k - j]).sum();
        }
        Jet::from_raw(g)
    }

    /// `tanh(f)`, from `g' = (1 - g^2) f'`.
    pub fn tanh(&self) -> Jet {
        let n = self.order();
        let w = &self.coeffs;
        let mut g = vec![0.0; n + 1];
        let mut s = vec![0.0; n + 1];
        g[0] = w[0].tanh();
        for k in 0..=n {
            // s = 1 - g^2 needs only g[..=k]
            let row = binomial_row(k);
            let sq: f64 = (0..=k).map(|i| row[i] * g[i] * g[k - i]).sum();
            s[k] = if k == 0 { 1.0 - sq } else { -sq };
            if k < n {
                g[k + 1] = (0..=k).map(|j| row[j] * s[j] * w[k + 1 - j]).sum();
            }
        }
        Jet::from_raw(g)
    }

    /// `(sin f, cos f)` propagated together.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.order();
        let w = &self.coeffs;
        let mut s = vec![0.0; n + 1];
        let mut c = vec![0.0; n + 1];
        s[0] = w[0].sin();
        c[0] = w[0].cos();
        for k in 0..n {
            let row = binomial_row(k);
            s[k + 1] = (0..=k).map(|j| row[j] * c[j] * w[k + 1 - j]).sum();
            c[k + 1] = -(0..=k).map(|j| row[j] * s[j] * w[k + 1 - j]).sum::<f64>();
        }
        (Jet::from_raw(s), Jet::from_raw(c))
    }
}

/// Operations accepted by [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetOp {
    Add,
    Mul,
    /// Multiply the first operand by a constant; the second operand must still
    /// have matching order.
    Scalar(f64),
}

pub fn jet_arith(a: &Jet, b: &Jet, op: JetOp) -> Result<Jet, JetError> {
    a.check_order(b)?;
    Ok(match op {
        JetOp::Add => a.add(b),
        JetOp::Mul => a.mul(b),
        JetOp::Scalar(c) => a.scale(c),
    })
}

/// Smooth functions on the real line with derivatives of every order.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothPrimitive {
    /// `sum_i c_i x^i`
    Polynomial(Vec<f64>),
    /// `tanh(k x)`
    TanhScaled(f64),
    Sine,
    Exponential,
    /// `exp(-x^2)`
    Gaussian,
    /// `exp(1 / ((x/h)^2 - 1))` on `(-h, h)`, zero elsewhere.
    Bump(f64),
    /// `sum_i w_i f_i`
    Combination(Vec<(f64, SmoothPrimitive)>),
}

/// Below this exponent `exp(u)` has underflowed past every polynomial
/// prefactor the bump derivatives can carry.
fn bump_cutoff() -> f64 {
    f64::MIN_POSITIVE.ln() + 50.0
}

impl SmoothPrimitive {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            SmoothPrimitive::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            SmoothPrimitive::TanhScaled(k) => (k * x).tanh(),
            SmoothPrimitive::Sine => x.sin(),
            SmoothPrimitive::Exponential => x.exp(),
            SmoothPrimitive::Gaussian => (-x * x).exp(),
            SmoothPrimitive::Bump(h) => {
                let s = x / h;
                if s.abs() >= 1.0 {
                    return 0.0;
                }
                let u = 1.0 / (s * s - 1.0);
                if u < bump_cutoff() {
                    0.0
                } else {
                    u.exp()
                }
            }
            SmoothPrimitive::Combination(terms) => terms.iter().map(|(w, f)| w * f.value(x)).sum(),
        }
    }

    /// Support of the function when it is compact.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            SmoothPrimitive::Bump(h) => Some((-h, *h)),
            _ => None,
        }
    }
}

impl fmt::Display for SmoothPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, xs: impl Iterator<Item = String>) -> fmt::Result {
            let v: Vec<String> = xs.collect();
            write!(f, "{}", v.join(","))
        }
        match self {
            SmoothPrimitive::Polynomial(c) => {
                write!(f, "poly(")?;
                list(f, c.iter().map(|x| x.to_string()))?;
                write!(f, ")")
            }
            SmoothPrimitive::TanhScaled(k) if *k == 10.0 => write!(f, "tanh10"),
            SmoothPrimitive::TanhScaled(k) => write!(f, "tanh({k})"),
            SmoothPrimitive::Sine => write!(f, "sin"),
            SmoothPrimitive::Exponential => write!(f, "exp"),
            SmoothPrimitive::Gaussian => write!(f, "gauss"),
            SmoothPrimitive::Bump(h) => write!(f, "bump({h})"),
            SmoothPrimitive::Combination(terms) => {
                write!(f, "combination[")?;
                list(f, terms.iter().map(|(w, p)| format!("{w}:{p}")))?;
                write!(f, "]")
            }
        }
    }
}

/// Jet of `f` at `x` up to order `n`.
pub fn eval_jet(f: &SmoothPrimitive, x: f64, n: usize) -> Jet {
    let var = Jet::variable(x, n);
    match f {
        SmoothPrimitive::Polynomial(c) => c
            .iter()
            .rev()
            .fold(Jet::zero(n), |acc, &ci| acc.mul(&var).offset(ci)),
        SmoothPrimitive::TanhScaled(k) => var.scale(*k).tanh(),
        SmoothPrimitive::Sine => var.sin_cos().0,
        SmoothPrimitive::Exponential => Jet::from_raw(vec![x.exp(); n + 1]),
        SmoothPrimitive::Gaussian => var.mul(&var).scale(-1.0).exp(),
        SmoothPrimitive::Bump(h) => bump_jet(*h, x, n),
        SmoothPrimitive::Combination(terms) => terms
            .iter()
            .fold(Jet::zero(n), |acc, (w, p)| acc.add(&eval_jet(p, x, n).scale(*w))),
    }
}

/// `exp(u)` with `u = 1/(s^2 - 1)`, `s = x/h`, carried as jets in `x`.
fn bump_jet(h: f64, x: f64, n: usize) -> Jet {
    let s0 = x / h;
    if s0.abs() >= 1.0 {
        return Jet::zero(n);
    }
    if 1.0 / (s0 * s0 - 1.0) < bump_cutoff() {
        return Jet::zero(n);
    }
    let s = Jet::variable(x, n).scale(1.0 / h);
    let u = s.mul(&s).offset(-1.0).recip();
    u.exp()
}
