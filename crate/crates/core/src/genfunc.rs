//! Generalized functions as expression DAGs over embedded distributions.
//!
//! A [`GeneralizedFunction`] maps a test function `phi` to the real function
//! `y -> A[phi](y)`. Leaves are the embeddings of the delta, the Heaviside
//! step, a smooth `f` by convolution (`bar`) or by ignoring `phi` (`tilde`),
//! and the null example `phi(1)`. Combinators are pointwise sum, product,
//! scalar multiple and `y`-derivative.
//!
//! Evaluation always produces a [`Jet`] in `y`, so derivatives are pushed to
//! the leaves structurally (Leibniz for products) and never taken by finite
//! differences.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::jets::{eval_jet, Jet, SmoothPrimitive};
use crate::mollifier::Kernel;
use crate::quadrature::{integrate, Integrand, QuadError};

/// Quadrature tolerance for the convolution and step embeddings.
pub const EMBED_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("quadrature failed at {path}: {source}")]
    Quadrature {
        path: String,
        #[source]
        source: QuadError,
    },
    #[error("non-finite value at {path} (y = {y})")]
    NonFinite { path: String, y: f64 },
}

impl EvalError {
    fn within(self, step: &str) -> Self {
        match self {
            EvalError::Quadrature { path, source } => EvalError::Quadrature {
                path: format!("{step}/{path}"),
                source,
            },
            EvalError::NonFinite { path, y } => EvalError::NonFinite {
                path: format!("{step}/{path}"),
                y,
            },
        }
    }
}

/// User-supplied family `(eps, y, n) -> d^n/dy^n g_eps(y)`.
pub type FamilyFn = dyn Fn(f64, f64, usize) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Node {
    /// `phi(-y)`: the embedded delta.
    DeltaBar,
    /// `int theta(x) phi(x - y) dx`.
    HeavisideBar,
    /// `int f(x) phi(x - y) dx`.
    RegularBar(SmoothPrimitive),
    /// `f(y)`, independent of `phi`.
    Tilde(SmoothPrimitive),
    /// `phi(1)`, independent of `y`.
    NullExample,
    /// A closed-form family that only sees the scale `eps` of the kernel.
    Family { name: String, f: Arc<FamilyFn> },
    Sum(GeneralizedFunction, GeneralizedFunction),
    Product(GeneralizedFunction, GeneralizedFunction),
    Scalar(f64, GeneralizedFunction),
    Derivative(usize, GeneralizedFunction),
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::DeltaBar => write!(f, "DeltaBar"),
            Node::HeavisideBar => write!(f, "HeavisideBar"),
            Node::RegularBar(p) => write!(f, "RegularBar({p:?})"),
            Node::Tilde(p) => write!(f, "Tilde({p:?})"),
            Node::NullExample => write!(f, "NullExample"),
            Node::Family { name, .. } => write!(f, "Family({name})"),
            Node::Sum(a, b) => write!(f, "Sum({a:?}, {b:?})"),
            Node::Product(a, b) => write!(f, "Product({a:?}, {b:?})"),
            Node::Scalar(c, a) => write!(f, "Scalar({c}, {a:?})"),
            Node::Derivative(n, a) => write!(f, "Derivative({n}, {a:?})"),
        }
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        use Node::*;
        match (self, other) {
            (DeltaBar, DeltaBar) | (HeavisideBar, HeavisideBar) | (NullExample, NullExample) => true,
            (RegularBar(a), RegularBar(b)) | (Tilde(a), Tilde(b)) => a == b,
            (Family { name: n1, f: f1 }, Family { name: n2, f: f2 }) => n1 == n2 && Arc::ptr_eq(f1, f2),
            (Sum(a1, b1), Sum(a2, b2)) | (Product(a1, b1), Product(a2, b2)) => a1 == a2 && b1 == b2,
            (Scalar(c1, a1), Scalar(c2, a2)) => c1 == c2 && a1 == a2,
            (Derivative(n1, a1), Derivative(n2, a2)) => n1 == n2 && a1 == a2,
            _ => false,
        }
    }
}

/// Immutable, shareable handle on a DAG node.
#[derive(Clone, PartialEq)]
pub struct GeneralizedFunction(Arc<Node>);

impl fmt::Debug for GeneralizedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl GeneralizedFunction {
    pub fn new(node: Node) -> Self {
        Self(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn delta() -> Self {
        Self::new(Node::DeltaBar)
    }

    pub fn heaviside() -> Self {
        Self::new(Node::HeavisideBar)
    }

    pub fn bar(f: SmoothPrimitive) -> Self {
        Self::new(Node::RegularBar(f))
    }

    pub fn tilde(f: SmoothPrimitive) -> Self {
        Self::new(Node::Tilde(f))
    }

    pub fn null_example() -> Self {
        Self::new(Node::NullExample)
    }

    pub fn family(name: impl Into<String>, f: impl Fn(f64, f64, usize) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(Node::Family {
            name: name.into(),
            f: Arc::new(f),
        })
    }

    pub fn sum(a: Self, b: Self) -> Self {
        Self::new(Node::Sum(a, b))
    }

    pub fn product(a: Self, b: Self) -> Self {
        Self::new(Node::Product(a, b))
    }

    pub fn scalar(c: f64, a: Self) -> Self {
        Self::new(Node::Scalar(c, a))
    }

    pub fn derivative(n: usize, a: Self) -> Self {
        Self::new(Node::Derivative(n, a))
    }

    /// Whether some leaf of the DAG concentrates on the reflected support of
    /// the kernel, so its features shrink with `eps`.
    pub fn is_kernel_localized(&self) -> bool {
        match self.node() {
            Node::DeltaBar | Node::HeavisideBar => true,
            Node::RegularBar(_) | Node::Tilde(_) | Node::NullExample | Node::Family { .. } => false,
            Node::Sum(a, b) | Node::Product(a, b) => a.is_kernel_localized() || b.is_kernel_localized(),
            Node::Scalar(_, a) | Node::Derivative(_, a) => a.is_kernel_localized(),
        }
    }
}

impl Add for GeneralizedFunction {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::sum(self, rhs)
    }
}

impl Sub for GeneralizedFunction {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::sum(self, Self::scalar(-1.0, rhs))
    }
}

impl Mul for GeneralizedFunction {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::product(self, rhs)
    }
}

impl Neg for GeneralizedFunction {
    type Output = Self;
    fn neg(self) -> Self {
        Self::scalar(-1.0, self)
    }
}

// Printing follows the expression grammar: '+'/'-' loosest, then '*', with
// NUMBER '*' factor for scalars and a subtraction for Scalar(-1, _) on the
// right of a sum.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Level {
    Sum,
    Term,
    Factor,
}

fn write_gf(g: &GeneralizedFunction, level: Level, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let own = match g.node() {
        Node::Sum(..) => Level::Sum,
        Node::Product(..) => Level::Term,
        _ => Level::Factor,
    };
    if own < level {
        write!(f, "(")?;
        write_gf(g, Level::Sum, f)?;
        return write!(f, ")");
    }
    match g.node() {
        Node::DeltaBar => write!(f, "delta"),
        Node::HeavisideBar => write!(f, "heaviside"),
        Node::NullExample => write!(f, "nullex"),
        Node::RegularBar(p) => write!(f, "bar({p})"),
        Node::Tilde(p) => write!(f, "tilde({p})"),
        Node::Family { name, .. } => write!(f, "<{name}>"),
        Node::Sum(a, b) => {
            write_gf(a, Level::Sum, f)?;
            match b.node() {
                Node::Scalar(c, inner) if *c == -1.0 => {
                    write!(f, " - ")?;
                    write_gf(inner, Level::Term, f)
                }
                _ => {
                    write!(f, " + ")?;
                    write_gf(b, Level::Term, f)
                }
            }
        }
        Node::Product(a, b) => {
            write_gf(a, Level::Term, f)?;
            write!(f, "*")?;
            write_gf(b, Level::Factor, f)
        }
        Node::Scalar(c, a) => {
            write!(f, "{c}*")?;
            write_gf(a, Level::Factor, f)
        }
        Node::Derivative(n, a) => {
            if *n == 1 {
                write!(f, "D(")?;
            } else {
                write!(f, "D^{n}(")?;
            }
            write_gf(a, Level::Sum, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for GeneralizedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_gf(self, Level::Sum, f)
    }
}

fn quad_err(path: &str) -> impl FnOnce(QuadError) -> EvalError + '_ {
    move |source| EvalError::Quadrature {
        path: path.to_string(),
        source,
    }
}

/// `y`-jet of `A[phi](y)` up to order `n`.
pub fn evaluate_jet<K: Kernel + ?Sized>(
    a: &GeneralizedFunction,
    phi: &K,
    y: f64,
    n: usize,
) -> Result<Jet, EvalError> {
    match a.node() {
        Node::DeltaBar => Ok(delta_jet(phi, y, n)),
        Node::HeavisideBar => heaviside_jet(phi, y, n),
        Node::RegularBar(f) => regular_bar_jet(f, phi, y, n),
        Node::Tilde(f) => Ok(eval_jet(f, y, n)),
        Node::NullExample => {
            let mut j = Jet::zero(n);
            j = j.offset(phi.value(1.0));
            Ok(j)
        }
        Node::Family { f, .. } => {
            let eps = phi.epsilon();
            Ok(Jet::from_raw((0..=n).map(|k| f(eps, y, k)).collect()))
        }
        Node::Sum(l, r) => {
            let lj = evaluate_jet(l, phi, y, n).map_err(|e| e.within("sum.left"))?;
            let rj = evaluate_jet(r, phi, y, n).map_err(|e| e.within("sum.right"))?;
            Ok(lj.add(&rj))
        }
        Node::Product(l, r) => {
            let lj = evaluate_jet(l, phi, y, n).map_err(|e| e.within("product.left"))?;
            let rj = evaluate_jet(r, phi, y, n).map_err(|e| e.within("product.right"))?;
            Ok(lj.mul(&rj))
        }
        Node::Scalar(c, child) => Ok(evaluate_jet(child, phi, y, n)
            .map_err(|e| e.within("scalar"))?
            .scale(*c)),
        Node::Derivative(m, child) => Ok(evaluate_jet(child, phi, y, n + m)
            .map_err(|e| e.within("derivative"))?
            .shift_down(*m)),
    }
}

/// `d^k/dy^k phi_eps(-y) = (-1)^k phi_eps^(k)(-y)`.
fn delta_jet<K: Kernel + ?Sized>(phi: &K, y: f64, n: usize) -> Jet {
    let j = phi.jet(-y, n);
    let coeffs = j
        .into_coeffs()
        .into_iter()
        .enumerate()
        .map(|(k, c)| if k % 2 == 0 { c } else { -c })
        .collect();
    Jet::from_raw(coeffs)
}

/// `theta_bar[phi](y) = int_{-y}^inf phi(u) du`; each `y`-derivative moves onto
/// `phi`, so order `k >= 1` is the delta jet of order `k - 1`.
fn heaviside_jet<K: Kernel + ?Sized>(phi: &K, y: f64, n: usize) -> Result<Jet, EvalError> {
    let parent = phi.parent();
    let eps = phi.epsilon();
    let (a, b) = parent.support();
    // substitute u = eps z
    let lo = (-y / eps).max(a);
    let value = if lo >= b {
        0.0
    } else {
        let f = Integrand::new(|z| parent.value(z), (a, b));
        integrate(&f, (lo, b), EMBED_TOL).map_err(quad_err("heaviside"))?.value
    };
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(value);
    if n >= 1 {
        coeffs.extend_from_slice(delta_jet(phi, y, n - 1).coeffs());
    }
    Ok(Jet::from_raw(coeffs))
}

/// `d^k/dy^k bar_f[phi_eps](y) = int f^(k)(y + eps z) phi(z) dz` over the
/// support of `phi`, i.e. the window `y + eps [a, b]` in `x`.
fn regular_bar_jet<K: Kernel + ?Sized>(
    f: &SmoothPrimitive,
    phi: &K,
    y: f64,
    n: usize,
) -> Result<Jet, EvalError> {
    let parent = phi.parent();
    let eps = phi.epsilon();
    let support = parent.support();
    let path = format!("bar({f})");
    let coeffs = (0..=n)
        .map(|k| {
            let g = Integrand::new(
                |z: f64| {
                    let fk = if k == 0 {
                        f.value(y + eps * z)
                    } else {
                        eval_jet(f, y + eps * z, k).derivative(k)
                    };
                    fk * parent.value(z)
                },
                support,
            );
            integrate(&g, support, EMBED_TOL)
                .map(|r| r.value)
                .map_err(quad_err(&path))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Jet::from_raw(coeffs))
}

/// `d^n/dy^n bar_f[phi_eps](y)` with every derivative moved onto the kernel:
/// `(-1)^n int f(x) phi_eps^(n)(x - y) dx`. Mathematically equal to the
/// `RegularBar` evaluation; kept as an independent route for cross-checks.
pub fn regular_bar_via_kernel<K: Kernel + ?Sized>(
    f: &SmoothPrimitive,
    phi: &K,
    y: f64,
    n: usize,
) -> Result<f64, EvalError> {
    let (a, b) = phi.support();
    let window = (y + a, y + b);
    let g = Integrand::new(|x: f64| f.value(x) * phi.jet(x - y, n).derivative(n), window);
    let v = integrate(&g, window, EMBED_TOL).map_err(quad_err("bar"))?.value;
    Ok(if n % 2 == 0 { v } else { -v })
}

pub fn evaluate<K: Kernel + ?Sized>(a: &GeneralizedFunction, phi: &K, y: f64) -> Result<f64, EvalError> {
    evaluate_derivative(a, phi, y, 0)
}

/// `d^n/dy^n A[phi](y)`.
pub fn evaluate_derivative<K: Kernel + ?Sized>(
    a: &GeneralizedFunction,
    phi: &K,
    y: f64,
    n: usize,
) -> Result<f64, EvalError> {
    let v = evaluate_jet(a, phi, y, n)?.derivative(n);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite {
            path: a.to_string(),
            y,
        })
    }
}

/// Elementwise [`evaluate_derivative`] over `ys`, in input order.
pub fn evaluate_grid<K: Kernel + ?Sized>(
    a: &GeneralizedFunction,
    phi: &K,
    ys: &[f64],
    n: usize,
) -> Result<Vec<f64>, EvalError> {
    ys.par_iter().map(|&y| evaluate_derivative(a, phi, y, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::{construct_aq, make_bump, scale, translate, TestFunction};

    type Gf = GeneralizedFunction;

    fn tanh10() -> SmoothPrimitive {
        SmoothPrimitive::TanhScaled(10.0)
    }

    fn phi1() -> TestFunction {
        make_bump(1.0).unwrap()
    }

    fn phi3() -> TestFunction {
        construct_aq(3, &phi1()).unwrap()
    }

    fn central(g: impl Fn(f64) -> f64, y: f64, h: f64) -> f64 {
        let d = |h: f64| (g(y + h) - g(y - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    #[test]
    fn delta_is_reflection() {
        let phi = translate(&phi3(), 0.2).unwrap();
        for &y in &[-0.9, -0.3, 0.0, 0.15, 0.7] {
            assert_eq!(evaluate(&Gf::delta(), &phi, y).unwrap(), phi.value(-y));
            let sq = evaluate(&(Gf::delta() * Gf::delta()), &phi, y).unwrap();
            assert_eq!(sq, phi.value(-y).powi(2));
        }
    }

    #[test]
    fn delta_scaled_reflection_is_exact() {
        let phi = phi3();
        for &eps in &[0.5, 0.1, 0.01] {
            let s = scale(&phi, eps).unwrap();
            for &y in &[-0.004, 0.0, 0.003, 0.03] {
                let got = evaluate(&Gf::delta(), &s, y).unwrap();
                assert_eq!(got, phi.value(-y / eps) / eps);
            }
        }
    }

    #[test]
    fn heaviside_halves_even_mass() {
        let v = evaluate(&Gf::heaviside(), &phi1(), 0.0).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        let s = scale(&phi3(), 0.1).unwrap();
        assert!((evaluate(&Gf::heaviside(), &s, 0.0).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(evaluate(&Gf::heaviside(), &s, -0.5).unwrap(), 0.0);
        assert!((evaluate(&Gf::heaviside(), &s, 0.5).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tilde_ignores_phi() {
        let v = evaluate(&Gf::tilde(tanh10()), &phi3(), 0.3).unwrap();
        assert_eq!(v, 3.0f64.tanh());
        let d2 = evaluate_derivative(&Gf::tilde(SmoothPrimitive::Sine), &phi1(), 0.4, 2).unwrap();
        assert!((d2 + 0.4f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn null_example_is_phi_at_one() {
        let phi = translate(&phi1(), 0.5).unwrap();
        assert_eq!(evaluate(&Gf::null_example(), &phi, -3.0).unwrap(), phi.value(1.0));
        assert_eq!(evaluate_derivative(&Gf::null_example(), &phi, 0.2, 1).unwrap(), 0.0);
        for &eps in &[0.99, 0.5, 0.01] {
            let s = scale(&phi1(), eps).unwrap();
            assert_eq!(evaluate(&Gf::null_example(), &s, 0.1).unwrap(), 0.0);
        }
    }

    #[test]
    fn bar_minus_tilde_is_small() {
        let f = tanh10();
        let diff = Gf::bar(f.clone()) - Gf::tilde(f);
        let s = scale(&phi3(), 0.01).unwrap();
        let v = evaluate(&diff, &s, 0.05).unwrap();
        assert!(v.abs() < 1e-4, "{v}");
    }

    #[test]
    fn delta_derivative_is_reflected_derivative() {
        let phi = phi3();
        for &y in &[-0.4, 0.1, 0.55] {
            let d = evaluate_derivative(&Gf::delta(), &phi, y, 1).unwrap();
            assert_eq!(d, -phi.derivative(-y, 1));
        }
    }

    #[test]
    fn heaviside_derivative_is_delta() {
        let phi = phi3();
        for &y in &[-0.4, 0.0, 0.1, 0.55] {
            let d = evaluate_derivative(&Gf::heaviside(), &phi, y, 1).unwrap();
            let delta = evaluate(&Gf::delta(), &phi, y).unwrap();
            assert!((d - delta).abs() < 1e-9);
            // independent check: difference quotient of the quadrature values
            let fd = central(|t| evaluate(&Gf::heaviside(), &phi, t).unwrap(), y, 1e-3);
            assert!((d - fd).abs() < 1e-6, "y={y}: {d} vs {fd}");
        }
    }

    #[test]
    fn product_derivative_matches_differences() {
        let a = Gf::bar(tanh10()) + Gf::heaviside();
        let b = Gf::delta() + Gf::tilde(SmoothPrimitive::Gaussian);
        let prod = a.clone() * b.clone();
        let phi = phi3();
        for &y in &[-0.35, 0.05, 0.4] {
            let d = evaluate_derivative(&prod, &phi, y, 1).unwrap();
            let fd = central(|t| evaluate(&prod, &phi, t).unwrap(), y, 1e-3);
            assert!((d - fd).abs() < 1e-6, "y={y}: {d} vs {fd}");
            // Leibniz expansion from the children
            let leibniz = evaluate_derivative(&a, &phi, y, 1).unwrap() * evaluate(&b, &phi, y).unwrap()
                + evaluate(&a, &phi, y).unwrap() * evaluate_derivative(&b, &phi, y, 1).unwrap();
            assert!((d - leibniz).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_of_product_via_leibniz() {
        let a = Gf::delta();
        let b = Gf::bar(SmoothPrimitive::Sine);
        let phi = phi3();
        let y = 0.21;
        let d2 = evaluate_derivative(&(a.clone() * b.clone()), &phi, y, 2).unwrap();
        let ev = |g: &Gf, k| evaluate_derivative(g, &phi, y, k).unwrap();
        let expected = ev(&a, 2) * ev(&b, 0) + 2.0 * ev(&a, 1) * ev(&b, 1) + ev(&a, 0) * ev(&b, 2);
        assert!((d2 - expected).abs() < 1e-10);
    }

    #[test]
    fn bar_derivative_routes_agree() {
        let phi = phi3();
        for &eps in &[1.0, 0.2] {
            let s = scale(&phi, eps).unwrap();
            for n in 0..=2 {
                for &y in &[-0.3, 0.02, 0.5] {
                    let direct = evaluate_derivative(&Gf::bar(tanh10()), &s, y, n).unwrap();
                    let moved = regular_bar_via_kernel(&tanh10(), &s, y, n).unwrap();
                    let scale_ref = 1.0 + direct.abs();
                    assert!((direct - moved).abs() < 1e-9 * scale_ref, "eps={eps} n={n} y={y}: {direct} vs {moved}");
                }
            }
        }
    }

    #[test]
    fn derivative_node_shifts_jets() {
        let phi = phi1();
        let g = Gf::derivative(2, Gf::tilde(SmoothPrimitive::Sine));
        assert!((evaluate(&g, &phi, 0.3).unwrap() + 0.3f64.sin()).abs() < 1e-15);
        let dh = Gf::derivative(1, Gf::heaviside());
        assert_eq!(evaluate(&dh, &phi, 0.2).unwrap(), evaluate(&Gf::delta(), &phi, 0.2).unwrap());
    }

    #[test]
    fn grid_matches_single_evaluations() {
        let phi = scale(&phi3(), 0.1).unwrap();
        let g = Gf::bar(tanh10()) * Gf::heaviside();
        let ys: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64).collect();
        let grid = evaluate_grid(&g, &phi, &ys, 1).unwrap();
        for (y, v) in ys.iter().zip(&grid) {
            assert_eq!(*v, evaluate_derivative(&g, &phi, *y, 1).unwrap());
        }
        let deltas = evaluate_grid(&Gf::delta(), &phi, &ys, 0).unwrap();
        for (y, v) in ys.iter().zip(&deltas) {
            assert_eq!(*v, Kernel::value(&phi, -y));
        }
    }

    #[test]
    fn smoothed_tanh_is_monotone_and_bounded() {
        let phi = scale(&phi1(), 0.1).unwrap();
        let ys: Vec<f64> = (0..=200).map(|i| -1.0 + 0.01 * i as f64).collect();
        let vals = evaluate_grid(&Gf::bar(tanh10()), &phi, &ys, 0).unwrap();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
        assert!(vals.iter().all(|v| v.abs() <= 1.0));
        let errs: Vec<f64> = ys.iter().zip(&vals).map(|(y, v)| (v - (10.0 * y).tanh()).abs()).collect();
        let (imax, _) = errs.iter().enumerate().fold((0, 0.0), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
        assert!(ys[imax].abs() < 0.2);
    }

    #[test]
    fn display_follows_grammar() {
        let g = Gf::bar(tanh10()) - Gf::tilde(tanh10());
        assert_eq!(g.to_string(), "bar(tanh10) - tilde(tanh10)");
        let h = Gf::scalar(2.0, Gf::delta() + Gf::heaviside()) * Gf::derivative(2, Gf::null_example());
        assert_eq!(h.to_string(), "2*(delta + heaviside)*D^2(nullex)");
        let r = Gf::delta() + (Gf::heaviside() + Gf::delta());
        assert_eq!(r.to_string(), "delta + (heaviside + delta)");
    }

    #[test]
    fn quadrature_errors_carry_path() {
        let e = EvalError::Quadrature {
            path: "bar(sin)".into(),
            source: QuadError::InvalidArgument("x".into()),
        }
        .within("sum.left")
        .within("product.right");
        match e {
            EvalError::Quadrature { path, .. } => assert_eq!(path, "product.right/sum.left/bar(sin)"),
            _ => unreachable!(),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn leaf() -> impl Strategy<Value = Gf> {
            prop_oneof![
                Just(Gf::delta()),
                Just(Gf::heaviside()),
                Just(Gf::tilde(SmoothPrimitive::Sine)),
                Just(Gf::bar(SmoothPrimitive::Gaussian)),
                Just(Gf::null_example()),
            ]
        }

        fn phi() -> ScaledPhi {
            ScaledPhi(scale(&phi3(), 0.3).unwrap())
        }

        struct ScaledPhi(crate::mollifier::ScaledTestFunction);

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn algebra_laws(a in leaf(), b in leaf(), c in leaf(), y in -0.5f64..0.5) {
                let p = phi();
                let p = &p.0;
                let ev = |g: &Gf| evaluate(g, p, y).unwrap();
                prop_assert_eq!(ev(&(a.clone() + b.clone())), ev(&(b.clone() + a.clone())));
                prop_assert_eq!(ev(&(a.clone() * b.clone())), ev(&(b.clone() * a.clone())));
                let l = ev(&((a.clone() + b.clone()) + c.clone()));
                let r = ev(&(a.clone() + (b.clone() + c.clone())));
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
                let l = ev(&((a.clone() * b.clone()) * c.clone()));
                let r = ev(&(a.clone() * (b.clone() * c.clone())));
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
                let l = ev(&(a.clone() * (b.clone() + c.clone())));
                let r = ev(&(a.clone() * b.clone() + a.clone() * c.clone()));
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
            }

            #[test]
            fn bar_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, y in -0.8f64..0.8) {
                let p = phi();
                let p = &p.0;
                let f = SmoothPrimitive::Sine;
                let g = SmoothPrimitive::Polynomial(vec![0.5, -1.0, 2.0]);
                let combo = SmoothPrimitive::Combination(vec![(alpha, f.clone()), (beta, g.clone())]);
                let lhs = evaluate(&Gf::bar(combo), p, y).unwrap();
                let rhs = alpha * evaluate(&Gf::bar(f), p, y).unwrap() + beta * evaluate(&Gf::bar(g), p, y).unwrap();
                prop_assert!((lhs - rhs).abs() <= 10.0 * EMBED_TOL * (1.0 + lhs.abs()) * 10.0);
            }
        }
    }

    #[test]
    fn localized_detection() {
        assert!((Gf::delta() * Gf::tilde(tanh10())).is_kernel_localized());
        assert!(!(Gf::bar(tanh10()) - Gf::tilde(tanh10())).is_kernel_localized());
    }
}
