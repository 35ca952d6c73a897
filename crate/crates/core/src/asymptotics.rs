//! Empirical growth orders as the test function is narrowed.
//!
//! Everything here works from the sup-norm profile
//! `M(eps) = sup_{y in [a,b]} |d^n/dy^n A[phi_eps](y)|` over a decreasing
//! schedule of `eps`. Orders are log-log slopes of that profile; bounds and
//! classifications are verdicts "at tested resolution", never proofs.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::genfunc::{evaluate_derivative, evaluate_grid, EvalError, GeneralizedFunction};
use crate::mollifier::{construct_aq, make_bump, scale, translate, Kernel, MollifierError, TestFunction};

pub const MIN_GRID_POINTS: usize = 51;
pub const DEFAULT_GRID_POINTS: usize = 401;
pub const DEFAULT_INTERVAL: (f64, f64) = (-1.0, 1.0);
/// Number of trailing schedule points used for slope fits.
pub const FIT_POINTS: usize = 5;
/// Log-space residual above which a fit is flagged as pre-asymptotic.
pub const REGIME_RESIDUAL: f64 = 0.15;
/// Slope of `eps^-q M(eps)` below which the sequence counts as growing.
pub const BOUNDED_SLOPE: f64 = -0.1;
/// Regression slack when comparing a fitted order against an integer target.
pub const NULL_SLACK: f64 = 0.25;
/// Sample count across the kernel support for localized subjects.
const SUPPORT_SAMPLES: usize = 201;
const GOLDEN_ITERATIONS: usize = 80;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Mollifier(#[from] MollifierError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
}

type Result<T> = std::result::Result<T, AsymptoticsError>;

/// Strictly decreasing positive scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSchedule {
    values: Vec<f64>,
}

impl EpsSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(AsymptoticsError::InvalidParameter("empty eps schedule".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(AsymptoticsError::InvalidParameter(format!(
                "eps values must be positive and finite, got {v}"
            )));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(AsymptoticsError::InvalidParameter(
                "eps schedule must be strictly decreasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// `start * ratio^k` for `k = 0..count`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(AsymptoticsError::InvalidParameter(format!(
                "eps ratio must lie in (0, 1), got {ratio}"
            )));
        }
        Self::new((0..count).map(|k| start * ratio.powi(k as i32)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for EpsSchedule {
    /// `0.2 * 2^-k`, `k = 0..=8`.
    fn default() -> Self {
        Self::geometric(0.2, 0.5, 9).expect("default schedule is valid")
    }
}

/// Interval, grid and schedule shared by all estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolution {
    pub interval: (f64, f64),
    pub grid_points: usize,
    pub schedule: EpsSchedule,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            interval: DEFAULT_INTERVAL,
            grid_points: DEFAULT_GRID_POINTS,
            schedule: EpsSchedule::default(),
        }
    }
}

impl Resolution {
    fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(AsymptoticsError::InvalidParameter(format!(
                "interval [{a}, {b}] must be finite with a < b"
            )));
        }
        if self.grid_points < MIN_GRID_POINTS {
            return Err(AsymptoticsError::InvalidParameter(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {}",
                self.grid_points
            )));
        }
        Ok(())
    }
}

/// `sup |d^n/dy^n A[phi_eps](y)|` over `interval`.
///
/// The candidate set is a uniform grid, plus the reflected scaled support
/// `y = -eps z` when `A` has leaves that concentrate there. The best
/// candidate is then polished by one golden-section search on its bracket.
pub fn sup_norm(
    a: &GeneralizedFunction,
    phi: &TestFunction,
    eps: f64,
    interval: (f64, f64),
    n: usize,
    grid_points: usize,
) -> Result<f64> {
    Resolution {
        interval,
        grid_points,
        schedule: EpsSchedule::new(vec![eps])?,
    }
    .validate()?;
    let kernel = scale(phi, eps)?;
    let (lo, hi) = interval;
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut ys: Vec<f64> = (0..grid_points).map(|i| lo + step * i as f64).collect();
    ys[grid_points - 1] = hi;
    if a.is_kernel_localized() {
        let (sa, sb) = Kernel::support(&kernel);
        let h = (sb - sa) / (SUPPORT_SAMPLES - 1) as f64;
        ys.extend(
            (0..SUPPORT_SAMPLES)
                .map(|i| -(sa + h * i as f64))
                .filter(|y| *y >= lo && *y <= hi),
        );
        ys.sort_by(f64::total_cmp);
        ys.dedup();
    }
    let values = evaluate_grid(a, &kernel, &ys, n)?;
    let (imax, best) = values
        .iter()
        .map(|v| v.abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if best == 0.0 {
        return Ok(0.0);
    }
    let left = ys[imax.saturating_sub(1)];
    let right = ys[(imax + 1).min(ys.len() - 1)];
    let polished = golden_max(|y| evaluate_derivative(a, &kernel, y, n).map(f64::abs), left, right)?;
    Ok(best.max(polished))
}

/// Largest value of `g` seen by a golden-section search on `[lo, hi]`.
fn golden_max(g: impl Fn(f64) -> std::result::Result<f64, EvalError>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    let mut best = f1.max(f2);
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = g(x1)?;
            best = best.max(f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = g(x2)?;
            best = best.max(f2);
        }
    }
    Ok(best)
}

/// `(eps, M(eps))` for every scheduled `eps`, in schedule order.
pub fn sup_profile(a: &GeneralizedFunction, phi: &TestFunction, res: &Resolution, n: usize) -> Result<Vec<(f64, f64)>> {
    res.validate()?;
    res.schedule
        .values()
        .par_iter()
        .map(|&eps| Ok((eps, sup_norm(a, phi, eps, res.interval, n, res.grid_points)?)))
        .collect()
}

/// Fitted power law `M(eps) ~ exp(intercept) eps^slope`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    /// `+inf` for an exact-zero profile.
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute log-space deviation from the fitted line.
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
    pub exact_zero: bool,
    pub in_asymptotic_regime: bool,
}

impl OrderEstimate {
    /// Whether the fit shows order at least `q`, within `slack`.
    pub fn at_least(&self, q: f64, slack: f64) -> bool {
        self.exact_zero || self.slope >= q - slack
    }
}

impl fmt::Display for OrderEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact_zero {
            write!(f, "slope=exact-zero residual=0")
        } else {
            write!(f, "slope={} residual={}", self.slope, self.residual)
        }
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept, max |residual|)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    (slope, intercept, residual)
}

/// Order estimate from a profile ordered by decreasing `eps`.
///
/// Uses the last [`FIT_POINTS`] entries. The profile is an exact zero when
/// its smallest-`eps` value is zero or fewer than three nonzero values
/// remain; otherwise zeros are dropped and the rest fitted in log space.
pub fn fit_order(profile: &[(f64, f64)]) -> Result<OrderEstimate> {
    if profile.len() < 4 {
        return Err(AsymptoticsError::InvalidParameter(format!(
            "order estimates need at least 4 schedule points, got {}",
            profile.len()
        )));
    }
    let tail = &profile[profile.len().saturating_sub(FIT_POINTS)..];
    let nonzero: Vec<(f64, f64)> = tail.iter().copied().filter(|&(_, m)| m != 0.0).collect();
    let last_zero = tail.last().is_some_and(|&(_, m)| m == 0.0);
    if last_zero || nonzero.len() < 3 {
        return Ok(OrderEstimate {
            slope: f64::INFINITY,
            intercept: f64::NEG_INFINITY,
            residual: 0.0,
            points: tail.to_vec(),
            exact_zero: true,
            in_asymptotic_regime: true,
        });
    }
    let xs: Vec<f64> = nonzero.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = nonzero.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, residual) = fit_line(&xs, &ys);
    Ok(OrderEstimate {
        slope,
        intercept,
        residual,
        points: tail.to_vec(),
        exact_zero: false,
        in_asymptotic_regime: residual <= REGIME_RESIDUAL,
    })
}

pub fn estimate_order(a: &GeneralizedFunction, phi: &TestFunction, res: &Resolution, n: usize) -> Result<OrderEstimate> {
    fit_order(&sup_profile(a, phi, res, n)?)
}

/// Evidence for `eps^-q M(eps) < C` for all `eps < eta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundWitness {
    pub q: i32,
    pub c: f64,
    pub eta: f64,
    pub interval: (f64, f64),
    pub satisfied: bool,
    /// Fitted slope of `eps^-q M(eps)`.
    pub slope: f64,
}

/// Boundedness test on an existing profile.
pub fn bound_from_profile(profile: &[(f64, f64)], q: i32, c_margin: f64, interval: (f64, f64)) -> Result<BoundWitness> {
    if !(c_margin >= 1.0) {
        return Err(AsymptoticsError::InvalidParameter(format!(
            "C margin must be at least 1, got {c_margin}"
        )));
    }
    let scaled: Vec<(f64, f64)> = profile.iter().map(|&(e, m)| (e, m * e.powi(-q))).collect();
    let peak = scaled.iter().map(|p| p.1).fold(0.0, f64::max);
    let c = if peak > 0.0 { c_margin * peak } else { c_margin };
    let eta = profile.first().map_or(0.0, |p| p.0);
    let trend = fit_order(&scaled)?;
    let last = scaled.last().map_or(0.0, |p| p.1);
    Ok(BoundWitness {
        q,
        c,
        eta,
        interval,
        satisfied: trend.slope >= BOUNDED_SLOPE && last <= c,
        slope: trend.slope,
    })
}

pub fn check_bound(
    a: &GeneralizedFunction,
    phi: &TestFunction,
    q: i32,
    res: &Resolution,
    n: usize,
    c_margin: f64,
) -> Result<BoundWitness> {
    bound_from_profile(&sup_profile(a, phi, res, n)?, q, c_margin, res.interval)
}

/// A labelled test function used as classification evidence.
#[derive(Debug, Clone)]
pub struct Basis {
    pub id: String,
    pub phi: TestFunction,
}

impl Basis {
    pub fn new(id: impl Into<String>, phi: TestFunction) -> Self {
        Self { id: id.into(), phi }
    }

    /// Largest `p` with `phi` in `A_p` (`0` for `A_0` only).
    pub fn class(&self) -> usize {
        self.phi.claimed_class().unwrap_or(0)
    }
}

/// The unit bump (class 1), its `A_p` refinements for `2 <= p <= q_max`, and
/// a shifted bump that is only in `A_0`.
pub fn standard_bases(q_max: usize) -> Result<Vec<Basis>> {
    let bump = make_bump(1.0)?;
    let mut out = vec![Basis::new("A0:bump(1)+0.3", translate(&bump, 0.3)?)];
    out.push(Basis::new("A1:bump(1)", bump.clone()));
    for p in 2..=q_max {
        out.push(Basis::new(format!("A{p}:bump(1)"), construct_aq(p, &bump)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub resolution: Resolution,
    pub n_max: usize,
    pub q_max: usize,
    pub big_n_max: usize,
    pub c_margin: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            resolution: Resolution::default(),
            n_max: 1,
            q_max: 3,
            big_n_max: 4,
            c_margin: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Moderate,
    Null,
    NeitherAtTestedResolution,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Moderate => "moderate",
            Verdict::Null => "null",
            Verdict::NeitherAtTestedResolution => "neither-at-tested-resolution",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub epsilon: f64,
    pub sup_norm: f64,
    pub deriv_order: usize,
    pub phi_id: String,
    pub subject_id: String,
}

/// Smallest passing `N` for one base at one derivative order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModerateWitness {
    pub deriv_order: usize,
    pub phi_id: String,
    pub n: Option<usize>,
    pub witness: Option<BoundWitness>,
}

/// Fitted order of one base at one derivative order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseOrder {
    pub phi_id: String,
    pub class: usize,
    pub estimate: OrderEstimate,
}

/// For target order `q` at derivative `n`: the class `p` whose members all
/// reached it, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullEvidence {
    pub deriv_order: usize,
    pub q: usize,
    pub p: Option<usize>,
    pub orders: Vec<BaseOrder>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub subject: String,
    pub options: ClassifyOptions,
    pub bases: Vec<String>,
    /// Per derivative order, the smallest `N` that worked for every base.
    pub moderate_n_by_order: Vec<Option<usize>>,
    /// Largest entry of `moderate_n_by_order` when all are present.
    pub moderate_n: Option<usize>,
    pub moderate_witnesses: Vec<ModerateWitness>,
    pub null_evidence: Vec<NullEvidence>,
    pub verdict: Verdict,
    pub profile: Vec<ProfileRow>,
}

impl ClassificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Profile rows as CSV with a fixed header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,sup_norm,deriv_order,phi_id,subject_id\n");
        for r in &self.profile {
            s.push_str(&format!(
                "{:.16e},{:.16e},{},{},{}\n",
                r.epsilon,
                r.sup_norm,
                r.deriv_order,
                csv_field(&r.phi_id),
                csv_field(&r.subject_id)
            ));
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Moderate and null evidence for `a` over `bases`.
///
/// Moderate: for every `n <= n_max` some `N <= N_max` makes
/// `eps^N M(eps)` bounded on every base. Null: for every `n <= n_max` and
/// every `q` in `1..=q_max` some `p <= q_max` has all bases of class `>= p`
/// reaching order `q` (within [`NULL_SLACK`]) or vanishing exactly.
pub fn classify(a: &GeneralizedFunction, bases: &[Basis], opts: &ClassifyOptions) -> Result<ClassificationReport> {
    opts.resolution.validate()?;
    if bases.is_empty() {
        return Err(AsymptoticsError::Config("no test functions supplied".into()));
    }
    if opts.q_max == 0 {
        return Err(AsymptoticsError::Config("q_max must be at least 1".into()));
    }
    if !bases.iter().any(|b| b.class() >= opts.q_max) {
        return Err(AsymptoticsError::Config(format!(
            "no supplied test function is in A_{}; null evidence needs one for every p <= q_max",
            opts.q_max
        )));
    }
    let subject = a.to_string();

    // profiles[n][base]
    let profiles: Vec<Vec<Vec<(f64, f64)>>> = (0..=opts.n_max)
        .map(|n| {
            bases
                .iter()
                .map(|b| sup_profile(a, &b.phi, &opts.resolution, n))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut profile_rows = Vec::new();
    for (n, per_base) in profiles.iter().enumerate() {
        for (b, prof) in bases.iter().zip(per_base) {
            profile_rows.extend(prof.iter().map(|&(epsilon, sup_norm)| ProfileRow {
                epsilon,
                sup_norm,
                deriv_order: n,
                phi_id: b.id.clone(),
                subject_id: subject.clone(),
            }));
        }
    }

    let mut witnesses = Vec::new();
    let mut n_by_order = Vec::new();
    for (n, per_base) in profiles.iter().enumerate() {
        let mut worst = Some(0);
        for (b, prof) in bases.iter().zip(per_base) {
            let mut found = None;
            for big_n in 0..=opts.big_n_max {
                let w = bound_from_profile(prof, -(big_n as i32), opts.c_margin, opts.resolution.interval)?;
                if w.satisfied {
                    found = Some((big_n, w));
                    break;
                }
            }
            worst = match (worst, &found) {
                (Some(acc), Some((k, _))) => Some(acc.max(*k)),
                _ => None,
            };
            witnesses.push(ModerateWitness {
                deriv_order: n,
                phi_id: b.id.clone(),
                n: found.as_ref().map(|f| f.0),
                witness: found.map(|f| f.1),
            });
        }
        n_by_order.push(worst);
    }
    let moderate_n = n_by_order
        .iter()
        .copied()
        .try_fold(0, |acc, v| v.map(|k| acc.max(k)));

    let mut null_evidence = Vec::new();
    for (n, per_base) in profiles.iter().enumerate() {
        let orders: Vec<BaseOrder> = bases
            .iter()
            .zip(per_base)
            .map(|(b, prof)| {
                Ok(BaseOrder {
                    phi_id: b.id.clone(),
                    class: b.class(),
                    estimate: fit_order(prof)?,
                })
            })
            .collect::<Result<_>>()?;
        for q in 1..=opts.q_max {
            let p = (1..=opts.q_max).find(|&p| {
                orders
                    .iter()
                    .filter(|o| o.class >= p)
                    .all(|o| o.estimate.at_least(q as f64, NULL_SLACK))
            });
            null_evidence.push(NullEvidence {
                deriv_order: n,
                q,
                p,
                orders: orders.clone(),
            });
        }
    }
    let null = null_evidence.iter().all(|e| e.p.is_some());

    let verdict = match (moderate_n.is_some(), null) {
        (true, true) => Verdict::Null,
        (true, false) => Verdict::Moderate,
        _ => Verdict::NeitherAtTestedResolution,
    };
    Ok(ClassificationReport {
        subject,
        options: opts.clone(),
        bases: bases.iter().map(|b| b.id.clone()).collect(),
        moderate_n_by_order: n_by_order,
        moderate_n,
        moderate_witnesses: witnesses,
        null_evidence,
        verdict,
        profile: profile_rows,
    })
}

/// Classifies `a - b`; a null verdict means the two agree in the quotient at
/// tested resolution.
pub fn equivalent(
    a: &GeneralizedFunction,
    b: &GeneralizedFunction,
    bases: &[Basis],
    opts: &ClassifyOptions,
) -> Result<ClassificationReport> {
    classify(&(a.clone() - b.clone()), bases, opts)
}
