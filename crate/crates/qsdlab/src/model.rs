//! Population-dynamics models.
//!
//! The object of study is the scalar SDE on `[0, ∞)`
//!
//! ```text
//! dX = b(X) dt + σ(X) dB + ε √a(X) dW,
//! ```
//!
//! with two independent driving Brownian motions: `σ` scales the
//! environmental noise and `ε √a` the demographic noise.  The origin is
//! absorbing (population extinction).  A [`Model`] packages the three
//! coefficient fields together with named parameters; [`check_hypotheses`]
//! audits the standing assumptions the numerical pipeline relies on.
//!
//! The central classification constant is the stochastic growth rate
//! `Λ₀ = b'(0) − σ'(0)²/2`: positive means the noiseless-demography
//! limit persists (a quasi-stationary profile with mass in the bulk),
//! negative means it is driven extinct (mass concentrating at the
//! origin), and zero is a critical case this crate refuses to classify.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance for the analytic-vs-finite-difference derivative
/// consistency check.  Central differences with step `1e-5·max(1,|x|)`
/// carry O(h²) truncation error ≈ 1e-10 on unit-scale fields, so 1e-6
/// leaves four orders of headroom while still catching wrong signs,
/// wrong factors, and copy-paste errors in hand-coded derivatives.
pub const DERIVATIVE_CHECK_REL_TOL: f64 = 1e-6;

/// A scalar coefficient field with analytic first and second derivatives.
#[derive(Clone)]
pub struct ScalarField {
    label: String,
    eval: Func,
    d1: Func,
    d2: Func,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl ScalarField {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }

    /// The identically-zero field (used by the demographic-only variant).
    pub fn zero() -> Self {
        Self::new("0", |_| 0.0, |_| 0.0, |_| 0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }

    /// Checks `d1` against a central difference of `eval`, and `d2`
    /// against a central difference of `d1`, at the given points.
    ///
    /// Differencing the analytic first derivative (rather than a nested
    /// second difference of `eval`) keeps round-off at ~1e-11 relative,
    /// comfortably inside [`DERIVATIVE_CHECK_REL_TOL`].
    pub fn check_derivatives(&self, points: &[f64]) -> Result<()> {
        for &x in points {
            let h = 1e-5 * x.abs().max(1.0);
            let fd1 = (self.eval(x + h) - self.eval(x - h)) / (2.0 * h);
            let an1 = self.d1(x);
            let denom1 = an1.abs().max(1.0);
            if (fd1 - an1).abs() / denom1 > DERIVATIVE_CHECK_REL_TOL {
                return Err(Error::InvalidModel(format!(
                    "field '{}': first derivative inconsistent with finite difference at x={x} \
                     (analytic {an1:e}, difference {fd1:e})",
                    self.label
                )));
            }
            let fd2 = (self.d1(x + h) - self.d1(x - h)) / (2.0 * h);
            let an2 = self.d2(x);
            let denom2 = an2.abs().max(1.0);
            if (fd2 - an2).abs() / denom2 > DERIVATIVE_CHECK_REL_TOL {
                return Err(Error::InvalidModel(format!(
                    "field '{}': second derivative inconsistent with finite difference at x={x} \
                     (analytic {an2:e}, difference {fd2:e})",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// A fully specified model: drift `b`, environmental amplitude `σ`,
/// demographic amplitude `a`, plus named parameters for reporting.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub b: ScalarField,
    pub sigma: ScalarField,
    pub a: ScalarField,
    pub params: BTreeMap<String, f64>,
}

/// Points at which constructor-time derivative consistency is verified.
const CONSISTENCY_POINTS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

impl Model {
    /// Validated construction: enforces vanishing coefficients at the
    /// origin, `b'(0) > 0`, `σ'(0) ≠ 0`, `a'(0) > 0`, and derivative
    /// consistency of all three fields.
    pub fn new(
        name: impl Into<String>,
        b: ScalarField,
        sigma: ScalarField,
        a: ScalarField,
        params: BTreeMap<String, f64>,
    ) -> Result<Model> {
        let m = Model::new_unchecked(name, b, sigma, a, params);
        for (field, who) in [(&m.b, "drift b"), (&m.sigma, "σ"), (&m.a, "a")] {
            if field.eval(0.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "{who} must vanish at the origin (got {:e})",
                    field.eval(0.0)
                )));
            }
            field.check_derivatives(&CONSISTENCY_POINTS)?;
        }
        if m.b.d1(0.0) <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "drift clause: b'(0) must be positive (got {:e})",
                m.b.d1(0.0)
            )));
        }
        if m.sigma.d1(0.0) == 0.0 {
            return Err(Error::InvalidModel(
                "environmental-noise clause: σ'(0) must be nonzero".into(),
            ));
        }
        if m.a.d1(0.0) <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "demographic-noise clause: a'(0) must be positive (got {:e})",
                m.a.d1(0.0)
            )));
        }
        Ok(m)
    }

    /// Unvalidated construction, for hypothesis audits of deliberately
    /// broken models and for the σ ≡ 0 demographic-only variant.
    pub fn new_unchecked(
        name: impl Into<String>,
        b: ScalarField,
        sigma: ScalarField,
        a: ScalarField,
        params: BTreeMap<String, f64>,
    ) -> Model {
        Model {
            name: name.into(),
            b,
            sigma,
            a,
            params,
        }
    }

    /// The same model with the environmental noise switched off
    /// (`σ ≡ 0`), leaving `dX = b dt + ε √a dW`.
    pub fn demographic_only(&self) -> Model {
        let mut m = self.clone();
        m.name = format!("{}-demographic-only", self.name);
        m.sigma = ScalarField::zero();
        m
    }

    /// Stochastic growth rate `Λ₀ = b'(0) − σ'(0)²/2`.
    pub fn stochastic_growth_rate(&self) -> f64 {
        stochastic_growth_rate(self)
    }

    /// Canonical `key=value` parameter string for file headers.
    pub fn describe(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}({})", self.name, params.join(","))
    }
}

/// Stochastic growth rate `Λ₀ = b'(0) − σ'(0)²/2`.
pub fn stochastic_growth_rate(model: &Model) -> f64 {
    let s1 = model.sigma.d1(0.0);
    model.b.d1(0.0) - 0.5 * s1 * s1
}

/// Logistic family: `b = x(μ − κx)`, `σ(x) = σ·x`, `a(x) = γ·x`.
pub fn build_logistic(mu: f64, kappa: f64, sigma: f64, gamma: f64) -> Result<Model> {
    build_theta_logistic_inner("logistic", mu, kappa, 1.0, sigma, gamma, false)
}

/// Theta-logistic family: `b = x(μ − κx^θ)`, `σ(x) = σ·x`, `a(x) = γ·x`.
pub fn build_theta_logistic(mu: f64, kappa: f64, theta: f64, sigma: f64, gamma: f64) -> Result<Model> {
    build_theta_logistic_inner("theta-logistic", mu, kappa, theta, sigma, gamma, true)
}

fn build_theta_logistic_inner(
    name: &str,
    mu: f64,
    kappa: f64,
    theta: f64,
    sigma: f64,
    gamma: f64,
    record_theta: bool,
) -> Result<Model> {
    if !(mu > 0.0) {
        return Err(Error::InvalidModel(format!(
            "drift clause requires b'(0) = mu > 0 (got mu={mu})"
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidModel(format!(
            "drift clause requires eventual decline, kappa > 0 (got kappa={kappa})"
        )));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidModel(format!(
            "theta-logistic exponent must be positive (got theta={theta})"
        )));
    }
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidModel(format!(
            "environmental-noise clause requires σ'(0) = sigma ≠ 0 (got sigma={sigma})"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidModel(format!(
            "demographic-noise clause requires a'(0) = gamma > 0 (got gamma={gamma})"
        )));
    }

    let b = ScalarField::new(
        format!("x*({mu} - {kappa}*x^{theta})"),
        move |x: f64| x * (mu - kappa * x.powf(theta)),
        move |x: f64| mu - kappa * (1.0 + theta) * x.powf(theta),
        move |x: f64| {
            if x == 0.0 {
                if theta >= 1.0 {
                    if theta == 1.0 { -2.0 * kappa } else { 0.0 }
                } else {
                    f64::NEG_INFINITY // b is only C¹ at 0 for θ < 1
                }
            } else {
                -kappa * theta * (1.0 + theta) * x.powf(theta - 1.0)
            }
        },
    );
    let sf = ScalarField::new(
        format!("{sigma}*x"),
        move |x: f64| sigma * x,
        move |_| sigma,
        |_| 0.0,
    );
    let af = ScalarField::new(
        format!("{gamma}*x"),
        move |x: f64| gamma * x,
        move |_| gamma,
        |_| 0.0,
    );

    let mut params = BTreeMap::new();
    params.insert("mu".into(), mu);
    params.insert("kappa".into(), kappa);
    if record_theta {
        params.insert("theta".into(), theta);
    }
    params.insert("sigma".into(), sigma);
    params.insert("gamma".into(), gamma);

    Model::new(name, b, sf, af, params)
}

/// Per-clause audit verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The clause involves a limit at infinity that a finite grid can
    /// support but never certify.
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "FAIL"),
            Verdict::Indeterminate => write!(f, "indeterminate"),
        }
    }
}

/// The audited clauses of the standing hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    /// `b(0) = 0`, `b'(0) > 0`, drift eventually negative.
    Drift,
    /// `σ(0) = 0`, `σ'(0) ≠ 0`.
    EnvironmentalNoise,
    /// `a(0) = 0`, `a'(0) > 0`, `a > 0` away from the origin.
    DemographicNoise,
    /// The tail-balance ratio conditions at infinity.
    TailBalance,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Drift => write!(f, "drift"),
            Clause::EnvironmentalNoise => write!(f, "environmental-noise"),
            Clause::DemographicNoise => write!(f, "demographic-noise"),
            Clause::TailBalance => write!(f, "tail-balance"),
        }
    }
}

/// A single audited condition with the worst observed violation.
#[derive(Debug, Clone)]
pub struct CheckItem {
    pub label: String,
    pub verdict: Verdict,
    /// Grid point where the condition is closest to failing (or fails).
    pub worst_x: f64,
    /// The audited quantity at `worst_x`.
    pub worst_value: f64,
    pub detail: String,
}

/// Audit report for one clause.
#[derive(Debug, Clone)]
pub struct ClauseReport {
    pub clause: Clause,
    pub verdict: Verdict,
    pub checks: Vec<CheckItem>,
}

/// Full hypothesis audit over a finite grid.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub clauses: Vec<ClauseReport>,
    pub growth_rate: f64,
    /// `|Λ₀|` below this threshold flags the unclassifiable critical case.
    pub critical: bool,
    pub horizon: f64,
}

impl HypothesisReport {
    /// True when no clause hard-fails (indeterminate clauses allowed).
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn hard_failures(&self) -> Vec<&CheckItem> {
        self.clauses
            .iter()
            .flat_map(|c| c.checks.iter())
            .filter(|c| c.verdict == Verdict::Fail)
            .collect()
    }

    /// Human-readable rendering, one line per audited condition.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "hypothesis audit up to horizon x = {:.6}\n",
            self.horizon
        ));
        out.push_str(&format!(
            "stochastic growth rate: {:+.6e}{}\n",
            self.growth_rate,
            if self.critical {
                "  (CRITICAL: growth rate ~ 0, asymptotic regime undefined)"
            } else if self.growth_rate > 0.0 {
                "  (persistence regime)"
            } else {
                "  (extinction regime)"
            }
        ));
        for clause in &self.clauses {
            out.push_str(&format!("[{}] {}\n", clause.verdict, clause.clause));
            for check in &clause.checks {
                out.push_str(&format!(
                    "    [{}] {} (worst at x={:.4e}: {:.4e}) {}\n",
                    check.verdict, check.label, check.worst_x, check.worst_value, check.detail
                ));
            }
        }
        out
    }
}

/// Audits the standing hypotheses on `grid` (strictly increasing,
/// positive).  Limit conditions at infinity are examined over the last
/// decade of the grid and reported [`Verdict::Indeterminate`]; they can
/// be *refuted* there but never certified.
pub fn check_hypotheses(model: &Model, grid: &[f64]) -> Result<HypothesisReport> {
    if grid.len() < 16 {
        return Err(Error::InvalidArgument(
            "hypothesis audit needs at least 16 grid points".into(),
        ));
    }
    if grid[0] <= 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "audit grid must be strictly increasing and positive".into(),
        ));
    }
    let horizon = *grid.last().unwrap();
    let last_decade: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&x| x >= horizon / 10.0)
        .collect();

    let mut clauses = Vec::new();

    // Drift clause.
    {
        let mut checks = Vec::new();
        let b0 = model.b.eval(0.0);
        checks.push(exact_zero_check("b(0) = 0", b0));
        let b1 = model.b.d1(0.0);
        checks.push(CheckItem {
            label: "b'(0) > 0".into(),
            verdict: if b1 > 0.0 { Verdict::Pass } else { Verdict::Fail },
            worst_x: 0.0,
            worst_value: b1,
            detail: String::new(),
        });
        // Eventual decline: b < 0 on the entire last decade.
        let (worst_x, worst_b) = last_decade
            .iter()
            .map(|&x| (x, model.b.eval(x)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        checks.push(CheckItem {
            label: "b < 0 near the horizon".into(),
            verdict: if worst_b < 0.0 { Verdict::Pass } else { Verdict::Fail },
            worst_x,
            worst_value: worst_b,
            detail: "checked on the last decade of the grid".into(),
        });
        clauses.push(summarize(Clause::Drift, checks));
    }

    // Environmental-noise clause.
    {
        let mut checks = Vec::new();
        checks.push(exact_zero_check("σ(0) = 0", model.sigma.eval(0.0)));
        let s1 = model.sigma.d1(0.0);
        checks.push(CheckItem {
            label: "σ'(0) ≠ 0".into(),
            verdict: if s1.abs() > 1e-12 { Verdict::Pass } else { Verdict::Fail },
            worst_x: 0.0,
            worst_value: s1,
            detail: String::new(),
        });
        clauses.push(summarize(Clause::EnvironmentalNoise, checks));
    }

    // Demographic-noise clause.
    {
        let mut checks = Vec::new();
        checks.push(exact_zero_check("a(0) = 0", model.a.eval(0.0)));
        let a1 = model.a.d1(0.0);
        checks.push(CheckItem {
            label: "a'(0) > 0".into(),
            verdict: if a1 > 0.0 { Verdict::Pass } else { Verdict::Fail },
            worst_x: 0.0,
            worst_value: a1,
            detail: String::new(),
        });
        let (worst_x, worst_a) = grid
            .iter()
            .map(|&x| (x, model.a.eval(x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        checks.push(CheckItem {
            label: "a > 0 on (0, horizon]".into(),
            verdict: if worst_a > 0.0 { Verdict::Pass } else { Verdict::Fail },
            worst_x,
            worst_value: worst_a,
            detail: String::new(),
        });
        clauses.push(summarize(Clause::DemographicNoise, checks));
    }

    // Tail-balance clause: ratio conditions at infinity, audited as
    // monotone trends over the last decade.  Always indeterminate.
    {
        let checks = vec![
            tail_trend(
                "a/σ² stays bounded",
                &last_decade,
                |x| model.a.eval(x) / sq(model.sigma.eval(x)),
                TailGoal::Bounded,
            ),
            tail_trend(
                "b/|σ| → -∞",
                &last_decade,
                |x| model.b.eval(x) / model.sigma.eval(x).abs(),
                TailGoal::ToMinusInfinity,
            ),
            tail_trend(
                "x·b/σ² → -∞",
                &last_decade,
                |x| x * model.b.eval(x) / sq(model.sigma.eval(x)),
                TailGoal::ToMinusInfinity,
            ),
            tail_trend(
                "σ²/|b| · max(a'/a, |σ'/σ|) → 0",
                &last_decade,
                |x| {
                    let s2 = sq(model.sigma.eval(x));
                    let r1 = model.a.d1(x) / model.a.eval(x);
                    let r2 = (model.sigma.d1(x) / model.sigma.eval(x)).abs();
                    s2 / model.b.eval(x).abs() * r1.max(r2)
                },
                TailGoal::ToZero,
            ),
            tail_trend(
                "σ²/b² · max(a'', (σ²)'', |b'|) → 0",
                &last_decade,
                |x| {
                    let s = model.sigma.eval(x);
                    let s2pp = 2.0 * (sq(model.sigma.d1(x)) + s * model.sigma.d2(x));
                    let m = model.a.d2(x).max(s2pp).max(model.b.d1(x).abs());
                    sq(s) / sq(model.b.eval(x)) * m
                },
                TailGoal::ToZero,
            ),
        ];
        clauses.push(ClauseReport {
            clause: Clause::TailBalance,
            // A finite horizon can never certify a limit at infinity.
            verdict: Verdict::Indeterminate,
            checks,
        });
    }

    let growth_rate = stochastic_growth_rate(model);
    Ok(HypothesisReport {
        clauses,
        growth_rate,
        critical: growth_rate.abs() < 1e-12,
        horizon,
    })
}

fn sq(x: f64) -> f64 {
    x * x
}

fn exact_zero_check(label: &str, value: f64) -> CheckItem {
    CheckItem {
        label: label.into(),
        verdict: if value.abs() <= 1e-12 { Verdict::Pass } else { Verdict::Fail },
        worst_x: 0.0,
        worst_value: value,
        detail: String::new(),
    }
}

fn summarize(clause: Clause, checks: Vec<CheckItem>) -> ClauseReport {
    let verdict = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    ClauseReport {
        clause,
        verdict,
        checks,
    }
}

enum TailGoal {
    Bounded,
    ToZero,
    ToMinusInfinity,
}

/// Samples a tail ratio over the last decade and reports whether its
/// trend is consistent with the required limit.  Verdict is always
/// indeterminate; the detail records consistency.
fn tail_trend(
    label: &str,
    points: &[f64],
    f: impl Fn(f64) -> f64,
    goal: TailGoal,
) -> CheckItem {
    let vals: Vec<(f64, f64)> = points.iter().map(|&x| (x, f(x))).collect();
    let n = vals.len();
    let (first, last) = (vals[0].1, vals[n - 1].1);
    // Trend slack: a ratio counts as moving the right way if it does not
    // move the wrong way by more than 1% of its magnitude per decade.
    let slack = 0.01 * first.abs().max(last.abs()).max(1e-300);
    let consistent = match goal {
        TailGoal::Bounded => {
            vals.iter().all(|v| v.1.is_finite()) && last <= first.max(0.0) + slack
        }
        TailGoal::ToZero => {
            vals.iter().all(|v| v.1.is_finite()) && last.abs() <= first.abs() + slack
                && last.abs() <= 10.0 * slack.max(first.abs())
        }
        TailGoal::ToMinusInfinity => last < 0.0 && last <= first + slack,
    };
    let (worst_x, worst_value) = match goal {
        TailGoal::Bounded | TailGoal::ToZero => vals
            .iter()
            .map(|&(x, v)| (x, v))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap(),
        TailGoal::ToMinusInfinity => vals
            .iter()
            .map(|&(x, v)| (x, v))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap(),
    };
    CheckItem {
        label: label.into(),
        verdict: Verdict::Indeterminate,
        worst_x,
        worst_value,
        detail: if consistent {
            "trend over the last decade is consistent with the required limit".into()
        } else {
            "trend over the last decade is NOT consistent with the required limit".into()
        },
    }
}
