//! ε-sweep harness: runs the spectral and Monte Carlo estimators across
//! a ladder of noise amplitudes, fits the predicted scaling laws, and
//! assembles a verdict report.
//!
//! The laws verified at desk scale, for the logistic family with
//! stochastic growth rate `Λ₀ = b'(0) − σ'(0)²/2`:
//!
//! * extinction-rate exponent (`Λ₀ > 0`): `λ₁ ≍ ε^{4b'(0)/σ'(0)² − 2}`;
//! * mean-extinction exponent (`Λ₀ > 0`): `E[T₀] ≍ ε^{2 − 4b'(0)/σ'(0)²}`;
//! * logarithmic regime (`Λ₀ < 0`): `E[T₀]` grows linearly in `|ln ε|`;
//! * reciprocal law: `λ₁·E[T₀] → 1` as ε → 0;
//! * QSD convergence (`Λ₀ > 0`): total-variation distance to the
//!   environmental-only stationary law vanishes; (`Λ₀ < 0`): the QSD
//!   mass concentrates near the origin;
//! * spectral-gap uniformity (`Λ₀ > 0`): `λ₂` stays in a bounded band
//!   while `λ₁` collapses.
//!
//! Fits are ordinary least squares on transformed coordinates.  Slope
//! tolerances default to ±0.2 for spectral-driven fits and ±0.25 for
//! Monte-Carlo-driven fits: the theoretical exponents hold up to
//! arbitrarily small `γ`-corrections, and the discretization plus
//! sampling error budget absorbs the rest.  Every verdict records its
//! tolerance next to the fitted value.

use crate::density::{self, DensityTable};
use crate::error::{Error, Result};
use crate::fit::{line_fit, LineFit};
use crate::grid::Grid;
use crate::model::Model;
use crate::sde::{self, Scheme, SimConfig};
use crate::spectral;

/// Slope tolerance for fits over spectrally computed quantities.
pub const SLOPE_TOL_SPECTRAL: f64 = 0.2;
/// Slope tolerance for fits over Monte Carlo means.
pub const SLOPE_TOL_MC: f64 = 0.25;
/// Acceptable band for the product `λ₁·E[T₀]`.
pub const RECIPROCAL_BAND: (f64, f64) = (0.8, 1.2);
/// A ladder point whose censored fraction exceeds this is excluded from
/// mean-extinction fits (and flagged in the rows).
pub const CENSOR_LIMIT: f64 = 0.05;
/// Uniform-positivity proxy for the second eigenvalue: its ladder
/// minimum must stay above this fraction of the ladder median.
pub const GAP_FLOOR_FRACTION: f64 = 0.1;
/// Total-variation threshold for QSD convergence at the smallest ε.
pub const QSD_TV_THRESHOLD: f64 = 0.05;
/// Near-origin mass threshold in the extinction regime (mass of
/// `(0, 0.1)` at the smallest ε).
pub const NEAR_ZERO_MASS_THRESHOLD: f64 = 0.9;
/// R² threshold for the `|ln ε|` fit of the mean extinction time.
pub const LOG_REGIME_R2: f64 = 0.97;
/// Exponent of the near-origin envelope diagnostic `sup u_ε(x)·x^k`.
pub const ENVELOPE_EXPONENT: f64 = 0.9;

const MIN_FIT_POINTS: usize = 4;
const QSD_GRID_N: usize = 2400;

/// Which estimator families a sweep is allowed to run.
#[derive(Debug, Clone, Copy)]
pub struct Estimators {
    pub spectral: bool,
    pub mc: bool,
    pub scale: bool,
}

impl Default for Estimators {
    fn default() -> Self {
        Estimators {
            spectral: true,
            mc: true,
            scale: true,
        }
    }
}

/// A sweep plan: the model, a strictly decreasing ε ladder, and
/// per-point budgets.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub model: Model,
    /// Strictly decreasing, all positive (sorted at construction, so
    /// permuting the input leaves every fit unchanged).
    pub eps_ladder: Vec<f64>,
    pub estimators: Estimators,
    /// Base grid size for eigenvalue solves.
    pub n_base: usize,
    /// Monte Carlo budget per ladder point.
    pub sim: SimConfig,
}

impl SweepSpec {
    pub fn new(model: Model, eps_ladder: &[f64], n_base: usize, sim: SimConfig) -> Result<Self> {
        if eps_ladder.is_empty() {
            return Err(Error::InvalidArgument("ε ladder is empty".into()));
        }
        if eps_ladder.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidArgument(
                "ε ladder entries must be positive and finite".into(),
            ));
        }
        let mut ladder = eps_ladder.to_vec();
        ladder.sort_by(|a, b| b.total_cmp(a));
        if ladder.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "ε ladder entries must be distinct".into(),
            ));
        }
        Ok(SweepSpec {
            model,
            eps_ladder: ladder,
            estimators: Estimators::default(),
            n_base,
            sim,
        })
    }

    fn require_fit_length(&self) -> Result<()> {
        if self.eps_ladder.len() < MIN_FIT_POINTS {
            return Err(Error::InvalidArgument(format!(
                "scaling fits need a ladder of at least {MIN_FIT_POINTS} ε values \
                 (got {})",
                self.eps_ladder.len()
            )));
        }
        Ok(())
    }

    fn require(&self, enabled: bool, what: &str) -> Result<()> {
        if enabled {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "this sweep needs the {what} estimator, which the spec disables"
            )))
        }
    }

    /// Per-rung Monte Carlo configuration with a decorrelated seed.
    fn rung_sim(&self, k: usize) -> SimConfig {
        let mut c = self.sim.clone();
        c.seed = self.sim.seed.wrapping_add(1000 * k as u64);
        c
    }
}

/// A least-squares fit against a predicted exponent.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    /// Transformed coordinates actually fitted.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub residuals: Vec<f64>,
    pub expected_slope: f64,
    pub tolerance: f64,
    /// `|slope − expected_slope| ≤ tolerance`.
    pub pass: bool,
}

impl ScalingFit {
    fn from_points(points: Vec<(f64, f64)>, expected_slope: f64, tolerance: f64) -> Result<Self> {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let LineFit {
            slope,
            intercept,
            r2,
            residuals,
        } = line_fit(&xs, &ys)?;
        let pass = (slope - expected_slope).abs() <= tolerance;
        Ok(ScalingFit {
            points,
            slope,
            intercept,
            r2,
            residuals,
            expected_slope,
            tolerance,
            pass,
        })
    }
}

/// Predicted log–log slope of `λ₁` versus ε in the persistence regime:
/// `4b'(0)/σ'(0)² − 2`.
pub fn expected_lambda1_slope(model: &Model) -> Result<f64> {
    let s1 = model.sigma.d1(0.0);
    if s1 == 0.0 {
        return Err(Error::InvalidArgument(
            "the power law needs σ'(0) ≠ 0 (demographic-only models follow \
             an exponential law instead)"
                .into(),
        ));
    }
    Ok(4.0 * model.b.d1(0.0) / (s1 * s1) - 2.0)
}

/// Predicted log–log slope of `E[T₀]` versus ε: the negative of
/// [`expected_lambda1_slope`].
pub fn expected_mean_extinction_slope(model: &Model) -> Result<f64> {
    Ok(-expected_lambda1_slope(model)?)
}

fn require_persistence(model: &Model) -> Result<f64> {
    let rate = model.stochastic_growth_rate();
    if !(rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "this sweep applies to the persistence regime (stochastic growth \
             rate > 0; got {rate:e})"
        )));
    }
    Ok(rate)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Extinction-rate exponent
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RateRow {
    pub eps: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Spectral λ₁ ladder plus the log–log fit.
#[derive(Debug, Clone)]
pub struct RateSweep {
    pub rows: Vec<RateRow>,
    pub fit: ScalingFit,
}

impl RateSweep {
    pub fn data_csv(&self) -> String {
        let mut s = String::from("eps,lambda1,lambda2\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{:e},{:e}\n", r.eps, r.lambda1, r.lambda2));
        }
        s
    }
}

/// Computes λ₁ spectrally at every ladder point and fits
/// `ln λ₁ = slope·ln ε + c` against the predicted exponent.
pub fn sweep_lambda1(spec: &SweepSpec) -> Result<RateSweep> {
    spec.require(spec.estimators.spectral, "spectral")?;
    spec.require_fit_length()?;
    require_persistence(&spec.model)?;
    let expected = expected_lambda1_slope(&spec.model)?;
    let mut rows = Vec::with_capacity(spec.eps_ladder.len());
    for &eps in &spec.eps_ladder {
        let (l1, l2) = spectral::extinction_rates(&spec.model, eps, spec.n_base)?;
        rows.push(RateRow {
            eps,
            lambda1: l1,
            lambda2: l2,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.eps.ln(), r.lambda1.ln()))
        .collect();
    let fit = ScalingFit::from_points(points, expected, SLOPE_TOL_SPECTRAL)?;
    Ok(RateSweep { rows, fit })
}

// ---------------------------------------------------------------------------
// Mean extinction time
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MeanRow {
    pub eps: f64,
    /// Censoring-aware exponential maximum-likelihood mean.
    pub mean: f64,
    pub se: f64,
    pub deaths: usize,
    pub censored_fraction: f64,
    /// True when the censored fraction exceeded [`CENSOR_LIMIT`] and the
    /// point was left out of the fit.
    pub excluded: bool,
}

/// Mean-extinction sweep outcome; the regime is selected by the sign of
/// the stochastic growth rate.
#[derive(Debug, Clone)]
pub enum MeanExtinctionSweep {
    /// Persistence regime: power law `E[T₀] ≍ ε^{2 − 4b'(0)/σ'(0)²}`,
    /// fitted in log–log coordinates.
    PowerLaw { rows: Vec<MeanRow>, fit: ScalingFit },
    /// Extinction regime: `E[T₀]` linear in `|ln ε|`; the verdict asks
    /// for a positive slope and `R² ≥` [`LOG_REGIME_R2`].
    Logarithmic {
        rows: Vec<MeanRow>,
        fit: LineFit,
        r2_threshold: f64,
        pass: bool,
    },
}

impl MeanExtinctionSweep {
    pub fn rows(&self) -> &[MeanRow] {
        match self {
            MeanExtinctionSweep::PowerLaw { rows, .. } => rows,
            MeanExtinctionSweep::Logarithmic { rows, .. } => rows,
        }
    }

    pub fn pass(&self) -> bool {
        match self {
            MeanExtinctionSweep::PowerLaw { fit, .. } => fit.pass,
            MeanExtinctionSweep::Logarithmic { pass, .. } => *pass,
        }
    }

    pub fn data_csv(&self) -> String {
        let mut s = String::from("eps,mean_t0,se,deaths,censored_fraction,excluded\n");
        for r in self.rows() {
            s.push_str(&format!(
                "{:e},{:e},{:e},{},{:e},{}\n",
                r.eps, r.mean, r.se, r.deaths, r.censored_fraction, r.excluded
            ));
        }
        s
    }
}

fn mean_rows(
    spec: &SweepSpec,
    model: &Model,
    x0: f64,
    scheme: Scheme,
) -> Result<Vec<MeanRow>> {
    let mut rows = Vec::with_capacity(spec.eps_ladder.len());
    for (k, &eps) in spec.eps_ladder.iter().enumerate() {
        let sample =
            sde::sample_extinction_times(model, eps, x0, scheme, &spec.rung_sim(k))?;
        let cf = sample.censored_fraction();
        rows.push(MeanRow {
            eps,
            mean: sample.mle_mean(),
            se: sample.mle_se(),
            deaths: sample.deaths(),
            censored_fraction: cf,
            excluded: cf > CENSOR_LIMIT,
        });
    }
    Ok(rows)
}

/// Monte Carlo mean extinction times across the ladder with the
/// regime-appropriate fit.  Ladder points censored beyond
/// [`CENSOR_LIMIT`] are flagged and excluded; at least 4 points must
/// survive.
pub fn sweep_mean_extinction(
    spec: &SweepSpec,
    x0: f64,
    scheme: Scheme,
) -> Result<MeanExtinctionSweep> {
    spec.require(spec.estimators.mc, "Monte Carlo")?;
    spec.require_fit_length()?;
    let rate = spec.model.stochastic_growth_rate();
    if rate.abs() < 1e-12 {
        return Err(Error::CriticalGrowthRate(
            "no asymptotic extinction-time law at zero stochastic growth rate".into(),
        ));
    }
    let rows = mean_rows(spec, &spec.model, x0, scheme)?;
    let kept: Vec<&MeanRow> = rows.iter().filter(|r| !r.excluded).collect();
    if kept.len() < MIN_FIT_POINTS {
        return Err(Error::Simulation(format!(
            "only {} ladder points under the {CENSOR_LIMIT:.0e} censoring limit; \
             extend t_max or trim the ladder",
            kept.len()
        )));
    }
    if rate > 0.0 {
        let expected = expected_mean_extinction_slope(&spec.model)?;
        let points: Vec<(f64, f64)> = kept
            .iter()
            .map(|r| (r.eps.ln(), r.mean.ln()))
            .collect();
        let fit = ScalingFit::from_points(points, expected, SLOPE_TOL_MC)?;
        Ok(MeanExtinctionSweep::PowerLaw { rows, fit })
    } else {
        let xs: Vec<f64> = kept.iter().map(|r| r.eps.ln().abs()).collect();
        let ys: Vec<f64> = kept.iter().map(|r| r.mean).collect();
        let fit = line_fit(&xs, &ys)?;
        let pass = fit.slope > 0.0 && fit.r2 >= LOG_REGIME_R2;
        Ok(MeanExtinctionSweep::Logarithmic {
            rows,
            fit,
            r2_threshold: LOG_REGIME_R2,
            pass,
        })
    }
}

// ---------------------------------------------------------------------------
// Reciprocal law λ₁·E[T₀] → 1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ReciprocalRow {
    pub eps: f64,
    pub lambda1: f64,
    pub mean: f64,
    pub product: f64,
    pub censored_fraction: f64,
    /// Product inside [`RECIPROCAL_BAND`].
    pub pass: bool,
}

/// Checks `λ₁·E[T₀] ∈ [0.8, 1.2]` pointwise: λ₁ from the eigensolver,
/// the mean from Monte Carlo with the censoring-aware estimator.
pub fn reciprocal_products(
    spec: &SweepSpec,
    x0: f64,
    scheme: Scheme,
) -> Result<Vec<ReciprocalRow>> {
    spec.require(spec.estimators.spectral, "spectral")?;
    spec.require(spec.estimators.mc, "Monte Carlo")?;
    require_persistence(&spec.model)?;
    let mut rows = Vec::with_capacity(spec.eps_ladder.len());
    for (k, &eps) in spec.eps_ladder.iter().enumerate() {
        let (l1, _) = spectral::extinction_rates(&spec.model, eps, spec.n_base)?;
        let sample =
            sde::sample_extinction_times(&spec.model, eps, x0, scheme, &spec.rung_sim(k))?;
        let mean = sample.mle_mean();
        let product = l1 * mean;
        rows.push(ReciprocalRow {
            eps,
            lambda1: l1,
            mean,
            product,
            censored_fraction: sample.censored_fraction(),
            pass: (RECIPROCAL_BAND.0..=RECIPROCAL_BAND.1).contains(&product),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// QSD convergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct QsdRow {
    pub eps: f64,
    /// TV distance between the spectral QSD and the environmental-only
    /// stationary density.
    pub tv_to_limit: f64,
    /// Near-origin envelope `max_{x < 0.1} u_ε(x)·x^0.9` — should stay
    /// bounded across the ladder.
    pub envelope: f64,
}

#[derive(Debug, Clone)]
pub struct MassRow {
    pub eps: f64,
    /// QSD mass of `(0, 0.1)`.
    pub near_zero_mass: f64,
}

/// QSD small-ε behavior; the branch is selected by the sign of the
/// stochastic growth rate.
#[derive(Debug, Clone)]
pub enum QsdConvergenceSweep {
    /// Persistence: TV to the limit density decreases down the ladder
    /// and ends below [`QSD_TV_THRESHOLD`].
    ToLimit {
        rows: Vec<QsdRow>,
        monotone: bool,
        pass: bool,
    },
    /// Extinction regime: near-origin mass grows and ends above
    /// [`NEAR_ZERO_MASS_THRESHOLD`].
    MassEscape { rows: Vec<MassRow>, pass: bool },
}

impl QsdConvergenceSweep {
    pub fn pass(&self) -> bool {
        match self {
            QsdConvergenceSweep::ToLimit { pass, .. } => *pass,
            QsdConvergenceSweep::MassEscape { pass, .. } => *pass,
        }
    }

    pub fn data_csv(&self) -> String {
        match self {
            QsdConvergenceSweep::ToLimit { rows, .. } => {
                let mut s = String::from("eps,tv_to_limit,envelope\n");
                for r in rows {
                    s.push_str(&format!("{:e},{:e},{:e}\n", r.eps, r.tv_to_limit, r.envelope));
                }
                s
            }
            QsdConvergenceSweep::MassEscape { rows, .. } => {
                let mut s = String::from("eps,near_zero_mass\n");
                for r in rows {
                    s.push_str(&format!("{:e},{:e}\n", r.eps, r.near_zero_mass));
                }
                s
            }
        }
    }
}

fn envelope_near_origin(table: &DensityTable) -> f64 {
    table
        .grid()
        .nodes()
        .iter()
        .zip(table.values())
        .filter(|(&x, _)| x < 0.1)
        .map(|(&x, u)| u * x.powf(ENVELOPE_EXPONENT))
        .fold(0.0f64, f64::max)
}

/// Tracks the QSD along the ladder: TV to the closed-regime limit when
/// the growth rate is positive, near-origin mass when it is negative.
pub fn qsd_convergence_sweep(spec: &SweepSpec) -> Result<QsdConvergenceSweep> {
    spec.require(spec.estimators.spectral, "spectral")?;
    let rate = spec.model.stochastic_growth_rate();
    if rate.abs() < 1e-12 {
        return Err(Error::CriticalGrowthRate(
            "QSD limit undefined at zero stochastic growth rate".into(),
        ));
    }
    if rate > 0.0 {
        // One shared grid so TV values are comparable across the ladder.
        let eps_max = spec.eps_ladder[0];
        let x_max = density::auto_x_max(&spec.model)?
            .max(density::auto_x_max_eps(&spec.model, eps_max)?);
        let grid = Grid::graded(1e-8, 0.1, x_max, QSD_GRID_N)?;
        let limit = density::stationary_density(&spec.model, &grid)?;
        let mut rows = Vec::with_capacity(spec.eps_ladder.len());
        for &eps in &spec.eps_ladder {
            let qsd = spectral::qsd_density(&spec.model, eps, &grid, spec.n_base)?;
            rows.push(QsdRow {
                eps,
                tv_to_limit: qsd.qsd.tv_distance(&limit)?,
                envelope: envelope_near_origin(&qsd.qsd),
            });
        }
        // Monotone up to a hair of numerical slack.
        let monotone = rows
            .windows(2)
            .all(|w| w[1].tv_to_limit <= w[0].tv_to_limit + 1e-3);
        let pass = monotone && rows.last().unwrap().tv_to_limit <= QSD_TV_THRESHOLD;
        Ok(QsdConvergenceSweep::ToLimit {
            rows,
            monotone,
            pass,
        })
    } else {
        let mut rows = Vec::with_capacity(spec.eps_ladder.len());
        for &eps in &spec.eps_ladder {
            let x_max = density::auto_x_max_eps(&spec.model, eps)?;
            let grid = Grid::graded(1e-9, 0.1, x_max.max(0.5), QSD_GRID_N)?;
            let qsd = spectral::qsd_density(&spec.model, eps, &grid, spec.n_base)?;
            let masses = qsd.qsd.bin_masses(&[0.0, 0.1, grid.x_max()]);
            rows.push(MassRow {
                eps,
                near_zero_mass: masses[0],
            });
        }
        let pass = rows.last().unwrap().near_zero_mass >= NEAR_ZERO_MASS_THRESHOLD;
        Ok(QsdConvergenceSweep::MassEscape { rows, pass })
    }
}

// ---------------------------------------------------------------------------
// Spectral-gap uniformity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GapRow {
    pub eps: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
}

/// λ₂ band statistics across the ladder while λ₁ collapses.
#[derive(Debug, Clone)]
pub struct GapSweep {
    pub rows: Vec<GapRow>,
    pub min_lambda2: f64,
    pub median_lambda2: f64,
    /// `max λ₂ / min λ₂` over the ladder.
    pub band_factor: f64,
    /// `λ₁(largest ε) / λ₁(smallest ε)`.
    pub lambda1_fall: f64,
    /// `min λ₂ ≥ 0.1·median λ₂` and every gap positive.
    pub pass: bool,
}

impl GapSweep {
    pub fn data_csv(&self) -> String {
        let mut s = String::from("eps,lambda1,lambda2,gap\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                r.eps, r.lambda1, r.lambda2, r.gap
            ));
        }
        s
    }
}

/// Tabulates `(λ₁, λ₂)` over the ladder and applies the
/// uniform-positivity proxy to λ₂.
pub fn spectral_gap_sweep(spec: &SweepSpec) -> Result<GapSweep> {
    spec.require(spec.estimators.spectral, "spectral")?;
    require_persistence(&spec.model)?;
    if spec.eps_ladder.len() < 2 {
        return Err(Error::InvalidArgument(
            "gap sweep needs at least 2 ladder points".into(),
        ));
    }
    let mut rows = Vec::with_capacity(spec.eps_ladder.len());
    for &eps in &spec.eps_ladder {
        let (l1, l2) = spectral::extinction_rates(&spec.model, eps, spec.n_base)?;
        rows.push(GapRow {
            eps,
            lambda1: l1,
            lambda2: l2,
            gap: l2 - l1,
        });
    }
    let l2s: Vec<f64> = rows.iter().map(|r| r.lambda2).collect();
    let min_l2 = l2s.iter().copied().fold(f64::INFINITY, f64::min);
    let max_l2 = l2s.iter().copied().fold(0.0f64, f64::max);
    let med = median(&l2s);
    let pass = min_l2 >= GAP_FLOOR_FRACTION * med && rows.iter().all(|r| r.gap > 0.0);
    Ok(GapSweep {
        band_factor: max_l2 / min_l2,
        lambda1_fall: rows.first().unwrap().lambda1 / rows.last().unwrap().lambda1,
        min_lambda2: min_l2,
        median_lambda2: med,
        rows,
        pass,
    })
}

/// Exploratory table for the extinction regime: `(ε, λ₁, λ₁·|ln ε|)`.
/// The conjectured sharpness of the `1/|ln ε|` lower bound is reported,
/// never gated on.
pub fn subcritical_rate_trend(spec: &SweepSpec) -> Result<Vec<(f64, f64, f64)>> {
    spec.require(spec.estimators.spectral, "spectral")?;
    if !(spec.model.stochastic_growth_rate() < 0.0) {
        return Err(Error::InvalidArgument(
            "the rate trend is an extinction-regime diagnostic".into(),
        ));
    }
    let mut out = Vec::with_capacity(spec.eps_ladder.len());
    for &eps in &spec.eps_ladder {
        let (l1, _) = spectral::extinction_rates(&spec.model, eps, spec.n_base)?;
        out.push((eps, l1, l1 * eps.ln().abs()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

/// One verdict line of the machine-readable summary.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    /// Slug of the asymptotic law being checked.
    pub theorem: String,
    pub metric: String,
    pub expected: String,
    pub fitted: String,
    pub tolerance: String,
    pub verdict: bool,
}

impl SummaryRow {
    pub fn new(
        theorem: &str,
        metric: &str,
        expected: String,
        fitted: String,
        tolerance: String,
        verdict: bool,
    ) -> SummaryRow {
        SummaryRow {
            theorem: theorem.into(),
            metric: metric.into(),
            expected,
            fitted,
            tolerance,
            verdict,
        }
    }
}

/// A report section: free-text lines plus its verdict rows.
#[derive(Debug, Clone)]
pub struct Section {
    pub title: String,
    pub lines: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

impl Section {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.verdict)
    }
}

/// Accumulates sections and renders the human-readable report and the
/// `theorem,metric,expected,fitted,tolerance,verdict` summary CSV.
#[derive(Debug, Clone, Default)]
pub struct Report {
    sections: Vec<Section>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn all_pass(&self) -> bool {
        self.sections.iter().all(Section::pass)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::from("asymptotic-law verification report\n");
        out.push_str("==================================\n\n");
        let failures: Vec<&str> = self
            .sections
            .iter()
            .filter(|s| !s.pass())
            .map(|s| s.title.as_str())
            .collect();
        if !failures.is_empty() {
            out.push_str(&format!("FAILURES: {}\n\n", failures.join(", ")));
        }
        for s in &self.sections {
            let tag = if s.pass() { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{tag}] {}\n", s.title));
            for line in &s.lines {
                out.push_str(&format!("  {line}\n"));
            }
            for r in &s.rows {
                out.push_str(&format!(
                    "  {} | expected {} | fitted {} | tolerance {} | {}\n",
                    r.metric,
                    r.expected,
                    r.fitted,
                    r.tolerance,
                    if r.verdict { "pass" } else { "fail" }
                ));
            }
            out.push('\n');
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("theorem,metric,expected,fitted,tolerance,verdict\n");
        for s in &self.sections {
            for r in &s.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.theorem,
                    r.metric,
                    r.expected,
                    r.fitted,
                    r.tolerance,
                    if r.verdict { "pass" } else { "fail" }
                ));
            }
        }
        out
    }
}

impl RateSweep {
    pub fn section(&self) -> Section {
        let mut lines = vec![format!(
            "log-log fit of lambda1 vs eps over {} ladder points, r2 = {:.4}",
            self.rows.len(),
            self.fit.r2
        )];
        for r in &self.rows {
            lines.push(format!(
                "eps = {:<8.4} lambda1 = {:.6e}  lambda2 = {:.6e}",
                r.eps, r.lambda1, r.lambda2
            ));
        }
        Section {
            title: "extinction-rate-exponent".into(),
            lines,
            rows: vec![SummaryRow::new(
                "extinction-rate-exponent",
                "loglog-slope",
                format!("{:.3}", self.fit.expected_slope),
                format!("{:.3}", self.fit.slope),
                format!("{:.2}", self.fit.tolerance),
                self.fit.pass,
            )],
        }
    }
}

impl MeanExtinctionSweep {
    pub fn section(&self) -> Section {
        match self {
            MeanExtinctionSweep::PowerLaw { rows, fit } => {
                let mut lines = vec![format!(
                    "log-log fit of mean extinction time vs eps, r2 = {:.4}",
                    fit.r2
                )];
                for r in rows {
                    lines.push(format!(
                        "eps = {:<8.4} mean = {:>10.4}  censored = {:.3}{}",
                        r.eps,
                        r.mean,
                        r.censored_fraction,
                        if r.excluded { "  [excluded]" } else { "" }
                    ));
                }
                Section {
                    title: "mean-extinction-exponent".into(),
                    lines,
                    rows: vec![SummaryRow::new(
                        "mean-extinction-exponent",
                        "loglog-slope",
                        format!("{:.3}", fit.expected_slope),
                        format!("{:.3}", fit.slope),
                        format!("{:.2}", fit.tolerance),
                        fit.pass,
                    )],
                }
            }
            MeanExtinctionSweep::Logarithmic {
                rows,
                fit,
                r2_threshold,
                pass,
            } => {
                let mut lines = vec![format!(
                    "linear fit of mean extinction time vs |ln eps|: slope {:.3}, r2 = {:.4}",
                    fit.slope, fit.r2
                )];
                for r in rows {
                    lines.push(format!(
                        "eps = {:<8.4} mean = {:>10.4}  censored = {:.3}{}",
                        r.eps,
                        r.mean,
                        r.censored_fraction,
                        if r.excluded { "  [excluded]" } else { "" }
                    ));
                }
                Section {
                    title: "logarithmic-regime".into(),
                    lines,
                    rows: vec![SummaryRow::new(
                        "logarithmic-regime",
                        "abs-ln-eps-fit-r2",
                        format!(">= {r2_threshold:.2}"),
                        format!("{:.4}", fit.r2),
                        "slope > 0".into(),
                        *pass,
                    )],
                }
            }
        }
    }
}

/// Section for the reciprocal-law rows.
pub fn reciprocal_section(rows: &[ReciprocalRow]) -> Section {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "eps = {:<8.4} lambda1*mean = {:.4} (lambda1 = {:.4e}, mean = {:.4})",
                r.eps, r.product, r.lambda1, r.mean
            )
        })
        .collect();
    let rows_out = rows
        .iter()
        .map(|r| {
            SummaryRow::new(
                "reciprocal-law",
                &format!("product-at-eps-{}", r.eps),
                "1.0".into(),
                format!("{:.4}", r.product),
                format!("[{}, {}]", RECIPROCAL_BAND.0, RECIPROCAL_BAND.1),
                r.pass,
            )
        })
        .collect();
    Section {
        title: "reciprocal-law".into(),
        lines,
        rows: rows_out,
    }
}

impl QsdConvergenceSweep {
    pub fn section(&self) -> Section {
        match self {
            QsdConvergenceSweep::ToLimit {
                rows,
                monotone,
                pass,
            } => {
                let mut lines: Vec<String> = rows
                    .iter()
                    .map(|r| {
                        format!(
                            "eps = {:<8.4} TV(qsd, limit) = {:.4}  envelope = {:.3}",
                            r.eps, r.tv_to_limit, r.envelope
                        )
                    })
                    .collect();
                lines.push(format!("monotone decreasing: {monotone}"));
                Section {
                    title: "qsd-convergence".into(),
                    lines,
                    rows: vec![SummaryRow::new(
                        "qsd-convergence",
                        "tv-at-smallest-eps",
                        format!("<= {QSD_TV_THRESHOLD}"),
                        format!("{:.4}", rows.last().map(|r| r.tv_to_limit).unwrap_or(f64::NAN)),
                        "monotone ladder".into(),
                        *pass,
                    )],
                }
            }
            QsdConvergenceSweep::MassEscape { rows, pass } => {
                let lines: Vec<String> = rows
                    .iter()
                    .map(|r| {
                        format!(
                            "eps = {:<8.4} qsd mass of (0, 0.1) = {:.4}",
                            r.eps, r.near_zero_mass
                        )
                    })
                    .collect();
                Section {
                    title: "qsd-mass-escape".into(),
                    lines,
                    rows: vec![SummaryRow::new(
                        "qsd-mass-escape",
                        "near-zero-mass-at-smallest-eps",
                        format!(">= {NEAR_ZERO_MASS_THRESHOLD}"),
                        format!(
                            "{:.4}",
                            rows.last().map(|r| r.near_zero_mass).unwrap_or(f64::NAN)
                        ),
                        "-".into(),
                        *pass,
                    )],
                }
            }
        }
    }
}

impl GapSweep {
    pub fn section(&self) -> Section {
        let mut lines: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "eps = {:<8.4} lambda1 = {:.5e}  lambda2 = {:.5e}  gap = {:.5e}",
                    r.eps, r.lambda1, r.lambda2, r.gap
                )
            })
            .collect();
        lines.push(format!(
            "lambda2 band factor = {:.3}, lambda1 fall = {:.1}x",
            self.band_factor, self.lambda1_fall
        ));
        Section {
            title: "spectral-gap-uniformity".into(),
            lines,
            rows: vec![SummaryRow::new(
                "spectral-gap-uniformity",
                "min-lambda2-over-median",
                format!(">= {GAP_FLOOR_FRACTION}"),
                format!("{:.4}", self.min_lambda2 / self.median_lambda2),
                "gap > 0 everywhere".into(),
                self.pass,
            )],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_logistic;

    fn spec_with(
        model: Model,
        ladder: &[f64],
        n_base: usize,
        sim: SimConfig,
    ) -> SweepSpec {
        SweepSpec::new(model, ladder, n_base, sim).unwrap()
    }

    fn default_sim() -> SimConfig {
        SimConfig::new(2e-3, 100.0, 9, 250)
    }

    #[test]
    fn ladder_is_sorted_and_validated() {
        let m = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        let spec = spec_with(m.clone(), &[0.1, 0.4, 0.2, 0.3], 2000, default_sim());
        assert_eq!(spec.eps_ladder, vec![0.4, 0.3, 0.2, 0.1]);
        assert!(SweepSpec::new(m.clone(), &[], 2000, default_sim()).is_err());
        assert!(SweepSpec::new(m.clone(), &[0.2, 0.2], 2000, default_sim()).is_err());
        assert!(SweepSpec::new(m, &[0.2, -0.1], 2000, default_sim()).is_err());
    }

    #[test]
    fn expected_slopes_follow_the_growth_rate() {
        let m1 = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((expected_lambda1_slope(&m1).unwrap() - 2.0).abs() < 1e-12);
        assert!((expected_mean_extinction_slope(&m1).unwrap() + 2.0).abs() < 1e-12);
        let m15 = build_logistic(1.5, 1.0, 1.0, 1.0).unwrap();
        assert!((expected_lambda1_slope(&m15).unwrap() - 4.0).abs() < 1e-12);
        let demo = m1.demographic_only();
        assert!(expected_lambda1_slope(&demo).is_err());
    }

    #[test]
    fn short_ladders_are_rejected_for_fits() {
        let m = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        let spec = spec_with(m, &[0.4, 0.3, 0.2], 2000, default_sim());
        assert!(sweep_lambda1(&spec).is_err());
        assert!(sweep_mean_extinction(&spec, 1.0, Scheme::AbsorbedEuler).is_err());
    }

    #[test]
    fn disabled_estimators_are_refused() {
        let m = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        let mut spec = spec_with(m, &[0.4, 0.3, 0.2, 0.14], 2000, default_sim());
        spec.estimators.spectral = false;
        assert!(sweep_lambda1(&spec).is_err());
        assert!(qsd_convergence_sweep(&spec).is_err());
    }

    #[test]
    fn lambda1_sweep_is_order_independent_and_sane() {
        // Coarse 4-point ladder: the power law has visible prefactor
        // curvature at these ε, so this checks mechanics and rough
        // magnitude; the calibrated ±0.2 verdict runs on the longer
        // production ladder.
        let m = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        let spec = spec_with(m.clone(), &[0.4, 0.3, 0.2, 0.14], 2000, default_sim());
        let sweep = sweep_lambda1(&spec).unwrap();
        assert_eq!(sweep.rows.len(), 4);
        assert!(sweep.rows.windows(2).all(|w| w[0].eps > w[1].eps));
        assert!(sweep.rows.iter().all(|r| r.lambda1 > 0.0 && r.lambda2 > r.lambda1));
        assert!(sweep.fit.r2 > 0.95, "r2 = {}", sweep.fit.r2);
        assert!(
            sweep.fit.slope > 1.4 && sweep.fit.slope < 2.4,
            "slope = {}",
            sweep.fit.slope
        );
        // Permuted ladder gives bit-identical fits.
        let spec_perm = spec_with(m, &[0.2, 0.14, 0.4, 0.3], 2000, default_sim());
        let sweep_perm = sweep_lambda1(&spec_perm).unwrap();
        assert_eq!(sweep.fit.slope.to_bits(), sweep_perm.fit.slope.to_bits());
        assert_eq!(sweep.fit.r2.to_bits(), sweep_perm.fit.r2.to_bits());
    }

    #[test]
    fn gap_sweep_reports_band_and_positive_gaps() {
        let m = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        let spec = spec_with(m, &[0.4, 0.3, 0.2, 0.14], 2000, default_sim());
        let gaps = spectral_gap_sweep(&spec).unwrap();
        assert!(gaps.rows.iter().all(|r| r.gap > 0.0));
        assert!(gaps.band_factor >= 1.0);
        assert!(gaps.min_lambda2 <= gaps.median_lambda2);
        assert!(gaps.pass, "min λ₂ {} median {}", gaps.min_lambda2, gaps.median_lambda2);
        assert!(gaps.lambda1_fall > 1.0);
    }

    #[test]
    fn qsd_tv_decreases_toward_the_limit() {
        let m = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        let spec = spec_with(m, &[0.3, 0.15], 2000, default_sim());
        match qsd_convergence_sweep(&spec).unwrap() {
            QsdConvergenceSweep::ToLimit { rows, monotone, .. } => {
                assert_eq!(rows.len(), 2);
                assert!(monotone, "TV rows: {rows:?}");
                assert!(rows[1].tv_to_limit < rows[0].tv_to_limit);
                assert!(rows.iter().all(|r| r.envelope.is_finite() && r.envelope > 0.0));
            }
            other => panic!("expected the persistence branch, got {other:?}"),
        }
    }

    #[test]
    fn subcritical_qsd_mass_concentrates_near_zero() {
        let m = build_logistic(0.3, 1.0, 1.0, 1.0).unwrap();
        let spec = spec_with(m.clone(), &[0.1, 0.05], 2000, default_sim());
        match qsd_convergence_sweep(&spec).unwrap() {
            QsdConvergenceSweep::MassEscape { rows, .. } => {
                assert_eq!(rows.len(), 2);
                assert!(rows[1].near_zero_mass > rows[0].near_zero_mass);
                assert!(rows[1].near_zero_mass > 0.5);
            }
            other => panic!("expected the extinction branch, got {other:?}"),
        }
        let trend = subcritical_rate_trend(&spec).unwrap();
        assert_eq!(trend.len(), 2);
        assert!(trend.iter().all(|&(_, l1, prod)| l1 > 0.0 && prod > 0.0));
    }

    #[test]
    fn censored_rungs_are_flagged_and_skipped() {
        // The smallest rung (ε = 0.12) cannot finish by t_max = 100 and
        // must be excluded; the four clean rungs still support the fit.
        let m = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
        let sim = SimConfig::new(2e-3, 100.0, 21, 250);
        let spec = spec_with(m, &[0.45, 0.4, 0.35, 0.3, 0.12], 2000, sim);
        match sweep_mean_extinction(&spec, 1.0, Scheme::AbsorbedEuler).unwrap() {
            MeanExtinctionSweep::PowerLaw { rows, fit } => {
                assert_eq!(rows.len(), 5);
                assert!(rows[4].excluded, "censored {}", rows[4].censored_fraction);
                assert!(rows[..4].iter().all(|r| !r.excluded));
                assert_eq!(fit.points.len(), 4);
                assert!(fit.slope < -1.0, "slope {}", fit.slope);
                assert!(fit.r2 > 0.85, "r2 {}", fit.r2);
            }
            other => panic!("expected the power-law branch, got {other:?}"),
        }
    }

    #[test]
    fn subcritical_means_grow_with_abs_ln_eps() {
        let m = build_logistic(0.3, 1.0, 1.0, 1.0).unwrap();
        let sim = SimConfig::new(2e-3, 300.0, 33, 120);
        let spec = spec_with(m, &[0.2, 0.1, 0.05, 0.025], 2000, sim);
        match sweep_mean_extinction(&spec, 1.0, Scheme::AbsorbedEuler).unwrap() {
            MeanExtinctionSweep::Logarithmic { rows, fit, .. } => {
                assert!(rows.iter().all(|r| !r.excluded));
                assert!(fit.slope > 0.0, "slope {}", fit.slope);
                assert!(fit.r2 > 0.9, "r2 {}", fit.r2);
            }
            other => panic!("expected the logarithmic branch, got {other:?}"),
        }
    }

    #[test]
    fn report_renders_failures_index_and_csv() {
        let mut report = Report::new();
        report.push(Section {
            title: "law-a".into(),
            lines: vec!["detail".into()],
            rows: vec![SummaryRow::new(
                "law-a",
                "slope",
                "2".into(),
                "2.05".into(),
                "0.2".into(),
                true,
            )],
        });
        report.push(Section {
            title: "law-b".into(),
            lines: vec![],
            rows: vec![SummaryRow::new(
                "law-b",
                "tv",
                "<= 0.05".into(),
                "0.2".into(),
                "-".into(),
                false,
            )],
        });
        assert!(!report.all_pass());
        let text = report.render_text();
        assert!(text.contains("FAILURES: law-b"));
        assert!(text.contains("[PASS] law-a"));
        assert!(text.contains("[FAIL] law-b"));
        let csv = report.render_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "theorem,metric,expected,fitted,tolerance,verdict");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with("pass"));
        assert!(lines[2].ends_with("fail"));

        let mut ok = Report::new();
        ok.push(Section {
            title: "law-a".into(),
            lines: vec![],
            rows: vec![SummaryRow::new("law-a", "m", "1".into(), "1".into(), "0".into(), true)],
        });
        assert!(ok.all_pass());
        assert!(!ok.render_text().contains("FAILURES"));
    }

    #[test]
    fn critical_growth_rate_is_rejected() {
        // μ = σ²/2 puts the stochastic growth rate exactly at zero.
        let m = build_logistic(0.5, 1.0, 1.0, 1.0).unwrap();
        let sim = default_sim();
        let spec = spec_with(m, &[0.4, 0.3, 0.2, 0.14], 2000, sim);
        assert!(sweep_mean_extinction(&spec, 1.0, Scheme::AbsorbedEuler).is_err());
        assert!(sweep_lambda1(&spec).is_err());
        assert!(qsd_convergence_sweep(&spec).is_err());
    }
}
