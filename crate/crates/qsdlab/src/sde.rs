//! Absorbed-path Monte Carlo for the two-noise population SDE
//!
//! ```text
//! dX = b(X) dt + σ(X) dB + ε √a(X) dW,   X absorbed at 0,
//! ```
//!
//! with per-path deterministic random streams, extinction-time
//! statistics (censoring-aware), interval-exit statistics, law snapshots
//! for the multiscale decomposition, a Fleming–Viot particle system for
//! the empirical QSD, and the demographic-only contrast experiment.
//!
//! # Reproducibility
//!
//! Path `i` draws from `ChaCha8` stream `i + 1` of the configured seed
//! (stream 0 is reserved, and the Fleming–Viot rebirth draws live on
//! stream `n_particles + 1`).  Work is distributed with
//! [`crate::exec::map_indexed`], which preserves index order, so results
//! are bit-identical across thread counts and across the parallel and
//! sequential builds.
//!
//! # Time stepping
//!
//! The base step is `dt`.  Inside the demographic boundary layer —
//! below `min(0.1, 10·ε²·a'(0)/σ'(0)²)`, where the `√x`-type noise makes
//! relative kicks largest — each macro step is split into
//! `1/dt_boundary_factor` substeps, so path time still advances in
//! macro-step multiples (which keeps ensembles in lockstep).  A path is
//! absorbed the first time a (sub)step lands at or below 0, at the end
//! time of that substep.

use crate::density::DensityTable;
use crate::error::{Error, Result};
use crate::exec;
use crate::fit::{line_fit, LineFit};
use crate::model::Model;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Time-stepping scheme for one increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Explicit Euler–Maruyama with absorption on `x ≤ 0`.
    AbsorbedEuler,
    /// Drift-implicit Euler (diffusion explicit), solved by Newton;
    /// sturdier for stiff drifts at coarse steps.
    DriftImplicit,
}

/// Simulation parameters shared by the Monte Carlo drivers.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Macro time step.
    pub dt: f64,
    /// Substep fraction inside the boundary layer (1 disables
    /// refinement; 1/16 splits each macro step into 16).
    pub dt_boundary_factor: f64,
    /// Censoring horizon.
    pub t_max: f64,
    /// Base seed; each path derives its own stream.
    pub seed: u64,
    pub n_paths: usize,
}

impl SimConfig {
    pub fn new(dt: f64, t_max: f64, seed: u64, n_paths: usize) -> SimConfig {
        SimConfig {
            dt,
            dt_boundary_factor: 1.0 / 16.0,
            t_max,
            seed,
            n_paths,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_max > self.dt) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt < t_max (got dt={}, t_max={})",
                self.dt, self.t_max
            )));
        }
        if !(self.dt_boundary_factor > 0.0 && self.dt_boundary_factor <= 1.0) {
            return Err(Error::InvalidArgument(
                "dt_boundary_factor must lie in (0, 1]".into(),
            ));
        }
        if self.t_max / self.dt > 1e9 {
            return Err(Error::InvalidArgument(format!(
                "t_max/dt = {:e} macro steps per path is beyond the supported budget (1e9)",
                self.t_max / self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be positive".into()));
        }
        Ok(())
    }
}

/// Dedicated random stream for one path.
fn path_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id + 1);
    rng
}

/// Radius of the near-origin refinement window: ten demographic knees
/// `ε²a'(0)/σ'(0)²`, capped at 0.1 so moderate ε does not refine the
/// bulk.  For purely demographic models (σ'(0) = 0) the knee is replaced
/// by `ε²a'(0)`.
pub fn layer_threshold(model: &Model, eps: f64) -> f64 {
    let s1 = model.sigma.d1(0.0);
    let knee = if s1 != 0.0 {
        eps * eps * model.a.d1(0.0) / (s1 * s1)
    } else {
        eps * eps * model.a.d1(0.0)
    };
    (10.0 * knee).min(0.1)
}

/// One increment of the chosen scheme given the two standard normals.
/// Returns the proposed next position (≤ 0 means absorbed).
pub fn step_once(
    model: &Model,
    eps: f64,
    scheme: Scheme,
    x: f64,
    dt: f64,
    z_env: f64,
    z_dem: f64,
) -> f64 {
    let sqdt = dt.sqrt();
    let diffusion = model.sigma.eval(x) * sqdt * z_env
        + eps * model.a.eval(x).max(0.0).sqrt() * sqdt * z_dem;
    match scheme {
        Scheme::AbsorbedEuler => x + model.b.eval(x) * dt + diffusion,
        Scheme::DriftImplicit => {
            // Solve u = x + b(u)·dt + D by Newton from the explicit guess.
            let target = x + diffusion;
            let mut u = x + model.b.eval(x) * dt + diffusion;
            for _ in 0..4 {
                let denom = 1.0 - model.b.d1(u) * dt;
                if denom.abs() < 0.1 || !u.is_finite() {
                    // Newton poorly conditioned at this step size; the
                    // explicit value is the safe fallback.
                    return x + model.b.eval(x) * dt + diffusion;
                }
                u -= (u - target - model.b.eval(u) * dt) / denom;
            }
            u
        }
    }
}

/// Advances one path by a single macro step of `cfg.dt` (refined inside
/// the boundary layer).  Returns `Ok(Some(time_of_death))` measured from
/// the start of the step if the path is absorbed, `Ok(None)` otherwise;
/// `x` holds the end position.
fn macro_step(
    model: &Model,
    eps: f64,
    scheme: Scheme,
    cfg: &SimConfig,
    layer: f64,
    x: &mut f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<f64>> {
    let n_sub = if *x < layer {
        (1.0 / cfg.dt_boundary_factor).round().max(1.0) as usize
    } else {
        1
    };
    let sub_dt = cfg.dt / n_sub as f64;
    for k in 0..n_sub {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let next = step_once(model, eps, scheme, *x, sub_dt, z1, z2);
        if !next.is_finite() {
            return Err(Error::Simulation(format!(
                "path diverged (x = {next}) at step size {sub_dt:e}; \
                 reduce dt or switch to the drift-implicit scheme"
            )));
        }
        if next <= 0.0 {
            *x = 0.0;
            return Ok(Some((k + 1) as f64 * sub_dt));
        }
        *x = next;
    }
    Ok(None)
}

/// Extinction times of an ensemble started at `x0`, censored at
/// `t_max`.
#[derive(Debug, Clone)]
pub struct ExtinctionSample {
    /// Per-path outcome in path order: `Some(T₀)` or `None` if censored.
    pub per_path: Vec<Option<f64>>,
    /// Σ min(T₀, t_max) over paths: total observed lifetime.
    pub total_exposure: f64,
    pub t_max: f64,
}

impl ExtinctionSample {
    pub fn n_paths(&self) -> usize {
        self.per_path.len()
    }

    pub fn deaths(&self) -> usize {
        self.per_path.iter().flatten().count()
    }

    pub fn censored_fraction(&self) -> f64 {
        1.0 - self.deaths() as f64 / self.n_paths() as f64
    }

    /// Observed (uncensored) extinction times, path order.
    pub fn times(&self) -> Vec<f64> {
        self.per_path.iter().flatten().copied().collect()
    }

    /// Sample mean of the observed times only — biased low when
    /// censoring is material; prefer [`Self::mle_mean`] then.
    pub fn naive_mean(&self) -> f64 {
        let t = self.times();
        t.iter().sum::<f64>() / t.len().max(1) as f64
    }

    pub fn naive_se(&self) -> f64 {
        let t = self.times();
        let n = t.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let m = self.naive_mean();
        let var = t.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    /// Exponential maximum-likelihood mean under right censoring:
    /// total exposure over number of deaths.  Exact for exponential
    /// lifetimes, and the extinction time is asymptotically exponential
    /// in the small-noise regime, which is where censoring bites.
    pub fn mle_mean(&self) -> f64 {
        self.total_exposure / self.deaths().max(1) as f64
    }

    /// Standard error of [`Self::mle_mean`] (exponential information:
    /// mean/√deaths).
    pub fn mle_se(&self) -> f64 {
        self.mle_mean() / (self.deaths().max(1) as f64).sqrt()
    }

    pub fn mle_rate(&self) -> f64 {
        1.0 / self.mle_mean()
    }
}

/// Simulates `cfg.n_paths` absorbed paths from `x0` and collects
/// extinction times.
pub fn sample_extinction_times(
    model: &Model,
    eps: f64,
    x0: f64,
    scheme: Scheme,
    cfg: &SimConfig,
) -> Result<ExtinctionSample> {
    cfg.validate()?;
    if !(x0 > 0.0) {
        return Err(Error::InvalidArgument("x0 must be positive".into()));
    }
    let layer = layer_threshold(model, eps);
    let n_steps = (cfg.t_max / cfg.dt).ceil() as u64;
    let results: Vec<Result<Option<f64>>> = exec::map_indexed(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut x = x0;
        for step in 0..n_steps {
            let died = macro_step(model, eps, scheme, cfg, layer, &mut x, &mut rng)?;
            if let Some(offset) = died {
                return Ok(Some(step as f64 * cfg.dt + offset));
            }
        }
        Ok(None)
    });
    let mut per_path = Vec::with_capacity(cfg.n_paths);
    let mut total_exposure = 0.0;
    for r in results {
        let outcome = r?;
        total_exposure += outcome.unwrap_or(cfg.t_max);
        per_path.push(outcome);
    }
    Ok(ExtinctionSample {
        per_path,
        total_exposure,
        t_max: cfg.t_max,
    })
}

/// Outcome statistics for exits from the interval `(0, β)`.
#[derive(Debug, Clone)]
pub struct ExitStats {
    /// Fraction of paths leaving through `β` (versus absorption at 0).
    pub p_top: f64,
    /// Binomial standard error of `p_top`.
    pub se_p: f64,
    /// Mean exit time (either side).
    pub mean_time: f64,
    pub se_time: f64,
    pub n_paths: usize,
}

/// Simulates exits of `(0, β)` from `x0`, requiring every path to exit
/// before `t_max`.
pub fn exit_event_stats(
    model: &Model,
    eps: f64,
    x0: f64,
    beta: f64,
    scheme: Scheme,
    cfg: &SimConfig,
) -> Result<ExitStats> {
    cfg.validate()?;
    if !(0.0 < x0 && x0 < beta) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < x0 < beta (got x0={x0}, beta={beta})"
        )));
    }
    let layer = layer_threshold(model, eps);
    let n_steps = (cfg.t_max / cfg.dt).ceil() as u64;
    let results: Vec<Result<(bool, f64)>> = exec::map_indexed(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut x = x0;
        for step in 0..n_steps {
            let died = macro_step(model, eps, scheme, cfg, layer, &mut x, &mut rng)?;
            if let Some(offset) = died {
                return Ok((false, step as f64 * cfg.dt + offset));
            }
            if x >= beta {
                return Ok((true, (step + 1) as f64 * cfg.dt));
            }
        }
        Err(Error::Simulation(format!(
            "a path failed to exit (0, {beta}) within t_max = {}; raise t_max",
            cfg.t_max
        )))
    });
    let mut tops = 0usize;
    let mut times = Vec::with_capacity(cfg.n_paths);
    for r in results {
        let (top, t) = r?;
        tops += usize::from(top);
        times.push(t);
    }
    let n = times.len() as f64;
    let p = tops as f64 / n;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
    Ok(ExitStats {
        p_top: p,
        se_p: (p * (1.0 - p) / n).sqrt(),
        mean_time: mean,
        se_time: (var / n).sqrt(),
        n_paths: cfg.n_paths,
    })
}

/// The sub-probability law of the ensemble at one checkpoint.
#[derive(Debug, Clone)]
pub struct LawSnapshot {
    /// Requested checkpoint (snapshots land on the first macro-step
    /// boundary ≥ this time).
    pub t: f64,
    /// Positions of paths still alive at the checkpoint, path order.
    pub alive_positions: Vec<f64>,
    /// Number of paths already absorbed.
    pub dead: usize,
}

/// Runs the ensemble once and photographs it at each checkpoint.
pub fn sample_law_snapshots(
    model: &Model,
    eps: f64,
    x0: f64,
    checkpoints: &[f64],
    scheme: Scheme,
    cfg: &SimConfig,
) -> Result<Vec<LawSnapshot>> {
    cfg.validate()?;
    if checkpoints.is_empty()
        || checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints[0] <= 0.0
    {
        return Err(Error::InvalidArgument(
            "checkpoints must be strictly increasing and positive".into(),
        ));
    }
    if *checkpoints.last().unwrap() > cfg.t_max {
        return Err(Error::InvalidArgument(
            "last checkpoint exceeds t_max".into(),
        ));
    }
    // Convert checkpoints to macro-step indices (first boundary ≥ t).
    let step_marks: Vec<u64> = checkpoints
        .iter()
        .map(|t| (t / cfg.dt).ceil().max(1.0) as u64)
        .collect();
    let layer = layer_threshold(model, eps);
    let last_mark = *step_marks.last().unwrap();
    let per_path: Vec<Result<Vec<Option<f64>>>> = exec::map_indexed(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut x = x0;
        let mut alive = true;
        let mut states = Vec::with_capacity(step_marks.len());
        let mut next_mark = 0usize;
        for step in 1..=last_mark {
            if alive {
                let died = macro_step(model, eps, scheme, cfg, layer, &mut x, &mut rng)?;
                if died.is_some() {
                    alive = false;
                }
            }
            while next_mark < step_marks.len() && step_marks[next_mark] == step {
                states.push(if alive { Some(x) } else { None });
                next_mark += 1;
            }
        }
        Ok(states)
    });
    let mut snapshots: Vec<LawSnapshot> = checkpoints
        .iter()
        .map(|&t| LawSnapshot {
            t,
            alive_positions: Vec::new(),
            dead: 0,
        })
        .collect();
    for path in per_path {
        let states = path?;
        for (k, s) in states.into_iter().enumerate() {
            match s {
                Some(pos) => snapshots[k].alive_positions.push(pos),
                None => snapshots[k].dead += 1,
            }
        }
    }
    Ok(snapshots)
}

/// Parameters of the Fleming–Viot particle estimate of the QSD.
#[derive(Debug, Clone)]
pub struct FvConfig {
    pub n_particles: usize,
    /// Common initial position.
    pub x0: f64,
    /// Relaxation period before any measurement.
    pub t_burn: f64,
    /// Number of pooled position snapshots after burn-in.
    pub n_snapshots: usize,
    /// Time between snapshots.
    pub snapshot_gap: f64,
}

/// Output of the Fleming–Viot run.
#[derive(Debug, Clone)]
pub struct FvResult {
    /// Pooled particle positions over all post-burn-in snapshots.
    pub positions: Vec<f64>,
    /// Rebirths per particle per unit time after burn-in — a direct
    /// estimator of the extinction rate λ₁.
    pub rebirth_rate: f64,
    pub rebirths_after_burn: usize,
    pub observation_time: f64,
}

/// Runs the Fleming–Viot system: `n_particles` copies evolve in
/// lockstep; an absorbed particle is instantly reborn at the current
/// position of a uniformly chosen survivor.  The stationary empirical
/// measure approximates the QSD, and the rebirth rate approximates λ₁.
pub fn empirical_qsd_fv(
    model: &Model,
    eps: f64,
    fv: &FvConfig,
    scheme: Scheme,
    cfg: &SimConfig,
) -> Result<FvResult> {
    cfg.validate()?;
    if fv.n_particles < 100 {
        return Err(Error::InvalidArgument(
            "Fleming-Viot needs at least 100 particles".into(),
        ));
    }
    if !(fv.x0 > 0.0 && fv.t_burn > 0.0 && fv.n_snapshots >= 1 && fv.snapshot_gap > 0.0) {
        return Err(Error::InvalidArgument(
            "Fleming-Viot configuration values must be positive".into(),
        ));
    }
    let layer = layer_threshold(model, eps);
    let t_total = fv.t_burn + fv.n_snapshots as f64 * fv.snapshot_gap;
    let n_steps = (t_total / cfg.dt).ceil() as u64;
    let burn_steps = (fv.t_burn / cfg.dt).ceil() as u64;
    let gap_steps = (fv.snapshot_gap / cfg.dt).ceil().max(1.0) as u64;

    let mut rngs: Vec<ChaCha8Rng> = (0..fv.n_particles)
        .map(|i| path_rng(cfg.seed, i as u64))
        .collect();
    let mut rebirth_rng = path_rng(cfg.seed, fv.n_particles as u64);
    let mut xs = vec![fv.x0; fv.n_particles];
    let mut rebirths_after_burn = 0usize;
    let mut positions = Vec::with_capacity(fv.n_particles * fv.n_snapshots);

    for step in 1..=n_steps {
        // Advance every particle one macro step (in parallel); dead
        // particles come back as 0 and are reborn below.
        let moved: Vec<Result<(f64, ChaCha8Rng)>> = {
            let xs_ref = &xs;
            let rngs_ref = &rngs;
            exec::map_indexed(fv.n_particles, move |i| {
                let mut rng = rngs_ref[i].clone();
                let mut x = xs_ref[i];
                let died = macro_step(model, eps, scheme, cfg, layer, &mut x, &mut rng)?;
                if died.is_some() {
                    x = 0.0;
                }
                Ok((x, rng))
            })
        };
        for (i, r) in moved.into_iter().enumerate() {
            let (x, rng) = r?;
            xs[i] = x;
            rngs[i] = rng;
        }
        // Rebirth in particle order from the survivor set.
        let survivors: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
        if survivors.is_empty() {
            return Err(Error::Simulation(
                "every Fleming-Viot particle died in one step; increase n_particles \
                 or decrease dt"
                    .into(),
            ));
        }
        for i in 0..fv.n_particles {
            if xs[i] <= 0.0 {
                let j = rebirth_rng.gen_range(0..survivors.len());
                xs[i] = survivors[j];
                if step > burn_steps {
                    rebirths_after_burn += 1;
                }
            }
        }
        if step > burn_steps && (step - burn_steps) % gap_steps == 0 {
            positions.extend_from_slice(&xs);
        }
    }
    let observation_time = (n_steps - burn_steps) as f64 * cfg.dt;
    Ok(FvResult {
        positions,
        rebirth_rate: rebirths_after_burn as f64 / (fv.n_particles as f64 * observation_time),
        rebirths_after_burn,
        observation_time,
    })
}

/// Standard 200-bin histogram for comparing particle ensembles with
/// spectral densities: 80 log-graded bins on `(0, 0.1]` (the first
/// reaching down to 1e-4, below which everything pools) and 120 uniform
/// bins on `[0.1, x_max]`.  The extinction atom at exactly 0 is tracked
/// separately from these bins.
pub fn histogram_edges(x_max: f64) -> Vec<f64> {
    assert!(x_max > 0.2, "x_max too small for the standard layout");
    let mut edges = Vec::with_capacity(201);
    edges.push(0.0);
    for i in 0..=79 {
        edges.push(1e-4 * (0.1f64 / 1e-4).powf(i as f64 / 79.0));
    }
    for i in 1..=120 {
        edges.push(0.1 + (x_max - 0.1) * i as f64 / 120.0);
    }
    edges
}

/// Bin masses of a particle sample relative to `n_total` (so censored or
/// dead mass can be accounted for separately).  Positions above the last
/// edge land in the last bin.
pub fn empirical_masses(positions: &[f64], n_total: usize, edges: &[f64]) -> Vec<f64> {
    assert!(edges.len() >= 2 && n_total > 0);
    let mut counts = vec![0usize; edges.len() - 1];
    for &p in positions {
        let k = match edges[1..].iter().position(|&e| p < e) {
            Some(k) => k,
            None => counts.len() - 1,
        };
        counts[k] += 1;
    }
    counts
        .iter()
        .map(|&c| c as f64 / n_total as f64)
        .collect()
}

/// Total-variation distance between two discrete mass vectors.
pub fn tv_discrete(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total-variation distance between a particle sample and a density
/// table over the standard histogram (particles binned with
/// [`empirical_masses`], the density integrated bin-by-bin).
pub fn tv_sample_vs_density(positions: &[f64], density: &DensityTable) -> f64 {
    let edges = histogram_edges(density.grid().x_max());
    let emp = empirical_masses(positions, positions.len(), &edges);
    let theory = density.bin_masses(&edges);
    tv_discrete(&emp, &theory)
}

/// One-sample Kolmogorov–Smirnov comparison of normalized extinction
/// times against the unit exponential law.
#[derive(Debug, Clone)]
pub struct KsReport {
    pub statistic: f64,
    /// 1% critical value `1.628/√n`.
    pub threshold: f64,
    pub n: usize,
    pub censored_fraction: f64,
    pub pass: bool,
}

/// Asymptotic 1% point of the Kolmogorov distribution.
const KS_CRIT_1PCT: f64 = 1.628;

/// Tests `λ₁·T₀ ~ Exp(1)` on a censored sample.  Requires censoring
/// below 5% — beyond that the empirical CDF is too incomplete for a
/// meaningful sup-distance.  The censoring boundary itself contributes a
/// comparison point (observed death fraction vs `F(λ₁·t_max)`).
pub fn normalized_extinction_ks(sample: &ExtinctionSample, lambda1: f64) -> Result<KsReport> {
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidArgument("lambda1 must be positive".into()));
    }
    let cf = sample.censored_fraction();
    if cf > 0.05 {
        return Err(Error::Simulation(format!(
            "censored fraction {cf:.3} exceeds 5%; extend t_max before testing \
             the normalized extinction law"
        )));
    }
    let n = sample.n_paths();
    let mut taus: Vec<f64> = sample.times().iter().map(|t| lambda1 * t).collect();
    taus.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, tau) in taus.iter().enumerate() {
        let f = 1.0 - (-tau).exp();
        d = d.max((f - i as f64 / nf).abs());
        d = d.max(((i + 1) as f64 / nf - f).abs());
    }
    // At the censoring horizon the empirical CDF is deaths/n.
    let f_horizon = 1.0 - (-lambda1 * sample.t_max).exp();
    d = d.max((sample.deaths() as f64 / nf - f_horizon).abs());
    let threshold = KS_CRIT_1PCT / nf.sqrt();
    Ok(KsReport {
        statistic: d,
        threshold,
        n,
        censored_fraction: cf,
        pass: d <= threshold,
    })
}

/// One checkpoint of the multiscale comparison.
#[derive(Debug, Clone)]
pub struct MultiscaleRow {
    pub t: f64,
    /// TV between the full ensemble law (atom at 0 included) and the
    /// two-scale mixture `w(t)·QSD + (1 − w(t))·δ₀`.
    pub tv_mixture: f64,
    /// TV between the law conditioned on survival and the QSD.
    pub tv_conditioned: f64,
    /// TV between the full ensemble law and `δ₀`; equals the surviving
    /// fraction.
    pub tv_vs_extinct: f64,
    /// Mixture weight `w(t) = e^{-λ₁t}·α₁(x0)`, clamped to `[0, 1]`.
    pub qsd_weight: f64,
    pub alive_fraction: f64,
    /// `e^{-λ₂t}`: the predicted decay scale of the mixture error.
    pub decay_scale: f64,
}

/// Runs one ensemble from `x0` and, at each checkpoint, compares the
/// empirical law against the spectral two-scale mixture: the law should
/// equal `e^{-λ₁t}α₁(x0)·QSD + (1 − ·)·δ₀` up to an error falling like
/// `e^{-λ₂t}`.  Checkpoints earlier than the relaxation time `1/λ₂` are
/// diagnostic only — the mixture is not yet a faithful description
/// there (the weight is clamped into `[0, 1]`).
pub fn multiscale_tv_check(
    model: &Model,
    eps: f64,
    x0: f64,
    checkpoints: &[f64],
    spectral: &crate::spectral::SpectralQsd,
    scheme: Scheme,
    cfg: &SimConfig,
) -> Result<Vec<MultiscaleRow>> {
    let snapshots = sample_law_snapshots(model, eps, x0, checkpoints, scheme, cfg)?;
    let (l1, l2) = spectral.lambda;
    let weight0 = spectral.alpha1(x0);
    let edges = histogram_edges(spectral.qsd.grid().x_max());
    let qsd_bins = spectral.qsd.bin_masses(&edges);
    let mut rows = Vec::with_capacity(snapshots.len());
    for snap in &snapshots {
        let n_total = snap.alive_positions.len() + snap.dead;
        let alive_fraction = snap.alive_positions.len() as f64 / n_total as f64;
        let emp_bins = empirical_masses(&snap.alive_positions, n_total, &edges);
        let w = (weight0 * (-l1 * snap.t).exp()).clamp(0.0, 1.0);

        // Full law vs mixture, with the extinction atom as bin 0.
        let mut emp_full = Vec::with_capacity(emp_bins.len() + 1);
        emp_full.push(1.0 - alive_fraction);
        emp_full.extend_from_slice(&emp_bins);
        let mut mix_full = Vec::with_capacity(qsd_bins.len() + 1);
        mix_full.push(1.0 - w);
        mix_full.extend(qsd_bins.iter().map(|&q| w * q));
        let tv_mixture = tv_discrete(&emp_full, &mix_full);

        // Conditioned-on-survival law vs the QSD alone.
        let tv_conditioned = if snap.alive_positions.is_empty() {
            1.0
        } else {
            let cond =
                empirical_masses(&snap.alive_positions, snap.alive_positions.len(), &edges);
            tv_discrete(&cond, &qsd_bins)
        };

        // Full law vs pure extinction.
        let mut extinct = vec![0.0; emp_full.len()];
        extinct[0] = 1.0;
        let tv_vs_extinct = tv_discrete(&emp_full, &extinct);

        rows.push(MultiscaleRow {
            t: snap.t,
            tv_mixture,
            tv_conditioned,
            tv_vs_extinct,
            qsd_weight: w,
            alive_fraction,
            decay_scale: (-l2 * snap.t).exp(),
        });
    }
    Ok(rows)
}

/// One rung of the demographic-only contrast experiment.
#[derive(Debug, Clone)]
pub struct ContrastPoint {
    pub eps: f64,
    pub inv_eps_sq: f64,
    pub mle_mean: f64,
    pub log_mean: f64,
    pub deaths: usize,
    pub censored_fraction: f64,
}

/// Result of the contrast experiment: with the environmental noise
/// removed, `ln E[T₀]` is linear in `ε^{-2}` (extinction times blow up
/// exponentially rather than polynomially).
#[derive(Debug, Clone)]
pub struct ContrastReport {
    pub points: Vec<ContrastPoint>,
    pub fit: LineFit,
}

/// Runs the contrast ladder on the demographic-only reduction of
/// `model`.  Each rung needs at least 30 observed extinctions for a
/// usable mean.
pub fn demographic_only_contrast(
    model: &Model,
    eps_ladder: &[f64],
    x0: f64,
    scheme: Scheme,
    cfg: &SimConfig,
) -> Result<ContrastReport> {
    if eps_ladder.len() < 3 {
        return Err(Error::InvalidArgument(
            "contrast ladder needs at least 3 ε values".into(),
        ));
    }
    let demographic = model.demographic_only();
    let mut points = Vec::with_capacity(eps_ladder.len());
    for (k, &eps) in eps_ladder.iter().enumerate() {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(1000 * k as u64);
        let sample = sample_extinction_times(&demographic, eps, x0, scheme, &c)?;
        if sample.deaths() < 30 {
            return Err(Error::Simulation(format!(
                "only {} extinctions at ε = {eps}; extend t_max or enlarge the ensemble",
                sample.deaths()
            )));
        }
        points.push(ContrastPoint {
            eps,
            inv_eps_sq: 1.0 / (eps * eps),
            mle_mean: sample.mle_mean(),
            log_mean: sample.mle_mean().ln(),
            deaths: sample.deaths(),
            censored_fraction: sample.censored_fraction(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.inv_eps_sq).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.log_mean).collect();
    let fit = line_fit(&xs, &ys)?;
    Ok(ContrastReport { points, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_logistic;
    use crate::scale::ScaleContext;

    fn logistic1111() -> Model {
        build_logistic(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn implicit_step_solves_its_equation() {
        let m = logistic1111();
        let (x, dt, z1, z2) = (0.7, 0.05, 0.3, -1.1);
        let u = step_once(&m, 0.2, Scheme::DriftImplicit, x, dt, z1, z2);
        let diffusion = m.sigma.eval(x) * dt.sqrt() * z1 + 0.2 * m.a.eval(x).sqrt() * dt.sqrt() * z2;
        let residual = u - x - m.b.eval(u) * dt - diffusion;
        assert!(residual.abs() < 1e-12, "residual {residual:e}");
        // Explicit and implicit agree to O(dt²) per step for small dt.
        let fine = 1e-5;
        let ue = step_once(&m, 0.2, Scheme::AbsorbedEuler, x, fine, z1, z2);
        let ui = step_once(&m, 0.2, Scheme::DriftImplicit, x, fine, z1, z2);
        assert!((ue - ui).abs() < 1e-9);
    }

    #[test]
    fn runs_are_bit_identical_for_equal_seeds() {
        let m = logistic1111();
        let cfg = SimConfig::new(1e-3, 50.0, 42, 64);
        let a = sample_extinction_times(&m, 0.3, 1.0, Scheme::AbsorbedEuler, &cfg).unwrap();
        let b = sample_extinction_times(&m, 0.3, 1.0, Scheme::AbsorbedEuler, &cfg).unwrap();
        assert_eq!(a.per_path, b.per_path);
        assert_eq!(a.total_exposure.to_bits(), b.total_exposure.to_bits());
        let mut cfg2 = cfg.clone();
        cfg2.seed = 43;
        let c = sample_extinction_times(&m, 0.3, 1.0, Scheme::AbsorbedEuler, &cfg2).unwrap();
        assert_ne!(a.per_path, c.per_path);
    }

    #[test]
    fn extinction_mean_matches_renewal_oracle() {
        // Independent prediction of E[T₀] from the scale-function renewal
        // decomposition, compared against straight Monte Carlo.
        let m = logistic1111();
        let eps = 0.25;
        let predicted = ScaleContext::new(&m, eps)
            .unwrap()
            .renewal_mean_extinction(1.0)
            .unwrap();
        let cfg = SimConfig::new(1e-3, 60.0 * predicted.max(1.0), 7, 1500);
        let sample = sample_extinction_times(&m, eps, 1.0, Scheme::AbsorbedEuler, &cfg).unwrap();
        assert!(sample.censored_fraction() < 1e-3);
        let mc = sample.naive_mean();
        let tol = 3.0 * sample.naive_se() + 0.025 * predicted;
        assert!(
            (mc - predicted).abs() <= tol,
            "MC {mc} vs renewal {predicted} (tol {tol})"
        );
    }

    #[test]
    fn exit_probability_matches_scale_formula() {
        let m = logistic1111();
        let eps = 0.25;
        let ctx = ScaleContext::new(&m, eps).unwrap();
        let p_theory = ctx.exit_prob_top(0.25).unwrap();
        let cfg = SimConfig::new(5e-5, 500.0, 11, 2000);
        let stats =
            exit_event_stats(&m, eps, 0.25, 0.5, Scheme::AbsorbedEuler, &cfg).unwrap();
        let tol = 3.0 * stats.se_p + 0.01;
        assert!(
            (stats.p_top - p_theory).abs() <= tol,
            "MC {} vs formula {p_theory} (tol {tol})",
            stats.p_top
        );
        // Mean exit time against the quadrature/BVP value.
        let t_theory = ctx.mean_exit_time(0.25).unwrap();
        let t_tol = 3.0 * stats.se_time + 0.03 * t_theory;
        assert!(
            (stats.mean_time - t_theory).abs() <= t_tol,
            "MC {} vs formula {t_theory} (tol {t_tol})",
            stats.mean_time
        );
    }

    #[test]
    fn mle_mean_agrees_with_naive_mean_without_censoring() {
        let m = logistic1111();
        let cfg = SimConfig::new(2e-3, 500.0, 3, 400);
        let s = sample_extinction_times(&m, 0.35, 1.0, Scheme::AbsorbedEuler, &cfg).unwrap();
        assert_eq!(s.deaths(), 400);
        let ratio = s.mle_mean() / s.naive_mean();
        assert!((ratio - 1.0).abs() < 1e-12, "ratio {ratio}");
    }

    #[test]
    fn histogram_masses_sum_to_sample_fraction() {
        let edges = histogram_edges(20.0);
        assert_eq!(edges.len(), 201);
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let positions = [1e-5, 0.05, 0.5, 1.0, 19.9, 25.0];
        let masses = empirical_masses(&positions, 8, &edges);
        // 6 of 8 "paths" alive; the out-of-range position clamps into the
        // final bin rather than vanishing.
        assert!((masses.iter().sum::<f64>() - 6.0 / 8.0).abs() < 1e-12);
        assert!(tv_discrete(&masses, &masses) == 0.0);
    }

    #[test]
    fn ks_accepts_exponential_quantiles_and_rejects_shifted_ones() {
        // Build a synthetic sample hitting exact Exp(1) quantiles.
        let n = 2000;
        let per_path: Vec<Option<f64>> = (0..n)
            .map(|i| Some(-(1.0 - (i as f64 + 0.5) / n as f64).ln()))
            .collect();
        let exposure: f64 = per_path.iter().flatten().sum();
        let s = ExtinctionSample {
            per_path,
            total_exposure: exposure,
            t_max: 50.0,
        };
        let good = normalized_extinction_ks(&s, 1.0).unwrap();
        assert!(good.pass, "D = {} thr {}", good.statistic, good.threshold);
        // The same times against a 30%-off rate must fail decisively.
        let bad = normalized_extinction_ks(&s, 1.3).unwrap();
        assert!(!bad.pass, "D = {} thr {}", bad.statistic, bad.threshold);
    }

    #[test]
    fn ks_requires_mostly_uncensored_samples() {
        let per_path: Vec<Option<f64>> = (0..100)
            .map(|i| if i < 80 { Some(1.0) } else { None })
            .collect();
        let s = ExtinctionSample {
            per_path,
            total_exposure: 100.0,
            t_max: 5.0,
        };
        assert!(normalized_extinction_ks(&s, 1.0).is_err());
    }

    #[test]
    fn snapshots_partition_the_ensemble() {
        let m = logistic1111();
        let cfg = SimConfig::new(2e-3, 30.0, 5, 300);
        let snaps =
            sample_law_snapshots(&m, 0.3, 1.0, &[2.0, 8.0, 24.0], Scheme::AbsorbedEuler, &cfg)
                .unwrap();
        assert_eq!(snaps.len(), 3);
        for s in &snaps {
            assert_eq!(s.alive_positions.len() + s.dead, 300);
            assert!(s.alive_positions.iter().all(|&x| x > 0.0));
        }
        // Dead counts are nondecreasing in time.
        assert!(snaps[0].dead <= snaps[1].dead && snaps[1].dead <= snaps[2].dead);
        // At ε = 0.3 extinction is well underway by t = 24.
        assert!(snaps[2].dead > snaps[0].dead);
    }

    #[test]
    fn zero_noise_steps_recover_the_logistic_equilibrium() {
        // With both Gaussian increments pinned to zero the scheme is the
        // explicit Euler method for ẋ = b(x), which settles at x = μ/κ.
        // The flow from 0.5 is 1/(1 + e^{-t}), so t = 5 is needed to get
        // within 1e-2 of the equilibrium.
        let m = logistic1111();
        let mut x = 0.5;
        for _ in 0..5000 {
            x = step_once(&m, 0.2, Scheme::AbsorbedEuler, x, 1e-3, 0.0, 0.0);
        }
        assert!((x - 1.0).abs() < 1e-2, "x = {x}");
        let mut xi = 0.5;
        for _ in 0..5000 {
            xi = step_once(&m, 0.2, Scheme::DriftImplicit, xi, 1e-3, 0.0, 0.0);
        }
        assert!((xi - 1.0).abs() < 1e-2, "xi = {xi}");
        // Far above the carrying capacity the drift pushes down.
        let down = step_once(&m, 0.2, Scheme::AbsorbedEuler, 5.0, 1e-3, 0.0, 0.0);
        assert!(down < 5.0);
    }

    #[test]
    fn multiscale_rows_track_the_two_scale_mixture() {
        let m = logistic1111();
        let eps = 0.3;
        let grid = crate::grid::Grid::graded(
            1e-8,
            0.1,
            crate::density::auto_x_max_eps(&m, eps).unwrap(),
            1600,
        )
        .unwrap();
        let spectral = crate::spectral::qsd_density(&m, eps, &grid, 2000).unwrap();
        let cfg = SimConfig::new(2e-3, 50.0, 17, 2000);
        let rows = multiscale_tv_check(
            &m,
            eps,
            1.0,
            &[1.5, 4.0, 40.0],
            &spectral,
            Scheme::AbsorbedEuler,
            &cfg,
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        for w in rows.windows(2) {
            assert!(w[0].qsd_weight >= w[1].qsd_weight);
            assert!(w[0].decay_scale > w[1].decay_scale);
        }
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.qsd_weight));
            // Distance to pure extinction is exactly the surviving mass.
            assert!((r.tv_vs_extinct - r.alive_fraction).abs() < 1e-12);
        }
        // Past the relaxation time but well before extinction, both the
        // mixture and the conditioned law should be close (sampling
        // noise with 2000 paths dominates the bound).
        assert!(rows[1].tv_mixture <= 0.2, "mixture TV {}", rows[1].tv_mixture);
        assert!(
            rows[1].tv_conditioned <= 0.2,
            "conditioned TV {}",
            rows[1].tv_conditioned
        );
        // Deep in the extinction phase the law is nearly the atom at 0.
        assert!(rows[2].tv_vs_extinct <= 0.2, "late TV {}", rows[2].tv_vs_extinct);
    }

    #[test]
    fn config_guards_reject_bad_setups() {
        let m = logistic1111();
        let bad_dt = SimConfig::new(0.0, 1.0, 1, 10);
        assert!(sample_extinction_times(&m, 0.1, 1.0, Scheme::AbsorbedEuler, &bad_dt).is_err());
        let too_many_steps = SimConfig::new(1e-9, 10.0, 1, 10);
        assert!(
            sample_extinction_times(&m, 0.1, 1.0, Scheme::AbsorbedEuler, &too_many_steps)
                .is_err()
        );
        let cfg = SimConfig::new(1e-3, 10.0, 1, 10);
        assert!(sample_extinction_times(&m, 0.1, -1.0, Scheme::AbsorbedEuler, &cfg).is_err());
        assert!(exit_event_stats(&m, 0.1, 0.7, 0.5, Scheme::AbsorbedEuler, &cfg).is_err());
    }
}
