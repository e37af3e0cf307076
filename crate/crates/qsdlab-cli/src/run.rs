//! Command implementations: each builds its pipeline from the run
//! configuration, writes artifacts into the output directory, and
//! reports whether every verdict passed.
//!
//! Every artifact starts with a `# key=value` comment header carrying
//! the tool version, the command, the config hash, and the seed; two
//! runs with equal headers produce byte-identical files.

use crate::config::{ConfigError, RunConfig};
use qsdlab::asymptotics::{self, reciprocal_section, Report, Section, SweepSpec};
use qsdlab::density::{self, DensityTable};
use qsdlab::model::check_hypotheses;
use qsdlab::scale::ScaleContext;
use qsdlab::sde::{self, FvConfig, SimConfig};
use qsdlab::spectral::{self, SchrodingerProblem};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Failure category, mapped to the process exit code by `main`.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage (exit 2).
    Config(String),
    /// Numerical or I/O failure at run time (exit 3).
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<qsdlab::Error> for CliError {
    fn from(e: qsdlab::Error) -> Self {
        match &e {
            qsdlab::Error::InvalidArgument(_) | qsdlab::Error::InvalidModel(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

pub type CliResult = Result<bool, CliError>;

/// Shared context for one invocation.
pub struct Io {
    pub out_dir: PathBuf,
    pub header: String,
}

impl Io {
    pub fn new(out_dir: &Path, cfg: &RunConfig, command: &str) -> Result<Io, CliError> {
        std::fs::create_dir_all(out_dir)?;
        let header = format!(
            "# tool=qsdlab {}\n# command={command}\n# config_hash={:016x}\n# seed={}\n",
            env!("CARGO_PKG_VERSION"),
            cfg.hash(),
            cfg.sim.seed
        );
        Ok(Io {
            out_dir: out_dir.to_path_buf(),
            header,
        })
    }

    pub fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, format!("{}{body}", self.header))?;
        Ok(())
    }
}

/// `0.1` → `0p1000`: filenames stay shell- and diff-friendly.
fn eps_tag(eps: f64) -> String {
    format!("{eps:.4}").replace('.', "p")
}

fn density_csv(table: &DensityTable) -> String {
    let mut s = String::from("x,density\n");
    for (x, v) in table.grid().nodes().iter().zip(table.values()) {
        let _ = writeln!(s, "{x:e},{v:e}");
    }
    s
}

// ---------------------------------------------------------------------------
// check-model
// ---------------------------------------------------------------------------

pub fn cmd_check_model(cfg: &RunConfig, io: &Io) -> CliResult {
    let model = cfg.model.build()?;
    // Fixed audit horizon: the clauses are about structure near 0 and
    // eventual decline, both visible well before x = 50 for any
    // logistic-type drift.
    let grid = qsdlab::grid::Grid::graded(1e-6, 0.1, 50.0, 400)?;
    let report = check_hypotheses(&model, grid.nodes())?;
    let text = report.render();
    print!("{text}");
    io.write("hypothesis_report.txt", &text)?;
    if !report.passed() {
        for item in report.hard_failures() {
            if item.detail.is_empty() {
                eprintln!("hard failure: {}", item.label);
            } else {
                eprintln!("hard failure: {} — {}", item.label, item.detail);
            }
        }
    }
    Ok(report.passed())
}

// ---------------------------------------------------------------------------
// gibbs
// ---------------------------------------------------------------------------

pub fn cmd_gibbs(cfg: &RunConfig, io: &Io, eps_list: &[f64]) -> CliResult {
    let model = cfg.model.build()?;
    let eps_list = if eps_list.is_empty() {
        cfg.spectral.eps.clone()
    } else {
        eps_list.to_vec()
    };
    let eps_hint = eps_list.iter().copied().fold(0.0f64, f64::max);
    let grid = cfg.grid.resolve(&model, eps_hint)?;
    for &eps in &eps_list {
        if eps < 0.0 {
            return Err(CliError::Config(format!("--eps must be >= 0 (got {eps})")));
        }
        let g = if eps > 0.0 {
            density::gibbs_density(&model, eps, &grid)?
        } else {
            density::limit_gibbs(&model, &grid)?
        };
        let mut body = format!(
            "# eps={eps:e}\n# near_origin_exponent={:.6}\n# integrable={}\n",
            g.near_origin.exponent, g.near_origin.integrable
        );
        body.push_str(&density_csv(&g.table));
        io.write(&format!("gibbs_eps{}.csv", eps_tag(eps)), &body)?;
        println!(
            "gibbs eps={eps}: near-origin exponent {:+.4} ({})",
            g.near_origin.exponent,
            if g.near_origin.integrable {
                "integrable"
            } else {
                "non-integrable"
            }
        );
    }
    if model.stochastic_growth_rate() > 0.0 {
        let stat = density::stationary_density(&model, &grid)?;
        io.write("stationary_density.csv", &density_csv(&stat))?;
        println!("stationary limit density written (mass {:.6})", stat.mass());
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// scale
// ---------------------------------------------------------------------------

pub fn cmd_scale(cfg: &RunConfig, io: &Io, eps_list: &[f64]) -> CliResult {
    let model = cfg.model.build()?;
    let eps_list = if eps_list.is_empty() {
        cfg.spectral.eps.clone()
    } else {
        eps_list.to_vec()
    };
    let mut summary = String::from(
        "eps,s_at_origin,exit_prob_top_at_x_star,mean_exit_time_at_x_star,\
         renewal_mean_extinction_from_x0\n",
    );
    for &eps in &eps_list {
        let ctx = ScaleContext::with_interval(&model, eps, cfg.scale.x_star, cfg.scale.beta)?;
        // Log-spaced profile of s', s, and the speed density.
        let n = 300;
        let (lo, hi) = (1e-8f64, ctx.beta());
        let mut body = String::from("x,s_prime,s,speed\n");
        for i in 0..=n {
            let x = lo * (hi / lo).powf(i as f64 / n as f64);
            let _ = writeln!(
                body,
                "{x:e},{:e},{:e},{:e}",
                ctx.scale_density(x),
                ctx.scale_function(x)?,
                ctx.speed_density(x)
            );
        }
        io.write(&format!("scale_eps{}.csv", eps_tag(eps)), &body)?;
        let s0 = ctx.scale_at_origin()?;
        let p = ctx.exit_prob_top(ctx.x_star())?;
        let tau = ctx.mean_exit_time(ctx.x_star())?;
        let renewal = ctx.renewal_mean_extinction(cfg.sim.x0)?;
        let _ = writeln!(summary, "{eps:e},{s0:e},{p:e},{tau:e},{renewal:e}");
        println!(
            "scale eps={eps}: P[exit at beta | x*] = {p:.6}, E[tau | x*] = {tau:.6}, \
             E[T0 | x0={}] = {renewal:.4}",
            cfg.sim.x0
        );
    }
    io.write("scale_summary.csv", &summary)?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleKind {
    /// Quadratic well `W = y²/2` on [-12, 12]: eigenvalues k + 1/2.
    Harmonic,
    /// Flat well `W = 0` on [0, π] with walls: eigenvalues k²/2.
    Box,
}

pub fn cmd_spectrum(
    cfg: &RunConfig,
    io: &Io,
    eps_list: &[f64],
    oracle: Option<OracleKind>,
) -> CliResult {
    if let Some(kind) = oracle {
        return oracle_spectrum(cfg, io, kind);
    }
    let model = cfg.model.build()?;
    let eps_list = if eps_list.is_empty() {
        cfg.spectral.eps.clone()
    } else {
        eps_list.to_vec()
    };
    let mut summary = String::from("eps,lambda1,lambda2,phi1_l1,truncation_defect\n");
    for &eps in &eps_list {
        let grid = cfg.grid.resolve(&model, eps)?;
        let result = spectral::qsd_density(&model, eps, &grid, cfg.spectral.n_base)?;
        let (l1, l2) = result.lambda;
        let _ = writeln!(
            summary,
            "{eps:e},{l1:e},{l2:e},{:e},{:e}",
            result.phi1_l1, result.truncation_defect
        );
        io.write(&format!("qsd_eps{}.csv", eps_tag(eps)), &density_csv(&result.qsd))?;
        println!("spectrum eps={eps}: lambda1 = {l1:.6e}, lambda2 = {l2:.6e}");
    }
    io.write("spectrum_summary.csv", &summary)?;
    Ok(true)
}

fn oracle_spectrum(_cfg: &RunConfig, io: &Io, kind: OracleKind) -> CliResult {
    let (name, problem, exact, tol) = match kind {
        OracleKind::Harmonic => (
            "harmonic",
            SchrodingerProblem::from_potential(|y: f64| 0.5 * y * y, -12.0, 12.0),
            [0.5, 1.5],
            1e-4,
        ),
        OracleKind::Box => (
            "box",
            SchrodingerProblem::from_potential(|_| 0.0, 0.0, std::f64::consts::PI),
            [0.5, 2.0],
            1e-6,
        ),
    };
    let sol = spectral::solve_eigen(&problem, 2, 4000)?;
    let mut all_ok = true;
    let mut body = format!("# oracle={name}\nlevel,computed,exact,abs_error,tolerance,verdict\n");
    for (k, &ex) in exact.iter().enumerate() {
        let err = (sol.lambda[k] - ex).abs();
        let ok = err <= tol;
        all_ok &= ok;
        let _ = writeln!(
            body,
            "{},{:e},{ex:e},{err:e},{tol:e},{}",
            k + 1,
            sol.lambda[k],
            if ok { "pass" } else { "fail" }
        );
        println!(
            "oracle={name} level {} computed {:.8e} exact {ex} |err| {err:.2e} [{}]",
            k + 1,
            sol.lambda[k],
            if ok { "pass" } else { "fail" }
        );
    }
    io.write(&format!("oracle_{name}.csv"), &body)?;
    Ok(all_ok)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(cfg: &RunConfig, io: &Io, with_fv: bool) -> CliResult {
    let model = cfg.model.build()?;
    let sim = cfg.sim.to_sim_config(cfg.sim.seed);
    let sample = sde::sample_extinction_times(
        &model,
        cfg.sim.eps,
        cfg.sim.x0,
        cfg.sim.scheme(),
        &sim,
    )?;
    let cf = sample.censored_fraction();
    if cf > 0.5 {
        eprintln!(
            "warning: censored fraction {cf:.3} exceeds 50% — t_max = {} is too small \
             for eps = {}",
            cfg.sim.t_max, cfg.sim.eps
        );
    }
    let mut body = format!(
        "# eps={:e}\n# x0={:e}\n# censored_fraction={cf:e}\npath_id,t0,censored\n",
        cfg.sim.eps, cfg.sim.x0
    );
    for (i, outcome) in sample.per_path.iter().enumerate() {
        match outcome {
            Some(t) => {
                let _ = writeln!(body, "{i},{t:e},0");
            }
            None => {
                let _ = writeln!(body, "{i},{:e},1", sample.t_max);
            }
        }
    }
    io.write("extinction_sample.csv", &body)?;
    println!(
        "simulate eps={}: {} paths, {} extinctions (censored {:.1}%), mean T0 = {:.4} \
         (exponential-MLE {:.4})",
        cfg.sim.eps,
        sample.n_paths(),
        sample.deaths(),
        100.0 * cf,
        sample.naive_mean(),
        sample.mle_mean()
    );

    if with_fv {
        let fv = FvConfig {
            n_particles: cfg.fv.n_particles,
            x0: cfg.sim.x0,
            t_burn: cfg.fv.t_burn,
            n_snapshots: cfg.fv.n_snapshots,
            snapshot_gap: cfg.fv.snapshot_gap,
        };
        let result = sde::empirical_qsd_fv(&model, cfg.sim.eps, &fv, cfg.sim.scheme(), &sim)?;
        let grid = cfg.grid.resolve(&model, cfg.sim.eps)?;
        let edges = sde::histogram_edges(grid.x_max());
        let masses = sde::empirical_masses(&result.positions, result.positions.len(), &edges);
        let mut body = format!(
            "# eps={:e}\n# n_particles={}\n# rebirth_rate={:e}\n# rebirths={}\n\
             # observation_time={:e}\nx,density\n",
            cfg.sim.eps,
            cfg.fv.n_particles,
            result.rebirth_rate,
            result.rebirths_after_burn,
            result.observation_time
        );
        for (k, m) in masses.iter().enumerate() {
            let center = 0.5 * (edges[k] + edges[k + 1]);
            let width = edges[k + 1] - edges[k];
            let _ = writeln!(body, "{center:e},{:e}", m / width);
        }
        io.write("fv_density.csv", &body)?;
        println!(
            "fleming-viot: rebirth rate {:.6e} per particle per unit time \
             (lambda1 estimator)",
            result.rebirth_rate
        );
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// sweep + report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Lambda1,
    Mean,
    Reciprocal,
    Qsd,
    Gap,
    All,
}

struct SweepBudget {
    ladder: Vec<f64>,
    mc_ladder: Vec<f64>,
    reciprocal_eps: Vec<f64>,
    paths: usize,
    reciprocal_paths: usize,
}

fn budget(cfg: &RunConfig, quick: bool) -> SweepBudget {
    let sw = &cfg.sweep;
    if quick {
        // Eigensolves are cheap, so the spectral ladder stays intact;
        // Monte Carlo is what quick mode trims.  The MC ladder drops
        // its largest rung — the far-from-asymptotic one — because the
        // small-ε end is what the scaling fit needs.
        let mut mc_ladder = sw.mc_eps_ladder.clone();
        mc_ladder.sort_by(|a, b| b.total_cmp(a));
        if mc_ladder.len() > 4 {
            mc_ladder.drain(..mc_ladder.len() - 4);
        }
        SweepBudget {
            ladder: sw.eps_ladder.clone(),
            mc_ladder,
            reciprocal_eps: sw.reciprocal_eps.first().copied().into_iter().collect(),
            paths: (sw.paths_per_point / 8).max(300),
            reciprocal_paths: (sw.reciprocal_paths / 2).max(150),
        }
    } else {
        SweepBudget {
            ladder: sw.eps_ladder.clone(),
            mc_ladder: sw.mc_eps_ladder.clone(),
            reciprocal_eps: sw.reciprocal_eps.clone(),
            paths: sw.paths_per_point,
            reciprocal_paths: sw.reciprocal_paths,
        }
    }
}

fn mc_sim(cfg: &RunConfig, paths: usize, t_max: f64) -> SimConfig {
    SimConfig {
        dt: cfg.sweep.dt,
        // Mild refinement: sweeps favor throughput, the step-size
        // convergence invariant is verified separately.
        dt_boundary_factor: 0.25,
        t_max,
        seed: cfg.sim.seed,
        n_paths: paths,
    }
}

pub fn cmd_sweep(cfg: &RunConfig, io: &Io, suite: Suite, quick: bool) -> CliResult {
    let model = cfg.model.build()?;
    let b = budget(cfg, quick);
    let scheme = cfg.sim.scheme();
    let supercritical = model.stochastic_growth_rate() > 0.0;
    let mut report = Report::new();

    let run_lambda1 = matches!(suite, Suite::Lambda1 | Suite::All) && supercritical;
    let run_gap = matches!(suite, Suite::Gap | Suite::All) && supercritical;
    let run_qsd = matches!(suite, Suite::Qsd | Suite::All);
    let run_mean = matches!(suite, Suite::Mean | Suite::All);
    let run_reciprocal = matches!(suite, Suite::Reciprocal | Suite::All) && supercritical;
    if !supercritical
        && matches!(suite, Suite::Lambda1 | Suite::Gap | Suite::Reciprocal)
    {
        return Err(CliError::Config(
            "this suite needs a positive stochastic growth rate; \
             use --suite mean or --suite qsd for the extinction regime"
                .into(),
        ));
    }

    if run_lambda1 {
        let spec = SweepSpec::new(
            model.clone(),
            &b.ladder,
            cfg.sweep.n_base,
            mc_sim(cfg, b.paths, cfg.sweep.t_max),
        )?;
        let sweep = asymptotics::sweep_lambda1(&spec)?;
        io.write("fig_lambda1.csv", &sweep.data_csv())?;
        report.push(sweep.section());
    }
    if run_mean {
        let spec = SweepSpec::new(
            model.clone(),
            &b.mc_ladder,
            cfg.sweep.n_base,
            mc_sim(cfg, b.paths, cfg.sweep.t_max),
        )?;
        let sweep = asymptotics::sweep_mean_extinction(&spec, cfg.sweep.x0, scheme)?;
        io.write("fig_mean_extinction.csv", &sweep.data_csv())?;
        report.push(sweep.section());
    }
    if run_reciprocal {
        let spec = SweepSpec::new(
            model.clone(),
            &b.reciprocal_eps,
            cfg.sweep.n_base,
            mc_sim(cfg, b.reciprocal_paths, cfg.sweep.reciprocal_t_max),
        )?;
        let rows = asymptotics::reciprocal_products(&spec, cfg.sweep.x0, scheme)?;
        let mut csv = String::from("eps,lambda1,mean_t0,product\n");
        for r in &rows {
            let _ = writeln!(csv, "{:e},{:e},{:e},{:e}", r.eps, r.lambda1, r.mean, r.product);
        }
        io.write("fig_reciprocal.csv", &csv)?;
        report.push(reciprocal_section(&rows));
    }
    if run_qsd {
        let spec = SweepSpec::new(
            model.clone(),
            &b.ladder,
            cfg.sweep.n_base,
            mc_sim(cfg, b.paths, cfg.sweep.t_max),
        )?;
        let sweep = asymptotics::qsd_convergence_sweep(&spec)?;
        io.write("fig_qsd.csv", &sweep.data_csv())?;
        report.push(sweep.section());
        if !supercritical {
            // Exploratory companion in the extinction regime: reported,
            // never gated.
            let trend = asymptotics::subcritical_rate_trend(&spec)?;
            let lines = trend
                .iter()
                .map(|(e, l1, p)| {
                    format!("eps = {e:<8.4} lambda1 = {l1:.5e}  lambda1*|ln eps| = {p:.5e}")
                })
                .collect();
            report.push(Section {
                title: "subcritical-rate-trend (exploratory)".into(),
                lines,
                rows: Vec::new(),
            });
        }
    }
    if run_gap {
        let spec = SweepSpec::new(
            model.clone(),
            &b.ladder,
            cfg.sweep.n_base,
            mc_sim(cfg, b.paths, cfg.sweep.t_max),
        )?;
        let sweep = asymptotics::spectral_gap_sweep(&spec)?;
        io.write("fig_gap.csv", &sweep.data_csv())?;
        report.push(sweep.section());
    }

    if report.sections().is_empty() {
        return Err(CliError::Config(
            "selected suite produced no sections for this model".into(),
        ));
    }
    let text = report.render_text();
    print!("{text}");
    io.write("report.txt", &text)?;
    io.write("summary.csv", &report.render_csv())?;
    Ok(report.all_pass())
}

pub fn cmd_report(io: &Io) -> CliResult {
    let path = io.out_dir.join("summary.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CliError::Config(format!(
            "no sweep summary at {} ({e}); run `qsdlab sweep` first",
            path.display()
        ))
    })?;
    let mut data_lines = text.lines().filter(|l| !l.starts_with('#'));
    match data_lines.next() {
        Some(h) if h == "theorem,metric,expected,fitted,tolerance,verdict" => {}
        other => {
            return Err(CliError::Config(format!(
                "unrecognized summary header {other:?} in {}",
                path.display()
            )))
        }
    }
    let mut total = 0usize;
    let mut failures = Vec::new();
    for line in data_lines {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        if line.trim_end().ends_with(",fail") {
            failures.push(line.split(',').next().unwrap_or("?").to_string());
        }
    }
    println!(
        "{total} verdicts, {} failures{}",
        failures.len(),
        if failures.is_empty() {
            String::new()
        } else {
            format!(": {}", failures.join(", "))
        }
    );
    Ok(failures.is_empty())
}
