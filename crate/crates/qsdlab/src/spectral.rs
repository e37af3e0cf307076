//! Spectral route to the quasi-stationary distribution: a Liouville
//! change of variables turns the killed generator into a 1-D Schrödinger
//! operator whose ground state encodes both the extinction rate and the
//! QSD profile.
//!
//! With `α = ε²a + σ²` and the travel-time coordinate
//! `y = ξ(x) = ∫_0^x α^{-1/2}`, substituting
//! `φ(x) = ψ(ξ(x)) e^{V(x)} α(x)^{1/4}` carries the eigenproblem
//! `½αφ'' + bφ' = -λφ` (Dirichlet at the absorbing origin) into
//!
//! ```text
//! -½ ψ''(y) + W(y) ψ(y) = λ ψ(y),
//! W = ½ [ 3α'²/(16α) - α''/4 + b' - bα'/α + b²/α ]   (as a function of x).
//! ```
//!
//! Near the origin `W(y) ~ 3/(8y²)`: an inverse-square barrier that
//! confines the ground state regardless of ε, so a Dirichlet condition
//! at `y = 0` is exact.  In the far tail `W ~ b²/(4σ²) → ∞` under the
//! standing drift hypotheses, so truncating at large `x_max` with a
//! Dirichlet wall changes the low eigenvalues by an exponentially small
//! amount (verified post-solve by comparing `W` at the wall against the
//! computed eigenvalues).
//!
//! The discrete operator is the standard three-point stencil on a
//! uniform `y`-grid; eigenvalues come from Sturm bisection, eigenvectors
//! from inverse iteration, and a Richardson step `(4λ_{2N} - λ_N)/3`
//! removes the leading `h²` error.  Back in `x`-coordinates,
//!
//! * the unnormalized QSD is `u(x) = ψ₁(ξ(x)) e^{-V(x)} α(x)^{-3/4}`,
//! * when `ψ₁` has unit `L²(dy)` norm, `φ₁(x) = ψ₁(ξ(x)) e^{V} α^{1/4}`
//!   has unit norm in `L²(u^G dx)` and the mass of `u` equals
//!   `‖φ₁‖_{L¹(u^G)}` — the weight that multiplies the QSD in the
//!   multiscale decomposition of the law at time `t`.

use crate::density::{alpha_eps, alpha_eps_d1, alpha_eps_d2, auto_x_max_eps, DensityTable, PotentialTable};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::interp::{interp_uniform_cubic, CubicHermite};
use crate::linalg::SymTridiag;
use crate::model::Model;
use crate::quad;

/// Travel-time coordinate `ξ(x) = ∫_0^x α_ε^{-1/2}` and its inverse.
///
/// Requires `ε > 0`.  With `ε = 0` the integrand `1/|σ(s)| ~ c/s` is not
/// integrable at the origin: the environmental-only coordinate change
/// diverges and the origin sits at infinite travel time.
pub struct Transform {
    table: CubicHermite,
    /// `ξ ≈ c_sqrt · √x` below the table (2/(ε√a'(0)) to leading order,
    /// matched continuously at the bottom node).
    c_sqrt: f64,
    x_lo: f64,
    x_max: f64,
}

/// Bottom of the transform table; below this the √x asymptote applies.
const TRANSFORM_X_LO: f64 = 1e-14;
const TRANSFORM_N: usize = 4000;

impl Transform {
    pub fn new(model: &Model, eps: f64, x_max: f64) -> Result<Transform> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(
                "travel-time transform requires eps > 0: with environmental noise alone \
                 the origin lies at infinite travel time and the coordinate change diverges"
                    .into(),
            ));
        }
        if !(x_max > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "transform range must extend past the bulk (got x_max = {x_max})"
            )));
        }
        let x_lo = TRANSFORM_X_LO;
        let n = TRANSFORM_N;
        let (llo, lhi) = (x_lo.ln(), x_max.ln());
        let nodes: Vec<f64> = (0..n)
            .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
            .collect();
        let integrand = |s: f64| alpha_eps(model, eps, s).sqrt().recip();
        // First value: substitute x = t² so the 1/√α ~ 1/√s singularity
        // becomes a bounded integrand 2t/√(α(t²)).
        let first = quad::integrate(
            |t| 2.0 * t * alpha_eps(model, eps, t * t).sqrt().recip(),
            0.0,
            x_lo.sqrt(),
            1e-12,
            1e-300,
        )?
        .value;
        let mut vals = Vec::with_capacity(n);
        let mut acc = first;
        vals.push(acc);
        for w in nodes.windows(2) {
            acc += quad::integrate(integrand, w[0], w[1], 1e-12, 1e-300)?.value;
            vals.push(acc);
        }
        let slopes: Vec<f64> = nodes.iter().map(|&s| integrand(s)).collect();
        let c_sqrt = vals[0] / x_lo.sqrt();
        Ok(Transform {
            table: CubicHermite::new(nodes, vals, slopes),
            c_sqrt,
            x_lo,
            x_max,
        })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// `y = ξ(x)`.
    pub fn xi(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x < self.x_lo {
            self.c_sqrt * x.sqrt()
        } else {
            self.table.eval(x)
        }
    }

    /// Top of the computational window in travel time.
    pub fn y_max(&self) -> f64 {
        self.xi(self.x_max)
    }

    /// Inverse map `x = ξ^{-1}(y)` by bisection plus Newton polish
    /// (`dξ/dx = α^{-1/2}` is exactly known).
    pub fn x_of(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let y_bottom = self.xi(self.x_lo);
        if y <= y_bottom {
            let r = y / self.c_sqrt;
            return r * r;
        }
        let (mut lo, mut hi) = (self.x_lo, self.x_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.table.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..3 {
            let f = self.table.eval(x) - y;
            let d = self.table.eval_d(x);
            let step = f / d;
            x = (x - step).clamp(lo, hi);
        }
        x
    }
}

/// Schrödinger potential `W` (as a function of the original coordinate).
pub fn schrodinger_potential(model: &Model, eps: f64, x: f64) -> f64 {
    let alpha = alpha_eps(model, eps, x);
    let a1 = alpha_eps_d1(model, eps, x);
    let a2 = alpha_eps_d2(model, eps, x);
    let b = model.b.eval(x);
    let b1 = model.b.d1(x);
    0.5 * (3.0 * a1 * a1 / (16.0 * alpha) - 0.25 * a2 + b1 - b * a1 / alpha + b * b / alpha)
}

/// A 1-D Dirichlet Schrödinger eigenproblem `-½ψ'' + Wψ = λψ` on
/// `[y_lo, y_hi]`.
pub struct SchrodingerProblem {
    w: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    y_lo: f64,
    y_hi: f64,
    /// Whether to verify post-solve that the right wall is high enough
    /// that truncation cannot move the computed eigenvalues (on for
    /// model-derived problems; off for bounded reference potentials).
    check_wall: bool,
}

impl SchrodingerProblem {
    /// Transformed extinction problem for `(model, ε)`, truncated where
    /// the level-ε profile has decayed to rounding level.
    pub fn from_model(model: &Model, eps: f64) -> Result<(SchrodingerProblem, Transform)> {
        let x_max = 1.3 * auto_x_max_eps(model, eps)?;
        SchrodingerProblem::from_model_with_x_max(model, eps, x_max)
    }

    /// Same, with the truncation point pinned by the caller (used by the
    /// truncation-stability checks).
    pub fn from_model_with_x_max(
        model: &Model,
        eps: f64,
        x_max: f64,
    ) -> Result<(SchrodingerProblem, Transform)> {
        let transform = Transform::new(model, eps, x_max)?;
        let y_hi = transform.y_max();
        let m = model.clone();
        let t2 = Transform::new(model, eps, x_max)?;
        let w = Box::new(move |y: f64| schrodinger_potential(&m, eps, t2.x_of(y)));
        Ok((
            SchrodingerProblem {
                w,
                y_lo: 0.0,
                y_hi,
                check_wall: true,
            },
            transform,
        ))
    }

    /// Reference problem with an explicit potential (for validating the
    /// solver against exactly solvable spectra).
    pub fn from_potential<F>(w: F, y_lo: f64, y_hi: f64) -> SchrodingerProblem
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SchrodingerProblem {
            w: Box::new(w),
            y_lo,
            y_hi,
            check_wall: false,
        }
    }

    pub fn potential(&self, y: f64) -> f64 {
        (self.w)(y)
    }

    pub fn y_lo(&self) -> f64 {
        self.y_lo
    }

    pub fn y_hi(&self) -> f64 {
        self.y_hi
    }
}

/// Eigenvalues/vectors of the discretized problem, Richardson-combined
/// from an `N` and a `2N` grid.
pub struct EigenSolution {
    /// Extrapolated eigenvalues, ascending.
    pub lambda: Vec<f64>,
    /// Eigenvalues on the base grid (diagnostic).
    pub lambda_coarse: Vec<f64>,
    /// Eigenvalues on the doubled grid (diagnostic).
    pub lambda_fine: Vec<f64>,
    /// Interior eigenvector values on the doubled grid, `L²(dy)`
    /// normalized (`Σψ²h = 1`), ground state first and sign-fixed
    /// positive.
    pub psi: Vec<Vec<f64>>,
    /// Doubled-grid spacing; interior nodes are `y_lo + h, …, y_hi - h`.
    pub h: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    /// Infinity-norm residuals `‖Tψ - λψ‖_∞` on the doubled grid.
    pub residual: Vec<f64>,
}

impl EigenSolution {
    /// Cubic interpolation of the k-th eigenvector at arbitrary `y`
    /// (boundary zeros included in the stencil data).
    pub fn psi_at(&self, k: usize, y: f64) -> f64 {
        let v = &self.psi[k];
        if y <= self.y_lo || y >= self.y_hi {
            return 0.0;
        }
        // Assemble padded values lazily: indices 0 and n+1 are the walls.
        let n = v.len();
        let idx = ((y - self.y_lo) / self.h).floor() as usize;
        // interp_uniform_cubic works on a value slice starting at y0.
        // Use a 6-wide window around idx with boundary zeros.
        let mut window = [0.0; 8];
        let start = idx.saturating_sub(3);
        for (j, w) in window.iter_mut().enumerate() {
            let node = start + j; // node index in padded numbering
            *w = if node == 0 || node > n {
                0.0
            } else {
                v[node - 1]
            };
        }
        interp_uniform_cubic(
            self.y_lo + start as f64 * self.h,
            self.h,
            &window,
            y,
        )
    }
}

/// Minimum node count accepted for the base grid: coarser grids cannot
/// resolve the near-origin barrier adequately for the tolerances used
/// downstream.
pub const MIN_EIGEN_NODES: usize = 2000;

/// Solves for the `k` lowest eigenpairs on base grid `n_base` (and its
/// doubling).  Residuals are verified against `1e-6·max(λ_k, 1)` and the
/// wall height against `10·λ_k` for model-derived problems.
pub fn solve_eigen(problem: &SchrodingerProblem, k: usize, n_base: usize) -> Result<EigenSolution> {
    if n_base < MIN_EIGEN_NODES {
        return Err(Error::InvalidArgument(format!(
            "eigensolve needs at least {MIN_EIGEN_NODES} base nodes (got {n_base})"
        )));
    }
    if k == 0 || k > 8 {
        return Err(Error::InvalidArgument(
            "eigensolve supports 1..=8 requested eigenpairs".into(),
        ));
    }
    let solve_on = |n: usize| -> Result<(Vec<f64>, Vec<Vec<f64>>, f64, Vec<f64>)> {
        let h = (problem.y_hi - problem.y_lo) / (n as f64 + 1.0);
        let diag: Vec<f64> = (1..=n)
            .map(|i| 1.0 / (h * h) + problem.potential(problem.y_lo + i as f64 * h))
            .collect();
        let off = vec![-0.5 / (h * h); n - 1];
        let t = SymTridiag::new(diag, off);
        let pairs = t.smallest_eigenpairs(k)?;
        let scale = t.norm_inf();
        let mut lambdas = Vec::with_capacity(k);
        let mut vecs = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for (lam, mut v) in pairs {
            // Residual before rescaling (v has unit Euclidean norm).
            let mut res = 0.0f64;
            let tv = t.matvec(&v);
            for i in 0..n {
                res = res.max((tv[i] - lam * v[i]).abs());
            }
            residuals.push(res);
            let _ = scale;
            // L²(dy) normalization and sign fix.
            let norm = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
            let imax = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
            let sgn = if v[imax] < 0.0 { -1.0 } else { 1.0 };
            for x in &mut v {
                *x *= sgn / norm;
            }
            lambdas.push(lam);
            vecs.push(v);
        }
        Ok((lambdas, vecs, h, residuals))
    };

    let (lam_c, _, _, _) = solve_on(n_base)?;
    let (lam_f, psi, h, residual) = solve_on(2 * n_base)?;
    let lambda: Vec<f64> = lam_c
        .iter()
        .zip(&lam_f)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect();

    // Discrete-eigenpair quality.
    let lam_top = lambda.last().unwrap().abs().max(1.0);
    for (i, r) in residual.iter().enumerate() {
        if *r > 1e-6 * lam_top {
            return Err(Error::Linalg(format!(
                "eigenpair {i} residual {r:e} exceeds 1e-6·max(λ,1) = {:e}",
                1e-6 * lam_top
            )));
        }
    }
    // Ground state must be strictly positive in the interior.
    if psi[0].iter().any(|&v| v < -1e-12) {
        return Err(Error::Linalg(
            "ground state changes sign; inverse iteration converged to a wrong vector".into(),
        ));
    }
    // Orthogonality of the first two states (when requested).
    if k >= 2 {
        let dot: f64 = psi[0].iter().zip(&psi[1]).map(|(a, b)| a * b).sum::<f64>() * h;
        if dot.abs() > 1e-8 {
            return Err(Error::Linalg(format!(
                "first two eigenvectors not orthogonal (⟨ψ₁,ψ₂⟩ = {dot:e})"
            )));
        }
    }
    // Wall adequacy for model-derived problems: the potential at the
    // truncation wall must tower over every computed level, otherwise
    // the Dirichlet truncation is not innocuous.
    if problem.check_wall {
        let w_wall = problem.potential(problem.y_hi - 1e-9 * (problem.y_hi - problem.y_lo));
        if w_wall < 10.0 * lam_top {
            return Err(Error::Truncation(format!(
                "potential at the wall ({w_wall:.3e}) is below 10x the top requested \
                 eigenvalue ({lam_top:.3e}); enlarge x_max"
            )));
        }
    }
    Ok(EigenSolution {
        lambda,
        lambda_coarse: lam_c,
        lambda_fine: lam_f,
        psi,
        h,
        y_lo: problem.y_lo,
        y_hi: problem.y_hi,
        residual,
    })
}

/// Extinction rate and spectral gap for `(model, ε)`: the two lowest
/// Dirichlet eigenvalues of the transformed problem.
pub fn extinction_rates(model: &Model, eps: f64, n_base: usize) -> Result<(f64, f64)> {
    let (problem, _) = SchrodingerProblem::from_model(model, eps)?;
    let sol = solve_eigen(&problem, 2, n_base)?;
    Ok((sol.lambda[0], sol.lambda[1]))
}

/// Full spectral QSD bundle for one `(model, ε)` pair.
pub struct SpectralQsd {
    /// Two lowest eigenvalues `(λ₁, λ₂)`.
    pub lambda: (f64, f64),
    /// The QSD on the supplied grid, normalized to unit on-grid mass.
    pub qsd: DensityTable,
    /// `‖φ₁‖_{L¹(u^G)}`: the mass of the unnormalized pullback, i.e. the
    /// weight of the QSD component in the spectral decomposition of the
    /// sub-probability law.
    pub phi1_l1: f64,
    /// Mass that the truncated grid fails to represent, estimated from
    /// the boundary densities (`x_lo·u(x_lo)` plus a tail estimate);
    /// relative to unit total.
    pub truncation_defect: f64,
    transform: Transform,
    pot: PotentialTable,
    sol: EigenSolution,
    model: Model,
    eps: f64,
}

impl SpectralQsd {
    /// Principal eigenfunction `φ₁(x) = ψ₁(ξ(x)) e^{V} α^{1/4}`,
    /// normalized in `L²(u^G dx)`.
    pub fn phi1(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let y = self.transform.xi(x);
        let psi = self.sol.psi_at(0, y);
        psi * self.pot.eval(x).exp() * alpha_eps(&self.model, self.eps, x).powf(0.25)
    }

    /// The spectral weight function `α_{ε,1}(x) = ‖φ₁‖_{L¹(u^G)}·φ₁(x)`:
    /// the coefficient of the QSD term when the time-t law of the path
    /// from `x` is expanded over the Dirichlet spectrum.
    pub fn alpha1(&self, x: f64) -> f64 {
        self.phi1_l1 * self.phi1(x)
    }

    pub fn eigensolution(&self) -> &EigenSolution {
        &self.sol
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }
}

/// Computes the spectral QSD of `(model, ε)` on `grid`.
pub fn qsd_density(model: &Model, eps: f64, grid: &Grid, n_base: usize) -> Result<SpectralQsd> {
    let (problem, transform) = SchrodingerProblem::from_model(model, eps)?;
    let sol = solve_eigen(&problem, 2, n_base)?;
    let pot = PotentialTable::build_default(model, eps, transform.x_max())?;

    // Unnormalized pullback u(x) = ψ₁(ξ(x)) e^{-V} α^{-3/4} in log space.
    let log_u = |x: f64| -> f64 {
        let psi = sol.psi_at(0, transform.xi(x)).max(0.0);
        if psi == 0.0 {
            return f64::NEG_INFINITY;
        }
        psi.ln() - pot.eval(x) - 0.75 * alpha_eps(model, eps, x).ln()
    };
    let log_values: Vec<f64> = grid.nodes().iter().map(|&x| log_u(x)).collect();
    let table = DensityTable::from_log_values(grid.clone(), log_values)?;
    let mass = table.mass();
    if !(mass > 0.0) {
        return Err(Error::Truncation(
            "pullback mass vanished: grid and spectral window do not overlap".into(),
        ));
    }

    // Truncation defect: density at the grid edges times a window size.
    let u_lo = log_u(grid.x_lo()).exp() / mass;
    let u_hi = log_u(grid.x_max()).exp() / mass;
    let truncation_defect = u_lo * grid.x_lo() + u_hi * grid.x_max();

    let qsd = table.normalize()?;
    Ok(SpectralQsd {
        lambda: (sol.lambda[0], sol.lambda[1]),
        qsd,
        phi1_l1: mass,
        truncation_defect,
        transform,
        pot,
        sol,
        model: model.clone(),
        eps,
    })
}

/// The ½-weighted Rayleigh quotient of a trial function sampled at the
/// grid nodes:
///
/// ```text
/// R(φ) = [ ½ ∫ α |φ'|² u^G ] / [ ∫ φ² u^G ],
/// ```
///
/// an upper bound for λ₁ attained at φ₁ (the ½ matches the generator
/// `½αu'' + bu'`: integrating `-∫(Lφ)φ u^G` by parts leaves exactly half
/// the carré-du-champ).  Derivatives are centered finite differences on
/// the (possibly nonuniform) grid — deliberately independent of every
/// quadrature used to *construct* eigenfunctions, so the identity
/// `R(φ₁) ≈ λ₁` is a genuine cross-check.
pub fn rayleigh_quotient(model: &Model, eps: f64, grid: &Grid, phi: &[f64]) -> Result<f64> {
    if phi.len() != grid.len() {
        return Err(Error::InvalidArgument(
            "trial function must be sampled at the grid nodes".into(),
        ));
    }
    let pot = PotentialTable::build(model, eps, grid.nodes(), 1.0)?;
    let nodes = grid.nodes();
    let n = nodes.len();
    // Nonuniform centered differences (one-sided at the ends).
    let mut dphi = vec![0.0; n];
    for i in 0..n {
        dphi[i] = if i == 0 {
            (phi[1] - phi[0]) / (nodes[1] - nodes[0])
        } else if i == n - 1 {
            (phi[n - 1] - phi[n - 2]) / (nodes[n - 1] - nodes[n - 2])
        } else {
            let (hm, hp) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
            // Exact for quadratics on nonuniform spacing.
            (phi[i + 1] * hm * hm - phi[i - 1] * hp * hp + phi[i] * (hp * hp - hm * hm))
                / (hm * hp * (hm + hp))
        };
    }
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for i in 0..n {
        let x = nodes[i];
        let alpha = alpha_eps(model, eps, x);
        let ug = (-2.0 * pot.eval(x)).exp() / alpha;
        num[i] = 0.5 * alpha * dphi[i] * dphi[i] * ug;
        den[i] = phi[i] * phi[i] * ug;
    }
    let (top, bot) = (grid.integrate(&num), grid.integrate(&den));
    if !(bot > 0.0) || !top.is_finite() {
        return Err(Error::InvalidArgument(
            "degenerate trial function in Rayleigh quotient".into(),
        ));
    }
    Ok(top / bot)
}
