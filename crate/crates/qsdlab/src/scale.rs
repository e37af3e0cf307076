//! Scale-function machinery for first-passage quantities of the killed
//! diffusion: interval-exit probabilities, mean exit times, mean hitting
//! times from above, and the renewal decomposition of the mean
//! extinction time.
//!
//! With the potential `V` anchored at a reference point `x★` inside the
//! bulk, the classical ingredients are
//!
//! ```text
//! scale density   s'(y) = exp(+2V(y))          (s(x★) = 0)
//! speed density   m(z)  = exp(-2V(z)) / α(z)
//! s(x) = ∫_{x★}^x s'(y) dy
//! r(x) = ∫_{x★}^x s'(y) ∫_{x★}^y m(z) dz dy
//! ```
//!
//! from which, for the interval `(0, β)` with absorbing endpoints,
//!
//! * `P_x(exit at β) = (s(x) - s(0+)) / (s(β) - s(0+))`,
//! * `E_x[τ] = -2r(x) + A + B·s(x)` where `A, B` match the boundary
//!   conditions `E[τ] = 0` at `0+` and `β` (so at the anchor itself
//!   `E_{x★}[τ] = 2·[r(0+)·s(β) - r(β)·s(0+)] / (s(β) - s(0+))`),
//! * `E_x[hit x★ from above] = 2 ∫_{x★}^x s'(y) (∫_y^∞ m) dy`.
//!
//! The last identity solves `½αu'' + bu' = -1` on `(x★, ∞)` with
//! `u(x★) = 0` and minimal growth at infinity (the natural boundary is
//! entrance-like under the standing drift hypotheses, so the expected
//! descent time is finite).  A renewal argument then assembles the mean
//! extinction time: starting at `x★`, the process repeatedly exits
//! `(0, β)`; each exit ends extinct (at 0) or restarts from `x★` after a
//! descent from `β`.
//!
//! An independent finite-difference boundary-value solve of
//! `½αu'' + bu' = -1` cross-checks the quadrature route; the two have no
//! shared machinery beyond the model callbacks.
//!
//! Everything here requires `ε > 0`: the origin is reachable only when
//! the demographic noise is on, and with `ε = 0` (and positive
//! stochastic growth rate) `s(0+) = -∞` makes all exit quantities
//! degenerate.

use crate::density::{alpha_eps, auto_x_max_eps, PotentialTable};
use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::linalg::solve_tridiag;
use crate::model::Model;
use crate::quad;

/// Relative tolerance for the single-level scale integrals.
const SCALE_REL_TOL: f64 = 1e-9;
/// Relative tolerance for the nested (r-type) integrals.
const R_REL_TOL: f64 = 1e-8;
/// Bottom of the internal tables; improper integrals below this point
/// are closed analytically (the integrands are effectively constant or
/// logarithmic there, far below the demographic knee).
const TABLE_X_LO: f64 = 1e-12;
/// Node count for the internal log-spaced tables.
const TABLE_N: usize = 4000;

/// Precomputed scale/speed tables for one `(model, ε)` pair on a fixed
/// reference interval `(0, β)` with interior anchor `x★ < β`.
pub struct ScaleContext {
    model: Model,
    eps: f64,
    x_star: f64,
    beta: f64,
    /// Potential anchored at `x★`.
    pot: PotentialTable,
    /// Anchored cumulative speed `g(y) = ∫_{x★}^y m`.
    speed_cum: CubicHermite,
    /// Speed tail `T(y) = ∫_y^∞ m`, accumulated right-to-left so no
    /// cancellation occurs where the tail is tiny.
    speed_tail: CubicHermite,
}

impl ScaleContext {
    /// Context with the default reference interval `x★ = 0.25`, `β = 0.5`.
    pub fn new(model: &Model, eps: f64) -> Result<ScaleContext> {
        ScaleContext::with_interval(model, eps, 0.25, 0.5)
    }

    pub fn with_interval(model: &Model, eps: f64, x_star: f64, beta: f64) -> Result<ScaleContext> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(
                "scale machinery requires eps > 0: the origin is unreachable otherwise".into(),
            ));
        }
        if !(0.0 < x_star && x_star < beta) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < x_star < beta (got x_star={x_star}, beta={beta})"
            )));
        }
        let x_max = 1.5 * auto_x_max_eps(model, eps)?.max(2.0 * beta);
        let pot = PotentialTable::build_log(model, eps, TABLE_X_LO, x_max, TABLE_N, x_star)?;

        // Cumulative speed on the same nodes, anchored at x★ the same way
        // the potential table anchors: accumulate per-segment quadrature,
        // then shift by an exactly integrated offset to the anchor.
        let nodes: Vec<f64> = {
            let (llo, lhi) = (TABLE_X_LO.ln(), x_max.ln());
            (0..TABLE_N)
                .map(|i| (llo + (lhi - llo) * i as f64 / (TABLE_N - 1) as f64).exp())
                .collect()
        };
        let m_of = |z: f64| (-2.0 * pot.eval(z)).exp() / alpha_eps(model, eps, z);
        let mut cum = Vec::with_capacity(TABLE_N);
        let mut acc = 0.0;
        cum.push(0.0);
        for w in nodes.windows(2) {
            acc += quad::integrate(m_of, w[0], w[1], 1e-12, 1e-300)?.value;
            cum.push(acc);
        }
        let k = nodes.partition_point(|&v| v < x_star).min(TABLE_N - 1);
        let at_anchor = cum[k] - quad::integrate(m_of, x_star, nodes[k], 1e-12, 1e-300)?.value;
        let g_vals: Vec<f64> = cum.iter().map(|c| c - at_anchor).collect();
        let g_slopes: Vec<f64> = nodes.iter().map(|&z| m_of(z)).collect();
        let speed_cum = CubicHermite::new(nodes.clone(), g_vals, g_slopes);

        // Tail of the speed measure, right-to-left.  Seed with the
        // Laplace estimate of the remainder past the table:
        // ∫_{xm}^∞ m ≈ m(xm) / (2 V'(xm)).
        let vp_end = -model.b.eval(x_max) / alpha_eps(model, eps, x_max);
        let mut tail = vec![0.0; TABLE_N];
        tail[TABLE_N - 1] = if vp_end > 0.0 {
            m_of(x_max) / (2.0 * vp_end)
        } else {
            0.0
        };
        for i in (0..TABLE_N - 1).rev() {
            let seg = quad::integrate(m_of, nodes[i], nodes[i + 1], 1e-12, 1e-300)?.value;
            tail[i] = tail[i + 1] + seg;
        }
        let tail_slopes: Vec<f64> = nodes.iter().map(|&z| -m_of(z)).collect();
        let speed_tail = CubicHermite::new(nodes, tail, tail_slopes);

        Ok(ScaleContext {
            model: model.clone(),
            eps,
            x_star,
            beta,
            pot,
            speed_cum,
            speed_tail,
        })
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Scale density `s'(y) = e^{2V(y)}` (anchored at `x★`).
    pub fn scale_density(&self, y: f64) -> f64 {
        (2.0 * self.pot.eval(y)).exp()
    }

    /// Speed density `m(z) = e^{-2V(z)} / α(z)`.
    pub fn speed_density(&self, z: f64) -> f64 {
        (-2.0 * self.pot.eval(z)).exp() / alpha_eps(&self.model, self.eps, z)
    }

    /// Scale function `s(x) = ∫_{x★}^x e^{2V}` for `x > 0`.
    pub fn scale_function(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale function needs x > 0 (got {x})"
            )));
        }
        let v = quad::integrate(
            |y| self.scale_density(y),
            self.x_star,
            x.min(self.pot.x_max()),
            SCALE_REL_TOL,
            1e-300,
        )?
        .value;
        ensure_finite(v, "scale function")
    }

    /// Limit `s(0+)`, finite for every `ε > 0`.  The stretch below the
    /// table bottom contributes `x_lo · e^{2V(0+)}` up to `O(x_lo²)`,
    /// which is added analytically.
    pub fn scale_at_origin(&self) -> Result<f64> {
        let x_lo = self.pot.x_min();
        let main = quad::integrate(
            |y| self.scale_density(y),
            self.x_star,
            x_lo,
            SCALE_REL_TOL,
            1e-300,
        )?
        .value;
        let below = x_lo * self.scale_density(x_lo);
        ensure_finite(main - below, "scale function at the origin")
    }

    /// `r(x) = ∫_{x★}^x s'(y) g(y) dy` with `g` the anchored cumulative
    /// speed.
    pub fn r_function(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "r-function needs x > 0 (got {x})"
            )));
        }
        let v = quad::integrate(
            |y| self.scale_density(y) * self.speed_cum.eval(y),
            self.x_star,
            x.min(self.pot.x_max()),
            R_REL_TOL,
            1e-300,
        )?
        .value;
        ensure_finite(v, "r-function")
    }

    /// Limit `r(0+)`.  `g` diverges logarithmically at the origin but the
    /// outer integrand stays integrable; the below-table remainder is
    /// `x_lo·s'(x_lo)·g(x_lo) - x_lo·e^{2(V(x_lo)-2V(x_lo))}/…` — to
    /// leading order `x_lo·[s'·g](x_lo) - x_lo/(ε²a'(0))`, both of order
    /// `x_lo·log`, i.e. negligible at 1e-12 but included for hygiene.
    pub fn r_at_origin(&self) -> Result<f64> {
        let x_lo = self.pot.x_min();
        let main = quad::integrate(
            |y| self.scale_density(y) * self.speed_cum.eval(y),
            self.x_star,
            x_lo,
            R_REL_TOL,
            1e-300,
        )?
        .value;
        // Below x_lo: s'(y) ≈ s'(x_lo) constant and
        // g(y) ≈ g(x_lo) - m(x_lo)·x_lo·ln(x_lo/y) (speed ~ c/z there), so
        // ∫_0^{x_lo} s' g dy ≈ x_lo·s'(x_lo)·[g(x_lo) - m(x_lo)·x_lo].
        let below =
            x_lo * self.scale_density(x_lo) * (self.speed_cum.eval(x_lo) - x_lo * self.speed_density(x_lo));
        ensure_finite(main - below, "r-function at the origin")
    }

    /// Probability that the diffusion started at `x ∈ (0, β)` exits the
    /// interval through `β` rather than into extinction at `0`.
    pub fn exit_prob_top(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= self.beta) {
            return Err(Error::InvalidArgument(format!(
                "exit probability needs 0 < x <= beta = {} (got {x})",
                self.beta
            )));
        }
        let s0 = self.scale_at_origin()?;
        let sx = self.scale_function(x)?;
        let sb = self.scale_function(self.beta)?;
        Ok((sx - s0) / (sb - s0))
    }

    /// Mean exit time of `(0, β)` started at `x`, via the scale/speed
    /// quadrature representation.
    pub fn mean_exit_time(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= self.beta) {
            return Err(Error::InvalidArgument(format!(
                "mean exit time needs 0 < x <= beta = {} (got {x})",
                self.beta
            )));
        }
        let (s0, r0) = (self.scale_at_origin()?, self.r_at_origin()?);
        let (sb, rb) = (self.scale_function(self.beta)?, self.r_function(self.beta)?);
        let bcoef = 2.0 * (rb - r0) / (sb - s0);
        let acoef = 2.0 * rb - bcoef * sb;
        let v = -2.0 * self.r_function(x)? + acoef + bcoef * self.scale_function(x)?;
        ensure_finite(v, "mean exit time")
    }

    /// Mean time to descend to `x★` from `x ≥ x★`.
    pub fn mean_hitting_from_above(&self, x: f64) -> Result<f64> {
        if !(x >= self.x_star) {
            return Err(Error::InvalidArgument(format!(
                "descent time needs x >= x_star = {} (got {x})",
                self.x_star
            )));
        }
        if x > self.pot.x_max() {
            return Err(Error::InvalidArgument(format!(
                "descent time start {x} beyond the table range {:e}",
                self.pot.x_max()
            )));
        }
        let v = 2.0
            * quad::integrate(
                |y| self.scale_density(y) * self.speed_tail.eval(y),
                self.x_star,
                x,
                R_REL_TOL,
                1e-300,
            )?
            .value;
        ensure_finite(v, "mean descent time")
    }

    /// Mean extinction time from `x0 ≥ x★` by the renewal decomposition:
    /// each excursion from `x★` exits `(0, β)`; with probability `p` it
    /// exits at `β` and descends back to `x★`, otherwise it is extinct.
    pub fn renewal_mean_extinction(&self, x0: f64) -> Result<f64> {
        if !(x0 >= self.x_star) {
            return Err(Error::InvalidArgument(format!(
                "renewal decomposition needs x0 >= x_star = {} (got {x0})",
                self.x_star
            )));
        }
        let p = self.exit_prob_top(self.x_star)?;
        let cycle = self.mean_exit_time(self.x_star)?;
        let descend = self.mean_hitting_from_above(self.beta)?;
        let from_star = (cycle + p * descend) / (1.0 - p);
        let v = from_star + self.mean_hitting_from_above(x0)?;
        ensure_finite(v, "renewal mean extinction time")
    }

    /// Mean exit time of `(0, β)` by an independent finite-difference
    /// solve of `½αu'' + bu' = -1`, Dirichlet at both ends, on `n`
    /// log-graded nodes (snapped so `x★` is a node).  Returns the value
    /// at `x★`, the full node vector, and the solution values.
    pub fn mean_exit_time_bvp(&self, n: usize) -> Result<BvpSolution> {
        if n < 128 {
            return Err(Error::InvalidArgument(
                "BVP solve needs at least 128 nodes".into(),
            ));
        }
        // Nodes: 0, then log-spaced from β·1e-9 to β.  The first stencil
        // leans on the absorbing value u(0) = 0.
        let y_min = self.beta * 1e-9;
        let (llo, lhi) = (y_min.ln(), self.beta.ln());
        let mut xs = Vec::with_capacity(n + 1);
        xs.push(0.0);
        for i in 0..n {
            xs.push((llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp());
        }
        // Snap the node nearest x★ onto it exactly.
        let k = xs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - self.x_star).abs().total_cmp(&(b.1 - self.x_star).abs()))
            .map(|(i, _)| i)
            .unwrap();
        if k == 0 || k == xs.len() - 1 {
            return Err(Error::InvalidArgument(
                "x_star does not fall inside the BVP grid".into(),
            ));
        }
        xs[k] = self.x_star;

        // Interior unknowns u_1 … u_{N-1} (u_0 = u_N = 0); row j of the
        // tridiagonal system is the stencil at node i = j + 1.  The
        // absorbing boundary values are zero, so the first/last rows drop
        // their outer neighbour without any rhs contribution.
        let n_int = xs.len() - 2;
        let mut sub = vec![0.0; n_int - 1];
        let mut diag = vec![0.0; n_int];
        let mut sup = vec![0.0; n_int - 1];
        let rhs = vec![-1.0; n_int];
        for j in 0..n_int {
            let i = j + 1;
            let (hm, hp) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            let alpha = alpha_eps(&self.model, self.eps, xs[i]);
            let b = self.model.b.eval(xs[i]);
            let denom = hm * (hm + hp);
            let denop = hp * (hm + hp);
            if j > 0 {
                sub[j - 1] = alpha / denom - b * hp / denom;
            }
            diag[j] = -alpha / (hm * hp) + b * (hp - hm) / (hm * hp);
            if j < n_int - 1 {
                sup[j] = alpha / denop + b * hm / denop;
            }
        }
        let interior = solve_tridiag(&sub, &diag, &sup, &rhs)?;
        let mut u = Vec::with_capacity(xs.len());
        u.push(0.0);
        u.extend_from_slice(&interior);
        u.push(0.0);
        let at_x_star = u[k];
        ensure_finite(at_x_star, "BVP mean exit time")?;
        Ok(BvpSolution {
            nodes: xs,
            values: u,
            at_x_star,
        })
    }
}

/// Finite-difference solution of the mean-exit-time boundary-value
/// problem on `(0, β)`.
pub struct BvpSolution {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub at_x_star: f64,
}

fn ensure_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Truncation(format!(
            "{what} is not finite ({v}); the exponential factors exceed f64 range at this ε"
        )))
    }
}
