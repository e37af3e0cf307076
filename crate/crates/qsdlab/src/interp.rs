//! Interpolation helpers used by the transform and density tables.

/// Cubic Hermite interpolant through `(xs[i], ys[i])` with prescribed
/// derivatives `ds[i]`.
///
/// All tables in this crate interpolate functions whose derivative is
/// known in closed form (potentials, the spatial change of variables),
/// so Hermite data is exact and the interpolant is locally fourth-order
/// accurate on smooth segments.
#[derive(Debug, Clone)]
pub struct CubicHermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl CubicHermite {
    /// Builds the interpolant.  `xs` must be strictly increasing and all
    /// three slices must have equal length >= 2.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, ds: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len() && xs.len() == ds.len());
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]), "abscissas must increase");
        Self { xs, ys, ds }
    }

    /// Index of the segment containing `x` (clamped to the table range).
    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.xs.len() - 2),
        }
    }

    /// Evaluates the interpolant (extrapolates linearly-in-Hermite-form
    /// outside the table, which callers avoid by construction).
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }

    /// Derivative of the interpolant.
    pub fn eval_d(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.ys[i] + d10 * self.ds[i] + d01 * self.ys[i + 1] + d11 * self.ds[i + 1]
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }
}

/// Four-point Lagrange interpolation on a uniform table starting at
/// `y0` with spacing `h`.  Falls back to the nearest interior stencil at
/// the table edges.  Accuracy is O(h^4) for smooth data.
pub fn interp_uniform_cubic(y0: f64, h: f64, vals: &[f64], y: f64) -> f64 {
    let n = vals.len();
    assert!(n >= 4, "need at least 4 points for cubic interpolation");
    let pos = (y - y0) / h;
    // Stencil [j, j+3] centred so that y lies between j+1 and j+2.
    let j = ((pos.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
    let t = pos - j as f64; // position relative to stencil start, in [0..3]
    let c0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let c1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let c2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let c3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    c0 * vals[j] + c1 * vals[j + 1] + c2 * vals[j + 2] + c3 * vals[j + 3]
}
