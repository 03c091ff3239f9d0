//! Anisotropic total variation and its proximal map.
//!
//! `TV(u) = Σ |u[i+1,j] − u[i,j]| + Σ |u[i,j+1] − u[i,j]|` over existing
//! neighbor pairs only (no wraparound). Write `D` for the stacked
//! vertical/horizontal difference operator, so `TV(u) = ‖Du‖₁`.
//!
//! The prox `argmin_z α·TV(z) + ½‖z − b‖²` is computed on the dual: with one
//! dual value per edge in `[−α, α]`, `z = b − Dᵀq`. Two schemes update `q`:
//! exact block minimization (all horizontal edges, then all vertical ones,
//! each block being independent 1D problems along rows or columns), or
//! accelerated projected gradient `q ← clip(r + τ·D(b − Dᵀr), −α, α)` from an
//! extrapolated point `r`. The duality gap
//! `Σ_e (α|Dz|_e − q_e (Dz)_e)` is nonnegative, bounds the primal
//! suboptimality and is the stopping criterion.
//!
//! `Dᵀq` with `|q| ≤ α` is exactly the Meyer ball of radius `α`, the set whose
//! indicator is the conjugate of `α·TV`; [`project_meyer_ball`] uses that.

use crate::error::{Error, Result};
use crate::image::Image;

pub fn tv_eval(u: &Image) -> f64 {
    let (rows, cols) = u.shape();
    let d = u.as_slice();
    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let here = d[i * cols + j];
            if i + 1 < rows {
                total += (d[(i + 1) * cols + j] - here).abs();
            }
            if j + 1 < cols {
                total += (d[i * cols + j + 1] - here).abs();
            }
        }
    }
    total
}

/// Iterative scheme on the edge duals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TvScheme {
    /// Accelerated projected gradient with step `step`.
    ProjectedGradient,
    /// Exact minimization over all horizontal, then all vertical duals.
    #[default]
    BlockCoordinate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvProxConfig {
    pub alpha: f64,
    pub max_iter: usize,
    pub dual_tol: f64,
    /// Dual step, at most 0.25 (`‖DDᵀ‖ < 8` on a finite grid).
    pub step: f64,
    pub scheme: TvScheme,
}

impl TvProxConfig {
    pub fn new(alpha: f64) -> Self {
        TvProxConfig {
            alpha,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.step > 0.0 && self.step <= 0.25) {
            return Err(Error::Config(format!("step must be in (0, 0.25], got {}", self.step)));
        }
        if !(self.dual_tol > 0.0) {
            return Err(Error::Config("dual_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TvProxConfig {
    fn default() -> Self {
        TvProxConfig {
            alpha: 1.0,
            max_iter: 20_000,
            dual_tol: 1e-8,
            step: 0.25,
            scheme: TvScheme::BlockCoordinate,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TvProxOutcome {
    /// Lowest-gap iterate seen.
    pub z: Image,
    /// Duality gap of `z`; bounds `α·TV(z) + ½‖z − b‖² − min`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Edge duals of the prox, kept between calls for warm starts.
#[derive(Clone, Debug)]
pub struct TvDual {
    rows: usize,
    cols: usize,
    /// `(rows − 1) × cols`, edge `(i,j)–(i+1,j)`.
    vertical: Vec<f64>,
    /// `rows × (cols − 1)`, edge `(i,j)–(i,j+1)`.
    horizontal: Vec<f64>,
}

impl TvDual {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TvDual {
            rows,
            cols,
            vertical: vec![0.0; rows.saturating_sub(1) * cols],
            horizontal: vec![0.0; rows * cols.saturating_sub(1)],
        }
    }

    /// `Dᵀq` as an image; always inside the Meyer ball of the current radius.
    pub fn divergence(&self) -> Image {
        let mut out = vec![0.0; self.rows * self.cols];
        self.apply_transpose(&mut out);
        Image::new(self.rows, self.cols, out).expect("shape checked at construction")
    }

    fn apply_transpose(&self, out: &mut [f64]) {
        transpose(self.rows, self.cols, &self.vertical, &self.horizontal, out);
    }

    /// Solves the prox for `b`, starting from the stored duals.
    ///
    /// Accelerated projected gradient on `q`, with the momentum reset whenever
    /// the gap at the feasible iterate grows.
    pub fn prox(&mut self, b: &Image, cfg: &TvProxConfig) -> Result<TvProxOutcome> {
        match cfg.scheme {
            TvScheme::ProjectedGradient => self.prox_gradient(b, cfg),
            TvScheme::BlockCoordinate => self.prox_blocks(b, cfg),
        }
    }

    fn prox_gradient(&mut self, b: &Image, cfg: &TvProxConfig) -> Result<TvProxOutcome> {
        cfg.validate()?;
        if b.shape() != (self.rows, self.cols) {
            return Err(Error::InvalidImage("prox input shape differs from dual shape".into()));
        }
        let alpha = cfg.alpha;
        for q in self.vertical.iter_mut().chain(self.horizontal.iter_mut()) {
            *q = q.clamp(-alpha, alpha);
        }
        let (rows, cols) = (self.rows, self.cols);
        let bd = b.as_slice();
        let mut z = vec![0.0; bd.len()];
        let mut zr = vec![0.0; bd.len()];
        let mut best = z.clone();
        let mut best_gap = f64::INFINITY;
        let mut last_gap = f64::INFINITY;
        let (mut rv, mut rh) = (self.vertical.clone(), self.horizontal.clone());
        let (mut pv, mut ph) = (self.vertical.clone(), self.horizontal.clone());
        let mut momentum = 1.0f64;
        let mut iterations = 0;

        loop {
            residual(rows, cols, bd, &self.vertical, &self.horizontal, &mut z);
            let gap = duality_gap(rows, cols, &z, &self.vertical, &self.horizontal, alpha);
            if gap < best_gap {
                best_gap = gap;
                best.copy_from_slice(&z);
            }
            if gap <= cfg.dual_tol || iterations >= cfg.max_iter {
                break;
            }
            if gap > last_gap {
                momentum = 1.0;
                rv.copy_from_slice(&self.vertical);
                rh.copy_from_slice(&self.horizontal);
            }
            last_gap = gap;

            residual(rows, cols, bd, &rv, &rh, &mut zr);
            pv.copy_from_slice(&self.vertical);
            ph.copy_from_slice(&self.horizontal);
            let step = cfg.step;
            for_each_edge(rows, cols, &zr, |vertical, e, d| {
                let (q, r) = if vertical { (&mut self.vertical[e], rv[e]) } else { (&mut self.horizontal[e], rh[e]) };
                *q = (r + step * d).clamp(-alpha, alpha);
            });
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            for ((r, &q), &p) in rv.iter_mut().zip(&self.vertical).zip(&pv) {
                *r = q + beta * (q - p);
            }
            for ((r, &q), &p) in rh.iter_mut().zip(&self.horizontal).zip(&ph) {
                *r = q + beta * (q - p);
            }
            iterations += 1;
        }

        Ok(TvProxOutcome {
            z: b.with_data(best),
            gap: best_gap,
            iterations,
            converged: best_gap <= cfg.dual_tol,
        })
    }

    /// Solves the prox by exact block minimization of the dual: all
    /// horizontal edges at once (independent 1D problems along rows), then all
    /// vertical edges (along columns). Each block step is a set of exact 1D solves.
    fn prox_blocks(&mut self, b: &Image, cfg: &TvProxConfig) -> Result<TvProxOutcome> {
        cfg.validate()?;
        if b.shape() != (self.rows, self.cols) {
            return Err(Error::InvalidImage("prox input shape differs from dual shape".into()));
        }
        let alpha = cfg.alpha;
        let (rows, cols) = (self.rows, self.cols);
        let bd = b.as_slice();
        let zero_h = vec![0.0; self.horizontal.len()];
        let zero_v = vec![0.0; self.vertical.len()];
        let mut c = vec![0.0; bd.len()];
        let mut x = vec![0.0; bd.len()];
        let mut z = vec![0.0; bd.len()];
        let mut line = Vec::with_capacity(rows.max(cols));
        let mut best = z.clone();
        let mut best_gap = f64::INFINITY;
        let mut iterations = 0;
        // Eliminating q_h makes the column step a unit-step projected
        // gradient step in the image of q_v, so it takes FISTA momentum.
        let mut v_prev = self.vertical.clone();
        let mut v_bar = self.vertical.clone();
        let mut momentum = 1.0f64;
        let mut last_gap = f64::INFINITY;

        loop {
            residual(rows, cols, bd, &self.vertical, &self.horizontal, &mut z);
            let gap = duality_gap(rows, cols, &z, &self.vertical, &self.horizontal, alpha);
            if gap < best_gap {
                best_gap = gap;
                best.copy_from_slice(&z);
            }
            if gap <= cfg.dual_tol || iterations >= cfg.max_iter {
                break;
            }
            if gap > last_gap {
                momentum = 1.0;
                v_bar.copy_from_slice(&self.vertical);
            }
            last_gap = gap;

            // Rows: c = b − D_vᵀ q̄_v, solve every row exactly, then recover
            // q_h from the prox residual. Columns likewise against the new q_h.
            residual(rows, cols, bd, &v_bar, &zero_h, &mut c);
            prox_lines(rows, cols, &c, alpha, true, &mut x, &mut line);
            c.iter_mut().zip(&x).for_each(|(ci, xi)| *ci -= xi);
            duals_from_lines(rows, cols, &c, alpha, true, &mut self.horizontal);

            v_prev.copy_from_slice(&self.vertical);
            residual(rows, cols, bd, &zero_v, &self.horizontal, &mut c);
            prox_lines(rows, cols, &c, alpha, false, &mut x, &mut line);
            c.iter_mut().zip(&x).for_each(|(ci, xi)| *ci -= xi);
            duals_from_lines(rows, cols, &c, alpha, false, &mut self.vertical);

            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            for ((vb, &vn), &vp) in v_bar.iter_mut().zip(&self.vertical).zip(&v_prev) {
                *vb = vn + beta * (vn - vp);
            }
            iterations += 1;
        }

        Ok(TvProxOutcome {
            z: b.with_data(best),
            gap: best_gap,
            iterations,
            converged: best_gap <= cfg.dual_tol,
        })
    }
}

/// Applies the 1D prox with weight `alpha` to every row (or column) of `u`.
fn prox_lines(rows: usize, cols: usize, u: &[f64], alpha: f64, along_rows: bool, out: &mut [f64], line: &mut Vec<f64>) {
    let (count, len) = if along_rows { (rows, cols) } else { (cols, rows) };
    let idx = |k: usize, m: usize| if along_rows { k * cols + m } else { m * cols + k };
    for k in 0..count {
        line.clear();
        line.extend((0..len).map(|m| u[idx(k, m)]));
        let x = line_prox(line, alpha);
        for (m, xm) in x.into_iter().enumerate() {
            out[idx(k, m)] = xm;
        }
    }
}

/// Edge duals `q` along rows (or columns) with `D_lineᵀ q = p`, clamped to
/// `[−α, α]`. Exact when every line of `p` sums to zero.
fn duals_from_lines(rows: usize, cols: usize, p: &[f64], alpha: f64, along_rows: bool, q: &mut [f64]) {
    if along_rows {
        let hc = cols.saturating_sub(1);
        for i in 0..rows {
            let mut acc = 0.0;
            for j in 0..hc {
                acc -= p[i * cols + j];
                q[i * hc + j] = acc.clamp(-alpha, alpha);
            }
        }
    } else {
        for j in 0..cols {
            let mut acc = 0.0;
            for i in 0..rows.saturating_sub(1) {
                acc -= p[i * cols + j];
                q[i * cols + j] = acc.clamp(-alpha, alpha);
            }
        }
    }
}

/// `out = Dᵀq`.
fn transpose(rows: usize, cols: usize, vertical: &[f64], horizontal: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols {
            let q = vertical[i * cols + j];
            out[i * cols + j] -= q;
            out[(i + 1) * cols + j] += q;
        }
    }
    let hc = cols.saturating_sub(1);
    for i in 0..rows {
        for j in 0..hc {
            let q = horizontal[i * hc + j];
            out[i * cols + j] -= q;
            out[i * cols + j + 1] += q;
        }
    }
}

/// `out = b − Dᵀq`.
fn residual(rows: usize, cols: usize, b: &[f64], vertical: &[f64], horizontal: &[f64], out: &mut [f64]) {
    transpose(rows, cols, vertical, horizontal, out);
    for (o, bi) in out.iter_mut().zip(b) {
        *o = bi - *o;
    }
}

/// Calls `f(is_vertical, edge_index, (Dz)_edge)` for every edge.
fn for_each_edge(rows: usize, cols: usize, z: &[f64], mut f: impl FnMut(bool, usize, f64)) {
    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols {
            f(true, i * cols + j, z[(i + 1) * cols + j] - z[i * cols + j]);
        }
    }
    let hc = cols.saturating_sub(1);
    for i in 0..rows {
        for j in 0..hc {
            f(false, i * hc + j, z[i * cols + j + 1] - z[i * cols + j]);
        }
    }
}

/// `Σ_e α|Dz|_e − q_e (Dz)_e`; the primal–dual gap when `z = b − Dᵀq`.
fn duality_gap(rows: usize, cols: usize, z: &[f64], vertical: &[f64], horizontal: &[f64], alpha: f64) -> f64 {
    let mut gap = 0.0;
    for_each_edge(rows, cols, z, |is_vertical, e, d| {
        let q = if is_vertical { vertical[e] } else { horizontal[e] };
        gap += alpha * d.abs() - q * d;
    });
    gap
}

/// `argmin_z α·TV(z) + ½‖z − b‖²` from a cold start.
pub fn tv_prox(b: &Image, cfg: &TvProxConfig) -> Result<TvProxOutcome> {
    TvDual::zeros(b.rows(), b.cols()).prox(b, cfg)
}

/// Euclidean projection onto the Meyer ball of radius `cfg.alpha`,
/// `b − prox_{α·TV}(b)`. The result is `Dᵀq` for feasible duals `q`, so it lies
/// in the ball exactly, whatever the prox accuracy.
pub fn project_meyer_ball(dual: &mut TvDual, b: &Image, cfg: &TvProxConfig) -> Result<(Image, TvProxOutcome)> {
    let outcome = dual.prox(b, cfg)?;
    // The returned z is the best iterate; rebuild the projection from it so
    // that projection + z = b holds exactly up to rounding.
    let proj = b.zip_map(&outcome.z, |bi, zi| bi - zi);
    Ok((proj, outcome))
}

/// Whether `u` lies in the Meyer ball `{Dᵀq : |q|∞ ≤ α}` up to `tol` in the
/// max norm (checked through `prox_{α·TV}(u) = 0`).
pub fn meyer_ball_contains(u: &Image, alpha: f64, tol: f64) -> Result<bool> {
    let cfg = TvProxConfig {
        alpha,
        max_iter: 200_000,
        dual_tol: 1e-14,
        step: 0.25,
        scheme: TvScheme::BlockCoordinate,
    };
    let out = tv_prox(u, &cfg)?;
    Ok(out.z.as_slice().iter().all(|v| v.abs() <= tol))
}

/// Exact 1D TV prox (linear-time dynamic programming). Used as a reference for
/// [`tv_prox`] on single-row images and as the line solver of the block
/// schemes.
pub fn tv_prox_1d_exact(b: &Image, alpha: f64) -> Result<Image> {
    if b.rows() != 1 {
        return Err(Error::InvalidImage(format!(
            "1D prox needs a single row, got {} rows",
            b.rows()
        )));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("alpha must be nonnegative, got {alpha}")));
    }
    Ok(b.with_data(line_prox(b.as_slice(), alpha)))
}

/// Exact 1D prox by dynamic programming over the piecewise-linear derivative
/// of the partial objectives (Johnson's method). `x` holds knots, `a`/`b`
/// their slope/intercept increments; knots grow leftward from `n − 1` and
/// rightward from `n`.
fn line_prox(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    if n <= 1 || lambda == 0.0 {
        return y.to_vec();
    }
    let mut x = vec![0.0; 2 * n];
    let mut a = vec![0.0; 2 * n];
    let mut b = vec![0.0; 2 * n];
    let mut tm = vec![0.0; n - 1];
    let mut tp = vec![0.0; n - 1];

    tm[0] = y[0] - lambda;
    tp[0] = y[0] + lambda;
    let mut l = n - 1;
    let mut r = n;
    x[l] = tm[0];
    x[r] = tp[0];
    a[l] = 1.0;
    b[l] = lambda - y[0];
    a[r] = -1.0;
    b[r] = lambda + y[0];
    let mut afirst = 1.0;
    let mut bfirst = -lambda - y[1];
    let mut alast = -1.0;
    let mut blast = y[1] - lambda;

    for k in 1..n - 1 {
        let (mut alo, mut blo) = (afirst, bfirst);
        let mut lo = l;
        while lo <= r {
            if alo * x[lo] + blo > -lambda {
                break;
            }
            alo += a[lo];
            blo += b[lo];
            lo += 1;
        }
        tm[k] = (-lambda - blo) / alo;
        l = lo - 1;
        x[l] = tm[k];

        let (mut ahi, mut bhi) = (alast, blast);
        let mut hi = r;
        while hi >= l {
            if -ahi * x[hi] - bhi < lambda {
                break;
            }
            ahi += a[hi];
            bhi += b[hi];
            hi -= 1;
        }
        tp[k] = (lambda + bhi) / (-ahi);
        r = hi + 1;
        x[r] = tp[k];

        a[l] = alo;
        b[l] = blo + lambda;
        a[r] = ahi;
        b[r] = bhi + lambda;
        afirst = 1.0;
        bfirst = -lambda - y[k + 1];
        alast = -1.0;
        blast = y[k + 1] - lambda;
    }

    let (mut alo, mut blo) = (afirst, bfirst);
    let mut lo = l;
    while lo <= r {
        if alo * x[lo] + blo > 0.0 {
            break;
        }
        alo += a[lo];
        blo += b[lo];
        lo += 1;
    }
    let mut beta = vec![0.0; n];
    beta[n - 1] = -blo / alo;
    for k in (0..n - 1).rev() {
        beta[k] = beta[k + 1].clamp(tm[k], tp[k]);
    }
    beta
}
