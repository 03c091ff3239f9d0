//! ADMM solvers for the four denoising models.
//!
//! The two Bregman models (`PoissonLogTv`, `MultInvTv`) are solved through
//! the convex additive problem `min_v J(x − t·v) + t·H*(v)` with `J` the
//! Meyer-ball indicator, using the splitting `w = x − t·v`:
//!
//! ```text
//! v ← argmin_v  t·H*(v) + (λ/2)‖w + t·v − x + y‖²      (per pixel)
//! w ← argmin_w  J(w)    + (λ/2)‖w + t·v − x + y‖²      (Meyer-ball projection)
//! y ← y + w + t·v − x
//! ```
//!
//! The projection is computed as `b − prox_{α·TV}(b)`. The two reference
//! models (`PoissonTv`, `MultLogTv`) split `v = w` (resp. `u = w` in log
//! variables) and call the TV prox with weight `α/λ`.

use std::fmt;
use std::str::FromStr;

use crate::convex::{ExtReal, Hamiltonian, HamiltonianKind};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::tv::{project_meyer_ball, tv_eval, TvDual, TvProxConfig, TvScheme};

/// Lower clamp for initial and reference-model iterates on `(0, ∞)`.
pub const POSITIVITY_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    /// KL fidelity + `α·TV(log v)`, solved via the additive dual model.
    PoissonLogTv,
    /// KL fidelity + `α·TV(v)`.
    PoissonTv,
    /// Itakura–Saito fidelity + `α·TV(−1/v)`, solved via the additive dual model.
    MultInvTv,
    /// Itakura–Saito fidelity + `α·TV(log v)`, solved in `log v`.
    MultLogTv,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::PoissonLogTv, Model::PoissonTv, Model::MultInvTv, Model::MultLogTv];

    pub fn name(self) -> &'static str {
        match self {
            Model::PoissonLogTv => "poisson-logtv",
            Model::PoissonTv => "poisson-tv",
            Model::MultInvTv => "mult-invtv",
            Model::MultLogTv => "mult-logtv",
        }
    }

    /// The Legendre pair whose Bregman distance is the model's fidelity.
    pub fn hamiltonian(self) -> HamiltonianKind {
        match self {
            Model::PoissonLogTv | Model::PoissonTv => HamiltonianKind::PoissonExp,
            Model::MultInvTv | Model::MultLogTv => HamiltonianKind::BurgNegLog,
        }
    }

    pub fn is_poisson(self) -> bool {
        self.hamiltonian() == HamiltonianKind::PoissonExp
    }

    pub fn solve(self, x: &Image, cfg: &AdmmConfig) -> Result<SolveReport> {
        match self {
            Model::PoissonLogTv => poisson_logtv_denoise(x, cfg),
            Model::PoissonTv => poisson_tv_denoise(x, cfg),
            Model::MultInvTv => mult_invtv_denoise(x, cfg),
            Model::MultLogTv => mult_logtv_denoise(x, cfg),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmmConfig {
    /// ADMM penalty.
    pub lambda: f64,
    /// Model parameter (exposure time / number of looks).
    pub t: f64,
    /// Regularization weight.
    pub alpha: f64,
    pub max_iter: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Floor of the inner TV prox duality-gap tolerance. Above the floor the
    /// tolerance tracks the previous outer residual `r` as `n·(r/10)²/2`, so
    /// prox errors stay a tenth of the residual in RMS.
    pub tv_tol: f64,
    pub tv_max_iter: usize,
    pub tv_step: f64,
    pub tv_scheme: TvScheme,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            lambda: 1.0,
            t: 1.0,
            alpha: 1.0,
            max_iter: 5000,
            primal_tol: 1e-6,
            dual_tol: 1e-6,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            tv_tol: 1e-10,
            tv_max_iter: 20_000,
            tv_step: 0.25,
            tv_scheme: TvScheme::BlockCoordinate,
        }
    }
}

impl AdmmConfig {
    pub fn new(t: f64, alpha: f64) -> Self {
        AdmmConfig {
            t,
            alpha,
            ..Default::default()
        }
    }

    /// Tight tolerances for small verification problems.
    pub fn precise(t: f64, alpha: f64) -> Self {
        AdmmConfig {
            t,
            alpha,
            max_iter: 200_000,
            primal_tol: 1e-12,
            dual_tol: 1e-12,
            tv_tol: 1e-15,
            tv_max_iter: 100_000,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("t", self.t),
            ("alpha", self.alpha),
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
            ("newton_tol", self.newton_tol),
            ("tv_tol", self.tv_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if self.max_iter == 0 || self.newton_max_iter == 0 || self.tv_max_iter == 0 {
            return Err(Error::Config("iteration caps must be positive".into()));
        }
        if !(self.tv_step > 0.0 && self.tv_step <= 0.25) {
            return Err(Error::Config(format!("tv_step must be in (0, 0.25], got {}", self.tv_step)));
        }
        Ok(())
    }

    fn tv_config(&self, alpha: f64, dual_tol: f64) -> TvProxConfig {
        TvProxConfig {
            alpha,
            max_iter: self.tv_max_iter,
            dual_tol,
            step: self.tv_step,
            scheme: self.tv_scheme,
        }
    }

    /// Inner gap tolerance after an outer residual of `residual` (RMS, in
    /// units of the split variable).
    pub fn inner_tol(&self, n: usize, residual: f64) -> f64 {
        self.tv_tol.max(0.5 * n as f64 * (0.1 * residual).powi(2))
    }

    /// Inner gap a converged iterate must have met: the tolerance at the
    /// stopping residual. Early loose proxes cannot end the loop.
    fn final_inner_tol(&self, n: usize) -> f64 {
        self.inner_tol(n, self.primal_tol.min(self.dual_tol))
    }
}

/// Final state and history of one solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Restored image.
    pub v_bar: Image,
    /// Split variable at exit (`≈ x − t·v̄` for the Bregman models, `≈ v̄` or
    /// `≈ log v̄` for the reference models).
    pub w: Image,
    /// Scaled dual variable at exit.
    pub y: Image,
    /// Non-additive objective at `v̄`, fidelity constants included.
    pub obj_nonadditive: f64,
    /// Additive objective `J(w) + t·H*(v̄)`; `None` for the reference models,
    /// which have no additive counterpart.
    pub obj_additive: Option<f64>,
    pub iterations: usize,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    pub converged: bool,
    /// Largest duality gap among the inner TV prox calls.
    pub max_tv_gap: f64,
}

impl SolveReport {
    /// `‖x/t − v̄‖`, the residual norm used to compare models.
    pub fn residual_norm(&self, x: &Image, t: f64) -> f64 {
        x.scale(1.0 / t).dist(&self.v_bar)
    }
}

/// The `J` term of the additive model, through its proximal step.
pub trait Penalty {
    /// `argmin_w J(w) + (λ/2)‖w − b‖²`.
    /// `inner_tol` bounds the accuracy asked of iterative proxes.
    fn prox(&mut self, b: &Image, lambda: f64, cfg: &AdmmConfig, inner_tol: f64) -> Result<Image>;

    /// `J` at a point returned by [`Penalty::prox`].
    fn value_at_split(&self, w: &Image) -> f64;

    /// `J*(p)`.
    fn conjugate(&self, p: &Image) -> f64;

    /// Problem-specific feasibility conditions beyond `x ∈ t·dom H*`.
    fn check_feasible(&self, _x: &Image, _kind: HamiltonianKind) -> Result<()> {
        Ok(())
    }

    /// Largest inner-solver gap seen so far (zero for exact proxes).
    fn max_gap(&self) -> f64 {
        0.0
    }

    /// Inner-solver gap of the latest prox call.
    fn last_gap(&self) -> f64 {
        0.0
    }
}

/// Indicator of the Meyer ball of radius `α`, the conjugate of `α·TV`.
#[derive(Clone, Debug)]
pub struct MeyerBall {
    pub alpha: f64,
    dual: Option<TvDual>,
    max_gap: f64,
    last_gap: f64,
}

impl MeyerBall {
    pub fn new(alpha: f64) -> Self {
        MeyerBall { alpha, dual: None, max_gap: 0.0, last_gap: 0.0 }
    }
}

impl Penalty for MeyerBall {
    fn prox(&mut self, b: &Image, _lambda: f64, cfg: &AdmmConfig, inner_tol: f64) -> Result<Image> {
        let dual = self
            .dual
            .get_or_insert_with(|| TvDual::zeros(b.rows(), b.cols()));
        let (proj, outcome) = project_meyer_ball(dual, b, &cfg.tv_config(self.alpha, inner_tol))?;
        self.max_gap = self.max_gap.max(outcome.gap);
        self.last_gap = outcome.gap;
        Ok(proj)
    }

    fn value_at_split(&self, _w: &Image) -> f64 {
        0.0
    }

    fn conjugate(&self, p: &Image) -> f64 {
        self.alpha * tv_eval(p)
    }

    fn check_feasible(&self, x: &Image, kind: HamiltonianKind) -> Result<()> {
        // Ball elements have zero sum, so x − t·v > 0 needs Σx > 0.
        if kind == HamiltonianKind::PoissonExp && !(x.sum() > 0.0) {
            return Err(Error::Infeasible(
                "Poisson data must have a positive total count".into(),
            ));
        }
        Ok(())
    }

    fn max_gap(&self) -> f64 {
        self.max_gap
    }

    fn last_gap(&self) -> f64 {
        self.last_gap
    }
}

/// Why a scalar Newton solve gave up.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonFailure(pub String);

/// Safeguarded Newton for an increasing function on a bracket `[lo, hi]` with
/// `f(lo) < 0 < f(hi)`. Steps leaving the bracket are replaced by bisection.
fn safeguarded_newton(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<f64, NewtonFailure> {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if !(flo < 0.0) {
        return if flo == 0.0 { Ok(lo) } else { Err(NewtonFailure(format!("no sign change: f({lo}) = {flo}"))) };
    }
    if !(fhi > 0.0) {
        return if fhi == 0.0 { Ok(hi) } else { Err(NewtonFailure(format!("no sign change: f({hi}) = {fhi}"))) };
    }
    let bisect = |lo: f64, hi: f64| 0.5 * (lo + hi);
    let tol = tol.max(4.0 * f64::EPSILON);
    let mut x = if start > lo && start < hi { start } else { bisect(lo, hi) };
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let x_scale = x.abs().max(1.0);
        if newton.is_finite() && (newton - x).abs() <= tol * x_scale {
            return Ok(newton.clamp(lo, hi));
        }
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            bisect(lo, hi)
        };
        let scale = next.abs().max(1.0);
        if (next - x).abs() <= tol * scale || (hi - lo) <= tol * scale {
            return Ok(next);
        }
        x = next;
    }
    Err(NewtonFailure(format!("no convergence in {max_iter} iterations (bracket [{lo}, {hi}])")))
}

/// Poisson v-update: the root of `t·log v + λt²·v = λt·r`, `r = x − w − y`.
///
/// Newton runs on `s = log v`, where `s + λt·eˢ − λr` is convex and
/// increasing, so iterates approach the root from above after one step.
pub fn poisson_v_update(
    r: f64,
    t: f64,
    lambda: f64,
    warm: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<f64, NewtonFailure> {
    let a = lambda * t;
    let c = lambda * r;
    // v ≥ 1 gives g ≥ a·v − c; v ≤ 1 gives g ≤ log v + a − c.
    let hi = if c / a >= 1.0 { (2.0 * c / a).ln() } else { 2f64.ln() };
    let lo = c.min(a) - a - 1.0;
    let g = |s: f64| {
        let e = a * s.exp();
        (s + e - c, 1.0 + e)
    };
    let start = if warm > 0.0 { warm.ln() } else { f64::NAN };
    let s = safeguarded_newton(g, lo, hi, start, tol, max_iter)?;
    let v = s.exp();
    if v > 0.0 {
        Ok(v)
    } else {
        Err(NewtonFailure(format!("root underflows: log v = {s}")))
    }
}

/// Itakura–Saito / Burg v-update: `v = s + √(s² + 1/(λt))`, `s = r/(2t)`.
pub fn burg_v_update(r: f64, t: f64, lambda: f64) -> f64 {
    let s = r / (2.0 * t);
    positive_root(s, 1.0 / (lambda * t))
}

/// Quadratic v-update: `v = λr/(1 + λt)`.
pub fn quadratic_v_update(r: f64, t: f64, lambda: f64) -> f64 {
    lambda * r / (1.0 + lambda * t)
}

/// Reference Poisson model v-update: `v = s + √(s² + x/λ)`,
/// `s = ½(w − y − t/λ)`. Zero counts give `max(2s, 0)`.
pub fn poisson_tv_v_update(x: f64, t: f64, lambda: f64, w_minus_y: f64) -> f64 {
    let s = 0.5 * (w_minus_y - t / lambda);
    positive_root(s, x / lambda)
}

/// `s + √(s² + q)` for `q ≥ 0`, without cancellation when `s < 0`.
fn positive_root(s: f64, q: f64) -> f64 {
    let root = (s * s + q).sqrt();
    if s >= 0.0 {
        s + root
    } else if q == 0.0 {
        0.0
    } else {
        q / (root - s)
    }
}

/// Reference multiplicative model u-update (`u = log v`): the root of
/// `t + λ(u − c) − x·e^{−u} = 0` with `c = w − y`. Accepts `λ = 0`.
pub fn mult_logtv_u_update(
    x: f64,
    t: f64,
    lambda: f64,
    c: f64,
    warm: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<f64, NewtonFailure> {
    if !(x > 0.0) {
        return Err(NewtonFailure(format!("data must be positive, got {x}")));
    }
    let center = (x / t).ln();
    let lo = c.min(center - 1.0);
    let hi = c.max(center + 1.0);
    let phi = |u: f64| {
        let e = x * (-u).exp();
        (t + lambda * (u - c) - e, lambda + e)
    };
    safeguarded_newton(phi, lo, hi, warm, tol, max_iter)
}

fn check_data(x: &Image, kind: HamiltonianKind, cfg: &AdmmConfig) -> Result<()> {
    cfg.validate()?;
    let scaled: Vec<f64> = x.as_slice().iter().map(|v| v / cfg.t).collect();
    if let Some(k) = scaled.iter().position(|&v| !kind.in_closed_dom_h_star(v)) {
        return Err(Error::Infeasible(format!(
            "pixel {k} = {} is outside t·dom H* for {}",
            x.as_slice()[k],
            kind.name()
        )));
    }
    Ok(())
}

/// RMS of the data, floored at one; the first outer residual estimate.
fn data_scale(x: &Image) -> f64 {
    (x.norm() / (x.len() as f64).sqrt()).max(1.0)
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|e| e * e).sum::<f64>() / n as f64).sqrt()
}

/// Non-additive objective `t·D_{H*}(x/t, v) + reg`.
fn bregman_objective(kind: HamiltonianKind, x: &Image, v: &Image, t: f64, reg: f64) -> Result<f64> {
    let ham = Hamiltonian::new(kind, x.len())?;
    let xs: Vec<f64> = x.as_slice().iter().map(|e| e / t).collect();
    Ok(t * ham.bregman_primal(&xs, v.as_slice())? + reg)
}

/// `∇H*(v)` as an image.
pub(crate) fn dual_image(kind: HamiltonianKind, v: &Image) -> Result<Image> {
    let ham = Hamiltonian::new(kind, v.len())?;
    Ok(v.with_data(ham.grad_h_star(v.as_slice())?))
}

/// Runs ADMM on `min_v J(x − t·v) + t·H*(v)` for any penalty `J`.
///
/// `warm` restarts from the `(v, w, y)` of an earlier report on the same
/// shape.
pub fn solve_additive<P: Penalty>(
    x: &Image,
    kind: HamiltonianKind,
    penalty: &mut P,
    cfg: &AdmmConfig,
    warm: Option<&SolveReport>,
) -> Result<SolveReport> {
    check_data(x, kind, cfg)?;
    penalty.check_feasible(x, kind)?;
    let (t, lambda) = (cfg.t, cfg.lambda);
    let n = x.len();
    let xd = x.as_slice();

    let (mut v, mut w, mut y) = match warm {
        Some(r) => {
            r.v_bar.same_shape(x)?;
            (r.v_bar.clone(), r.w.clone(), r.y.clone())
        }
        None => {
            let v0 = x.map(|e| match kind {
                HamiltonianKind::Quadratic => e / t,
                _ => (e / t).max(POSITIVITY_FLOOR),
            });
            let w0 = x.zip_map(&v0, |e, v| e - t * v);
            (v0, w0, Image::zeros(x.rows(), x.cols()))
        }
    };

    let mut primal_residuals = Vec::new();
    let mut dual_residuals = Vec::new();
    let mut converged = false;
    let mut b = Image::zeros(x.rows(), x.cols());
    let mut residual = data_scale(x);

    for iteration in 0..cfg.max_iter {
        // v-update, pixel by pixel.
        let vd = v.as_mut_slice();
        for i in 0..n {
            let r = xd[i] - w.as_slice()[i] - y.as_slice()[i];
            vd[i] = match kind {
                HamiltonianKind::Quadratic => quadratic_v_update(r, t, lambda),
                HamiltonianKind::BurgNegLog => burg_v_update(r, t, lambda),
                HamiltonianKind::PoissonExp => {
                    match poisson_v_update(r, t, lambda, vd[i], cfg.newton_tol, cfg.newton_max_iter) {
                        Ok(root) => root,
                        Err(NewtonFailure(reason)) => {
                            let report = partial_report(&v, &w, &y, iteration, primal_residuals, dual_residuals, penalty.max_gap());
                            return Err(Error::InnerSolver {
                                pixel: i,
                                iteration,
                                reason,
                                report: Box::new(report),
                            });
                        }
                    }
                }
            };
        }

        // w-update through the penalty prox at b = x − t·v − y.
        for ((bi, (&xi, &vi)), &yi) in b
            .as_mut_slice()
            .iter_mut()
            .zip(xd.iter().zip(v.as_slice()))
            .zip(y.as_slice())
        {
            *bi = xi - t * vi - yi;
        }
        let w_next = penalty.prox(&b, lambda, cfg, cfg.inner_tol(n, residual))?;

        let mut primal = 0.0;
        let mut dual = 0.0;
        for (i, yi) in y.as_mut_slice().iter_mut().enumerate() {
            let res = w_next.as_slice()[i] + t * v.as_slice()[i] - xd[i];
            *yi += res;
            primal += res * res;
            let dw = lambda * (w_next.as_slice()[i] - w.as_slice()[i]);
            dual += dw * dw;
        }
        w = w_next;
        let primal = (primal / n as f64).sqrt();
        let dual = (dual / n as f64).sqrt();
        // In units of w, and never loosened: a growing residual must not
        // relax the prox that caused it.
        residual = residual.min(primal.max(dual / lambda));
        primal_residuals.push(primal);
        dual_residuals.push(dual);
        if primal < cfg.primal_tol && dual < cfg.dual_tol && penalty.last_gap() <= cfg.final_inner_tol(n) {
            converged = true;
            break;
        }
    }

    let iterations = primal_residuals.len();
    let p_bar = dual_image(kind, &v)?;
    let obj_nonadditive = bregman_objective(kind, x, &v, t, penalty.conjugate(&p_bar))?;
    let h_star = Hamiltonian::new(kind, n)?
        .h_star(v.as_slice())?
        .require("H*(v)")?;
    let obj_additive = penalty.value_at_split(&w) + t * h_star;
    Ok(SolveReport {
        v_bar: v,
        w,
        y,
        obj_nonadditive,
        obj_additive: Some(obj_additive),
        iterations,
        primal_residuals,
        dual_residuals,
        converged,
        max_tv_gap: penalty.max_gap(),
    })
}

fn partial_report(
    v: &Image,
    w: &Image,
    y: &Image,
    iteration: usize,
    primal_residuals: Vec<f64>,
    dual_residuals: Vec<f64>,
    max_tv_gap: f64,
) -> SolveReport {
    SolveReport {
        v_bar: v.clone(),
        w: w.clone(),
        y: y.clone(),
        obj_nonadditive: f64::NAN,
        obj_additive: None,
        iterations: iteration,
        primal_residuals,
        dual_residuals,
        converged: false,
        max_tv_gap,
    }
}

/// ADMM on the additive model with `J` the Meyer-ball indicator of radius
/// `cfg.alpha`.
pub fn admm_generic(x: &Image, kind: HamiltonianKind, cfg: &AdmmConfig) -> Result<SolveReport> {
    solve_additive(x, kind, &mut MeyerBall::new(cfg.alpha), cfg, None)
}

/// `min_v Σ(t·vᵢ − xᵢ log vᵢ) + α·TV(log v)`.
pub fn poisson_logtv_denoise(x: &Image, cfg: &AdmmConfig) -> Result<SolveReport> {
    admm_generic(x, HamiltonianKind::PoissonExp, cfg)
}

/// `min_v t·Σ(log vᵢ + xᵢ/(t·vᵢ)) + α·TV(−1/v)`.
pub fn mult_invtv_denoise(x: &Image, cfg: &AdmmConfig) -> Result<SolveReport> {
    if let Some(k) = x.as_slice().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Infeasible(format!("pixel {k} must be positive for multiplicative noise")));
    }
    admm_generic(x, HamiltonianKind::BurgNegLog, cfg)
}

/// Shared loop of the reference models: `v`-update by `update`, then
/// `w = prox_{(α/λ)TV}(v + y)`, `y += v − w`.
/// Iterates of the `v = w` split after [`split_tv_loop`] stops.
struct SplitRun {
    v: Image,
    w: Image,
    y: Image,
    primal_residuals: Vec<f64>,
    dual_residuals: Vec<f64>,
    converged: bool,
    max_tv_gap: f64,
}

fn split_tv_loop(
    x: &Image,
    cfg: &AdmmConfig,
    mut v: Image,
    mut update: impl FnMut(usize, f64, f64, f64) -> std::result::Result<f64, NewtonFailure>,
) -> Result<SplitRun> {
    let n = x.len();
    let lambda = cfg.lambda;
    let tv_weight = cfg.alpha / lambda;
    let mut residual = data_scale(x);
    let mut dual = TvDual::zeros(x.rows(), x.cols());
    let mut w = v.clone();
    let mut y = Image::zeros(x.rows(), x.cols());
    let mut primal_residuals = Vec::new();
    let mut dual_residuals = Vec::new();
    let mut converged = false;
    let mut max_gap: f64 = 0.0;

    for iteration in 0..cfg.max_iter {
        for i in 0..n {
            let c = w.as_slice()[i] - y.as_slice()[i];
            let prev = v.as_slice()[i];
            match update(i, x.as_slice()[i], c, prev) {
                Ok(val) => v.as_mut_slice()[i] = val,
                Err(NewtonFailure(reason)) => {
                    let report = partial_report(&v, &w, &y, iteration, primal_residuals, dual_residuals, max_gap);
                    return Err(Error::InnerSolver { pixel: i, iteration, reason, report: Box::new(report) });
                }
            }
        }
        let b = v.zip_map(&y, |a, c| a + c);
        let outcome = dual.prox(&b, &cfg.tv_config(tv_weight, cfg.inner_tol(n, residual)))?;
        max_gap = max_gap.max(outcome.gap);
        let last_gap = outcome.gap;
        let w_next = outcome.z;
        let primal = rms(v.as_slice().iter().zip(w_next.as_slice()).map(|(a, b)| a - b), n);
        let dres = rms(w_next.as_slice().iter().zip(w.as_slice()).map(|(a, b)| lambda * (a - b)), n);
        for ((yi, vi), wi) in y.as_mut_slice().iter_mut().zip(v.as_slice()).zip(w_next.as_slice()) {
            *yi += vi - wi;
        }
        w = w_next;
        residual = residual.min(primal.max(dres / lambda));
        primal_residuals.push(primal);
        dual_residuals.push(dres);
        if primal < cfg.primal_tol && dres < cfg.dual_tol && last_gap <= cfg.final_inner_tol(n) {
            converged = true;
            break;
        }
    }
    Ok(SplitRun { v, w, y, primal_residuals, dual_residuals, converged, max_tv_gap: max_gap })
}

/// `min_v Σ(t·vᵢ − xᵢ log vᵢ) + α·TV(v)`; closed-form v-update.
pub fn poisson_tv_denoise(x: &Image, cfg: &AdmmConfig) -> Result<SolveReport> {
    check_data(x, HamiltonianKind::PoissonExp, cfg)?;
    if !(x.sum() > 0.0) {
        return Err(Error::Infeasible("Poisson data must have a positive total count".into()));
    }
    let (t, lambda) = (cfg.t, cfg.lambda);
    let v0 = x.map(|e| (e / t).max(POSITIVITY_FLOOR));
    let SplitRun { v, w, y, primal_residuals, dual_residuals, converged, max_tv_gap } =
        split_tv_loop(x, cfg, v0, |_, xi, c, _| {
            Ok(poisson_tv_v_update(xi, t, lambda, c).max(POSITIVITY_FLOOR))
        })?;
    let obj_nonadditive = bregman_objective(HamiltonianKind::PoissonExp, x, &v, t, cfg.alpha * tv_eval(&v))?;
    Ok(SolveReport {
        v_bar: v,
        w,
        y,
        obj_nonadditive,
        obj_additive: None,
        iterations: primal_residuals.len(),
        primal_residuals,
        dual_residuals,
        converged,
        max_tv_gap,
    })
}

/// `min_v t·Σ(log vᵢ + xᵢ/(t·vᵢ)) + α·TV(log v)`, solved in `u = log v`;
/// returns `v̄ = exp(w̄)`.
pub fn mult_logtv_denoise(x: &Image, cfg: &AdmmConfig) -> Result<SolveReport> {
    check_data(x, HamiltonianKind::BurgNegLog, cfg)?;
    let (t, lambda) = (cfg.t, cfg.lambda);
    let u0 = x.map(|e| (e / t).max(POSITIVITY_FLOOR).ln());
    let (newton_tol, newton_max) = (cfg.newton_tol, cfg.newton_max_iter);
    let SplitRun { w, y, primal_residuals, dual_residuals, converged, max_tv_gap, .. } =
        split_tv_loop(x, cfg, u0, |_, xi, c, prev| {
            mult_logtv_u_update(xi, t, lambda, c, prev, newton_tol, newton_max)
        })?;
    let v = w.map(f64::exp);
    let obj_nonadditive = bregman_objective(HamiltonianKind::BurgNegLog, x, &v, t, cfg.alpha * tv_eval(&w))?;
    Ok(SolveReport {
        v_bar: v,
        w,
        y,
        obj_nonadditive,
        obj_additive: None,
        iterations: primal_residuals.len(),
        primal_residuals,
        dual_residuals,
        converged,
        max_tv_gap,
    })
}

/// Optimality identities linking the additive minimizer to its dual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityCheck {
    /// `‖x − ū − t·∇H(p̄)‖` with `ū = x − t·v̄`, `p̄ = ∇H*(v̄)`.
    pub stationarity: f64,
    /// `|J(w̄) + J*(p̄) − ⟨p̄, w̄⟩|` at the split variable `w̄ ≈ ū`.
    pub complementarity: f64,
}

/// Checks the primal–dual optimality system at a Bregman-model solution.
pub fn duality_check(x: &Image, kind: HamiltonianKind, report: &SolveReport, t: f64, alpha: f64) -> Result<DualityCheck> {
    let ham = Hamiltonian::new(kind, x.len())?;
    let u_bar = x.zip_map(&report.v_bar, |e, v| e - t * v);
    let p_bar = ham.grad_h_star(report.v_bar.as_slice())?;
    let back = ham.grad_h(&p_bar)?;
    let stationarity = x
        .as_slice()
        .iter()
        .zip(u_bar.as_slice())
        .zip(&back)
        .map(|((xi, ui), gi)| (xi - ui - t * gi).powi(2))
        .sum::<f64>()
        .sqrt();
    let p_img = x.with_data(p_bar);
    let ball = MeyerBall::new(alpha);
    let complementarity = (ball.value_at_split(&report.w) + ball.conjugate(&p_img) - p_img.dot(&report.w)).abs();
    Ok(DualityCheck { stationarity, complementarity })
}

/// `H*` value as an extended real, for callers that evaluate objectives.
pub fn h_star_total(kind: HamiltonianKind, v: &Image) -> Result<ExtReal> {
    Hamiltonian::new(kind, v.len())?.h_star(v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn poisson_newton_examples() {
        let v = poisson_v_update(1.0, 1.0, 1.0, 0.3, 1e-14, 50).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = poisson_v_update(0.0, 1.0, 1.0, 5.0, 1e-14, 50).unwrap();
        let oracle = bisect(|v| v + v.ln(), 1e-3, 1.0);
        assert!((oracle - 0.567143290409784).abs() < 1e-12);
        assert!((v - oracle).abs() < 1e-10);
    }

    #[test]
    fn poisson_newton_extreme_rhs() {
        for (r, t, lambda) in [(-30.0, 2.0, 1.0), (500.0, 0.5, 3.0), (1e-3, 40.0, 0.01), (-5.0, 100.0, 10.0)] {
            let v = poisson_v_update(r, t, lambda, 1.0, 1e-14, 60).unwrap();
            let g = |v: f64| t * v.ln() + lambda * t * t * v - lambda * t * r;
            let oracle = (bisect(|u| g(u.exp()), -800.0, 10.0)).exp();
            assert!((v - oracle).abs() <= 1e-10 * oracle.max(1.0), "r={r}: {v} vs {oracle}");
        }
    }

    #[test]
    fn reference_closed_forms() {
        let v = poisson_tv_v_update(2.0, 1.0, 2.0, 1.0);
        assert!((v - (0.25 + 1.0625f64.sqrt())).abs() < 1e-15);
        let stationarity = 1.0 - 2.0 / v + 2.0 * (v - 1.0);
        assert!(stationarity.abs() < 1e-12);
        // x = 0 with w − y = t/λ + 2: s = 1, v = 2s.
        assert_eq!(poisson_tv_v_update(0.0, 1.0, 2.0, 0.5 + 2.0), 2.0);
        assert_eq!(poisson_tv_v_update(0.0, 1.0, 2.0, -4.0), 0.0);
        assert!((burg_v_update(0.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn logtv_newton_examples() {
        // λ = 0 decouples: t = x·e^{−u}.
        let u = mult_logtv_u_update(2.0, 2.0, 0.0, 5.0, 0.0, 1e-14, 50).unwrap();
        assert!(u.abs() < 1e-12);
        // 1 + u − e^{−u} is increasing with its root at 0.
        let u = mult_logtv_u_update(1.0, 1.0, 1.0, 0.0, 0.7, 1e-14, 50).unwrap();
        let oracle = bisect(|u| 1.0 + u - (-u).exp(), -2.0, 2.0);
        assert!(oracle.abs() < 1e-12);
        assert!((u - oracle).abs() < 1e-10);
        for (x, t, lambda, c) in [(3.0, 2.0, 0.5, -1.0), (0.01, 5.0, 4.0, 3.0), (50.0, 1.0, 0.1, 0.0)] {
            let u = mult_logtv_u_update(x, t, lambda, c, 0.0, 1e-14, 50).unwrap();
            let oracle = bisect(|u| t + lambda * (u - c) - x * (-u).exp(), -50.0, 50.0);
            assert!((u - oracle).abs() < 1e-10, "{u} vs {oracle}");
        }
        assert!(mult_logtv_u_update(0.0, 1.0, 1.0, 0.0, 0.0, 1e-14, 50).is_err());
    }

    #[test]
    fn newton_failure_is_reported() {
        let err = poisson_v_update(3.0, 1.0, 1.0, 0.5, 1e-300, 2).unwrap_err();
        assert!(err.0.contains("no convergence"));
    }

    #[test]
    fn model_names_round_trip() {
        for m in Model::ALL {
            assert_eq!(m.name().parse::<Model>().unwrap(), m);
        }
        assert!("gaussian".parse::<Model>().is_err());
    }

    #[test]
    fn single_pixel_fixed_points() {
        let cfg = AdmmConfig::new(1.0, 0.5);
        let r = poisson_logtv_denoise(&Image::filled(1, 1, 3.0), &cfg).unwrap();
        assert!(r.converged);
        assert!((r.v_bar.as_slice()[0] - 3.0).abs() < 1e-6);
        let r = mult_invtv_denoise(&Image::filled(1, 1, 5.0), &cfg).unwrap();
        assert!((r.v_bar.as_slice()[0] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn constant_images_are_fixed_points() {
        let t = 4.0;
        let c = 1.7;
        let x = Image::filled(3, 5, t * c);
        for model in Model::ALL {
            let r = model.solve(&x, &AdmmConfig::new(t, 2.0)).unwrap();
            assert!(r.v_bar.max_abs_diff(&Image::filled(3, 5, c)) < 1e-6, "{model}");
            assert_eq!(r.primal_residuals.len(), r.iterations);
            assert_eq!(r.dual_residuals.len(), r.iterations);
        }
    }

    #[test]
    fn infeasible_inputs() {
        let cfg = AdmmConfig::new(1.0, 1.0);
        let neg = Image::row(&[1.0, -1.0]).unwrap();
        assert!(matches!(poisson_logtv_denoise(&neg, &cfg), Err(Error::Infeasible(_))));
        assert!(matches!(poisson_tv_denoise(&neg, &cfg), Err(Error::Infeasible(_))));
        let zero = Image::zeros(2, 2);
        assert!(matches!(poisson_logtv_denoise(&zero, &cfg), Err(Error::Infeasible(_))));
        let with_zero = Image::row(&[0.0, 2.0]).unwrap();
        assert!(matches!(mult_invtv_denoise(&with_zero, &cfg), Err(Error::Infeasible(_))));
        assert!(matches!(mult_logtv_denoise(&with_zero, &cfg), Err(Error::Infeasible(_))));
        let mut bad = cfg;
        bad.lambda = 0.0;
        assert!(matches!(poisson_logtv_denoise(&Image::filled(1, 1, 1.0), &bad), Err(Error::Config(_))));
    }

    #[test]
    fn zero_count_pixels_stay_positive() {
        let x = Image::row(&[0.0, 3.0, 0.0, 5.0]).unwrap();
        for model in [Model::PoissonLogTv, Model::PoissonTv] {
            let r = model.solve(&x, &AdmmConfig::new(1.0, 0.4)).unwrap();
            assert!(r.v_bar.min() > 0.0, "{model}: {:?}", r.v_bar);
            assert!(r.obj_nonadditive.is_finite());
        }
    }

    #[test]
    fn solves_are_deterministic() {
        let x = Image::from_fn(6, 7, |i, j| 1.0 + ((i * 5 + j * 3) % 4) as f64);
        for model in Model::ALL {
            let cfg = AdmmConfig::new(2.0, 0.3);
            let a = model.solve(&x, &cfg).unwrap();
            let b = model.solve(&x, &cfg).unwrap();
            assert_eq!(a.v_bar, b.v_bar);
            assert_eq!(a.primal_residuals, b.primal_residuals);
            assert_eq!(a.obj_nonadditive.to_bits(), b.obj_nonadditive.to_bits());
        }
    }

    /// Exact 1×2 minimizer of `J(x − t·v) + t·H*(v)` with `J` the Meyer-ball
    /// indicator: `w = x − t·v` must be `(s, −s)` with `|s| ≤ α`.
    fn two_pixel_exact(x: [f64; 2], t: f64, alpha: f64) -> [f64; 2] {
        let gap = x[0] - x[1];
        if gap.abs() <= 2.0 * alpha {
            let m = 0.5 * (x[0] + x[1]) / t;
            [m, m]
        } else {
            let s = alpha * gap.signum();
            [(x[0] - s) / t, (x[1] + s) / t]
        }
    }

    #[test]
    fn two_pixel_problems_match_closed_form() {
        for kind in [HamiltonianKind::Quadratic, HamiltonianKind::PoissonExp, HamiltonianKind::BurgNegLog] {
            for (x, t, alpha) in [([5.0, 1.0], 1.0, 1.0), ([3.0, 2.0], 2.0, 1.0), ([0.5, 7.0], 3.0, 0.7)] {
                let img = Image::row(&x).unwrap();
                let r = solve_additive(&img, kind, &mut MeyerBall::new(alpha), &AdmmConfig::precise(t, alpha), None).unwrap();
                let exact = two_pixel_exact(x, t, alpha);
                let err = (r.v_bar.as_slice()[0] - exact[0]).abs().max((r.v_bar.as_slice()[1] - exact[1]).abs());
                assert!(r.converged, "{kind:?} {x:?}");
                assert!(err < 1e-10, "{kind:?} {x:?}: err {err}, iters {}", r.iterations);
            }
        }
    }
}
