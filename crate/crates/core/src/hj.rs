//! Value functions of the two variational models and the Hamilton–Jacobi
//! checks built on them.
//!
//! `S(x,t) = min_v J(x − t·v) + t·H*(v)` is always evaluated through the
//! convex model. `F(x,t)` is the non-convex minimal value; it is computed
//! directly at the recovered minimizer and through `F = t·H*(x/t) − S`. All
//! derivatives are central differences over independent solves.

use crate::admm::{solve_additive, AdmmConfig, MeyerBall, Penalty, SolveReport};
use crate::convex::{Hamiltonian, HamiltonianKind};
use crate::error::{Error, Result};
use crate::image::Image;

/// The `J` of the convex model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    /// Indicator of the Meyer ball of radius `alpha` (conjugate of `α·TV`).
    MeyerBall,
    /// `½‖w‖²`, self-conjugate. Analytic oracle only.
    HalfSquare,
}

/// `J = ½‖·‖²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HalfSquare;

impl Penalty for HalfSquare {
    fn prox(&mut self, b: &Image, lambda: f64, _cfg: &AdmmConfig, _inner_tol: f64) -> Result<Image> {
        Ok(b.scale(lambda / (1.0 + lambda)))
    }

    fn value_at_split(&self, w: &Image) -> f64 {
        0.5 * w.dot(w)
    }

    fn conjugate(&self, p: &Image) -> f64 {
        0.5 * p.dot(p)
    }
}

/// A value-function evaluator: Hamiltonian, regularizer and solver settings.
#[derive(Clone, Copy, Debug)]
pub struct HjProblem {
    pub kind: HamiltonianKind,
    pub regularizer: Regularizer,
    pub alpha: f64,
    /// Solver settings; `t` and `alpha` are overridden per call.
    pub cfg: AdmmConfig,
    /// Allowed `|F_direct − F_identity| / (1 + |t·H*(x/t)|)`.
    pub identity_tol: f64,
}

/// Both routes to `F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FValue {
    /// `t·D_{H*}(x/t, v̄) + J*(∇H*(v̄))`.
    pub direct: f64,
    /// `t·H*(x/t) − S(x,t)`.
    pub identity: f64,
}

/// Residuals of the `F` equation plus the `F`-based minimizer.
#[derive(Clone, Debug)]
pub struct FPdeCheck {
    /// `|∂F/∂t + H(∇H*(x/t)) − H(∇H*(x/t) − ∇F)|`.
    pub general: f64,
    /// The same quantity in the closed form specific to the Hamiltonian
    /// (`None` for the quadratic one).
    pub specialized: Option<f64>,
    /// `∇H(∇H*(x/t) − ∇F)`.
    pub recovered: Image,
}

/// Values and finite-difference derivatives of `S` and `F` at one point.
#[derive(Clone, Debug)]
pub struct HjSample {
    pub x: Image,
    pub t: f64,
    pub s: f64,
    pub grad_x_s: Image,
    pub ds_dt: f64,
    pub f: f64,
    pub grad_x_f: Image,
    pub df_dt: f64,
    pub pde_residual_s: f64,
    pub pde_residual_f: f64,
    pub fd_step: f64,
    /// ADMM minimizer at `(x, t)`.
    pub v_bar: Image,
    /// `∇H(∇ₓS)`.
    pub recovered_from_s: Image,
    /// `∇H(∇H*(x/t) − ∇ₓF)`.
    pub recovered_from_f: Image,
}

/// Central-difference data of `S` around `(x, t)`.
#[derive(Clone, Debug)]
struct Stencil {
    center: SolveReport,
    s: f64,
    grad_x: Vec<f64>,
    dt: f64,
}

impl HjProblem {
    /// Meyer-ball regularizer with tight solver tolerances.
    pub fn new(kind: HamiltonianKind, alpha: f64) -> Self {
        HjProblem {
            kind,
            regularizer: Regularizer::MeyerBall,
            alpha,
            cfg: AdmmConfig::precise(1.0, alpha),
            identity_tol: 1e-6,
        }
    }

    /// `H = ½‖p‖²`, `J = ½‖w‖²`: `S = ‖x‖²/(2(1+t))`, `v̄ = x/(1+t)`.
    pub fn quadratic_test() -> Self {
        HjProblem {
            kind: HamiltonianKind::Quadratic,
            regularizer: Regularizer::HalfSquare,
            alpha: 1.0,
            cfg: AdmmConfig::precise(1.0, 1.0),
            identity_tol: 1e-6,
        }
    }

    fn config(&self, t: f64) -> AdmmConfig {
        AdmmConfig {
            t,
            alpha: self.alpha,
            ..self.cfg
        }
    }

    /// Solves the convex model at `(x, t)`; errors if ADMM does not converge.
    pub fn solve(&self, x: &Image, t: f64, warm: Option<&SolveReport>) -> Result<SolveReport> {
        let cfg = self.config(t);
        let report = match self.regularizer {
            Regularizer::MeyerBall => solve_additive(x, self.kind, &mut MeyerBall::new(self.alpha), &cfg, warm)?,
            Regularizer::HalfSquare => solve_additive(x, self.kind, &mut HalfSquare, &cfg, warm)?,
        };
        if report.converged {
            Ok(report)
        } else {
            Err(Error::NotConverged { report: Box::new(report) })
        }
    }

    /// `S` at a solved point.
    fn s_value(&self, x: &Image, t: f64, report: &SolveReport) -> Result<f64> {
        let h_star = Hamiltonian::new(self.kind, x.len())?
            .h_star(report.v_bar.as_slice())?
            .require("H*(v̄)")?;
        let j = match self.regularizer {
            Regularizer::MeyerBall => 0.0,
            Regularizer::HalfSquare => {
                let u = x.zip_map(&report.v_bar, |xi, vi| xi - t * vi);
                HalfSquare.value_at_split(&u)
            }
        };
        Ok(j + t * h_star)
    }

    fn j_conjugate(&self, p: &Image) -> f64 {
        match self.regularizer {
            Regularizer::MeyerBall => MeyerBall::new(self.alpha).conjugate(p),
            Regularizer::HalfSquare => HalfSquare.conjugate(p),
        }
    }

    /// `t·H*(x/t)`.
    pub fn scaled_conjugate(&self, x: &Image, t: f64) -> Result<f64> {
        let xs: Vec<f64> = x.as_slice().iter().map(|v| v / t).collect();
        Ok(t * Hamiltonian::new(self.kind, x.len())?.h_star(&xs)?.require("H*(x/t)")?)
    }

    pub fn eval_s(&self, x: &Image, t: f64) -> Result<f64> {
        let report = self.solve(x, t, None)?;
        self.s_value(x, t, &report)
    }

    /// `F` by both routes; errors if they disagree beyond `identity_tol`.
    pub fn eval_f(&self, x: &Image, t: f64) -> Result<FValue> {
        self.require_interior(x, t)?;
        let report = self.solve(x, t, None)?;
        let s = self.s_value(x, t, &report)?;
        self.f_value(x, t, s, &report)
    }

    fn f_value(&self, x: &Image, t: f64, s: f64, report: &SolveReport) -> Result<FValue> {
        let ham = Hamiltonian::new(self.kind, x.len())?;
        let xs: Vec<f64> = x.as_slice().iter().map(|v| v / t).collect();
        let p = x.with_data(ham.grad_h_star(report.v_bar.as_slice())?);
        let direct = t * ham.bregman_primal(&xs, report.v_bar.as_slice())? + self.j_conjugate(&p);
        let total = self.scaled_conjugate(x, t)?;
        let identity = total - s;
        if (direct - identity).abs() > self.identity_tol * (1.0 + total.abs()) {
            return Err(Error::Identity(format!(
                "F direct {direct} vs t·H*(x/t) − S = {identity}"
            )));
        }
        Ok(FValue { direct, identity })
    }

    /// `|S + F_direct − t·H*(x/t)|`.
    pub fn moreau_identity_check(&self, x: &Image, t: f64) -> Result<f64> {
        let report = self.solve(x, t, None)?;
        let s = self.s_value(x, t, &report)?;
        let ham = Hamiltonian::new(self.kind, x.len())?;
        let xs: Vec<f64> = x.as_slice().iter().map(|v| v / t).collect();
        let p = x.with_data(ham.grad_h_star(report.v_bar.as_slice())?);
        let f = t * ham.bregman_primal(&xs, report.v_bar.as_slice())? + self.j_conjugate(&p);
        Ok((s + f - self.scaled_conjugate(x, t)?).abs())
    }

    fn require_interior(&self, x: &Image, t: f64) -> Result<()> {
        match x.as_slice().iter().position(|&v| !self.kind.in_interior_dom_h_star(v / t)) {
            Some(k) => Err(Error::Domain(format!("x/t leaves int dom H* at pixel {k}"))),
            None => Ok(()),
        }
    }

    fn stencil(&self, x: &Image, t: f64, h: f64) -> Result<Stencil> {
        if !(h > 0.0) || !(t > h) {
            return Err(Error::Config(format!("need 0 < fd_step < t, got fd_step {h}, t {t}")));
        }
        let center = self.solve(x, t, None)?;
        let s = self.s_value(x, t, &center)?;
        let eval = |xp: &Image, tp: f64| -> Result<f64> {
            let r = self.solve(xp, tp, Some(&center))?;
            self.s_value(xp, tp, &r)
        };
        let mut grad_x = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = x.clone();
            minus.as_mut_slice()[i] -= h;
            grad_x.push((eval(&plus, t)? - eval(&minus, t)?) / (2.0 * h));
        }
        let dt = (eval(x, t + h)? - eval(x, t - h)?) / (2.0 * h);
        Ok(Stencil { center, s, grad_x, dt })
    }

    /// `∇H(∇ₓS)` with `∇ₓS` by central differences.
    pub fn recover_minimizer_from_s(&self, x: &Image, t: f64, fd_step: f64) -> Result<Image> {
        let st = self.stencil(x, t, fd_step)?;
        let ham = Hamiltonian::new(self.kind, x.len())?;
        Ok(x.with_data(ham.grad_h(&st.grad_x)?))
    }

    /// `|∂S/∂t + H(∇ₓS)|` by central differences.
    pub fn pde_residual_s(&self, x: &Image, t: f64, fd_step: f64) -> Result<f64> {
        let st = self.stencil(x, t, fd_step)?;
        self.s_residual(&st)
    }

    fn s_residual(&self, st: &Stencil) -> Result<f64> {
        let h = Hamiltonian::new(self.kind, st.grad_x.len())?
            .h(&st.grad_x)?
            .require("H(∇S)")?;
        Ok((st.dt + h).abs())
    }

    /// Differentiates `F = t·H*(x/t) − S` with the stencil of `S`. The known
    /// part `t·H*(x/t)` costs no solves, so it gets a fourth-order stencil and
    /// contributes `O(h⁴)` rather than `O(h²)` to `∇ₓF`.
    fn f_derivatives(&self, x: &Image, t: f64, h: f64, st: &Stencil) -> Result<(Vec<f64>, f64)> {
        let d4 = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
            Ok((8.0 * (f(h)? - f(-h)?) - (f(2.0 * h)? - f(-2.0 * h)?)) / (12.0 * h))
        };
        let mut grad = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let shifted = |e: f64| {
                let mut xp = x.clone();
                xp.as_mut_slice()[i] += e;
                self.scaled_conjugate(&xp, t)
            };
            grad.push(d4(&shifted)? - st.grad_x[i]);
        }
        let known_t = d4(&|e| self.scaled_conjugate(x, t + e))?;
        Ok((grad, known_t - st.dt))
    }

    fn f_check(&self, x: &Image, t: f64, grad_f: &[f64], df_dt: f64) -> Result<FPdeCheck> {
        let ham = Hamiltonian::new(self.kind, x.len())?;
        let xs: Vec<f64> = x.as_slice().iter().map(|v| v / t).collect();
        let p0 = ham.grad_h_star(&xs)?;
        let shifted: Vec<f64> = p0.iter().zip(grad_f).map(|(p, g)| p - g).collect();
        let h0 = ham.h(&p0)?.require("H(∇H*(x/t))")?;
        let h1 = ham.h(&shifted)?.require("H(∇H*(x/t) − ∇F)")?;
        let general = (df_dt + h0 - h1).abs();
        let xd = x.as_slice();
        let specialized = match self.kind {
            HamiltonianKind::Quadratic => None,
            HamiltonianKind::PoissonExp => {
                let sum: f64 = xd.iter().zip(grad_f).map(|(xi, g)| xi * ((-g).exp() - 1.0)).sum();
                Some((df_dt - sum / t).abs())
            }
            HamiltonianKind::BurgNegLog => {
                let sum: f64 = xd.iter().zip(grad_f).map(|(xi, g)| (xi / t * g).ln_1p()).sum();
                Some((df_dt + sum).abs())
            }
        };
        let recovered = x.with_data(ham.grad_h(&shifted)?);
        Ok(FPdeCheck { general, specialized, recovered })
    }

    /// `F`-equation residuals (general and specialized) and the `F`-based
    /// minimizer, from central differences.
    pub fn pde_residual_f(&self, x: &Image, t: f64, fd_step: f64) -> Result<FPdeCheck> {
        self.require_interior(x, t)?;
        let st = self.stencil(x, t, fd_step)?;
        let (grad, dt) = self.f_derivatives(x, t, fd_step, &st)?;
        self.f_check(x, t, &grad, dt)
    }

    /// Everything at once, from a single stencil.
    pub fn sample(&self, x: &Image, t: f64, fd_step: f64) -> Result<HjSample> {
        self.require_interior(x, t)?;
        let st = self.stencil(x, t, fd_step)?;
        let f = self.f_value(x, t, st.s, &st.center)?;
        let (grad_f, df_dt) = self.f_derivatives(x, t, fd_step, &st)?;
        let fc = self.f_check(x, t, &grad_f, df_dt)?;
        let ham = Hamiltonian::new(self.kind, x.len())?;
        Ok(HjSample {
            x: x.clone(),
            t,
            s: st.s,
            grad_x_s: x.with_data(st.grad_x.clone()),
            ds_dt: st.dt,
            f: f.direct,
            grad_x_f: x.with_data(grad_f),
            df_dt,
            pde_residual_s: self.s_residual(&st)?,
            pde_residual_f: fc.general,
            fd_step,
            recovered_from_s: x.with_data(ham.grad_h(&st.grad_x)?),
            recovered_from_f: fc.recovered,
            v_bar: st.center.v_bar,
        })
    }
}

pub fn eval_s(x: &Image, t: f64, kind: HamiltonianKind, alpha: f64) -> Result<f64> {
    HjProblem::new(kind, alpha).eval_s(x, t)
}

pub fn eval_f(x: &Image, t: f64, kind: HamiltonianKind, alpha: f64) -> Result<FValue> {
    HjProblem::new(kind, alpha).eval_f(x, t)
}

/// `‖v̄(t_k·v0 + d, t_k) − v0‖` along the schedule, for the Meyer-ball model.
pub fn asymptotic_check(
    v0: &Image,
    d: &Image,
    t_schedule: &[f64],
    kind: HamiltonianKind,
    alpha: f64,
    cfg: &AdmmConfig,
) -> Result<Vec<f64>> {
    v0.same_shape(d)?;
    if let Some(k) = v0.as_slice().iter().position(|&v| !kind.in_interior_dom_h_star(v)) {
        return Err(Error::Domain(format!("v0 leaves int dom H* at pixel {k}")));
    }
    if t_schedule.windows(2).any(|w| !(w[1] > w[0])) || t_schedule.first().is_some_and(|&t| !(t > 0.0)) {
        return Err(Error::Config("t schedule must be positive and increasing".into()));
    }
    let mut errors = Vec::with_capacity(t_schedule.len());
    for &t in t_schedule {
        let x = v0.zip_map(d, |v, e| t * v + e);
        let run = AdmmConfig { t, alpha, ..*cfg };
        let report = solve_additive(&x, kind, &mut MeyerBall::new(alpha), &run, None)?;
        if !report.converged {
            return Err(Error::NotConverged { report: Box::new(report) });
        }
        errors.push(report.v_bar.dist(v0));
    }
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: &[f64]) -> Image {
        Image::row(v).unwrap()
    }

    /// `min_{|s| ≤ α} t·[H*((x1 − s)/t) + H*((x2 + s)/t)]` by grid refinement:
    /// on 1×2 grids the Meyer ball is `{(s, −s) : |s| ≤ α}`.
    fn s_grid_1x2(kind: HamiltonianKind, x: [f64; 2], t: f64, alpha: f64) -> f64 {
        let obj = |s: f64| {
            let a = kind.h_star((x[0] - s) / t);
            let b = kind.h_star((x[1] + s) / t);
            match (a.finite(), b.finite()) {
                (Some(a), Some(b)) => t * (a + b),
                _ => f64::INFINITY,
            }
        };
        let (mut lo, mut hi) = (-alpha, alpha);
        let mut best = (f64::INFINITY, 0.0);
        for _ in 0..8 {
            let step = (hi - lo) / 200.0;
            for k in 0..=200 {
                let s = lo + step * k as f64;
                let v = obj(s);
                if v < best.0 {
                    best = (v, s);
                }
            }
            lo = (best.1 - 2.0 * step).max(-alpha);
            hi = (best.1 + 2.0 * step).min(alpha);
        }
        best.0
    }

    #[test]
    fn quadratic_case_is_analytic() {
        let p = HjProblem::quadratic_test();
        let (x, t) = (row(&[1.7]), 2.0);
        let s = p.eval_s(&x, t).unwrap();
        assert!((s - 1.7f64.powi(2) / (2.0 * 3.0)).abs() < 1e-10);
        let f = p.eval_f(&x, t).unwrap();
        // t·H*(x/t) − S = x²/(2t) − x²/(2(1+t)).
        let exact_f = 1.7f64.powi(2) / (2.0 * t * 3.0);
        assert!((f.direct - exact_f).abs() < 1e-10 && (f.identity - exact_f).abs() < 1e-10);
        let v = p.recover_minimizer_from_s(&x, t, 1e-3).unwrap();
        assert!((v.as_slice()[0] - 1.7 / 3.0).abs() < 1e-7);
        assert!(p.pde_residual_s(&x, t, 1e-3).unwrap() <= 1e-6);
        let fc = p.pde_residual_f(&x, t, 1e-3).unwrap();
        assert!(fc.general <= 1e-6 && fc.specialized.is_none());
        assert!(p.moreau_identity_check(&x, t).unwrap() < 1e-10);
    }

    #[test]
    fn quadratic_s_matches_grid_search() {
        let (x, t) = (-0.9, 1.3);
        let p = HjProblem::quadratic_test();
        let grid = (0..=400_000)
            .map(|k| -2.0 + 4.0 * k as f64 / 400_000.0)
            .map(|v| 0.5 * (x - t * v) * (x - t * v) + 0.5 * t * v * v)
            .fold(f64::INFINITY, f64::min);
        assert!((p.eval_s(&row(&[x]), t).unwrap() - grid).abs() < 1e-8);
    }

    #[test]
    fn constant_poisson_ray() {
        let c = [0.7f64, 0.7, 0.7];
        let t = 3.0;
        let x = Image::filled(1, 3, t * 0.7);
        let p = HjProblem::new(HamiltonianKind::PoissonExp, 0.5);
        let exact: f64 = t * c.iter().map(|v| v * v.ln() - v).sum::<f64>();
        assert!((p.eval_s(&x, t).unwrap() - exact).abs() < 1e-9);
        let f = p.eval_f(&x, t).unwrap();
        assert!(f.direct.abs() < 1e-9 && f.identity.abs() < 1e-9);
        assert!(p.moreau_identity_check(&x, t).unwrap() < 1e-8);
        let sample = p.sample(&x, t, 1e-3).unwrap();
        assert!(sample.grad_x_f.as_slice().iter().all(|g| g.abs() < 1e-6));
        assert!(sample.df_dt.abs() < 1e-6);
        assert!(sample.recovered_from_s.max_abs_diff(&Image::filled(1, 3, 0.7)) < 1e-5);
    }

    #[test]
    fn two_pixel_s_matches_grid() {
        for (kind, x, t, alpha) in [
            (HamiltonianKind::PoissonExp, [3.0, 1.0], 1.5, 0.4),
            (HamiltonianKind::PoissonExp, [2.0, 1.6], 1.0, 0.5),
            (HamiltonianKind::BurgNegLog, [4.0, 0.5], 2.0, 0.3),
            (HamiltonianKind::Quadratic, [-1.0, 2.0], 0.7, 1.2),
        ] {
            let p = HjProblem::new(kind, alpha);
            let s = p.eval_s(&row(&x), t).unwrap();
            let grid = s_grid_1x2(kind, x, t, alpha);
            assert!((s - grid).abs() < 1e-8, "{kind:?}: {s} vs {grid}");
            let f = p.eval_f(&row(&x), t).unwrap();
            assert!((f.direct - f.identity).abs() < 1e-8);
        }
    }

    #[test]
    fn pde_residuals_shrink_quadratically() {
        let p = HjProblem::new(HamiltonianKind::PoissonExp, 0.3);
        let x = row(&[2.5, 1.2]);
        let r: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| p.pde_residual_s(&x, 2.0, h).unwrap()).collect();
        assert!(r[0] <= 1e-2);
        for w in r.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..=5.0).contains(&ratio), "{r:?}");
        }
    }

    #[test]
    fn f_forms_agree() {
        for kind in [HamiltonianKind::PoissonExp, HamiltonianKind::BurgNegLog] {
            let p = HjProblem::new(kind, 0.25);
            let x = row(&[1.4, 3.1]);
            let fc = p.pde_residual_f(&x, 1.5, 1e-3).unwrap();
            let sp = fc.specialized.unwrap();
            assert!((fc.general - sp).abs() <= 1e-9, "{kind:?}: {} vs {sp}", fc.general);
            assert!(fc.general <= 1e-4);
            let s = p.sample(&x, 1.5, 1e-3).unwrap();
            assert!(s.recovered_from_s.max_abs_diff(&s.recovered_from_f) <= 1e-6);
            assert!(s.recovered_from_s.max_abs_diff(&s.v_bar) <= 1e-2);
        }
    }

    #[test]
    fn interior_and_step_preconditions() {
        let p = HjProblem::new(HamiltonianKind::PoissonExp, 0.5);
        assert!(matches!(p.eval_f(&row(&[0.0, 1.0]), 1.0), Err(Error::Domain(_))));
        assert!(matches!(p.pde_residual_s(&row(&[1.0, 1.0]), 0.5, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn asymptotic_errors_vanish() {
        let cfg = AdmmConfig::precise(1.0, 1.0);
        let v0 = row(&[1.0, 2.0]);
        let zero = Image::zeros(1, 2);
        for kind in [HamiltonianKind::PoissonExp, HamiltonianKind::BurgNegLog] {
            let e = asymptotic_check(&v0, &zero, &[1.0, 10.0, 100.0], kind, 1.0, &cfg).unwrap();
            // With d = 0 the pair stays separated by more than 2α/t once t > 2.
            assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
            assert!((e[2] - 2f64.sqrt() * 0.01).abs() < 1e-8);
            let flat = asymptotic_check(&Image::filled(1, 2, 1.5), &zero, &[1.0, 10.0], kind, 1.0, &cfg).unwrap();
            assert!(flat.iter().all(|v| *v < 1e-9));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn s_is_midpoint_convex(
            a in prop::array::uniform2(0.3..4.0f64), ta in 0.5..3.0f64,
            b in prop::array::uniform2(0.3..4.0f64), tb in 0.5..3.0f64,
        ) {
            let p = HjProblem::new(HamiltonianKind::PoissonExp, 0.4);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let sa = p.eval_s(&row(&a), ta).unwrap();
            let sb = p.eval_s(&row(&b), tb).unwrap();
            let sm = p.eval_s(&row(&mid), (ta + tb) / 2.0).unwrap();
            prop_assert!(sm <= 0.5 * (sa + sb) + 1e-6);
        }
    }
}
