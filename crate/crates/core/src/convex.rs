//! Legendre pairs `(H, H*)` and their Bregman distances.
//!
//! Three separable Hamiltonians are supported:
//!
//! | kind          | `H(p)`                      | `H*(y)`                  | `D_{H*}`         |
//! |---------------|-----------------------------|--------------------------|------------------|
//! | `Quadratic`   | `½‖p‖²`                     | `½‖y‖²`                  | squared distance |
//! | `PoissonExp`  | `Σ exp(pᵢ)`                 | `Σ yᵢ log yᵢ − yᵢ`, y ≥ 0 | Kullback–Leibler |
//! | `BurgNegLog`  | `Σ −1 − log(−pᵢ)`, p < 0     | `−Σ log yᵢ`, y > 0        | Itakura–Saito    |
//!
//! Values outside a domain are reported as [`ExtReal::PosInf`]; gradients at
//! or beyond the boundary are domain errors.

use std::fmt;

use crate::error::{Error, Result};
use crate::image::dot;

/// Coordinates closer than this to an open domain boundary count as outside.
pub const DOMAIN_EPS: f64 = 1e-12;

/// A value in `ℝ ∪ {+∞}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Unwraps the finite value or fails with a domain error naming `what`.
    pub fn require(self, what: &str) -> Result<f64> {
        self.finite()
            .ok_or_else(|| Error::Domain(format!("{what} is +inf")))
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HamiltonianKind {
    Quadratic,
    PoissonExp,
    BurgNegLog,
}

impl HamiltonianKind {
    pub fn name(self) -> &'static str {
        match self {
            HamiltonianKind::Quadratic => "quadratic",
            HamiltonianKind::PoissonExp => "poisson_exp",
            HamiltonianKind::BurgNegLog => "burg_neglog",
        }
    }

    /// `H` at one coordinate.
    pub fn h(self, p: f64) -> ExtReal {
        match self {
            HamiltonianKind::Quadratic => ExtReal::Finite(0.5 * p * p),
            HamiltonianKind::PoissonExp => {
                let e = p.exp();
                if e.is_finite() {
                    ExtReal::Finite(e)
                } else {
                    ExtReal::PosInf
                }
            }
            HamiltonianKind::BurgNegLog => {
                if p < 0.0 {
                    ExtReal::Finite(-1.0 - (-p).ln())
                } else {
                    ExtReal::PosInf
                }
            }
        }
    }

    /// `H*` at one coordinate, with `0·log 0 = 0`.
    pub fn h_star(self, y: f64) -> ExtReal {
        match self {
            HamiltonianKind::Quadratic => ExtReal::Finite(0.5 * y * y),
            HamiltonianKind::PoissonExp => {
                if y > 0.0 {
                    ExtReal::Finite(y * y.ln() - y)
                } else if y == 0.0 {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                }
            }
            HamiltonianKind::BurgNegLog => {
                if y > 0.0 {
                    ExtReal::Finite(-y.ln())
                } else {
                    ExtReal::PosInf
                }
            }
        }
    }

    pub fn in_interior_dom_h(self, p: f64) -> bool {
        match self {
            HamiltonianKind::Quadratic | HamiltonianKind::PoissonExp => p.is_finite(),
            HamiltonianKind::BurgNegLog => p < -DOMAIN_EPS,
        }
    }

    pub fn in_interior_dom_h_star(self, y: f64) -> bool {
        match self {
            HamiltonianKind::Quadratic => y.is_finite(),
            HamiltonianKind::PoissonExp | HamiltonianKind::BurgNegLog => y > DOMAIN_EPS,
        }
    }

    /// Closure of `dom H*` (where the Bregman distance's first argument may live).
    pub fn in_closed_dom_h_star(self, y: f64) -> bool {
        match self {
            HamiltonianKind::Quadratic => y.is_finite(),
            HamiltonianKind::PoissonExp => y >= 0.0,
            HamiltonianKind::BurgNegLog => y > 0.0,
        }
    }

    /// `∇H` at one coordinate; `p` must be interior.
    pub fn grad_h(self, p: f64) -> Result<f64> {
        if !self.in_interior_dom_h(p) {
            return Err(Error::Domain(format!(
                "{}: grad H needs p in int dom H, got {p}",
                self.name()
            )));
        }
        Ok(match self {
            HamiltonianKind::Quadratic => p,
            HamiltonianKind::PoissonExp => p.exp(),
            HamiltonianKind::BurgNegLog => -1.0 / p,
        })
    }

    /// `∇H*` at one coordinate; `y` must be interior.
    pub fn grad_h_star(self, y: f64) -> Result<f64> {
        if !self.in_interior_dom_h_star(y) {
            return Err(Error::Domain(format!(
                "{}: grad H* needs y in int dom H*, got {y}",
                self.name()
            )));
        }
        Ok(match self {
            HamiltonianKind::Quadratic => y,
            HamiltonianKind::PoissonExp => y.ln(),
            HamiltonianKind::BurgNegLog => -1.0 / y,
        })
    }

    /// `D_{H*}(a, u)` at one coordinate, in the closed forms (KL, Itakura–Saito).
    pub fn bregman(self, a: f64, u: f64) -> Result<f64> {
        if !self.in_closed_dom_h_star(a) {
            return Err(Error::Domain(format!(
                "{}: Bregman distance needs a in dom H*, got {a}",
                self.name()
            )));
        }
        if !self.in_interior_dom_h_star(u) {
            return Err(Error::Domain(format!(
                "{}: Bregman distance needs u in int dom H*, got {u}",
                self.name()
            )));
        }
        Ok(match self {
            HamiltonianKind::Quadratic => 0.5 * (a - u) * (a - u),
            HamiltonianKind::PoissonExp => {
                if a == 0.0 {
                    u
                } else {
                    let d = a - u;
                    (a * (d / u).ln_1p() - d).max(0.0)
                }
            }
            HamiltonianKind::BurgNegLog => {
                let e = (a - u) / u;
                (e - e.ln_1p()).max(0.0)
            }
        })
    }
}

/// A separable Legendre function `H` on `ℝⁿ` together with its conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hamiltonian {
    pub kind: HamiltonianKind,
    pub dim: usize,
}

impl Hamiltonian {
    pub fn new(kind: HamiltonianKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("Hamiltonian dimension must be positive".into()));
        }
        Ok(Hamiltonian { kind, dim })
    }

    pub fn quadratic(dim: usize) -> Self {
        Hamiltonian { kind: HamiltonianKind::Quadratic, dim }
    }

    pub fn poisson(dim: usize) -> Self {
        Hamiltonian { kind: HamiltonianKind::PoissonExp, dim }
    }

    pub fn burg(dim: usize) -> Self {
        Hamiltonian { kind: HamiltonianKind::BurgNegLog, dim }
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got: v.len() })
        }
    }

    fn sum_ext(&self, v: &[f64], f: impl Fn(f64) -> ExtReal) -> Result<ExtReal> {
        self.check(v)?;
        let mut total = 0.0;
        for &c in v {
            match f(c) {
                ExtReal::Finite(x) => total += x,
                ExtReal::PosInf => return Ok(ExtReal::PosInf),
            }
        }
        Ok(ExtReal::Finite(total))
    }

    pub fn h(&self, p: &[f64]) -> Result<ExtReal> {
        let kind = self.kind;
        self.sum_ext(p, |c| kind.h(c))
    }

    pub fn h_star(&self, y: &[f64]) -> Result<ExtReal> {
        let kind = self.kind;
        self.sum_ext(y, |c| kind.h_star(c))
    }

    pub fn grad_h(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        p.iter().map(|&c| self.kind.grad_h(c)).collect()
    }

    pub fn grad_h_star(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        y.iter().map(|&c| self.kind.grad_h_star(c)).collect()
    }

    pub fn is_interior_h_star(&self, y: &[f64]) -> bool {
        y.iter().all(|&c| self.kind.in_interior_dom_h_star(c))
    }

    /// Primal Bregman distance `D_{H*}(a, u)`.
    pub fn bregman_primal(&self, a: &[f64], u: &[f64]) -> Result<f64> {
        self.check(a)?;
        self.check(u)?;
        let mut total = 0.0;
        for (&ai, &ui) in a.iter().zip(u) {
            total += self.kind.bregman(ai, ui)?;
        }
        Ok(total)
    }

    /// Primal–dual Bregman distance `d_{H*}(a, p) = H*(a) + H(p) − ⟨p, a⟩`.
    pub fn bregman_primal_dual(&self, a: &[f64], p: &[f64]) -> Result<f64> {
        let hs = self.h_star(a)?.require("H*(a)")?;
        let h = self.h(p)?.require("H(p)")?;
        Ok(hs + h - dot(p, a))
    }

    /// `|t·D_{H*}(x/t, u/t) − D_{(tH)*}(x, u)|` with `(tH)*(w) = t·H*(w/t)`.
    ///
    /// The right-hand side is assembled from `H*` and `∇H*` directly rather
    /// than from the closed-form distance, so the two sides take different
    /// arithmetic routes.
    pub fn bregman_scaling_check(&self, t: f64, x: &[f64], u: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("t must be positive, got {t}")));
        }
        self.check(x)?;
        self.check(u)?;
        let xs: Vec<f64> = x.iter().map(|v| v / t).collect();
        let us: Vec<f64> = u.iter().map(|v| v / t).collect();
        if !self.is_interior_h_star(&xs) || !self.is_interior_h_star(&us) {
            return Err(Error::Domain("x/t and u/t must lie in int dom H*".into()));
        }
        let lhs = t * self.bregman_primal(&xs, &us)?;

        let scaled_conj = |w: &[f64]| -> Result<f64> { Ok(t * self.h_star(w)?.require("H*")?) };
        let grad_at_u = self.grad_h_star(&us)?;
        let diff: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - b).collect();
        let rhs = scaled_conj(&xs)? - scaled_conj(&us)? - dot(&grad_at_u, &diff);
        Ok((lhs - rhs).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn all() -> [HamiltonianKind; 3] {
        [
            HamiltonianKind::Quadratic,
            HamiltonianKind::PoissonExp,
            HamiltonianKind::BurgNegLog,
        ]
    }

    #[test]
    fn h_values() {
        assert_eq!(Hamiltonian::poisson(2).h(&[0.0, 0.0]).unwrap(), ExtReal::Finite(2.0));
        assert_eq!(Hamiltonian::burg(1).h(&[-1.0]).unwrap(), ExtReal::Finite(-1.0));
        assert_eq!(Hamiltonian::burg(1).h(&[1.0]).unwrap(), ExtReal::PosInf);
        assert!(matches!(
            Hamiltonian::burg(2).h(&[-1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn h_star_values() {
        assert_eq!(Hamiltonian::poisson(2).h_star(&[1.0, 1.0]).unwrap(), ExtReal::Finite(-2.0));
        assert_eq!(Hamiltonian::poisson(1).h_star(&[0.0]).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(Hamiltonian::poisson(1).h_star(&[-0.1]).unwrap(), ExtReal::PosInf);
        assert_eq!(Hamiltonian::burg(1).h_star(&[0.0]).unwrap(), ExtReal::PosInf);
        assert!(Hamiltonian::poisson(2).h_star(&[1.0]).is_err());
    }

    #[test]
    fn burg_conjugate_matches_grid_maximization() {
        // H*(2) = sup_{p<0} 2p + 1 + log(-p); scan p on a fine grid.
        let y = 2.0;
        let best = (1..=2_000_000)
            .map(|k| -(k as f64) * 1e-6)
            .map(|p| y * p + 1.0 + (-p).ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let closed = Hamiltonian::burg(1).h_star(&[y]).unwrap().finite().unwrap();
        assert_abs_diff_eq!(closed, -(2.0f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(best, closed, epsilon = 1e-9);
    }

    #[test]
    fn gradients() {
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(Hamiltonian::poisson(1).grad_h_star(&[e]).unwrap()[0], 1.0, epsilon = 1e-15);
        let b = Hamiltonian::burg(1);
        let back = b.grad_h(&b.grad_h_star(&[3.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(back[0], 3.0, epsilon = 1e-15);
        assert!(b.grad_h(&[0.0]).is_err());
        assert!(b.grad_h_star(&[0.0]).is_err());
        assert!(Hamiltonian::poisson(1).grad_h_star(&[0.0]).is_err());
    }

    #[test]
    fn grad_h_matches_central_difference() {
        let ham = Hamiltonian::poisson(1);
        let h = 1e-6;
        let f = |p: f64| ham.h(&[p]).unwrap().finite().unwrap();
        let fd = (f(0.3 + h) - f(0.3 - h)) / (2.0 * h);
        assert_abs_diff_eq!(ham.grad_h(&[0.3]).unwrap()[0], fd, epsilon = 1e-6);
    }

    #[test]
    fn bregman_examples() {
        for kind in all() {
            let ham = Hamiltonian::new(kind, 2).unwrap();
            assert_eq!(ham.bregman_primal(&[1.7, 0.4], &[1.7, 0.4]).unwrap(), 0.0);
        }
        // Definition D(a,u) = H*(a) − H*(u) − H*'(u)(a − u), evaluated by hand.
        let kl = 2.0 * 2f64.ln() - 2.0 - (1.0 * 0.0 - 1.0) - 0.0 * (2.0 - 1.0);
        assert_abs_diff_eq!(Hamiltonian::poisson(1).bregman_primal(&[2.0], &[1.0]).unwrap(), kl, epsilon = 1e-15);
        assert_abs_diff_eq!(kl, 0.386294361119890, epsilon = 1e-12);
        let is = -(2f64.ln()) - 0.0 + (2.0 - 1.0);
        assert_abs_diff_eq!(Hamiltonian::burg(1).bregman_primal(&[2.0], &[1.0]).unwrap(), is, epsilon = 1e-15);
        assert_abs_diff_eq!(is, 0.306852819440055, epsilon = 1e-12);
        // Zero counts are allowed in the first argument of KL.
        assert_abs_diff_eq!(Hamiltonian::poisson(1).bregman_primal(&[0.0], &[0.5]).unwrap(), 0.5, epsilon = 1e-15);
        assert!(Hamiltonian::poisson(1).bregman_primal(&[1.0], &[0.0]).is_err());
        assert!(Hamiltonian::burg(1).bregman_primal(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn primal_dual_examples() {
        assert_abs_diff_eq!(Hamiltonian::poisson(1).bregman_primal_dual(&[1.0], &[0.0]).unwrap(), 0.0, epsilon = 1e-15);
        let b = Hamiltonian::burg(1);
        let p = b.grad_h_star(&[1.0]).unwrap();
        assert_abs_diff_eq!(
            b.bregman_primal_dual(&[2.0], &p).unwrap(),
            b.bregman_primal(&[2.0], &[1.0]).unwrap(),
            epsilon = 1e-14
        );
        assert_eq!(Hamiltonian::quadratic(1).bregman_primal_dual(&[1.0], &[0.0]).unwrap(), 0.5);
        assert!(b.bregman_primal_dual(&[2.0], &[1.0]).is_err());
    }

    #[test]
    fn scaling_examples() {
        let p = Hamiltonian::poisson(1);
        assert!(p.bregman_scaling_check(1.0, &[0.7], &[1.3]).unwrap() < 1e-15);
        assert!(p.bregman_scaling_check(2.0, &[4.0], &[2.0]).unwrap() <= 1e-10);
        assert!(Hamiltonian::burg(1).bregman_scaling_check(3.0, &[6.0], &[3.0]).unwrap() <= 1e-10);
        assert!(p.bregman_scaling_check(0.0, &[4.0], &[2.0]).is_err());
        assert!(p.bregman_scaling_check(1.0, &[-4.0], &[2.0]).is_err());
    }

    fn interior_point(kind: HamiltonianKind) -> BoxedStrategy<f64> {
        match kind {
            HamiltonianKind::Quadratic => (-5.0..5.0f64).boxed(),
            _ => (0.05..8.0f64).boxed(),
        }
    }

    fn dual_point(kind: HamiltonianKind) -> BoxedStrategy<f64> {
        match kind {
            HamiltonianKind::BurgNegLog => (-8.0..-0.05f64).boxed(),
            _ => (-3.0..2.0f64).boxed(),
        }
    }

    fn kinds() -> impl Strategy<Value = HamiltonianKind> {
        prop_oneof![
            Just(HamiltonianKind::Quadratic),
            Just(HamiltonianKind::PoissonExp),
            Just(HamiltonianKind::BurgNegLog),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_consistency((kind, p, y) in kinds().prop_flat_map(|k| (Just(k), dual_point(k), interior_point(k)))) {
            let step = 1e-6;
            let fd_h = (kind.h(p + step).finite().unwrap() - kind.h(p - step).finite().unwrap()) / (2.0 * step);
            let fd_hs = (kind.h_star(y + step).finite().unwrap() - kind.h_star(y - step).finite().unwrap()) / (2.0 * step);
            prop_assert!((kind.grad_h(p).unwrap() - fd_h).abs() <= 1e-5);
            prop_assert!((kind.grad_h_star(y).unwrap() - fd_hs).abs() <= 1e-5);
        }

        #[test]
        fn fenchel_young(kind in kinds(), p in -3.0..-0.05f64, y in 0.05..8.0f64) {
            let ham = Hamiltonian::new(kind, 1).unwrap();
            let lhs = ham.h(&[p]).unwrap().finite().unwrap() + ham.h_star(&[y]).unwrap().finite().unwrap();
            prop_assert!(lhs >= p * y - 1e-12);
            let y_eq = kind.grad_h(p).unwrap();
            let eq = ham.h(&[p]).unwrap().finite().unwrap() + ham.h_star(&[y_eq]).unwrap().finite().unwrap();
            prop_assert!((eq - p * y_eq).abs() <= 1e-9);
        }

        #[test]
        fn bregman_nonnegative(kind in kinds(), a in 0.05..8.0f64, u in 0.05..8.0f64) {
            let d = kind.bregman(a, u).unwrap();
            prop_assert!(d >= 0.0);
            if (a - u).abs() > 1e-3 {
                prop_assert!(d > 1e-12);
            }
            prop_assert_eq!(kind.bregman(a, a).unwrap(), 0.0);
        }

        #[test]
        fn legendre_inversion(kind in kinds(), v in 0.05..8.0f64) {
            let back = kind.grad_h(kind.grad_h_star(v).unwrap()).unwrap();
            prop_assert!((back - v).abs() <= 1e-9);
        }
    }
}
