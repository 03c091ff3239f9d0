//! Seeded verification suites over the Hamilton–Jacobi and convex-analysis
//! identities. Each case records a measured value against a limit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admm::{duality_check, solve_additive, AdmmConfig, MeyerBall};
use crate::convex::{Hamiltonian, HamiltonianKind};
use crate::error::{Error, Result};
use crate::hj::{asymptotic_check, HjProblem};
use crate::image::Image;
use crate::protocol::phantom_shapes;

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Hamiltonians of the two noise models.
pub const NOISE_KINDS: [HamiltonianKind; 2] = [HamiltonianKind::PoissonExp, HamiltonianKind::BurgNegLog];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Moreau,
    Hj,
    Asymptotic,
    Bregman,
    Duality,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Moreau, Suite::Hj, Suite::Asymptotic, Suite::Bregman, Suite::Duality];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Moreau => "moreau",
            Suite::Hj => "hj",
            Suite::Asymptotic => "asymptotic",
            Suite::Bregman => "bregman",
            Suite::Duality => "duality",
        }
    }

    pub fn run(self, seed: u64) -> Result<BatteryReport> {
        let cases = match self {
            Suite::Moreau => moreau_suite(seed, 50)?,
            Suite::Hj => hj_suite(seed, 10)?,
            Suite::Asymptotic => asymptotic_suite()?,
            Suite::Bregman => bregman_suite(seed, 100)?,
            Suite::Duality => duality_suite(seed, 10)?,
        };
        Ok(BatteryReport { suite: self, cases })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// One measured quantity and its pass threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `value ≤ limit` unless the case sets its own verdict (ratio bands).
    pub passed: bool,
}

impl Case {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Case { name: name.into(), value, limit, passed: value <= limit }
    }

    /// Passes when `value ∈ [lo, hi]`; `limit` stores `hi`.
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Case { name: name.into(), value, limit: hi, passed: (lo..=hi).contains(&value) }
    }
}

#[derive(Clone, Debug)]
pub struct BatteryReport {
    pub suite: Suite,
    pub cases: Vec<Case>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Case> {
        self.cases.iter().filter(|c| !c.passed)
    }

    /// Largest value among cases whose name starts with `prefix`.
    pub fn max_value(&self, prefix: &str) -> Option<f64> {
        self.cases
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .map(|c| c.value)
            .reduce(f64::max)
    }

    /// `suite,case,value,limit,passed` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,case,value,limit,passed\n");
        for c in &self.cases {
            out.push_str(&format!("{},{},{:e},{:e},{}\n", self.suite, c.name, c.value, c.limit, c.passed));
        }
        out
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(salt);
    r
}

/// A random interior point `(x, t, α)` for the Meyer-ball model on `1×n`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub x: Image,
    pub t: f64,
    pub alpha: f64,
}

pub fn random_instance<R: Rng>(rng: &mut R, n: usize) -> Instance {
    let t = rng.random_range(0.5..3.0);
    let data: Vec<f64> = (0..n).map(|_| t * rng.random_range(0.3..3.0)).collect();
    Instance {
        x: Image::new(1, n, data).expect("nonempty row"),
        t,
        alpha: rng.random_range(0.1..1.5),
    }
}

/// 1×2 instance whose gap `|x₁ − x₂|` stays at least `margin` away from the
/// `2α` switch between the merged and split solutions, where `S` is smooth.
pub fn smooth_pair<R: Rng>(rng: &mut R, margin: f64) -> Instance {
    loop {
        let inst = random_instance(rng, 2);
        let gap = (inst.x[(0, 0)] - inst.x[(0, 1)]).abs();
        if (gap - 2.0 * inst.alpha).abs() >= margin {
            return inst;
        }
    }
}

/// `|S + F − t·H*(x/t)| / (1 + |t·H*(x/t)|)` on random 1×1 and 1×2 instances.
pub fn moreau_suite(seed: u64, per_kind: usize) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for (salt, kind) in [HamiltonianKind::Quadratic, HamiltonianKind::PoissonExp, HamiltonianKind::BurgNegLog]
        .into_iter()
        .enumerate()
    {
        let mut r = rng(seed, salt as u64);
        for k in 0..per_kind {
            let inst = random_instance(&mut r, 1 + k % 2);
            let p = HjProblem::new(kind, inst.alpha);
            let scale = 1.0 + p.scaled_conjugate(&inst.x, inst.t)?.abs();
            let res = p.moreau_identity_check(&inst.x, inst.t)? / scale;
            cases.push(Case::at_most(format!("{}/{k}", kind.name()), res, 1e-5));
        }
    }
    Ok(cases)
}

/// FD-halving ratios of the S-PDE residual, the analytic quadratic case,
/// minimizer recovery, and agreement of the two F-PDE forms.
pub fn hj_suite(seed: u64, per_kind: usize) -> Result<Vec<Case>> {
    let steps = [1e-2, 5e-3, 2.5e-3];
    let mut cases = Vec::new();
    let q = HjProblem::quadratic_test();
    let qx = Image::row(&[1.3]).expect("row");
    cases.push(Case::at_most("quadratic/pde_s", q.pde_residual_s(&qx, 2.0, 1e-3)?, 1e-6));
    cases.push(Case::at_most("quadratic/pde_f", q.pde_residual_f(&qx, 2.0, 1e-3)?.general, 1e-6));
    for (salt, kind) in NOISE_KINDS.into_iter().enumerate() {
        let mut r = rng(seed, 100 + salt as u64);
        for k in 0..per_kind {
            let inst = smooth_pair(&mut r, 0.2);
            let p = HjProblem::new(kind, inst.alpha);
            let res: Vec<f64> = steps
                .iter()
                .map(|&h| p.pde_residual_s(&inst.x, inst.t, h))
                .collect::<Result<_>>()?;
            let tag = format!("{}/{k}", kind.name());
            cases.push(Case::at_most(format!("{tag}/pde_s@1e-2"), res[0], 1e-2));
            for (j, w) in res.windows(2).enumerate() {
                cases.push(Case::within(format!("{tag}/halving_ratio{j}"), w[0] / w[1], 3.0, 5.0));
            }
            let s = p.sample(&inst.x, inst.t, 1e-3)?;
            cases.push(Case::at_most(format!("{tag}/recover_s_vs_admm"), s.recovered_from_s.max_abs_diff(&s.v_bar), 1e-2));
            cases.push(Case::at_most(
                format!("{tag}/recover_s_vs_f"),
                s.recovered_from_s.max_abs_diff(&s.recovered_from_f),
                1e-6,
            ));
            let fc = p.pde_residual_f(&inst.x, inst.t, 1e-3)?;
            if let Some(sp) = fc.specialized {
                cases.push(Case::at_most(format!("{tag}/f_forms"), (fc.general - sp).abs(), 1e-9));
            }
        }
    }
    Ok(cases)
}

/// `‖v̄ − v0‖` along `t ∈ {1, 10, 100}` with `x = t·v0` on a 1×2 pair and a
/// 4×4 phantom: strictly decreasing, and the last error at most a tenth of
/// the first. A constant `v0` is an exact fixed point.
pub fn asymptotic_suite() -> Result<Vec<Case>> {
    let schedule = [1.0, 10.0, 100.0];
    let cfg = AdmmConfig::precise(1.0, 1.0);
    let mut cases = Vec::new();
    let pair = Image::row(&[1.0, 2.0]).expect("row");
    let phantom = phantom_shapes(4, 4).map(|v| 1.0 + 2.0 * v);
    for kind in NOISE_KINDS {
        for (label, v0, alpha) in [("1x2", &pair, 1.0), ("4x4", &phantom, 0.5)] {
            let d = Image::zeros(v0.rows(), v0.cols());
            let e = asymptotic_check(v0, &d, &schedule, kind, alpha, &cfg)?;
            let tag = format!("{}/{label}", kind.name());
            let decreasing = e.windows(2).all(|w| w[1] < w[0]);
            cases.push(Case {
                name: format!("{tag}/decreasing"),
                value: if decreasing { 1.0 } else { 0.0 },
                limit: 1.0,
                passed: decreasing,
            });
            cases.push(Case::at_most(format!("{tag}/final_over_initial"), e[2] / e[0], 0.1));
        }
        let flat = Image::filled(2, 2, 1.5);
        let e = asymptotic_check(&flat, &Image::zeros(2, 2), &schedule, kind, 1.0, &cfg)?;
        cases.push(Case::at_most(format!("{}/constant", kind.name()), e.into_iter().fold(0.0, f64::max), 1e-8));
    }
    Ok(cases)
}

/// `D_{H*}(a, u)` against `H*(a) + H(∇H*(u)) − ⟨∇H*(u), a⟩`, and the
/// `t`-scaling identity, at random interior points.
pub fn bregman_suite(seed: u64, per_kind: usize) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for (salt, kind) in [HamiltonianKind::Quadratic, HamiltonianKind::PoissonExp, HamiltonianKind::BurgNegLog]
        .into_iter()
        .enumerate()
    {
        let mut r = rng(seed, 200 + salt as u64);
        for k in 0..per_kind {
            let n = r.random_range(1..=4);
            let ham = Hamiltonian::new(kind, n)?;
            let draw = |r: &mut ChaCha8Rng| -> Vec<f64> {
                (0..n)
                    .map(|_| match kind {
                        HamiltonianKind::Quadratic => r.random_range(-3.0..3.0),
                        _ => r.random_range(0.05..5.0),
                    })
                    .collect()
            };
            let a = draw(&mut r);
            let u = draw(&mut r);
            let t = r.random_range(0.2..20.0);
            let p = ham.grad_h_star(&u)?;
            let two_def = (ham.bregman_primal(&a, &u)? - ham.bregman_primal_dual(&a, &p)?).abs();
            let ta: Vec<f64> = a.iter().map(|v| t * v).collect();
            let tu: Vec<f64> = u.iter().map(|v| t * v).collect();
            let scaling = ham.bregman_scaling_check(t, &ta, &tu)?;
            cases.push(Case::at_most(format!("{}/{k}/two_definitions", kind.name()), two_def, 1e-10));
            cases.push(Case::at_most(format!("{}/{k}/scaling", kind.name()), scaling, 1e-10));
        }
    }
    Ok(cases)
}

/// Primal–dual optimality at converged Meyer-ball solutions on random 1×2
/// and 3×3 inputs.
pub fn duality_suite(seed: u64, per_kind: usize) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for (salt, kind) in NOISE_KINDS.into_iter().enumerate() {
        let mut r = rng(seed, 300 + salt as u64);
        for k in 0..per_kind {
            let inst = if k % 2 == 0 {
                random_instance(&mut r, 2)
            } else {
                let t = r.random_range(0.5..3.0);
                let x = Image::from_fn(3, 3, |_, _| t * r.random_range(0.3..3.0));
                Instance { x, t, alpha: r.random_range(0.1..1.5) }
            };
            let cfg = AdmmConfig {
                primal_tol: 1e-9,
                dual_tol: 1e-9,
                ..AdmmConfig::precise(inst.t, inst.alpha)
            };
            let report = solve_additive(&inst.x, kind, &mut MeyerBall::new(inst.alpha), &cfg, None)?;
            if !report.converged {
                return Err(Error::NotConverged { report: Box::new(report) });
            }
            let dc = duality_check(&inst.x, kind, &report, inst.t, inst.alpha)?;
            let tag = format!("{}/{k}", kind.name());
            cases.push(Case::at_most(format!("{tag}/stationarity"), dc.stationarity, 1e-9));
            cases.push(Case::at_most(format!("{tag}/complementarity"), dc.complementarity, 1e-6));
        }
    }
    Ok(cases)
}
