//! Seeded Poisson and multiplicative Gamma corruption.
//!
//! Pixel `k` draws from its own ChaCha8 stream (`seed`, stream `k`), so the
//! output does not depend on traversal order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::image::Image;

/// Rates below this use Knuth's product method; above, transformed rejection.
const KNUTH_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    /// `x ~ Poisson(t·v)`; `t` is the exposure time.
    Poisson,
    /// `x = L·z`, `z` the mean of `L = t` exponentials of mean `v`.
    GammaMultiplicative,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Poisson => "poisson",
            NoiseKind::GammaMultiplicative => "gamma",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(NoiseKind::Poisson),
            "gamma" | "gamma_multiplicative" => Ok(NoiseKind::GammaMultiplicative),
            _ => Err(Error::Config(format!("unknown noise kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub t: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, t: f64, seed: u64) -> Self {
        NoiseSpec { kind, t, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Config(format!("t must be positive, got {}", self.t)));
        }
        if self.kind == NoiseKind::GammaMultiplicative && (self.t.fract() != 0.0 || self.t > u32::MAX as f64) {
            return Err(Error::Config(format!("the number of looks must be an integer, got {}", self.t)));
        }
        Ok(())
    }

    /// Corrupts `v` according to `kind`.
    pub fn apply(&self, v: &Image) -> Result<Image> {
        match self.kind {
            NoiseKind::Poisson => poisson_corrupt(v, self),
            NoiseKind::GammaMultiplicative => gamma_corrupt(v, self),
        }
    }
}

fn pixel_rng(seed: u64, pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pixel as u64);
    rng
}

/// Draws `Poisson(rate)`.
pub fn sample_poisson<R: Rng>(rng: &mut R, rate: f64) -> u64 {
    if rate <= 0.0 {
        0
    } else if rate < KNUTH_LIMIT {
        let limit = (-rate).exp();
        let mut k = 0;
        let mut p = rng.random::<f64>();
        while p > limit {
            k += 1;
            p *= rng.random::<f64>();
        }
        k
    } else {
        sample_poisson_ptrs(rng, rate)
    }
}

/// Hörmann's transformed rejection with squeeze, for `rate ≥ 10`.
fn sample_poisson_ptrs<R: Rng>(rng: &mut R, rate: f64) -> u64 {
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v = rng.random::<f64>();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -rate + k * loglam - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// Independent `Poisson(t·vᵢ)` counts.
pub fn poisson_corrupt(v: &Image, spec: &NoiseSpec) -> Result<Image> {
    spec.validate()?;
    if spec.kind != NoiseKind::Poisson {
        return Err(Error::Config("poisson_corrupt needs a Poisson spec".into()));
    }
    if let Some(k) = v.as_slice().iter().position(|&e| e < 0.0) {
        return Err(Error::Domain(format!("Poisson rates must be nonnegative (pixel {k})")));
    }
    let data = v
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &vi)| sample_poisson(&mut pixel_rng(spec.seed, k), spec.t * vi) as f64)
        .collect();
    Ok(v.with_data(data))
}

/// `xᵢ = vᵢ·Σ_{l<L} E_l` with `E_l = −ln(1 − U_l)` standard exponentials, so
/// `x/L` has mean `vᵢ` and variance `vᵢ²/L`.
pub fn gamma_corrupt(v: &Image, spec: &NoiseSpec) -> Result<Image> {
    spec.validate()?;
    if spec.kind != NoiseKind::GammaMultiplicative {
        return Err(Error::Config("gamma_corrupt needs a Gamma spec".into()));
    }
    if let Some(k) = v.as_slice().iter().position(|&e| !(e > 0.0)) {
        return Err(Error::Domain(format!("multiplicative noise needs positive pixels (pixel {k})")));
    }
    let looks = spec.t as u64;
    let data = v
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &vi)| {
            let mut rng = pixel_rng(spec.seed, k);
            let sum: f64 = (0..looks).map(|_| -(1.0 - rng.random::<f64>()).ln()).sum();
            vi * sum
        })
        .collect();
    Ok(v.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(data: &[f64]) -> (f64, f64) {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn zero_rate_gives_zero_counts() {
        let x = poisson_corrupt(&Image::zeros(4, 4), &NoiseSpec::new(NoiseKind::Poisson, 5.0, 1)).unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_moments() {
        // Rate 200 exercises the rejection sampler, rate 4 the product method.
        for (v, t) in [(10.0, 20.0), (0.2, 20.0)] {
            let n = 10_000;
            let x = poisson_corrupt(&Image::filled(100, 100, v), &NoiseSpec::new(NoiseKind::Poisson, t, 7)).unwrap();
            let obs: Vec<f64> = x.as_slice().iter().map(|c| c / t).collect();
            let (mean, var) = moments(&obs);
            let sigma = (v / t).sqrt() / (n as f64).sqrt();
            assert!((mean - v).abs() <= 3.0 * sigma, "mean {mean}");
            // Var(x/t) = v/t; Var of the estimate ≈ (2σ⁴ + σ²/t²)/n for Poisson.
            let s2 = v / t;
            let se = ((2.0 * s2 * s2 + s2 / (t * t)) / n as f64).sqrt();
            assert!((var - s2).abs() <= 5.0 * se, "var {var}");
        }
    }

    #[test]
    fn poisson_frequencies_match_pmf() {
        for rate in [3.0, 45.0] {
            let n = 40_000usize;
            let mut counts = std::collections::HashMap::new();
            for k in 0..n {
                *counts.entry(sample_poisson(&mut pixel_rng(11, k), rate)).or_insert(0usize) += 1;
            }
            let center = rate.floor() as u64;
            for k in center.saturating_sub(3)..=center + 3 {
                let pmf = (k as f64 * rate.ln() - rate - ln_gamma(k as f64 + 1.0)).exp();
                let freq = *counts.get(&k).unwrap_or(&0) as f64 / n as f64;
                let se = (pmf * (1.0 - pmf) / n as f64).sqrt();
                assert!((freq - pmf).abs() <= 5.0 * se, "rate {rate}, k {k}: {freq} vs {pmf}");
            }
        }
    }

    #[test]
    fn exponential_mean_single_look() {
        let n = 100_000;
        let x = gamma_corrupt(&Image::filled(1, n, 3.0), &NoiseSpec::new(NoiseKind::GammaMultiplicative, 1.0, 3)).unwrap();
        let (mean, _) = moments(x.as_slice());
        assert!((mean - 3.0).abs() <= 3.0 * 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn gamma_moments() {
        let (v, looks) = (2.0, 4.0);
        let n = 10_000;
        let x = gamma_corrupt(&Image::filled(100, 100, v), &NoiseSpec::new(NoiseKind::GammaMultiplicative, looks, 5)).unwrap();
        let obs: Vec<f64> = x.as_slice().iter().map(|c| c / looks).collect();
        let (mean, var) = moments(&obs);
        let s2 = v * v / looks;
        assert!((mean - v).abs() <= 3.0 * (s2 / n as f64).sqrt());
        let se = s2 * ((2.0 + 6.0 / looks) / n as f64).sqrt();
        assert!((var - s2).abs() <= 5.0 * se, "var {var}");
    }

    #[test]
    fn deterministic_and_order_free() {
        let v = Image::from_fn(5, 6, |i, j| 1.0 + (i * 6 + j) as f64 * 0.3);
        for kind in [NoiseKind::Poisson, NoiseKind::GammaMultiplicative] {
            let spec = NoiseSpec::new(kind, 3.0, 99);
            let a = spec.apply(&v).unwrap();
            assert_eq!(a, spec.apply(&v).unwrap());
            // A pixel's draw depends only on (seed, index).
            let single = spec.apply(&Image::filled(1, 1, v.as_slice()[0])).unwrap();
            assert_eq!(single.as_slice()[0], a.as_slice()[0]);
            assert_ne!(a, NoiseSpec::new(kind, 3.0, 100).apply(&v).unwrap());
        }
    }

    #[test]
    fn gamma_is_scale_equivariant() {
        let v = Image::from_fn(4, 4, |i, j| 0.5 + (i + 2 * j) as f64);
        let spec = NoiseSpec::new(NoiseKind::GammaMultiplicative, 3.0, 8);
        let a = gamma_corrupt(&v.scale(2.5), &spec).unwrap();
        let b = gamma_corrupt(&v, &spec).unwrap().scale(2.5);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let v = Image::filled(2, 2, 1.0);
        assert!(gamma_corrupt(&v, &NoiseSpec::new(NoiseKind::GammaMultiplicative, 2.5, 0)).is_err());
        assert!(gamma_corrupt(&Image::zeros(2, 2), &NoiseSpec::new(NoiseKind::GammaMultiplicative, 2.0, 0)).is_err());
        assert!(poisson_corrupt(&v.scale(-1.0), &NoiseSpec::new(NoiseKind::Poisson, 2.0, 0)).is_err());
        assert!(poisson_corrupt(&v, &NoiseSpec::new(NoiseKind::Poisson, 0.0, 0)).is_err());
        assert!(poisson_corrupt(&v, &NoiseSpec::new(NoiseKind::GammaMultiplicative, 2.0, 0)).is_err());
    }
}
