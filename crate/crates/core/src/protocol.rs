//! Synthetic phantoms and the matched-residual comparison between models.

use crate::admm::{AdmmConfig, Model, SolveReport};
use crate::error::{Error, Result};
use crate::image::Image;

/// Piecewise-constant test image on `(0, 1]`: a dim background, a bright
/// rectangle, a disk and a thin bar.
pub fn phantom_shapes(rows: usize, cols: usize) -> Image {
    let (r, c) = (rows as f64, cols as f64);
    Image::from_fn(rows, cols, |i, j| {
        let (y, x) = (i as f64 / r, j as f64 / c);
        if (y - 0.62).hypot(x - 0.62) < 0.22 {
            0.9
        } else if (0.15..0.45).contains(&y) && (0.12..0.5).contains(&x) {
            0.65
        } else if (0.75..0.85).contains(&y) && (0.1..0.4).contains(&x) {
            0.45
        } else {
            0.2
        }
    })
}

/// Horizontal ramp from 0.1 to 0.9 with a bright square in the middle.
pub fn phantom_ramp(rows: usize, cols: usize) -> Image {
    Image::from_fn(rows, cols, |i, j| {
        let inside = (rows / 3..2 * rows / 3).contains(&i) && (cols / 3..2 * cols / 3).contains(&j);
        if inside {
            0.95
        } else {
            0.1 + 0.8 * j as f64 / (cols.max(2) - 1) as f64
        }
    })
}

/// ADMM settings for 128×128-scale protocol runs: looser tolerances and a
/// penalty that converges quickly for each model on unit-range images. The
/// split models prox with weight `α/λ`, so their `λ` tracks `α`.
pub fn protocol_config(model: Model, t: f64, alpha: f64) -> AdmmConfig {
    let lambda = match model {
        Model::PoissonLogTv | Model::MultInvTv => 0.1,
        Model::PoissonTv => (20.0 * alpha).max(0.5),
        Model::MultLogTv => (5.0 * alpha).max(0.5),
    };
    AdmmConfig {
        lambda,
        t,
        alpha,
        max_iter: 3000,
        primal_tol: 1e-4,
        dual_tol: 1e-4,
        ..AdmmConfig::default()
    }
}

fn solve_checked(model: Model, x: &Image, cfg: &AdmmConfig) -> Result<SolveReport> {
    let report = model.solve(x, cfg)?;
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NotConverged { report: Box::new(report) })
    }
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub alpha: f64,
    pub residual_norm: f64,
    pub target: f64,
    pub report: SolveReport,
    pub solves: usize,
}

/// Finds `α` such that `‖x/t − v̄‖` is within `rel_tol` of `target`, by
/// bisection on `log α` (the residual norm grows with `α`). `cfg.alpha` is
/// ignored; `bracket` must straddle the target.
pub fn tune_alpha(
    x: &Image,
    model: Model,
    cfg: &AdmmConfig,
    target: f64,
    rel_tol: f64,
    bracket: (f64, f64),
    max_solves: usize,
) -> Result<TuneResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Config(format!("invalid alpha bracket [{lo}, {hi}]")));
    }
    let t = cfg.t;
    let run = |alpha: f64| -> Result<(f64, SolveReport)> {
        let report = solve_checked(model, x, &AdmmConfig { alpha, ..*cfg })?;
        Ok((report.residual_norm(x, t), report))
    };
    let mut solves = 0;
    let mut best: Option<TuneResult> = None;
    while solves < max_solves {
        let alpha = (lo * hi).sqrt();
        let (norm, report) = run(alpha)?;
        solves += 1;
        let err = (norm - target).abs() / target;
        if best.as_ref().is_none_or(|b| err < (b.residual_norm - target).abs() / target) {
            best = Some(TuneResult { alpha, residual_norm: norm, target, report, solves });
        }
        if err <= rel_tol {
            break;
        }
        if norm < target {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    let mut best = best.ok_or_else(|| Error::Config("max_solves must be positive".into()))?;
    best.solves = solves;
    Ok(best)
}

/// Outcome of equalizing the residual norms of two models.
#[derive(Clone, Debug)]
pub struct MatchedComparison {
    pub reference_model: Model,
    pub reference_alpha: f64,
    pub reference_norm: f64,
    pub reference: SolveReport,
    pub other_model: Model,
    pub tuned: TuneResult,
}

impl MatchedComparison {
    /// `|‖r_other‖ − ‖r_ref‖| / ‖r_ref‖`.
    pub fn relative_gap(&self) -> f64 {
        (self.tuned.residual_norm - self.reference_norm).abs() / self.reference_norm
    }
}

/// Runs `reference` at `reference_alpha`, then tunes `other` to the same
/// residual norm.
pub fn matched_comparison(
    x: &Image,
    t: f64,
    reference: Model,
    reference_alpha: f64,
    other: Model,
    rel_tol: f64,
) -> Result<MatchedComparison> {
    let ref_report = solve_checked(reference, x, &protocol_config(reference, t, reference_alpha))?;
    let reference_norm = ref_report.residual_norm(x, t);
    let bracket = (reference_alpha / 20.0, reference_alpha * 20.0);
    let tuned = tune_alpha(x, other, &protocol_config(other, t, 1.0), reference_norm, rel_tol, bracket, 40)?;
    Ok(MatchedComparison {
        reference_model: reference,
        reference_alpha,
        reference_norm,
        reference: ref_report,
        other_model: other,
        tuned,
    })
}

/// `‖v̄ − z‖` for `x = t·z` along `ts`, at fixed `α`: the observed image `z`
/// is held fixed while its weight `t` grows.
pub fn t_sweep(observed: &Image, model: Model, alpha: f64, ts: &[f64]) -> Result<Vec<f64>> {
    ts.iter()
        .map(|&t| {
            let x = observed.scale(t);
            let report = solve_checked(model, &x, &protocol_config(model, t, alpha))?;
            Ok(report.v_bar.dist(observed))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseKind, NoiseSpec};

    #[test]
    fn phantoms_are_in_unit_range() {
        for img in [phantom_shapes(32, 40), phantom_ramp(16, 16)] {
            assert!(img.min() > 0.0 && img.max() <= 1.0);
        }
        let p = phantom_shapes(64, 64);
        let mut levels: Vec<f64> = p.as_slice().to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels.len(), 4);
    }

    #[test]
    fn tuning_hits_target_on_small_image() {
        let clean = phantom_shapes(24, 24);
        let t = 10.0;
        let x = NoiseSpec::new(NoiseKind::Poisson, t, 4).apply(&clean).unwrap();
        let cmp = matched_comparison(&x, t, Model::PoissonLogTv, 0.5, Model::PoissonTv, 0.02).unwrap();
        assert!(cmp.relative_gap() <= 0.02, "{}", cmp.relative_gap());
    }

    #[test]
    fn larger_t_tracks_observation() {
        let clean = phantom_ramp(20, 20);
        let z = NoiseSpec::new(NoiseKind::Poisson, 10.0, 9).apply(&clean).unwrap().scale(0.1);
        let d = t_sweep(&z, Model::PoissonLogTv, 1.0, &[5.0, 10.0, 20.0]).unwrap();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }
}
