use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ls::{ls_localize, ls_localize_distance_constrained, ls_localize_rp_constrained, LsEstimate, LsOptions};
use super::measurements::sample_measurements;
use crate::constrained::RigidBodySet;
use crate::error::{Error, Result};
use crate::fisher::{NoiseKind, NoiseModel};
use crate::geometry::{Configuration, RangingGraph};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Unconstrained,
    DistanceConstrained,
    RelativePosition,
}

/// True network state at one step of a scenario.
#[derive(Debug, Clone)]
pub struct StepInstance {
    pub graph: RangingGraph,
    pub config: Configuration,
    pub bodies: Option<RigidBodySet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mse: f64,
    pub var: f64,
    pub b_minus: f64,
    pub b_plus: f64,
}

impl ErrorStats {
    /// Mean, unbiased variance and mean +- 3 sigma / sqrt(M) of the samples.
    pub fn from_samples(eps: &[f64]) -> Self {
        let m = eps.len() as f64;
        let mse = eps.iter().sum::<f64>() / m;
        let var = if eps.len() > 1 { eps.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        let half = 3.0 * var.sqrt() / m.sqrt();
        Self { mse, var, b_minus: mse - half, b_plus: mse + half }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagStats {
    pub tag: usize,
    #[serde(flatten)]
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub tags: Vec<TagStats>,
    /// Statistics of the per-trial error averaged over tags.
    pub mean: ErrorStats,
    /// ln det of the empirical covariance of the stacked estimate
    /// (-inf when singular).
    pub logdet_cov: f64,
    pub failures: usize,
    /// Largest (projected) cost-gradient norm over the successful trials.
    pub max_gradient_norm: f64,
    /// Largest constraint violation over the successful trials.
    pub max_constraint_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: usize,
    pub steps: Vec<StepStats>,
}

#[derive(Serialize)]
struct CsvRow {
    step: usize,
    tag: usize,
    mse: f64,
    var: f64,
    b_minus: f64,
    b_plus: f64,
    logdet_cov: f64,
}

impl TrialStats {
    /// CSV with columns step, tag, mse, var, b_minus, b_plus, logdet_cov.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.steps {
            for t in &s.tags {
                let row = CsvRow {
                    step: s.step,
                    tag: t.tag,
                    mse: t.stats.mse,
                    var: t.stats.var,
                    b_minus: t.stats.b_minus,
                    b_plus: t.stats.b_plus,
                    logdet_cov: s.logdet_cov,
                };
                w.serialize(row).map_err(|e| Error::Estimation(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Estimation(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Estimation(e.to_string()))
    }
}

/// Generator for one trial; independent of scheduling.
pub(crate) fn trial_rng(seed: u64, step: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((step as u64) << 32) | trial as u64);
    rng
}

fn run_trial(
    inst: &StepInstance,
    estimator: EstimatorKind,
    noise: &NoiseModel,
    opts: &LsOptions,
    rng: &mut ChaCha8Rng,
) -> Result<LsEstimate> {
    let meas = sample_measurements(&inst.graph, &inst.config, noise, rng)?;
    let truth = inst.config.head(inst.graph.tag_count());
    let scale = match noise.kind {
        NoiseKind::Additive => noise.sigma,
        NoiseKind::LogNormal => {
            let pairs = inst.graph.ranging_pairs();
            let mean = pairs.iter().map(|&(i, j)| inst.config.distance(i, j)).sum::<f64>() / pairs.len() as f64;
            noise.sigma * mean
        }
    };
    let guess = truth.map(|v| v + scale * rng.sample::<f64, _>(StandardNormal));
    let bodies = || {
        inst.bodies.as_ref().ok_or_else(|| Error::InvalidParameter("constrained estimator needs rigid groups".into()))
    };
    match estimator {
        EstimatorKind::Unconstrained => ls_localize(&inst.graph, &inst.config, &meas, &guess, opts),
        EstimatorKind::DistanceConstrained => {
            ls_localize_distance_constrained(&inst.graph, &inst.config, &meas, bodies()?, &guess, opts)
        }
        EstimatorKind::RelativePosition => {
            ls_localize_rp_constrained(&inst.graph, &inst.config, &meas, bodies()?, &guess, opts)
        }
    }
}

/// Runs `trials` estimates per step and aggregates the squared errors.
/// Trial `t` of step `k` draws from its own stream of `seed`, so the result
/// does not depend on the thread schedule. More than 5% failed trials at any
/// step abort the run.
pub fn monte_carlo(
    steps: &[StepInstance],
    estimator: EstimatorKind,
    noise: &NoiseModel,
    trials: usize,
    seed: u64,
    opts: &LsOptions,
) -> Result<TrialStats> {
    if trials < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 trials, got {trials}")));
    }
    let mut out = Vec::with_capacity(steps.len());
    for (k, inst) in steps.iter().enumerate() {
        let n = inst.graph.dim();
        let u = inst.graph.tag_count();
        let truth = inst.config.head(u);
        let results: Vec<Result<LsEstimate>> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(inst, estimator, noise, opts, &mut trial_rng(seed, k, t)))
            .collect();
        let ok: Vec<&LsEstimate> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let max_gradient_norm = ok.iter().map(|e| e.gradient_norm).fold(0.0, f64::max);
        let max_constraint_residual = ok.iter().map(|e| e.constraint_residual).fold(0.0, f64::max);
        let estimates: Vec<DVector<f64>> = ok.iter().map(|e| e.positions.clone()).collect();
        let failures = trials - estimates.len();
        if failures * 20 > trials || estimates.len() < 2 {
            return Err(Error::TooManyFailures { failed: failures, total: trials });
        }
        let tags = (0..u)
            .map(|i| {
                let eps: Vec<f64> =
                    estimates.iter().map(|p| (p.rows(n * i, n) - truth.rows(n * i, n)).norm_squared()).collect();
                TagStats { tag: i, stats: ErrorStats::from_samples(&eps) }
            })
            .collect();
        let mean_eps: Vec<f64> = estimates.iter().map(|p| (p - &truth).norm_squared() / u as f64).collect();
        let count = estimates.len() as f64;
        let centre = estimates.iter().fold(DVector::zeros(n * u), |a, p| a + p) / count;
        let mut cov = DMatrix::zeros(n * u, n * u);
        for p in &estimates {
            let d = p - &centre;
            cov += &d * d.transpose();
        }
        cov /= count - 1.0;
        let logdet_cov = linalg::logdet_spd(&cov).unwrap_or(f64::NEG_INFINITY);
        out.push(StepStats {
            step: k,
            tags,
            mean: ErrorStats::from_samples(&mean_eps),
            logdet_cov,
            failures,
            max_gradient_norm,
            max_constraint_residual,
        });
    }
    Ok(TrialStats { trials, steps: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_graph;

    fn square() -> StepInstance {
        let graph = build_graph(2, 1, 4, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let config = Configuration::from_points(
            2,
            &[vec![1.0, 2.0], vec![0.0, 0.0], vec![5.0, 0.0], vec![5.0, 5.0], vec![0.0, 5.0]],
        )
        .unwrap();
        StepInstance { graph, config, bodies: None }
    }

    #[test]
    fn zero_noise_gives_zero_error() {
        let stats = monte_carlo(
            &[square()],
            EstimatorKind::Unconstrained,
            &NoiseModel::additive(0.0),
            10,
            1,
            &LsOptions::default(),
        )
        .unwrap();
        let s = &stats.steps[0].tags[0].stats;
        assert_eq!((s.mse, s.b_minus, s.b_plus), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bounds_bracket_mse_and_runs_repeat() {
        let noise = NoiseModel::additive(0.1);
        let opts = LsOptions::default();
        let a = monte_carlo(&[square(), square()], EstimatorKind::Unconstrained, &noise, 50, 7, &opts).unwrap();
        let b = monte_carlo(&[square(), square()], EstimatorKind::Unconstrained, &noise, 50, 7, &opts).unwrap();
        assert_eq!(a, b);
        let s = &a.steps[0].tags[0].stats;
        assert!(s.b_minus <= s.mse && s.mse <= s.b_plus);
        assert!(a.steps[0].logdet_cov.is_finite());
        // Different streams per step.
        assert_ne!(a.steps[0].tags[0].stats.mse, a.steps[1].tags[0].stats.mse);
        let csv = a.to_csv().unwrap();
        assert!(csv.starts_with("step,tag,mse,var,b_minus,b_plus,logdet_cov\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn needs_two_trials() {
        let err = monte_carlo(
            &[square()],
            EstimatorKind::Unconstrained,
            &NoiseModel::additive(0.1),
            1,
            1,
            &LsOptions::default(),
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }
}
