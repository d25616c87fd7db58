//! Bootstrap internal validation with optimism correction, risk-group
//! stratification, the conventional-parameter Cox benchmark, and paired
//! model comparison.
//!
//! The validation harness treats a model pipeline as a [`Trainer`]: a
//! hyperparameter-selection step plus a fitting step, both deterministic
//! given data and seed. Step 1 runs the full pipeline on the full sample and
//! measures the apparent concordance; each bootstrap replicate re-runs the
//! pipeline on an n-with-replacement resample, recording its concordance on
//! the resample (bootstrap performance) and on the untouched original
//! sample (test performance). The mean of (bootstrap - test) across
//! replicates estimates the optimism, and subtracting it from the apparent
//! concordance gives the corrected estimate.

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::net::{self, NetworkModel, NetworkSpec, TrainConfig};
use crate::pso::{pso_optimize, CvObjective, SearchSpace, SwarmConfig};
use crate::rng::{stream, subseed};
use crate::survival::{
    concordance_index, fit_cox_l2, has_informative_pair, CoxFit, SurvivalRecord, TiePolicy,
};

/// A fitted model reduced to its risk-scoring behavior.
pub trait RiskScorer: Send + Sync {
    fn scores(&self, features: &Array2<f64>) -> Result<Vec<f64>>;
}

/// A full training pipeline: hyperparameter selection plus model fitting,
/// deterministic given (data, seed).
pub trait Trainer: Sync {
    type Hyper: Clone + Send + Sync;

    /// Run the pipeline's hyperparameter search on a sample.
    fn select_hyperparameters(
        &self,
        features: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        seed: u64,
    ) -> Result<Self::Hyper>;

    /// Fit a model with fixed hyperparameters on a sample.
    fn fit(
        &self,
        features: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        hyper: &Self::Hyper,
        seed: u64,
    ) -> Result<Box<dyn RiskScorer>>;
}

/// Options for [`bootstrap_optimism`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapOptions {
    /// Number of bootstrap replicates B.
    pub replicates: usize,
    pub seed: u64,
    /// Reuse the step-1 hyperparameters inside every replicate instead of
    /// re-running the search (a documented deviation from the full
    /// procedure, labeled in the report).
    pub fast_validation: bool,
    pub tie_policy: TiePolicy,
    /// Bound on redraws of a resample without events or informative pairs.
    pub max_redraws: usize,
    /// Fail the run when more than this fraction of replicates is excluded.
    pub max_excluded_fraction: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 50,
            seed: 0,
            fast_validation: false,
            tie_policy: TiePolicy::HalfCredit,
            max_redraws: 100,
            max_excluded_fraction: 0.10,
        }
    }
}

/// One bootstrap replicate's performances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    /// Concordance of the replicate model on its own resample.
    pub bootstrap_c: f64,
    /// Concordance of the replicate model on the original full sample.
    pub test_c: f64,
    pub optimism: f64,
    pub excluded: bool,
    pub note: Option<String>,
    /// Fingerprint of the resample index multiset (pairs two validations
    /// run with a shared seed).
    pub resample_fingerprint: u64,
}

/// Optimism-corrected validation summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub apparent_c: f64,
    pub replicates: Vec<ReplicateOutcome>,
    pub mean_optimism: f64,
    /// `apparent_c - mean_optimism`, exactly.
    pub corrected_c: f64,
    pub ci_95: (f64, f64),
    pub ci_method: String,
    pub n_replicates: usize,
    pub n_excluded: usize,
    pub fast_validation: bool,
    /// Fingerprint of the untouched evaluation set every test performance
    /// was computed on.
    pub evaluation_set_fingerprint: u64,
}

impl ValidationReport {
    /// Per-replicate optimism-corrected values (`apparent - optimism_b`)
    /// over included replicates.
    pub fn per_replicate_corrected(&self) -> Vec<f64> {
        self.replicates
            .iter()
            .filter(|r| !r.excluded)
            .map(|r| self.apparent_c - r.optimism)
            .collect()
    }
}

/// Fingerprint of an evaluation set (outcomes plus feature dimensions and a
/// strided sample of the matrix). Cheap and stable; used to verify that test
/// performances were computed on the untouched original sample.
fn fingerprint(features: &Array2<f64>, outcomes: &[SurvivalRecord]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(features.nrows().to_le_bytes());
    hasher.update(features.ncols().to_le_bytes());
    let stride = (features.len() / 4096).max(1);
    for (i, v) in features.iter().enumerate() {
        if i % stride == 0 {
            hasher.update(v.to_le_bytes());
        }
    }
    for o in outcomes {
        hasher.update(o.subject_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(o.time.to_le_bytes());
        hasher.update([o.event as u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn fingerprint_indices(indices: &[usize]) -> u64 {
    let mut hasher = Sha256::new();
    for &i in indices {
        hasher.update((i as u64).to_le_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Draw a with-replacement resample whose outcomes contain at least one
/// event and one informative pair; bounded retries on fresh sub-streams.
fn draw_valid_resample(
    outcomes: &[SurvivalRecord],
    seed: u64,
    replicate: usize,
    max_redraws: usize,
) -> Option<Vec<usize>> {
    let n = outcomes.len();
    for attempt in 0..max_redraws {
        let mut rng = stream(seed, "boot-resample", &[replicate as u64, attempt as u64]);
        let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let resampled: Vec<SurvivalRecord> =
            indices.iter().map(|&i| outcomes[i].clone()).collect();
        if resampled.iter().any(|o| o.event) && has_informative_pair(&resampled) {
            if attempt > 0 {
                log::warn!("replicate {replicate}: resample redrawn {attempt} time(s)");
            }
            return Some(indices);
        }
    }
    None
}

/// TRIPOD-style bootstrap optimism correction of a trainer's concordance.
pub fn bootstrap_optimism<T: Trainer>(
    trainer: &T,
    features: &Array2<f64>,
    outcomes: &[SurvivalRecord],
    options: &BootstrapOptions,
) -> Result<ValidationReport> {
    let n = features.nrows();
    if n != outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "feature rows ({n}) and outcomes ({}) differ",
            outcomes.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("validation needs at least 2 subjects".into()));
    }
    if options.replicates < 1 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }

    // Step 1: full pipeline on the full sample; apparent performance.
    let hyper_full = trainer.select_hyperparameters(
        features,
        outcomes,
        subseed(options.seed, "select-full", &[]),
    )?;
    let model_full =
        trainer.fit(features, outcomes, &hyper_full, subseed(options.seed, "fit-full", &[]))?;
    let apparent_c =
        concordance_index(&model_full.scores(features)?, outcomes, options.tie_policy)?;

    let eval_fingerprint = fingerprint(features, outcomes);

    // Steps 2-4: replicates, independent jobs over read-only data.
    let replicates: Vec<ReplicateOutcome> = (0..options.replicates)
        .into_par_iter()
        .map(|b| {
            let excluded = |note: String| ReplicateOutcome {
                index: b,
                bootstrap_c: f64::NAN,
                test_c: f64::NAN,
                optimism: f64::NAN,
                excluded: true,
                note: Some(note),
                resample_fingerprint: 0,
            };
            let indices = match draw_valid_resample(outcomes, options.seed, b, options.max_redraws)
            {
                Some(ix) => ix,
                None => return excluded("no valid resample within redraw budget".into()),
            };
            let resample_fingerprint = fingerprint_indices(&indices);
            let boot_x = features.select(Axis(0), &indices);
            let boot_outcomes: Vec<SurvivalRecord> =
                indices.iter().map(|&i| outcomes[i].clone()).collect();

            let hyper = if options.fast_validation {
                hyper_full.clone()
            } else {
                match trainer.select_hyperparameters(
                    &boot_x,
                    &boot_outcomes,
                    subseed(options.seed, "select-boot", &[b as u64]),
                ) {
                    Ok(h) => h,
                    Err(e) => return excluded(format!("hyperparameter search failed: {e}")),
                }
            };
            let model = match trainer.fit(
                &boot_x,
                &boot_outcomes,
                &hyper,
                subseed(options.seed, "fit-boot", &[b as u64]),
            ) {
                Ok(m) => m,
                Err(e) => return excluded(format!("fit failed: {e}")),
            };

            let bootstrap_c = match model
                .scores(&boot_x)
                .and_then(|s| concordance_index(&s, &boot_outcomes, options.tie_policy))
            {
                Ok(c) => c,
                Err(e) => return excluded(format!("bootstrap scoring failed: {e}")),
            };
            debug_assert_eq!(fingerprint(features, outcomes), eval_fingerprint);
            let test_c = match model
                .scores(features)
                .and_then(|s| concordance_index(&s, outcomes, options.tie_policy))
            {
                Ok(c) => c,
                Err(e) => return excluded(format!("test scoring failed: {e}")),
            };
            ReplicateOutcome {
                index: b,
                bootstrap_c,
                test_c,
                optimism: bootstrap_c - test_c,
                excluded: false,
                note: None,
                resample_fingerprint,
            }
        })
        .collect();

    let n_excluded = replicates.iter().filter(|r| r.excluded).count();
    if n_excluded as f64 > options.max_excluded_fraction * options.replicates as f64 {
        return Err(Error::Numerical(format!(
            "{n_excluded} of {} replicates excluded (limit {:.0}%)",
            options.replicates,
            options.max_excluded_fraction * 100.0
        )));
    }
    let included: Vec<&ReplicateOutcome> = replicates.iter().filter(|r| !r.excluded).collect();
    if included.len() < 2 {
        return Err(Error::Numerical("fewer than 2 usable replicates".into()));
    }

    // Step 5: corrected estimate and its normal-approximation interval over
    // per-replicate corrected values.
    let mean_optimism =
        included.iter().map(|r| r.optimism).sum::<f64>() / included.len() as f64;
    let corrected_c = apparent_c - mean_optimism;
    let corrected_values: Vec<f64> =
        included.iter().map(|r| apparent_c - r.optimism).collect();
    let sd = sample_sd(&corrected_values);
    let ci_95 = (corrected_c - 1.96 * sd, corrected_c + 1.96 * sd);

    Ok(ValidationReport {
        apparent_c,
        replicates,
        mean_optimism,
        corrected_c,
        ci_95,
        ci_method: "normal approximation over per-replicate corrected values".into(),
        n_replicates: options.replicates,
        n_excluded,
        fast_validation: options.fast_validation,
        evaluation_set_fingerprint: eval_fingerprint,
    })
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Median split of a cohort by risk score: subjects strictly above the
/// sample median go to the high-risk group, the rest (median included) to
/// the low-risk group.
#[derive(Debug, Clone)]
pub struct StratifiedGroups {
    pub median: f64,
    pub low_indices: Vec<usize>,
    pub high_indices: Vec<usize>,
    pub low: Vec<SurvivalRecord>,
    pub high: Vec<SurvivalRecord>,
}

pub fn stratify_by_median_risk(
    risks: &[f64],
    outcomes: &[SurvivalRecord],
) -> Result<StratifiedGroups> {
    if risks.len() != outcomes.len() {
        return Err(Error::InvalidInput("risks and outcomes lengths differ".into()));
    }
    if risks.len() < 2 {
        return Err(Error::InvalidInput("stratification needs at least 2 subjects".into()));
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("risks must be finite".into()));
    }
    let mut sorted = risks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Undefined(
            "all risks identical: no median split exists".into(),
        ));
    }
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mut groups = StratifiedGroups {
        median,
        low_indices: Vec::new(),
        high_indices: Vec::new(),
        low: Vec::new(),
        high: Vec::new(),
    };
    for (i, (&risk, outcome)) in risks.iter().zip(outcomes).enumerate() {
        if risk > median {
            groups.high_indices.push(i);
            groups.high.push(outcome.clone());
        } else {
            groups.low_indices.push(i);
            groups.low.push(outcome.clone());
        }
    }
    Ok(groups)
}

/// The conventional-parameter benchmark: a ridge-penalized Cox model on
/// volumetric-style covariates, with the penalty chosen by cross-validated
/// concordance over a log-spaced grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkModel {
    pub fit: CoxFit,
    pub selected_lambda: f64,
    pub cv_scores: Vec<(f64, f64)>, // (lambda, mean held-out C)
}

impl RiskScorer for BenchmarkModel {
    fn scores(&self, features: &Array2<f64>) -> Result<Vec<f64>> {
        if features.ncols() != self.fit.coefficients.len() {
            return Err(Error::InvalidInput(format!(
                "benchmark expects {} covariates, got {}",
                self.fit.coefficients.len(),
                features.ncols()
            )));
        }
        Ok(features.rows().into_iter().map(|row| self.fit.risk(row.as_slice().unwrap())).collect())
    }
}

const LAMBDA_GRID_DECADES: std::ops::RangeInclusive<i32> = -3..=3;
const BENCHMARK_CV_FOLDS: usize = 5;

/// Fit the benchmark Cox model, selecting the ridge penalty by
/// cross-validation.
pub fn benchmark_conventional(
    covariates: &Array2<f64>,
    outcomes: &[SurvivalRecord],
    seed: u64,
) -> Result<BenchmarkModel> {
    let n = covariates.nrows();
    if n != outcomes.len() {
        return Err(Error::InvalidInput("covariate rows and outcomes differ".into()));
    }
    let folds = crate::pso::draw_event_valid_folds(
        outcomes,
        BENCHMARK_CV_FOLDS.min(n / 2).max(2),
        seed,
        100,
    )?;

    let mut grid: Vec<f64> = Vec::new();
    for decade in LAMBDA_GRID_DECADES {
        grid.push(10f64.powi(decade));
        grid.push(10f64.powi(decade) * 10f64.sqrt());
    }
    grid.truncate(grid.len() - 1);

    let mut cv_scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &grid {
        let mut total = 0.0;
        let mut used = 0;
        for held_out in &folds {
            let train_ix: Vec<usize> = (0..n).filter(|i| !held_out.contains(i)).collect();
            let train_x = covariates.select(Axis(0), &train_ix);
            let train_y: Vec<SurvivalRecord> =
                train_ix.iter().map(|&i| outcomes[i].clone()).collect();
            let fit = match fit_cox_l2(&train_x, &train_y, lambda) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let held_x = covariates.select(Axis(0), held_out);
            let held_y: Vec<SurvivalRecord> =
                held_out.iter().map(|&i| outcomes[i].clone()).collect();
            let risks: Vec<f64> = held_x
                .rows()
                .into_iter()
                .map(|row| fit.risk(row.as_slice().unwrap()))
                .collect();
            if let Ok(c) = concordance_index(&risks, &held_y, TiePolicy::HalfCredit) {
                total += c;
                used += 1;
            }
        }
        if used == 0 {
            continue;
        }
        let mean = total / used as f64;
        cv_scores.push((lambda, mean));
        // ties broken toward the larger penalty
        let better = match best {
            None => true,
            Some((_, best_score)) => mean >= best_score,
        };
        if better {
            best = Some((lambda, mean));
        }
    }
    let (selected_lambda, _) = best.ok_or_else(|| {
        Error::Numerical("no penalty value produced a scorable cross-validation".into())
    })?;
    let fit = fit_cox_l2(covariates, outcomes, selected_lambda)?;
    Ok(BenchmarkModel { fit, selected_lambda, cv_scores })
}

/// [`Trainer`] for the benchmark model (its hyperparameter search is the
/// penalty selection).
pub struct BenchmarkTrainer;

impl Trainer for BenchmarkTrainer {
    type Hyper = f64;

    fn select_hyperparameters(
        &self,
        features: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        seed: u64,
    ) -> Result<f64> {
        Ok(benchmark_conventional(features, outcomes, seed)?.selected_lambda)
    }

    fn fit(
        &self,
        features: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        hyper: &f64,
        _seed: u64,
    ) -> Result<Box<dyn RiskScorer>> {
        let fit = fit_cox_l2(features, outcomes, *hyper)?;
        Ok(Box::new(BenchmarkModel { fit, selected_lambda: *hyper, cv_scores: Vec::new() }))
    }
}

/// Wraps a trained network as a risk scorer.
pub struct NetworkScorer(pub NetworkModel);

impl RiskScorer for NetworkScorer {
    fn scores(&self, features: &Array2<f64>) -> Result<Vec<f64>> {
        self.0.predict_risks(features)
    }
}

/// Particle-swarm settings for a trainer that searches hyperparameters
/// inside the pipeline.
#[derive(Debug, Clone)]
pub struct TuneSettings {
    pub space: SearchSpace,
    pub swarm: SwarmConfig,
}

/// The prediction-network pipeline as a [`Trainer`]: optionally a particle
/// swarm over the hyperparameter space (scored by cross-validated
/// concordance), then a full training run with the chosen spec.
pub struct NetworkTrainer {
    pub base_spec: NetworkSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub tune: Option<TuneSettings>,
}

impl NetworkTrainer {
    pub fn fixed(spec: NetworkSpec, epochs: usize, batch_size: usize) -> Self {
        Self { base_spec: spec, epochs, batch_size, tune: None }
    }
}

impl Trainer for NetworkTrainer {
    type Hyper = NetworkSpec;

    fn select_hyperparameters(
        &self,
        features: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        seed: u64,
    ) -> Result<NetworkSpec> {
        match &self.tune {
            None => Ok(self.base_spec.clone()),
            Some(settings) => {
                let objective = CvObjective::new(
                    features,
                    outcomes,
                    settings.swarm.cv_folds,
                    self.epochs,
                    self.batch_size,
                    subseed(seed, "tune-folds", &[]),
                )?;
                let mut swarm = settings.swarm.clone();
                swarm.seed = subseed(seed, "tune-swarm", &[]);
                let result =
                    pso_optimize(|pos, ctx| objective.evaluate(pos, ctx), &settings.space, &swarm)?;
                if !result.best_score.is_finite() {
                    return Err(Error::Numerical(
                        "hyperparameter search found no evaluable configuration".into(),
                    ));
                }
                crate::pso::spec_from_position(&result.best_position, features.ncols())
            }
        }
    }

    fn fit(
        &self,
        features: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        hyper: &NetworkSpec,
        seed: u64,
    ) -> Result<Box<dyn RiskScorer>> {
        let config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size.min(features.nrows()),
            seed,
        };
        let trained = net::train(hyper, features, outcomes, &config)?;
        Ok(Box::new(NetworkScorer(trained.model)))
    }
}

/// Paired comparison of two validation reports run on shared resamples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelComparison {
    pub mean_difference: f64,
    /// Normal-approximation 95% CI of the mean difference.
    pub ci_95: (f64, f64),
    pub p_value: f64,
    pub n_pairs: usize,
    /// True when every sign pattern was enumerated instead of sampled.
    pub exhaustive: bool,
    pub n_permutations: usize,
}

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// Sign-flip permutation test on per-replicate optimism-corrected
/// differences (report A minus report B).
///
/// Requires both reports to have been produced from the same replicate
/// resamples (shared validation seed), which is checked via the per-replicate
/// resample fingerprints. All `2^B` sign patterns are enumerated when that is
/// no more than `n_permutations`; otherwise `n_permutations` random patterns
/// are sampled.
pub fn compare_models(
    report_a: &ValidationReport,
    report_b: &ValidationReport,
    n_permutations: usize,
    seed: u64,
) -> Result<ModelComparison> {
    if report_a.replicates.len() != report_b.replicates.len() {
        return Err(Error::InvalidInput(format!(
            "replicate counts differ: {} vs {}",
            report_a.replicates.len(),
            report_b.replicates.len()
        )));
    }
    let mut diffs = Vec::new();
    for (ra, rb) in report_a.replicates.iter().zip(&report_b.replicates) {
        if ra.excluded || rb.excluded {
            continue;
        }
        if ra.resample_fingerprint != rb.resample_fingerprint {
            return Err(Error::InvalidInput(format!(
                "replicate {} was drawn from different resamples; validations must share a seed",
                ra.index
            )));
        }
        let corrected_a = report_a.apparent_c - ra.optimism;
        let corrected_b = report_b.apparent_c - rb.optimism;
        diffs.push(corrected_a - corrected_b);
    }
    if diffs.is_empty() {
        return Err(Error::InvalidInput("no shared usable replicates".into()));
    }

    let n = diffs.len();
    let observed = diffs.iter().sum::<f64>() / n as f64;
    let observed_abs = observed.abs();

    let exhaustive = n < 63 && (1u64 << n) <= n_permutations as u64;
    let (hits, total) = if exhaustive {
        let total = 1u64 << n;
        let mut hits = 0u64;
        for pattern in 0..total {
            let mut sum = 0.0;
            for (i, d) in diffs.iter().enumerate() {
                if pattern >> i & 1 == 1 {
                    sum -= d;
                } else {
                    sum += d;
                }
            }
            if (sum / n as f64).abs() >= observed_abs {
                hits += 1;
            }
        }
        (hits, total)
    } else {
        let mut rng = stream(seed, "signflip", &[]);
        let mut hits = 0u64;
        for _ in 0..n_permutations {
            let mut sum = 0.0;
            for d in &diffs {
                if rng.gen_bool(0.5) {
                    sum -= d;
                } else {
                    sum += d;
                }
            }
            if (sum / n as f64).abs() >= observed_abs {
                hits += 1;
            }
        }
        (hits, n_permutations as u64)
    };

    let sd = sample_sd(&diffs);
    let half_width = 1.96 * sd / (n as f64).sqrt();
    Ok(ModelComparison {
        mean_difference: observed,
        ci_95: (observed - half_width, observed + half_width),
        p_value: hits as f64 / total as f64,
        n_pairs: n,
        exhaustive,
        n_permutations: total as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn rec(id: &str, time: f64, event: bool) -> SurvivalRecord {
        SurvivalRecord::new(id, time, event).unwrap()
    }

    /// Synthetic feature/outcome set with a single informative column.
    fn toy_cohort(n: usize, seed: u64, informative: bool) -> (Array2<f64>, Vec<SurvivalRecord>) {
        let mut rng = stream(seed, "val-toy", &[]);
        let mut features = Array2::zeros((n, 3));
        let mut outcomes = Vec::with_capacity(n);
        for i in 0..n {
            let risk: f64 = rng.gen_range(-1.0..1.0);
            features[[i, 0]] = if informative { risk + 0.3 * rng.gen_range(-1.0..1.0) } else { rng.gen_range(-1.0..1.0) };
            features[[i, 1]] = rng.gen_range(-1.0..1.0);
            features[[i, 2]] = rng.gen_range(-1.0..1.0);
            let u: f64 = rng.gen_range(1e-12..1.0);
            let time = -u.ln() / (0.002 * (1.2 * risk).exp());
            let censor: f64 = rng.gen_range(0.0..1500.0);
            outcomes.push(rec(&format!("s{i}"), time.min(censor), time <= censor));
        }
        (features, outcomes)
    }

    /// Trainer that ignores the data and scores by a fixed projection.
    struct FixedProjectionTrainer;
    struct FixedProjection;

    impl RiskScorer for FixedProjection {
        fn scores(&self, features: &Array2<f64>) -> Result<Vec<f64>> {
            Ok(features.rows().into_iter().map(|r| r[0]).collect())
        }
    }

    impl Trainer for FixedProjectionTrainer {
        type Hyper = ();
        fn select_hyperparameters(
            &self,
            _: &Array2<f64>,
            _: &[SurvivalRecord],
            _: u64,
        ) -> Result<()> {
            Ok(())
        }
        fn fit(
            &self,
            _: &Array2<f64>,
            _: &[SurvivalRecord],
            _: &(),
            _: u64,
        ) -> Result<Box<dyn RiskScorer>> {
            Ok(Box::new(FixedProjection))
        }
    }

    #[test]
    fn report_identities_hold_exactly() {
        let (x, y) = toy_cohort(60, 5, true);
        let report = bootstrap_optimism(
            &FixedProjectionTrainer,
            &x,
            &y,
            &BootstrapOptions { replicates: 20, seed: 3, ..Default::default() },
        )
        .unwrap();
        let included: Vec<&ReplicateOutcome> =
            report.replicates.iter().filter(|r| !r.excluded).collect();
        let mean: f64 =
            included.iter().map(|r| r.optimism).sum::<f64>() / included.len() as f64;
        assert_eq!(report.mean_optimism, mean);
        assert_eq!(report.corrected_c, report.apparent_c - report.mean_optimism);
        for r in &included {
            assert_eq!(r.optimism, r.bootstrap_c - r.test_c);
        }
        assert_eq!(report.n_excluded, 0);
    }

    #[test]
    fn resamples_are_seed_deterministic() {
        let (x, y) = toy_cohort(40, 6, true);
        let opts = BootstrapOptions { replicates: 10, seed: 11, ..Default::default() };
        let a = bootstrap_optimism(&FixedProjectionTrainer, &x, &y, &opts).unwrap();
        let b = bootstrap_optimism(&FixedProjectionTrainer, &x, &y, &opts).unwrap();
        for (ra, rb) in a.replicates.iter().zip(&b.replicates) {
            assert_eq!(ra.resample_fingerprint, rb.resample_fingerprint);
            assert_eq!(ra.bootstrap_c, rb.bootstrap_c);
        }
    }

    #[test]
    fn data_ignoring_trainer_has_near_zero_optimism() {
        let (x, y) = toy_cohort(150, 7, true);
        let report = bootstrap_optimism(
            &FixedProjectionTrainer,
            &x,
            &y,
            &BootstrapOptions { replicates: 60, seed: 2, ..Default::default() },
        )
        .unwrap();
        assert!(
            report.mean_optimism.abs() < 0.03,
            "mean optimism {}",
            report.mean_optimism
        );
    }

    #[test]
    fn stratify_even_and_odd() {
        let outcomes: Vec<SurvivalRecord> =
            (0..4).map(|i| rec(&format!("s{i}"), (i + 1) as f64, true)).collect();
        let groups = stratify_by_median_risk(&[1.0, 2.0, 3.0, 4.0], &outcomes).unwrap();
        assert_eq!(groups.low_indices, vec![0, 1]);
        assert_eq!(groups.high_indices, vec![2, 3]);

        let outcomes3: Vec<SurvivalRecord> =
            (0..3).map(|i| rec(&format!("s{i}"), (i + 1) as f64, true)).collect();
        let groups = stratify_by_median_risk(&[1.0, 2.0, 3.0], &outcomes3).unwrap();
        assert_eq!(groups.low_indices, vec![0, 1]);
        assert_eq!(groups.high_indices, vec![2]);
    }

    #[test]
    fn stratify_identical_risks_is_undefined() {
        let outcomes: Vec<SurvivalRecord> =
            (0..4).map(|i| rec(&format!("s{i}"), (i + 1) as f64, true)).collect();
        assert!(matches!(
            stratify_by_median_risk(&[2.0; 4], &outcomes).unwrap_err(),
            Error::Undefined(_)
        ));
    }

    #[test]
    fn benchmark_learns_informative_covariate() {
        let (x, y) = toy_cohort(120, 8, true);
        let model = benchmark_conventional(&x, &y, 4).unwrap();
        assert!(model.fit.converged);
        let risks = model.scores(&x).unwrap();
        let c = concordance_index(&risks, &y, TiePolicy::HalfCredit).unwrap();
        assert!(c > 0.6, "apparent C {c}");
    }

    #[test]
    fn benchmark_duplicated_covariates_get_equal_coefficients() {
        let (x, y) = toy_cohort(80, 9, true);
        let mut dup = Array2::zeros((x.nrows(), 2));
        for i in 0..x.nrows() {
            dup[[i, 0]] = x[[i, 0]];
            dup[[i, 1]] = x[[i, 0]];
        }
        let model = benchmark_conventional(&dup, &y, 5).unwrap();
        if model.selected_lambda > 0.0 {
            let b = &model.fit.coefficients;
            assert!((b[0] - b[1]).abs() < 1e-6, "{b:?}");
        }
    }

    #[test]
    fn compare_model_with_itself_is_null() {
        let (x, y) = toy_cohort(50, 10, true);
        let opts = BootstrapOptions { replicates: 10, seed: 21, ..Default::default() };
        let report = bootstrap_optimism(&FixedProjectionTrainer, &x, &y, &opts).unwrap();
        let cmp = compare_models(&report, &report, DEFAULT_PERMUTATIONS, 1).unwrap();
        assert_eq!(cmp.mean_difference, 0.0);
        assert_eq!(cmp.p_value, 1.0);
        assert!(cmp.exhaustive);
    }

    #[test]
    fn compare_requires_shared_resamples() {
        let (x, y) = toy_cohort(50, 12, true);
        let a = bootstrap_optimism(
            &FixedProjectionTrainer,
            &x,
            &y,
            &BootstrapOptions { replicates: 8, seed: 1, ..Default::default() },
        )
        .unwrap();
        let b = bootstrap_optimism(
            &FixedProjectionTrainer,
            &x,
            &y,
            &BootstrapOptions { replicates: 8, seed: 2, ..Default::default() },
        )
        .unwrap();
        assert!(compare_models(&a, &b, DEFAULT_PERMUTATIONS, 1).is_err());
    }

    #[test]
    fn permutation_matches_exhaustive_enumeration_for_small_b() {
        // sampled path with a huge sample count approximates the exhaustive
        // p-value; the exhaustive path must be exact, so compare it against
        // a literal re-enumeration here
        let diffs = [0.03, -0.01, 0.02, 0.05, -0.02, 0.01, 0.04, -0.03];
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let mut hits = 0u64;
        let total = 1u64 << diffs.len();
        for pattern in 0..total {
            let mut s = 0.0;
            for (i, d) in diffs.iter().enumerate() {
                s += if pattern >> i & 1 == 1 { -d } else { *d };
            }
            if (s / diffs.len() as f64).abs() >= mean.abs() {
                hits += 1;
            }
        }
        let expected = hits as f64 / total as f64;

        // feed the same diffs through compare_models via two synthetic reports
        let make_report = |offset: &[f64]| ValidationReport {
            apparent_c: 0.8,
            replicates: offset
                .iter()
                .enumerate()
                .map(|(i, &o)| ReplicateOutcome {
                    index: i,
                    bootstrap_c: 0.8,
                    test_c: 0.8 - o,
                    optimism: o,
                    excluded: false,
                    note: None,
                    resample_fingerprint: i as u64,
                })
                .collect(),
            mean_optimism: 0.0,
            corrected_c: 0.8,
            ci_95: (0.0, 1.0),
            ci_method: String::new(),
            n_replicates: offset.len(),
            n_excluded: 0,
            fast_validation: false,
            evaluation_set_fingerprint: 0,
        };
        // report A has optimism 0 everywhere; report B's optimism equals diffs,
        // so corrected_a - corrected_b = diffs
        let report_a = make_report(&vec![0.0; diffs.len()]);
        let report_b = make_report(&diffs);
        let cmp = compare_models(&report_a, &report_b, DEFAULT_PERMUTATIONS, 0).unwrap();
        assert!(cmp.exhaustive);
        assert_eq!(cmp.p_value, expected);
        assert!((cmp.mean_difference - mean).abs() < 1e-15);
    }
}
