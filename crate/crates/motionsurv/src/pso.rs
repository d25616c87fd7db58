//! Global-best particle swarm optimization over bounded hyperparameter
//! spaces, and the cross-validated concordance objective used to score
//! network hyperparameter candidates.
//!
//! Axes may be linear or log-scaled (log axes are searched in log10
//! coordinates, so initialization is log-uniform) and may be flagged as
//! integer-valued, in which case the swarm moves continuously and the value
//! is rounded only when handed to the objective. Positions are clamped to
//! their bounds after every move, zeroing the offending velocity component.
//!
//! Every particle evaluation receives an [`EvalContext`] carrying a seed
//! derived from (master seed, iteration, particle), so stochastic objectives
//! (cross-validated training runs) are reproducible and independent of
//! evaluation order; evaluations within an iteration run in parallel.

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{self, NetworkSpec, TrainConfig};
use crate::rng::{stream, subseed};
use crate::survival::{concordance_index, has_informative_pair, SurvivalRecord, TiePolicy};

/// Scale of a search axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisScale {
    Linear,
    /// Searched in log10 coordinates; bounds are given in natural units.
    Log,
}

/// One bounded hyperparameter axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchAxis {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: AxisScale,
    pub integer: bool,
}

impl SearchAxis {
    pub fn linear(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), lower, upper, scale: AxisScale::Linear, integer: false }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), lower, upper, scale: AxisScale::Linear, integer: true }
    }

    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), lower, upper, scale: AxisScale::Log, integer: false }
    }

    fn internal_bounds(&self) -> (f64, f64) {
        match self.scale {
            AxisScale::Linear => (self.lower, self.upper),
            AxisScale::Log => (self.lower.log10(), self.upper.log10()),
        }
    }

    /// Map an internal coordinate to the value handed to the objective.
    fn decode(&self, internal: f64) -> f64 {
        let natural = match self.scale {
            AxisScale::Linear => internal,
            AxisScale::Log => 10f64.powf(internal),
        };
        if self.integer {
            natural.round()
        } else {
            natural
        }
    }
}

/// A bounded box of search axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    pub axes: Vec<SearchAxis>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidConfig("search space needs at least one axis".into()));
        }
        for axis in &self.axes {
            if !(axis.lower < axis.upper) {
                return Err(Error::InvalidConfig(format!(
                    "axis {}: lower bound {} must be below upper bound {}",
                    axis.name, axis.lower, axis.upper
                )));
            }
            if axis.scale == AxisScale::Log && axis.lower <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "axis {}: log scale requires positive bounds",
                    axis.name
                )));
            }
        }
        Ok(())
    }

    /// The six tunable network hyperparameters with their search ranges:
    /// dropout [0.1, 0.9], hidden units [75, 250] (integer), latent
    /// dimension [5, 20] (integer), alpha [0.3, 0.7], learning rate
    /// [1e-6, 10^-4.5] (log), L1 penalty [1e-7, 1e-4] (log).
    pub fn network_hyperparameters() -> Self {
        Self {
            axes: vec![
                SearchAxis::linear("dropout", 0.1, 0.9),
                SearchAxis::integer("hidden_units", 75.0, 250.0),
                SearchAxis::integer("latent_dim", 5.0, 20.0),
                SearchAxis::linear("alpha", 0.3, 0.7),
                SearchAxis::log("learning_rate", 1e-6, 10f64.powf(-4.5)),
                SearchAxis::log("l1_penalty", 1e-7, 1e-4),
            ],
        }
    }
}

/// Swarm constants. Defaults: 20 particles, 50 iterations, constriction
/// style inertia 0.729 with cognitive/social constants 1.494, 6 CV folds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    pub cv_folds: usize,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles: 20,
            n_iterations: 50,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            seed: 0,
            cv_folds: 6,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidConfig("n_particles must be >= 2".into()));
        }
        if self.n_iterations < 1 {
            return Err(Error::InvalidConfig("n_iterations must be >= 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidConfig("cv_folds must be >= 2".into()));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Identity of one objective evaluation; `eval_seed` is derived from the
/// master seed, the iteration and the particle id.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext {
    pub iteration: usize,
    pub particle: usize,
    pub eval_seed: u64,
}

/// One trace row per (iteration, particle) evaluation. Positions are in
/// natural units with integer axes rounded, i.e. what the objective saw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub particle: usize,
    pub position: Vec<f64>,
    pub score: f64,
    pub gbest_score: f64,
}

/// Result of a swarm run.
#[derive(Debug, Clone)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_score: f64,
    pub trace: Vec<TraceRow>,
}

/// Maximize `objective` over `space` with global-best PSO.
///
/// The uniformly initialized swarm is evaluated once (iteration 0, not part
/// of the trace), then each of the `n_iterations` rounds applies the
/// velocity update
/// `v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)`, moves and clamps, and
/// re-evaluates. The global best after the final iteration is returned
/// (best-so-far, since gbest never regresses). An objective returning NaN is
/// treated as negative infinity with a warning.
pub fn pso_optimize<F>(objective: F, space: &SearchSpace, config: &SwarmConfig) -> Result<PsoResult>
where
    F: Fn(&[f64], &EvalContext) -> f64 + Sync,
{
    space.validate()?;
    config.validate()?;
    let dims = space.axes.len();
    let bounds: Vec<(f64, f64)> = space.axes.iter().map(|a| a.internal_bounds()).collect();

    // uniform initialization in internal coordinates; zero initial velocity
    let mut positions: Vec<Vec<f64>> = (0..config.n_particles)
        .map(|p| {
            let mut rng = stream(config.seed, "pso-init", &[p as u64]);
            bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
        })
        .collect();
    let mut velocities: Vec<Vec<f64>> = vec![vec![0.0; dims]; config.n_particles];
    let mut pbest_pos = positions.clone();
    let mut pbest_score = vec![f64::NEG_INFINITY; config.n_particles];
    let mut gbest_pos = positions[0].clone();
    let mut gbest_score = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(config.n_particles * config.n_iterations);

    for iteration in 0..=config.n_iterations {
        if iteration > 0 {
            for p in 0..config.n_particles {
                let mut rng = stream(config.seed, "pso-velocity", &[iteration as u64, p as u64]);
                for d in 0..dims {
                    let r1: f64 = rng.gen_range(0.0..1.0);
                    let r2: f64 = rng.gen_range(0.0..1.0);
                    velocities[p][d] = config.inertia * velocities[p][d]
                        + config.cognitive * r1 * (pbest_pos[p][d] - positions[p][d])
                        + config.social * r2 * (gbest_pos[d] - positions[p][d]);
                    positions[p][d] += velocities[p][d];
                    let (lo, hi) = bounds[d];
                    if positions[p][d] < lo {
                        positions[p][d] = lo;
                        velocities[p][d] = 0.0;
                    } else if positions[p][d] > hi {
                        positions[p][d] = hi;
                        velocities[p][d] = 0.0;
                    }
                }
            }
        }

        let decoded: Vec<Vec<f64>> = positions
            .iter()
            .map(|pos| pos.iter().zip(&space.axes).map(|(&x, a)| a.decode(x)).collect())
            .collect();
        let scores: Vec<f64> = decoded
            .par_iter()
            .enumerate()
            .map(|(p, values)| {
                let ctx = EvalContext {
                    iteration,
                    particle: p,
                    eval_seed: subseed(config.seed, "pso-eval", &[iteration as u64, p as u64]),
                };
                let score = objective(values, &ctx);
                if score.is_nan() {
                    log::warn!(
                        "objective returned NaN at iteration {iteration}, particle {p}; scoring as -inf"
                    );
                    f64::NEG_INFINITY
                } else {
                    score
                }
            })
            .collect();

        // sequential reduction in particle order keeps the run deterministic
        for p in 0..config.n_particles {
            if scores[p] > pbest_score[p] {
                pbest_score[p] = scores[p];
                pbest_pos[p] = positions[p].clone();
            }
            if scores[p] > gbest_score {
                gbest_score = scores[p];
                gbest_pos = positions[p].clone();
            }
        }
        if iteration > 0 {
            for p in 0..config.n_particles {
                trace.push(TraceRow {
                    iteration,
                    particle: p,
                    position: decoded[p].clone(),
                    score: scores[p],
                    gbest_score,
                });
            }
        }
    }

    let best_position: Vec<f64> =
        gbest_pos.iter().zip(&space.axes).map(|(&x, a)| a.decode(x)).collect();
    Ok(PsoResult { best_position, best_score: gbest_score, trace })
}

/// Decode a position on the [`SearchSpace::network_hyperparameters`] axes
/// into a network spec for the given input dimensionality.
pub fn spec_from_position(position: &[f64], input_dim: usize) -> Result<NetworkSpec> {
    if position.len() != 6 {
        return Err(Error::InvalidInput(format!(
            "hyperparameter position has {} axes, expected 6",
            position.len()
        )));
    }
    let spec = NetworkSpec {
        input_dim,
        hidden_units: position[1] as usize,
        latent_dim: position[2] as usize,
        dropout_rate: position[0],
        alpha: position[3],
        learning_rate: position[4],
        l1_penalty: position[5],
    };
    spec.validate()?;
    Ok(spec)
}

/// K-fold cross-validated concordance objective over network
/// hyperparameters.
///
/// The fold partition is drawn once from the seed and redrawn (bounded
/// retries) until every fold contains at least one event and one
/// informative pair, so the held-out concordance is always defined.
pub struct CvObjective {
    features: Array2<f64>,
    outcomes: Vec<SurvivalRecord>,
    folds: Vec<Vec<usize>>,
    epochs: usize,
    batch_size: usize,
}

impl CvObjective {
    pub fn new(
        features: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        n_folds: usize,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_folds < 2 {
            return Err(Error::InvalidConfig("cross-validation needs >= 2 folds".into()));
        }
        let n = features.nrows();
        if n != outcomes.len() {
            return Err(Error::InvalidInput(format!(
                "feature rows ({n}) and outcomes ({}) differ",
                outcomes.len()
            )));
        }
        if n < n_folds {
            return Err(Error::InvalidConfig(format!(
                "cannot split {n} subjects into {n_folds} folds"
            )));
        }
        let folds = draw_event_valid_folds(outcomes, n_folds, seed, 100)?;
        Ok(Self {
            features: features.clone(),
            outcomes: outcomes.to_vec(),
            folds,
            epochs,
            batch_size,
        })
    }

    pub fn fold_assignment(&self) -> &[Vec<usize>] {
        &self.folds
    }

    /// Mean held-out concordance across folds for an arbitrary trainer:
    /// `train_fn(train_x, train_outcomes, fold_seed)` returns a scoring
    /// closure over a feature matrix, or None on failure (scored NaN).
    pub fn cross_validate<T>(&self, eval_seed: u64, train_fn: T) -> f64
    where
        T: Fn(&Array2<f64>, &[SurvivalRecord], u64) -> Option<Box<dyn Fn(&Array2<f64>) -> Vec<f64>>>,
    {
        let mut total = 0.0;
        for (fold_ix, held_out) in self.folds.iter().enumerate() {
            let train_indices: Vec<usize> = (0..self.features.nrows())
                .filter(|i| !held_out.contains(i))
                .collect();
            let train_x = self.features.select(Axis(0), &train_indices);
            let train_outcomes: Vec<SurvivalRecord> =
                train_indices.iter().map(|&i| self.outcomes[i].clone()).collect();
            let fold_seed = subseed(eval_seed, "cv-fold", &[fold_ix as u64]);
            let scorer = match train_fn(&train_x, &train_outcomes, fold_seed) {
                Some(s) => s,
                None => return f64::NAN,
            };
            let held_x = self.features.select(Axis(0), held_out);
            let held_outcomes: Vec<SurvivalRecord> =
                held_out.iter().map(|&i| self.outcomes[i].clone()).collect();
            let risks = scorer(&held_x);
            match concordance_index(&risks, &held_outcomes, TiePolicy::HalfCredit) {
                Ok(c) => total += c,
                Err(_) => return f64::NAN,
            }
        }
        total / self.folds.len() as f64
    }

    /// The PSO objective: decode the position, train per fold, return the
    /// mean held-out concordance (NaN on any failure, which the swarm
    /// scores as negative infinity).
    pub fn evaluate(&self, position: &[f64], ctx: &EvalContext) -> f64 {
        let spec = match spec_from_position(position, self.features.ncols()) {
            Ok(s) => s,
            Err(_) => return f64::NAN,
        };
        let epochs = self.epochs;
        let batch_size = self.batch_size;
        self.cross_validate(ctx.eval_seed, move |x, outcomes, fold_seed| {
            let config =
                TrainConfig { epochs, batch_size: batch_size.min(x.nrows()), seed: fold_seed };
            match net::train(&spec, x, outcomes, &config) {
                Ok(trained) => {
                    let model = trained.model;
                    Some(Box::new(move |held: &Array2<f64>| {
                        model.predict_risks(held).unwrap_or_else(|_| vec![f64::NAN; held.nrows()])
                    }) as Box<dyn Fn(&Array2<f64>) -> Vec<f64>>)
                }
                Err(e) => {
                    log::warn!("fold training failed: {e}");
                    None
                }
            }
        })
    }
}

/// Seeded k-fold partition where every fold has at least one event and at
/// least one informative pair; redraws with fresh sub-streams up to
/// `max_attempts` times.
pub fn draw_event_valid_folds(
    outcomes: &[SurvivalRecord],
    n_folds: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<Vec<Vec<usize>>> {
    let n = outcomes.len();
    for attempt in 0..max_attempts {
        let mut rng = stream(seed, "cv-partition", &[attempt as u64]);
        let mut indices: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let mut folds: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
        for (pos, &ix) in indices.iter().enumerate() {
            folds[pos % n_folds].push(ix);
        }
        let valid = folds.iter().all(|fold| {
            let fold_outcomes: Vec<SurvivalRecord> =
                fold.iter().map(|&i| outcomes[i].clone()).collect();
            fold_outcomes.iter().any(|o| o.event) && has_informative_pair(&fold_outcomes)
        });
        if valid {
            if attempt > 0 {
                log::warn!("fold partition redrawn {attempt} time(s) to satisfy event constraints");
            }
            return Ok(folds);
        }
    }
    Err(Error::InvalidConfig(format!(
        "could not form {n_folds} folds with events and informative pairs in {max_attempts} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_space(dims: usize) -> SearchSpace {
        SearchSpace {
            axes: (0..dims).map(|i| SearchAxis::linear(&format!("x{i}"), -5.0, 5.0)).collect(),
        }
    }

    #[test]
    fn sphere_5d_converges_near_origin() {
        let config = SwarmConfig { n_particles: 30, n_iterations: 50, seed: 4, ..Default::default() };
        let result = pso_optimize(
            |x, _| -x.iter().map(|v| v * v).sum::<f64>(),
            &sphere_space(5),
            &config,
        )
        .unwrap();
        assert!(result.best_score > -1e-3, "best {}", result.best_score);
    }

    #[test]
    fn constant_objective_keeps_an_initial_position() {
        let config = SwarmConfig { n_particles: 8, n_iterations: 5, seed: 1, ..Default::default() };
        let space = sphere_space(3);
        let result = pso_optimize(|_, _| 2.5, &space, &config).unwrap();
        assert_eq!(result.best_score, 2.5);
        // gbest equals particle 0's initial decoded position under strict improvement
        let first_block: Vec<&TraceRow> =
            result.trace.iter().filter(|r| r.iteration == 1).collect();
        assert_eq!(result.best_position, first_block[0].position);
    }

    #[test]
    fn rosenbrock_2d_gets_close() {
        let space = SearchSpace {
            axes: vec![SearchAxis::linear("x", -2.0, 2.0), SearchAxis::linear("y", -2.0, 2.0)],
        };
        let config = SwarmConfig { n_particles: 20, n_iterations: 50, seed: 6, ..Default::default() };
        let result = pso_optimize(
            |p, _| {
                let (x, y) = (p[0], p[1]);
                -((1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2))
            },
            &space,
            &config,
        )
        .unwrap();
        assert!(result.best_score > -0.1, "best {}", result.best_score);
    }

    #[test]
    fn positions_stay_in_bounds_and_gbest_is_monotone() {
        let space = SearchSpace {
            axes: vec![
                SearchAxis::linear("a", -1.0, 1.0),
                SearchAxis::log("b", 1e-6, 1e-2),
                SearchAxis::integer("c", 2.0, 9.0),
            ],
        };
        let config = SwarmConfig { n_particles: 12, n_iterations: 30, seed: 9, ..Default::default() };
        let result = pso_optimize(
            |x, _| -(x[0] * x[0]) - (x[1].log10() + 4.0).powi(2) - (x[2] - 5.0).powi(2),
            &space,
            &config,
        )
        .unwrap();
        let mut last_gbest = f64::NEG_INFINITY;
        for row in &result.trace {
            assert!(row.position[0] >= -1.0 && row.position[0] <= 1.0);
            assert!(
                row.position[1] >= 1e-6 * (1.0 - 1e-12) && row.position[1] <= 1e-2 * (1.0 + 1e-12)
            );
            assert!(row.position[2] >= 2.0 && row.position[2] <= 9.0);
            assert_eq!(row.position[2], row.position[2].round(), "integer axis not rounded");
            if row.particle == config.n_particles - 1 {
                assert!(row.gbest_score >= last_gbest);
                last_gbest = row.gbest_score;
            }
        }
    }

    #[test]
    fn nan_objective_scores_negative_infinity() {
        let space = sphere_space(2);
        let config = SwarmConfig { n_particles: 4, n_iterations: 3, seed: 2, ..Default::default() };
        let result = pso_optimize(
            |x, _| if x[0] > 0.0 { f64::NAN } else { -x[0] },
            &space,
            &config,
        )
        .unwrap();
        assert!(result.best_score.is_finite());
        assert!(result.trace.iter().all(|r| !r.score.is_nan()));
    }

    #[test]
    fn fixed_seed_reproduces_full_trace() {
        let space = sphere_space(4);
        let config = SwarmConfig { n_particles: 10, n_iterations: 15, seed: 33, ..Default::default() };
        let f = |x: &[f64], _: &EvalContext| -x.iter().map(|v| v.abs()).sum::<f64>();
        let a = pso_optimize(f, &space, &config).unwrap();
        let b = pso_optimize(f, &space, &config).unwrap();
        assert_eq!(a.best_position, b.best_position);
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.position, rb.position);
            assert_eq!(ra.score, rb.score);
            assert_eq!(ra.gbest_score, rb.gbest_score);
        }
    }

    #[test]
    fn log_axes_initialize_log_uniformly() {
        // Kolmogorov-Smirnov check of initial log10(learning_rate) positions
        // against uniform on the internal interval; alpha = 0.01.
        let axis = SearchAxis::log("learning_rate", 1e-6, 10f64.powf(-4.5));
        let (lo, hi) = axis.internal_bounds();
        let n = 10_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|p| {
                let mut rng = stream(77, "pso-init", &[p as u64]);
                rng.gen_range(lo..hi)
            })
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d_stat: f64 = 0.0;
        for (i, &x) in draws.iter().enumerate() {
            let cdf = (x - lo) / (hi - lo);
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            d_stat = d_stat.max((cdf - emp_lo).abs()).max((emp_hi - cdf).abs());
        }
        // critical value at alpha = 0.01: 1.628 / sqrt(n)
        assert!(d_stat < 1.628 / (n as f64).sqrt(), "KS statistic {d_stat}");
    }

    #[test]
    fn eval_seeds_differ_by_particle_and_iteration() {
        let space = sphere_space(1);
        let config = SwarmConfig { n_particles: 3, n_iterations: 2, seed: 5, ..Default::default() };
        let seen = std::sync::Mutex::new(Vec::new());
        pso_optimize(
            |_, ctx| {
                seen.lock().unwrap().push(ctx.eval_seed);
                0.0
            },
            &space,
            &config,
        )
        .unwrap();
        let mut seeds = seen.into_inner().unwrap();
        seeds.sort_unstable();
        let before = seeds.len();
        seeds.dedup();
        assert_eq!(before, seeds.len(), "evaluation seeds must be unique");
    }

    #[test]
    fn folds_cover_everything_and_contain_events() {
        let outcomes: Vec<SurvivalRecord> = (0..23)
            .map(|i| SurvivalRecord::new(format!("s{i}"), (i + 1) as f64, i % 3 == 0).unwrap())
            .collect();
        let folds = draw_event_valid_folds(&outcomes, 4, 11, 100).unwrap();
        assert_eq!(folds.len(), 4);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for fold in &folds {
            assert!(fold.iter().any(|&i| outcomes[i].event));
        }
    }

    #[test]
    fn fold_partition_is_deterministic() {
        let outcomes: Vec<SurvivalRecord> = (0..40)
            .map(|i| SurvivalRecord::new(format!("s{i}"), (i + 1) as f64, i % 2 == 0).unwrap())
            .collect();
        let a = draw_event_valid_folds(&outcomes, 6, 3, 100).unwrap();
        let b = draw_event_valid_folds(&outcomes, 6, 3, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_fold_constraint_errors() {
        // single event cannot appear in both folds
        let outcomes = vec![
            SurvivalRecord::new("a", 1.0, true).unwrap(),
            SurvivalRecord::new("b", 2.0, false).unwrap(),
            SurvivalRecord::new("c", 3.0, false).unwrap(),
            SurvivalRecord::new("d", 4.0, false).unwrap(),
        ];
        assert!(draw_event_valid_folds(&outcomes, 2, 0, 20).is_err());
    }

    #[test]
    fn constant_risk_scorer_scores_half() {
        let mut outcomes = Vec::new();
        for i in 0..24 {
            outcomes
                .push(SurvivalRecord::new(format!("s{i}"), (i + 1) as f64, i % 2 == 0).unwrap());
        }
        let features = Array2::from_shape_fn((24, 3), |(i, j)| (i * 3 + j) as f64);
        let objective = CvObjective::new(&features, &outcomes, 4, 1, 4, 9).unwrap();
        let score = objective.cross_validate(123, |_, _, _| {
            Some(Box::new(|x: &Array2<f64>| vec![0.7; x.nrows()]))
        });
        assert_eq!(score, 0.5);
    }
}
