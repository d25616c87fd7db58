//! Survival-analysis primitives: right-censored outcomes, the Cox partial
//! likelihood and its gradient with respect to per-subject risk scores,
//! ridge-penalized Cox fitting, Harrell's concordance index, the
//! Kaplan-Meier estimator with Greenwood confidence bands, and the two-group
//! log-rank test.
//!
//! Conventions used throughout:
//! - the risk set of subject `i` is `{ j : t_j >= t_i }` (subject `i` is a
//!   member of its own risk set);
//! - tied event times are handled with the Breslow approximation (all events
//!   at a tied time share the full risk-set denominator);
//! - all log-sum-exp computations subtract the running maximum.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;

/// A right-censored time-to-event outcome for one subject.
/// `event` is true when death was observed, false when censored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub subject_id: String,
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(subject_id: impl Into<String>, time: f64, event: bool) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidInput(format!(
                "survival time must be finite and >= 0, got {time}"
            )));
        }
        Ok(Self { subject_id: subject_id.into(), time, event })
    }

    /// Event indicator as a real number (1 = event, 0 = censored).
    pub fn delta(&self) -> f64 {
        if self.event {
            1.0
        } else {
            0.0
        }
    }
}

/// Subjects still under observation at subject `i`'s outcome time,
/// `{ j : t_j >= t_i }`, including `i` itself.
pub fn risk_set(outcomes: &[SurvivalRecord], i: usize) -> Vec<usize> {
    let t = outcomes[i].time;
    (0..outcomes.len()).filter(|&j| outcomes[j].time >= t).collect()
}

fn validate_pair(risks: &[f64], outcomes: &[SurvivalRecord]) -> Result<()> {
    if risks.len() != outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "risks ({}) and outcomes ({}) lengths differ",
            risks.len(),
            outcomes.len()
        )));
    }
    if risks.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("risks must be finite".into()));
    }
    if outcomes.iter().any(|o| !o.time.is_finite() || o.time < 0.0) {
        return Err(Error::InvalidInput("outcome times must be finite and >= 0".into()));
    }
    Ok(())
}

/// Indices sorted by outcome time descending (ties broken by index for
/// determinism). The prefix of this order up to and including the tied group
/// of time `t` is exactly the risk set at `t`.
fn descending_time_order(outcomes: &[SurvivalRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| {
        outcomes[b]
            .time
            .partial_cmp(&outcomes[a].time)
            .unwrap()
            .then(a.cmp(&b))
    });
    order
}

/// Streaming log-sum-exp accumulator (max-shifted).
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn push(&mut self, x: f64) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Negative log Cox partial likelihood of per-subject risk scores.
///
/// Returns `-sum_{i: event} [ eta_i - log sum_{j: t_j >= t_i} exp(eta_j) ]`
/// with Breslow handling of tied event times. An all-censored sample has an
/// empty event sum and yields 0.
pub fn cox_neg_log_partial_likelihood(
    risks: &[f64],
    outcomes: &[SurvivalRecord],
) -> Result<f64> {
    validate_pair(risks, outcomes)?;
    let order = descending_time_order(outcomes);
    let mut lse = LogSumExp::new();
    let mut neg_ll = 0.0;
    let mut pos = 0;
    while pos < order.len() {
        let t = outcomes[order[pos]].time;
        // insert the whole tied group before emitting any of its event terms
        let mut end = pos;
        while end < order.len() && outcomes[order[end]].time == t {
            lse.push(risks[order[end]]);
            end += 1;
        }
        let log_denom = lse.value();
        for &i in &order[pos..end] {
            if outcomes[i].event {
                neg_ll += log_denom - risks[i];
            }
        }
        pos = end;
    }
    Ok(neg_ll)
}

/// Exact gradient of [`cox_neg_log_partial_likelihood`] with respect to each
/// risk score: `d(-ll)/d(eta_k) = sum_{events i: t_i <= t_k} exp(eta_k - log D_i) - delta_k`
/// where `D_i` is the risk-set denominator of event `i`. Every exponent is
/// <= 0 because `k` belongs to each risk set it contributes to.
pub fn cox_gradient_wrt_risks(risks: &[f64], outcomes: &[SurvivalRecord]) -> Result<Vec<f64>> {
    validate_pair(risks, outcomes)?;
    let order = descending_time_order(outcomes);

    // log denominator per event, recorded in descending-time order
    let mut event_terms: Vec<(f64, f64)> = Vec::new(); // (event time, log denom)
    {
        let mut lse = LogSumExp::new();
        let mut pos = 0;
        while pos < order.len() {
            let t = outcomes[order[pos]].time;
            let mut end = pos;
            while end < order.len() && outcomes[order[end]].time == t {
                lse.push(risks[order[end]]);
                end += 1;
            }
            let log_denom = lse.value();
            for &i in &order[pos..end] {
                if outcomes[i].event {
                    event_terms.push((t, log_denom));
                }
            }
            pos = end;
        }
    }

    let mut grad = vec![0.0; risks.len()];
    for k in 0..risks.len() {
        let mut acc = 0.0;
        for &(t_i, log_d) in &event_terms {
            if t_i <= outcomes[k].time {
                acc += (risks[k] - log_d).exp();
            }
        }
        grad[k] = acc - outcomes[k].delta();
    }
    Ok(grad)
}

/// Result of a ridge-penalized Cox regression fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoxFit {
    pub coefficients: Vec<f64>,
    pub ridge_penalty: f64,
    pub converged: bool,
    pub n_iterations: usize,
    /// Penalized log partial likelihood at the returned coefficients.
    pub objective: f64,
    /// Objective after each accepted Newton step (starting from beta = 0);
    /// non-decreasing by construction of the step-halving line search.
    pub objective_trace: Vec<f64>,
}

impl CoxFit {
    /// Linear risk score `beta' x` for a covariate vector.
    pub fn risk(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

/// Penalized log partial likelihood `ll(beta) - lambda/2 * ||beta||^2`.
fn penalized_objective(
    covariates: &Array2<f64>,
    outcomes: &[SurvivalRecord],
    lambda: f64,
    beta: &[f64],
) -> Result<f64> {
    let eta = linear_predictor(covariates, beta);
    let ll = -cox_neg_log_partial_likelihood(&eta, outcomes)?;
    let penalty = 0.5 * lambda * beta.iter().map(|b| b * b).sum::<f64>();
    Ok(ll - penalty)
}

fn linear_predictor(covariates: &Array2<f64>, beta: &[f64]) -> Vec<f64> {
    covariates
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect()
}

/// Fit a Cox proportional-hazards model with an L2 (ridge) penalty on the
/// coefficients by Newton iterations with step-halving.
///
/// Maximizes `log PL(beta) - lambda/2 ||beta||^2`. Converged when the
/// gradient sup-norm drops below 1e-8; gives up (with `converged = false`,
/// not an error) after 100 iterations.
pub fn fit_cox_l2(
    covariates: &Array2<f64>,
    outcomes: &[SurvivalRecord],
    lambda: f64,
) -> Result<CoxFit> {
    let n = covariates.nrows();
    let p = covariates.ncols();
    if p == 0 {
        return Err(Error::InvalidInput("at least one covariate required".into()));
    }
    if n != outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "covariate rows ({n}) and outcomes ({}) differ",
            outcomes.len()
        )));
    }
    if covariates.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("covariates must be finite".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }

    const GRAD_TOL: f64 = 1e-8;
    const MAX_ITER: usize = 100;

    let order = descending_time_order(outcomes);
    let mut beta = vec![0.0; p];
    let mut objective = penalized_objective(covariates, outcomes, lambda, &beta)?;
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..MAX_ITER {
        let eta = linear_predictor(covariates, &beta);
        let d_neg_ll = cox_gradient_wrt_risks(&eta, outcomes)?;
        // gradient of the penalized objective
        let mut grad = vec![0.0; p];
        for (k, row) in covariates.rows().into_iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                grad[j] -= x * d_neg_ll[k];
            }
        }
        for j in 0..p {
            grad[j] -= lambda * beta[j];
        }
        let sup = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if sup < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        let mut hessian = neg_ll_hessian(covariates, outcomes, &eta, &order);
        for j in 0..p {
            hessian[[j, j]] += lambda;
        }
        let direction = match cholesky_solve(&hessian, &grad) {
            Some(d) => d,
            None => {
                // singular curvature (e.g. lambda = 0 with degenerate design):
                // retry with a small diagonal load, else stop un-converged
                let trace: f64 = (0..p).map(|j| hessian[[j, j]]).sum();
                let jitter = 1e-8 * (1.0 + trace / p as f64);
                for j in 0..p {
                    hessian[[j, j]] += jitter;
                }
                match cholesky_solve(&hessian, &grad) {
                    Some(d) => d,
                    None => break,
                }
            }
        };

        // step-halving keeps the objective non-decreasing
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-12 {
            let candidate: Vec<f64> =
                beta.iter().zip(&direction).map(|(b, d)| b + step * d).collect();
            let cand_obj = penalized_objective(covariates, outcomes, lambda, &candidate)?;
            if cand_obj >= objective {
                beta = candidate;
                objective = cand_obj;
                trace.push(objective);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    if beta.iter().any(|b| !b.is_finite()) {
        converged = false;
    }
    Ok(CoxFit {
        coefficients: beta,
        ridge_penalty: lambda,
        converged,
        n_iterations: iterations,
        objective,
        objective_trace: trace,
    })
}

/// Hessian of the negative log partial likelihood with respect to `beta`:
/// `X' [ sum_events (diag(p_i) - p_i p_i') ] X` with `p_i` the softmax of the
/// risks over event i's risk set.
fn neg_ll_hessian(
    covariates: &Array2<f64>,
    outcomes: &[SurvivalRecord],
    eta: &[f64],
    descending: &[usize],
) -> Array2<f64> {
    let p = covariates.ncols();
    let mut h = Array2::<f64>::zeros((p, p));
    let mut pos = 0;
    while pos < descending.len() {
        let t = outcomes[descending[pos]].time;
        let mut end = pos;
        while end < descending.len() && outcomes[descending[end]].time == t {
            end += 1;
        }
        let n_events_here = descending[pos..end]
            .iter()
            .filter(|&&i| outcomes[i].event)
            .count();
        if n_events_here > 0 {
            // risk set = prefix of the descending order through this group
            let members = &descending[..end];
            let m = members.iter().map(|&j| eta[j]).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = members.iter().map(|&j| (eta[j] - m).exp()).collect();
            let total: f64 = weights.iter().sum();

            let mut mean = vec![0.0; p];
            for (&j, w) in members.iter().zip(&weights) {
                let pi = w / total;
                for (a, x) in covariates.row(j).iter().enumerate() {
                    mean[a] += pi * x;
                }
            }
            let scale = n_events_here as f64; // Breslow: one denominator per event
            for (&j, w) in members.iter().zip(&weights) {
                let pi = w / total;
                let row = covariates.row(j);
                for a in 0..p {
                    let da = row[a] - mean[a];
                    for b in a..p {
                        let db = row[b] - mean[b];
                        h[[a, b]] += scale * pi * da * db;
                    }
                }
            }
        }
        pos = end;
    }
    for a in 0..p {
        for b in 0..a {
            h[[a, b]] = h[[b, a]];
        }
    }
    h
}

/// Tie handling for predicted risks in the concordance index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TiePolicy {
    /// Tied predictions among informative pairs score 0.5 (Harrell's convention).
    HalfCredit,
    /// Tied predictions score 0: the indicator `I(eta_i > eta_j)` taken literally.
    Strict,
}

/// Harrell's concordance index: the fraction of informative subject pairs
/// where the higher predicted risk dies first.
///
/// A pair `(i, j)` is informative when `i` has an observed event and
/// `t_i < t_j`; tied outcome times (including a censoring tied with an
/// event) make a pair non-informative.
pub fn concordance_index(
    risks: &[f64],
    outcomes: &[SurvivalRecord],
    tie_policy: TiePolicy,
) -> Result<f64> {
    validate_pair(risks, outcomes)?;
    let n = risks.len();
    let mut informative = 0u64;
    let mut concordant = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if outcomes[i].event && outcomes[i].time < outcomes[j].time {
                informative += 1;
                if risks[i] > risks[j] {
                    concordant += 1.0;
                } else if risks[i] == risks[j] {
                    if tie_policy == TiePolicy::HalfCredit {
                        concordant += 0.5;
                    }
                }
            }
        }
    }
    if informative == 0 {
        return Err(Error::Undefined(
            "concordance index: no informative pairs".into(),
        ));
    }
    Ok(concordant / informative as f64)
}

/// Whether a sample admits at least one informative pair for the
/// concordance index.
pub fn has_informative_pair(outcomes: &[SurvivalRecord]) -> bool {
    outcomes.iter().any(|a| {
        a.event && outcomes.iter().any(|b| b.time > a.time)
    })
}

/// One step of a Kaplan-Meier curve (recorded at a distinct event time).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KmPoint {
    pub time: f64,
    pub n_at_risk: usize,
    pub n_events: usize,
    pub survival: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Product-limit survival estimate with Greenwood 95% confidence bands
/// (log-log transform). Right-continuous; `survival_at(t)` is 1 before the
/// first event time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KaplanMeierCurve {
    pub points: Vec<KmPoint>,
    pub n_subjects: usize,
}

impl KaplanMeierCurve {
    pub fn survival_at(&self, t: f64) -> f64 {
        let mut s = 1.0;
        for p in &self.points {
            if p.time <= t {
                s = p.survival;
            } else {
                break;
            }
        }
        s
    }
}

const Z_95: f64 = 1.96;

/// Kaplan-Meier product-limit estimator.
pub fn kaplan_meier(outcomes: &[SurvivalRecord]) -> Result<KaplanMeierCurve> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if outcomes.iter().any(|o| !o.time.is_finite() || o.time < 0.0) {
        return Err(Error::InvalidInput("outcome times must be finite and >= 0".into()));
    }
    let mut sorted: Vec<&SurvivalRecord> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());

    let n = sorted.len();
    let mut points = Vec::new();
    let mut survival = 1.0;
    let mut greenwood = 0.0; // sum d / (n (n - d))
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let at_risk = n - i;
        let mut events = 0;
        let mut j = i;
        while j < n && sorted[j].time == t {
            if sorted[j].event {
                events += 1;
            }
            j += 1;
        }
        if events > 0 {
            let d = events as f64;
            let r = at_risk as f64;
            survival *= 1.0 - d / r;
            let (ci_low, ci_high) = if events == at_risk {
                // curve reaches zero; variance diverges
                survival = 0.0;
                (0.0, 0.0)
            } else {
                greenwood += d / (r * (r - d));
                log_log_ci(survival, greenwood)
            };
            points.push(KmPoint {
                time: t,
                n_at_risk: at_risk,
                n_events: events,
                survival,
                ci_low,
                ci_high,
            });
        }
        i = j;
    }
    Ok(KaplanMeierCurve { points, n_subjects: n })
}

/// Greenwood CI on the log(-log S) scale: `S^exp(+-z*se)`.
fn log_log_ci(survival: f64, greenwood: f64) -> (f64, f64) {
    if survival <= 0.0 {
        return (0.0, 0.0);
    }
    if survival >= 1.0 {
        return (1.0, 1.0);
    }
    let log_s = survival.ln();
    let se = greenwood.sqrt() / log_s.abs();
    let low = survival.powf((Z_95 * se).exp());
    let high = survival.powf((-Z_95 * se).exp());
    (low, high)
}

/// Two-group log-rank test result (`df = 1`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogrankResult {
    pub chi_square: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Standard two-group log-rank test. The p-value is the chi-square(1) upper
/// tail of the statistic.
pub fn logrank_test(
    group_a: &[SurvivalRecord],
    group_b: &[SurvivalRecord],
) -> Result<LogrankResult> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::InvalidInput("both groups must be nonempty".into()));
    }
    let total_events = group_a.iter().chain(group_b).filter(|o| o.event).count();
    if total_events == 0 {
        return Err(Error::Undefined("log-rank test: no events in either group".into()));
    }

    // pooled distinct event times
    let mut event_times: Vec<f64> = group_a
        .iter()
        .chain(group_b)
        .filter(|o| o.event)
        .map(|o| o.time)
        .collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();

    let mut observed_minus_expected = 0.0;
    let mut variance = 0.0;
    for &t in &event_times {
        let n_a = group_a.iter().filter(|o| o.time >= t).count() as f64;
        let n_b = group_b.iter().filter(|o| o.time >= t).count() as f64;
        let d_a = group_a.iter().filter(|o| o.event && o.time == t).count() as f64;
        let d_b = group_b.iter().filter(|o| o.event && o.time == t).count() as f64;
        let n = n_a + n_b;
        let d = d_a + d_b;
        if n < 2.0 {
            continue;
        }
        observed_minus_expected += d_a - d * n_a / n;
        variance += d * (n - d) * n_a * n_b / (n * n * (n - 1.0));
    }
    if variance <= 0.0 {
        if observed_minus_expected == 0.0 {
            // groups indistinguishable at every event time
            return Ok(LogrankResult { chi_square: 0.0, p_value: 1.0, df: 1 });
        }
        return Err(Error::Undefined("log-rank test: zero variance".into()));
    }
    let chi_square = observed_minus_expected * observed_minus_expected / variance;
    Ok(LogrankResult { chi_square, p_value: chi_square_1df_upper_tail(chi_square), df: 1 })
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi_square_1df_upper_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::erf::erfc((x / 2.0).sqrt())
}
