//! Model interpretation: a Laplacian-eigenmaps projection of the latent
//! codes to 2D, and a mass-univariate saliency map relating predicted risk
//! to per-vertex mean displacement.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigen;
use crate::motion::{mean_displacement_per_vertex, MotionSample};
use crate::net::NetworkModel;

/// 2D spectral embedding of per-subject latent codes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding2D {
    /// One (dim1, dim2) point per input subject, in input order.
    pub points: Vec<[f64; 2]>,
    pub neighbor_count: usize,
    /// (lambda_2, lambda_3) of the largest connected component.
    pub eigenvalue_pair: (f64, f64),
    /// Set when lambda_2 and lambda_3 coincide to within 1e-10, in which
    /// case the 2D basis is not unique.
    pub degenerate_pair: bool,
    pub n_components: usize,
}

const DEGENERACY_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-12;

/// Project latent codes to 2D with Laplacian eigenmaps.
///
/// Builds a binary k-nearest-neighbor graph under the Euclidean metric
/// (symmetrized by union), forms the symmetric normalized Laplacian
/// `I - D^{-1/2} A D^{-1/2}`, and returns the eigenvectors of the 2nd and
/// 3rd smallest eigenvalues as coordinates (the constant eigenvector is
/// discarded). Each selected eigenvector is sign-fixed so its first nonzero
/// entry is positive.
///
/// A disconnected graph errors in strict mode; otherwise each connected
/// component is embedded independently (with a warning), components of one
/// or two subjects receiving partial or zero coordinates.
pub fn laplacian_eigenmaps(codes: &Array2<f64>, k: usize, strict: bool) -> Result<Embedding2D> {
    let n = codes.nrows();
    if n < 3 {
        return Err(Error::InvalidInput("eigenmaps needs at least 3 subjects".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "neighbor count must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    if codes.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("latent codes must be finite".into()));
    }

    let adjacency = knn_adjacency(codes, k);
    let components = connected_components(&adjacency);
    let n_components = components.iter().copied().max().unwrap_or(0) + 1;
    if n_components > 1 {
        if strict {
            return Err(Error::Undefined(format!(
                "k-NN graph is disconnected ({n_components} components) under strict mode"
            )));
        }
        log::warn!(
            "k-NN graph is disconnected ({n_components} components); embedding each component independently"
        );
    }

    let mut points = vec![[0.0, 0.0]; n];
    let mut eigenvalue_pair = (f64::NAN, f64::NAN);
    let mut degenerate = false;
    let mut largest_size = 0;

    for component in 0..n_components {
        let members: Vec<usize> =
            (0..n).filter(|&i| components[i] == component).collect();
        match members.len() {
            1 => {} // stays at the origin
            2 => {
                // one nontrivial eigenvector: coordinates (+v, 0), (-v, 0)
                points[members[0]] = [std::f64::consts::FRAC_1_SQRT_2, 0.0];
                points[members[1]] = [-std::f64::consts::FRAC_1_SQRT_2, 0.0];
            }
            _ => {
                let sub = submatrix(&adjacency, &members);
                let laplacian = normalized_laplacian(&sub);
                let (eigenvalues, eigenvectors) = jacobi_eigen(&laplacian);
                let mut dim1: Vec<f64> =
                    (0..members.len()).map(|r| eigenvectors[[r, 1]]).collect();
                let mut dim2: Vec<f64> =
                    (0..members.len()).map(|r| eigenvectors[[r, 2]]).collect();
                fix_sign(&mut dim1);
                fix_sign(&mut dim2);
                for (slot, &subject) in members.iter().enumerate() {
                    points[subject] = [dim1[slot], dim2[slot]];
                }
                if members.len() > largest_size {
                    largest_size = members.len();
                    eigenvalue_pair = (eigenvalues[1], eigenvalues[2]);
                }
                if (eigenvalues[1] - eigenvalues[2]).abs() < DEGENERACY_TOL {
                    degenerate = true;
                }
            }
        }
    }

    Ok(Embedding2D {
        points,
        neighbor_count: k,
        eigenvalue_pair,
        degenerate_pair: degenerate,
        n_components,
    })
}

/// Binary adjacency of the union-symmetrized k-nearest-neighbor graph.
/// Distance ties are broken by subject index so the graph is deterministic.
fn knn_adjacency(codes: &Array2<f64>, k: usize) -> Array2<f64> {
    let n = codes.nrows();
    let mut adjacency = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut neighbors: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d2 = codes
                    .row(i)
                    .iter()
                    .zip(codes.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, j)
            })
            .collect();
        neighbors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in neighbors.iter().take(k) {
            adjacency[[i, j]] = 1.0;
            adjacency[[j, i]] = 1.0;
        }
    }
    adjacency
}

/// `I - D^{-1/2} A D^{-1/2}` for a binary adjacency with positive degrees.
fn normalized_laplacian(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let degrees: Vec<f64> =
        (0..n).map(|i| adjacency.row(i).sum()).collect();
    let mut laplacian = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in 0..n {
            if adjacency[[i, j]] != 0.0 {
                laplacian[[i, j]] -= adjacency[[i, j]] / (degrees[i] * degrees[j]).sqrt();
            }
        }
    }
    laplacian
}

fn connected_components(adjacency: &Array2<f64>) -> Vec<usize> {
    let n = adjacency.nrows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if adjacency[[i, j]] != 0.0 && label[j] == usize::MAX {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

fn submatrix(adjacency: &Array2<f64>, members: &[usize]) -> Array2<f64> {
    let m = members.len();
    let mut sub = Array2::<f64>::zeros((m, m));
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            sub[[a, b]] = adjacency[[i, j]];
        }
    }
    sub
}

/// Flip a vector so its first entry with magnitude above tolerance is
/// positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_TOL) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// Per-vertex absolute regression coefficients of predicted risk on mean
/// displacement magnitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub abs_coefficients: Vec<f64>,
    /// Vertices whose displacement predictor had zero variance (coefficient
    /// recorded as 0).
    pub zero_variance: Vec<bool>,
}

impl SaliencyMap {
    /// Display transform `ln(1e-12 + |coefficient|)`.
    pub fn log_display(&self) -> Vec<f64> {
        self.abs_coefficients.iter().map(|c| (1e-12 + c).ln()).collect()
    }
}

/// Mass-univariate saliency from precomputed risk scores: for each vertex,
/// an ordinary least-squares regression (with intercept) of risk on that
/// vertex's mean displacement magnitude across subjects; the absolute slope
/// is stored.
pub fn saliency_from_risks(risks: &[f64], samples: &[MotionSample]) -> Result<SaliencyMap> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InvalidInput("saliency needs at least 3 subjects".into()));
    }
    if risks.len() != n {
        return Err(Error::InvalidInput("risks and samples lengths differ".into()));
    }
    let v_count = samples[0].vertex_count();
    if samples.iter().any(|s| s.vertex_count() != v_count) {
        return Err(Error::InvalidInput("vertex counts differ across subjects".into()));
    }

    let displacement: Vec<Vec<f64>> =
        samples.iter().map(mean_displacement_per_vertex).collect();

    let risk_mean = risks.iter().sum::<f64>() / n as f64;
    let mut abs_coefficients = Vec::with_capacity(v_count);
    let mut zero_variance = Vec::with_capacity(v_count);
    for vertex in 0..v_count {
        let mean = displacement.iter().map(|d| d[vertex]).sum::<f64>() / n as f64;
        let mut covariance = 0.0;
        let mut variance = 0.0;
        for (d, &risk) in displacement.iter().zip(risks) {
            let centered = d[vertex] - mean;
            covariance += centered * (risk - risk_mean);
            variance += centered * centered;
        }
        if variance == 0.0 {
            abs_coefficients.push(0.0);
            zero_variance.push(true);
        } else {
            abs_coefficients.push((covariance / variance).abs());
            zero_variance.push(false);
        }
    }
    Ok(SaliencyMap { abs_coefficients, zero_variance })
}

/// Saliency map of a trained model over a cohort: risks come from the
/// inference-mode network forward pass.
pub fn saliency_map(model: &NetworkModel, samples: &[MotionSample]) -> Result<SaliencyMap> {
    let mut risks = Vec::with_capacity(samples.len());
    for sample in samples {
        let features = crate::motion::build_displacement_vector(sample)?;
        risks.push(model.predict_risk(&features.values)?);
    }
    saliency_from_risks(&risks, samples)
}
