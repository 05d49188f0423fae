//! Linearized closed-loop analysis under uniform parameters (`I = 1`, equal
//! couplings `k`, equal damping `γ`, full control).
//!
//! Linearizing the controlled swing equations around a fixed point gives
//! `ẋ = A_c x` with
//!
//! ```text
//! A_c = [    0          I       ]
//!       [  −k L    −γ I − k_c L ]
//! ```
//!
//! where `L` is the unweighted Laplacian of the post-fault graph. `A_c` is
//! block-diagonalized by the eigenvectors of `L`, so each Laplacian eigenvalue
//! `λ_i` contributes the pair of roots of `μ² + (γ + k_c λ_i) μ + k λ_i`.
//! All modes `i ≥ 2` are overdamped once `k_c` exceeds the per-mode threshold
//! `2√(k/λ_i) − γ/λ_i`; the critical gain is the largest of these.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::grid::{GridTopology, Weighting};

/// Uniform coupling `k` and damping `γ`; inertia is fixed at one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModelParams {
    coupling: f64,
    damping: f64,
}

impl LinearModelParams {
    pub fn new(coupling: f64, damping: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "coupling {coupling} must be positive"
            )));
        }
        if !(damping >= 0.0 && damping.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "damping {damping} must be nonnegative"
            )));
        }
        Ok(LinearModelParams { coupling, damping })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub laplacian_eigenvalues: Vec<f64>,
    /// Smallest nonzero Laplacian eigenvalue, `None` when disconnected.
    pub lambda2: Option<f64>,
    pub closed_loop_eigenvalues: Vec<(Complex<f64>, Complex<f64>)>,
}

/// Sorted eigenvalues of the unweighted Laplacian.
pub fn laplacian_spectrum(topology: &GridTopology) -> Vec<f64> {
    let lap = topology.laplacian(Weighting::Unweighted);
    let mut vals: Vec<f64> = SymmetricEigen::new(lap).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigenvalues below this fraction of `max(1, λ_N)` count as zero.
const ZERO_EIGEN_REL: f64 = 1e-9;

fn locate_lambda2(sorted: &[f64]) -> Option<f64> {
    let top = sorted.last().copied().unwrap_or(0.0).max(1.0);
    sorted.get(1).copied().filter(|&l| l > ZERO_EIGEN_REL * top)
}

pub fn spectral_summary(
    topology: &GridTopology,
    params: LinearModelParams,
    gain: f64,
) -> SpectralSummary {
    let lambdas = laplacian_spectrum(topology);
    SpectralSummary {
        lambda2: locate_lambda2(&lambdas),
        closed_loop_eigenvalues: closed_loop_eigenvalues(&lambdas, params, gain),
        laplacian_eigenvalues: lambdas,
    }
}

/// Roots of `μ² + (γ + k_c λ) μ + k λ` for every `λ`, in input order.
///
/// The larger-magnitude real root comes from the quadratic formula and the
/// other from `μ₁ μ₂ = kλ`, which avoids cancellation for large gains.
pub fn closed_loop_eigenvalues(
    lambdas: &[f64],
    params: LinearModelParams,
    gain: f64,
) -> Vec<(Complex<f64>, Complex<f64>)> {
    let (k, gamma) = (params.coupling, params.damping);
    lambdas
        .iter()
        .map(|&lambda| {
            let s = gamma + gain * lambda;
            let prod = k * lambda;
            let disc = s * s - 4.0 * prod;
            if disc >= 0.0 {
                let big = -0.5 * (s + disc.sqrt());
                let small = if big != 0.0 { prod / big } else { 0.0 };
                (Complex::new(small, 0.0), Complex::new(big, 0.0))
            } else {
                let im = 0.5 * (-disc).sqrt();
                (Complex::new(-0.5 * s, im), Complex::new(-0.5 * s, -im))
            }
        })
        .collect()
}

/// `(γ + k_c λ) / (2√(kλ))`; above one means the mode is overdamped.
pub fn damping_ratio(lambda: f64, params: LinearModelParams, gain: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(GridError::InvalidParameter(format!(
            "damping ratio needs a positive eigenvalue, got {lambda}"
        )));
    }
    Ok((params.damping + gain * lambda) / (2.0 * (params.coupling * lambda).sqrt()))
}

/// Gain at which the mode with eigenvalue `λ` becomes critically damped.
pub fn mode_threshold(lambda: f64, params: LinearModelParams) -> f64 {
    2.0 * (params.coupling / lambda).sqrt() - params.damping / lambda
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainRegime {
    /// `λ_2 ≥ γ²/k`: the threshold is largest at `λ_2`.
    Generic,
    /// `λ_2 < γ²/k`: the value is the maximum over all nonzero modes instead.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalGain {
    pub value: f64,
    pub lambda2: f64,
    pub regime: GainRegime,
}

/// Critical full-control gain `2√(k/λ_2) − γ/λ_2` for a post-fault topology.
pub fn critical_gain(topology: &GridTopology, params: LinearModelParams) -> Result<CriticalGain> {
    let components = topology.connected_components().len();
    if components > 1 {
        return Err(GridError::Disconnected { components });
    }
    let lambdas = laplacian_spectrum(topology);
    let lambda2 = locate_lambda2(&lambdas).ok_or(GridError::Disconnected {
        components: components.max(1),
    })?;
    let gamma_sq_over_k = params.damping * params.damping / params.coupling;
    if lambda2 >= gamma_sq_over_k {
        Ok(CriticalGain {
            value: mode_threshold(lambda2, params),
            lambda2,
            regime: GainRegime::Generic,
        })
    } else {
        let top = lambdas.last().copied().unwrap_or(0.0).max(1.0);
        let value = lambdas
            .iter()
            .filter(|&&l| l > ZERO_EIGEN_REL * top)
            .map(|&l| mode_threshold(l, params))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(CriticalGain {
            value,
            lambda2,
            regime: GainRegime::Degenerate,
        })
    }
}

/// Explicit `2N × 2N` closed-loop matrix.
pub fn closed_loop_matrix(topology: &GridTopology, params: LinearModelParams, gain: f64) -> DMatrix<f64> {
    let n = topology.node_count();
    let lap = topology.laplacian(Weighting::Unweighted);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = -params.coupling * lap[(i, j)];
            a[(n + i, n + j)] = -gain * lap[(i, j)];
        }
        a[(n + i, n + i)] -= params.damping;
    }
    a
}

/// Largest distance between the numerically computed eigenvalues of the
/// explicit closed-loop matrix and the analytic pairs, under the matching
/// that minimizes that largest distance.
pub fn verify_spectrum_against_dense(
    topology: &GridTopology,
    params: LinearModelParams,
    gain: f64,
) -> f64 {
    let dense: Vec<Complex<f64>> = closed_loop_matrix(topology, params, gain)
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    let analytic: Vec<Complex<f64>> = closed_loop_eigenvalues(&laplacian_spectrum(topology), params, gain)
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .collect();
    bottleneck_distance(&dense, &analytic)
}

/// Min over perfect matchings of the max pairwise distance.
fn bottleneck_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let dist: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();
    let mut candidates: Vec<f64> = dist.iter().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let feasible = |limit: f64| -> bool {
        // Kuhn's augmenting paths on edges with distance <= limit.
        let mut owner = vec![usize::MAX; n];
        for i in 0..n {
            let mut seen = vec![false; n];
            if !augment(i, limit, &dist, &mut seen, &mut owner) {
                return false;
            }
        }
        true
    };
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

fn augment(i: usize, limit: f64, dist: &[Vec<f64>], seen: &mut [bool], owner: &mut [usize]) -> bool {
    for j in 0..dist.len() {
        if dist[i][j] <= limit && !seen[j] {
            seen[j] = true;
            if owner[j] == usize::MAX || augment(owner[j], limit, dist, seen, owner) {
                owner[j] = i;
                return true;
            }
        }
    }
    false
}
