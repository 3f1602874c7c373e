use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative Frobenius tolerance on `Λ − Λ†`.
    pub hermiticity: f64,
    /// Quadrature error allowed relative to the kernel magnitude at t = 0.
    pub quadrature: f64,
    /// Off-diagonal entries below `offdiag·‖W‖` count as zero.
    pub offdiag: f64,
    /// Eigenvector condition number separating diagonalizable from defective.
    pub condition_limit: f64,
    /// Singular-value cutoff (relative to ‖W‖^k) for ranks of (W − λ)^k.
    pub jordan_rank: f64,
    /// Eigenvalues closer than `eigen_cluster·‖W‖` are merged into one Jordan group.
    pub eigen_cluster: f64,
    /// Prony roots with ||w| − 1| below this are treated as non-decaying.
    pub unit_circle: f64,
    /// Eigenvalue floor (relative to the largest) for Hermitian square roots.
    pub sqrt_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity: 1e-12,
            quadrature: 1e-8,
            offdiag: 1e-12,
            condition_limit: 1e8,
            jordan_rank: 1e-10,
            eigen_cluster: 1e-5,
            unit_circle: 1e-8,
            sqrt_floor: 1e-12,
        }
    }
}
