#pragma once
// Clustered working-covariance estimator with a scalar random effect on Vmax:
//
//   V_i = tau2 * z_i z_i^T + gamma * diag(h(s_i1), ..., h(s_in_i)),
//   z_ij = s_ij / (Km + s_ij).
//
// Fixed effects solve sum_i D_i^T V_i^{-1} (y_i - mu_i) = 0 with V_i held at
// the current iterate; (tau2, gamma) come from moment matching of the
// residual cross-products. The two steps alternate to a fixed point.

#include "mminfer/fit_single.hpp"

#include <Eigen/Core>

namespace mminfer {

struct ClusterDesign {
    Eigen::VectorXd z;
    // Row j is mm_gradient(s_j); column 0 equals z.
    Eigen::Matrix<double, Eigen::Dynamic, 2> d;
    Eigen::VectorXd h;
};

ClusterDesign cluster_design(const Dataset& cluster, const MMParams& params, const VarianceSpec& spec);

// V^{-1} rhs via the rank-one identity
//   V^{-1} = G^{-1} - tau2/(1 + tau2 z^T G^{-1} z) (G^{-1} z)(G^{-1} z)^T,  G = gamma diag(h).
// Throws Error(NonPositiveGamma) unless gamma > 0.
Eigen::MatrixXd solve_working_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& h, double tau2, double gamma,
                                  const Eigen::MatrixXd& rhs);
Eigen::VectorXd solve_working_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& h, double tau2, double gamma,
                                  const Eigen::VectorXd& rhs);

struct VarianceComponents {
    double tau2 = 0.0;
    double gamma = 0.0;
    // The raw tau2 moment estimate was negative and clamped to zero.
    bool tau2_truncated = false;
};

struct GlsProfileResult {
    double km = 0.0;
    double vmax = 0.0;
    SolverDiagnostics diag;
};

// Solves the Km component of the stacked GLS score with Vmax profiled out,
//   Vmax(k) = sum m^T V^{-1} y / sum m^T V^{-1} m,  m_ij = s_ij/(k+s_ij),
// using the working covariance built at `anchor` (z depends on Km).
GlsProfileResult gls_km_profile(const ClusteredDataset& data, const VarianceSpec& spec, double tau2, double gamma,
                                const MMParams& anchor, const SearchConfig& search = {});

// gamma floor: 1e-12 * sample variance of the pooled responses.
double gamma_floor(const ClusteredDataset& data);

// Throws Error(InsufficientReplication) when no cluster has two observations.
VarianceComponents moment_update_variance(const ClusteredDataset& data, const MMParams& params,
                                          const VarianceSpec& spec);

// sum_i r_i^T V_i^{-1} r_i with V_i built at `params`.
double gls_criterion(const ClusteredDataset& data, const MMParams& params, double tau2, double gamma,
                     const VarianceSpec& spec);

// {sum_i D_i^T V_i^{-1} D_i}^{-1}; throws Error(SingularInformation).
Eigen::Matrix2d cluster_covariance(const ClusteredDataset& data, const MMParams& params, double tau2, double gamma,
                                   const VarianceSpec& spec);

struct ClusterFitConfig {
    double alpha = 0.05;
    SearchConfig search;
    double rel_tol = 1e-8;
    int max_iterations = 200;
    // Applied to the (tau2, gamma) step when the GLS criterion increases.
    double damping = 0.5;
};

struct ClusterFitResult {
    MMParams params{1.0, 1.0};
    double tau2 = 0.0;
    double gamma = 0.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    std::array<double, 2> se{0.0, 0.0};
    Interval ci_vmax;
    Interval ci_km;
    double alpha = 0.05;
    int iterations = 0;
    bool converged = false;
    bool boundary_tau2 = false;
    MMParams initial{1.0, 1.0};
    SolverDiagnostics solver;
    VarianceSpec variance_spec = VarianceSpec::constant();
    std::size_t clusters = 0;
    std::size_t n = 0;
};

// Nonconvergence is reported through `converged`, not by throwing.
ClusterFitResult fit_clustered(const ClusteredDataset& data, const VarianceSpec& spec,
                               const ClusterFitConfig& config = {});

} // namespace mminfer
