#include "mminfer/fit_cluster.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace mminfer {

ClusterDesign cluster_design(const Dataset& cluster, const MMParams& params, const VarianceSpec& spec) {
    const auto s = cluster.s();
    const auto n = static_cast<Eigen::Index>(cluster.size());
    ClusterDesign out;
    out.z.resize(n);
    out.d.resize(n, 2);
    out.h.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto g = mm_gradient(s[j], params);
        out.z(j) = g[0];
        out.d(j, 0) = g[0];
        out.d(j, 1) = g[1];
        out.h(j) = eval_h(spec, s[j]);
    }
    return out;
}

Eigen::MatrixXd solve_working_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& h, double tau2, double gamma,
                                  const Eigen::MatrixXd& rhs) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw Error(ErrorCode::NonPositiveGamma, fmt::format("working covariance needs gamma > 0, got {}", gamma));
    }
    if (!(tau2 >= 0.0)) throw Error(ErrorCode::InvalidInput, "tau2 must be >= 0");
    if (z.size() != h.size() || rhs.rows() != z.size()) {
        throw Error(ErrorCode::InvalidInput, "working covariance dimensions disagree");
    }
    const Eigen::VectorXd w = (gamma * h.array()).inverse().matrix();
    const Eigen::VectorXd u = w.cwiseProduct(z);
    const double c = tau2 / (1.0 + tau2 * z.dot(u));
    Eigen::MatrixXd out = w.asDiagonal() * rhs;
    out.noalias() -= c * u * (u.transpose() * rhs);
    return out;
}

Eigen::VectorXd solve_working_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& h, double tau2, double gamma,
                                  const Eigen::VectorXd& rhs) {
    return solve_working_cov(z, h, tau2, gamma, Eigen::MatrixXd(rhs)).col(0);
}

namespace {

// Per-cluster pieces of V^{-1} = diag(w) - c u u^T.
struct WorkingInverse {
    std::vector<double> w;
    std::vector<double> u;
    double c = 0.0;
};

WorkingInverse working_inverse(const Dataset& cluster, const MMParams& anchor, const VarianceSpec& spec, double tau2,
                               double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw Error(ErrorCode::NonPositiveGamma, fmt::format("working covariance needs gamma > 0, got {}", gamma));
    }
    const auto s = cluster.s();
    WorkingInverse inv;
    inv.w.resize(cluster.size());
    inv.u.resize(cluster.size());
    double ztu = 0.0;
    for (std::size_t j = 0; j < cluster.size(); ++j) {
        const double z = s[j] / (anchor.km() + s[j]);
        inv.w[j] = 1.0 / (gamma * eval_h(spec, s[j]));
        inv.u[j] = inv.w[j] * z;
        ztu += z * inv.u[j];
    }
    inv.c = tau2 / (1.0 + tau2 * ztu);
    return inv;
}

std::vector<WorkingInverse> working_inverses(const ClusteredDataset& data, const MMParams& anchor,
                                             const VarianceSpec& spec, double tau2, double gamma) {
    std::vector<WorkingInverse> out;
    out.reserve(data.cluster_count());
    for (const auto& c : data.clusters()) out.push_back(working_inverse(c, anchor, spec, tau2, gamma));
    return out;
}

double sample_variance(std::span<const double> y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return y.size() > 1 ? ss / static_cast<double>(y.size() - 1) : 0.0;
}

double relative_change(double before, double after) {
    const double scale = std::max(std::abs(before), std::abs(after));
    return scale > 0.0 ? std::abs(after - before) / scale : 0.0;
}

} // namespace

GlsProfileResult gls_km_profile(const ClusteredDataset& data, const VarianceSpec& spec, double tau2, double gamma,
                                const MMParams& anchor, const SearchConfig& search) {
    const auto inverses = working_inverses(data, anchor, spec, tau2, gamma);

    // Returns (m'V^-1 y, m'V^-1 m, q'V^-1 y, q'V^-1 m) summed over clusters,
    // with m = s/(k+s) and q = s/(k+s)^2 (-dmu/dk divided by Vmax).
    auto moments = [&](double k) {
        std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < data.cluster_count(); ++i) {
            const auto& inv = inverses[i];
            const auto s = data.clusters()[i].s();
            const auto y = data.clusters()[i].y();
            double my = 0.0, mm = 0.0, qy = 0.0, qm = 0.0;
            double mu = 0.0, qu = 0.0, yu = 0.0;
            for (std::size_t j = 0; j < s.size(); ++j) {
                const double ks = k + s[j];
                const double m = s[j] / ks;
                const double q = m / ks;
                my += m * inv.w[j] * y[j];
                mm += m * inv.w[j] * m;
                qy += q * inv.w[j] * y[j];
                qm += q * inv.w[j] * m;
                mu += m * inv.u[j];
                qu += q * inv.u[j];
                yu += y[j] * inv.u[j];
            }
            acc[0] += my - inv.c * mu * yu;
            acc[1] += mm - inv.c * mu * mu;
            acc[2] += qy - inv.c * qu * yu;
            acc[3] += qm - inv.c * qu * mu;
        }
        return acc;
    };

    auto profile = [&](double k) {
        const auto a = moments(k);
        const double left = a[0] * a[3];
        const double right = a[2] * a[1];
        return ProfileValue{left - right, std::max(std::abs(left), std::abs(right))};
    };

    const Dataset pooled = data.pooled();
    auto [lo, hi] = default_bracket(pooled.s());
    if (search.k_lo > 0.0) lo = search.k_lo;
    if (search.k_hi > 0.0) hi = search.k_hi;
    // Several stationary points of the GLS criterion can appear once the
    // random effect is large; keep the admissible one with the lowest
    // criterion. Up to the constant y'V^-1 y that criterion is -A^2/B.
    auto criterion = [&](double k) {
        const auto a = moments(k);
        if (!(a[1] > 0.0) || !(a[0] > 0.0)) return std::numeric_limits<double>::infinity();
        return -a[0] * a[0] / a[1];
    };
    const RootSearchResult root = search_profile_root(profile, lo, hi, search, criterion);

    const auto a = moments(root.k);
    if (!(a[1] > 0.0)) throw Error(ErrorCode::DegenerateDesign, "GLS Vmax profile denominator vanishes");
    return {root.k, a[0] / a[1], root.diag};
}

double gamma_floor(const ClusteredDataset& data) {
    const Dataset pooled = data.pooled();
    const double v = sample_variance(pooled.y());
    return v > 0.0 ? 1e-12 * v : std::numeric_limits<double>::min();
}

VarianceComponents moment_update_variance(const ClusteredDataset& data, const MMParams& params,
                                          const VarianceSpec& spec) {
    double cross = 0.0, design = 0.0;
    bool replicated = false;
    for (const auto& c : data.clusters()) {
        if (c.size() < 2) continue;
        replicated = true;
        const auto s = c.s();
        const auto r = residuals(c, params);
        // sum_{j<k} a_j a_k = ((sum a)^2 - sum a^2) / 2
        double rz = 0.0, rz2 = 0.0, z2 = 0.0, z4 = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double z = s[j] / (params.km() + s[j]);
            rz += r[j] * z;
            rz2 += r[j] * r[j] * z * z;
            z2 += z * z;
            z4 += z * z * z * z;
        }
        cross += 0.5 * (rz * rz - rz2);
        design += 0.5 * (z2 * z2 - z4);
    }
    if (!replicated || !(design > 0.0)) {
        throw Error(ErrorCode::InsufficientReplication,
                    "no cluster provides within-cluster pairs with positive substrate");
    }

    VarianceComponents out;
    const double raw = cross / design;
    out.tau2 = std::max(0.0, raw);
    out.tau2_truncated = raw < 0.0;

    double acc = 0.0;
    std::size_t total = 0;
    for (const auto& c : data.clusters()) {
        const auto s = c.s();
        const auto r = residuals(c, params);
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double z = s[j] / (params.km() + s[j]);
            acc += (r[j] * r[j] - out.tau2 * z * z) / eval_h(spec, s[j]);
        }
        total += c.size();
    }
    out.gamma = std::max(gamma_floor(data), acc / static_cast<double>(total));
    return out;
}

double gls_criterion(const ClusteredDataset& data, const MMParams& params, double tau2, double gamma,
                     const VarianceSpec& spec) {
    double q = 0.0;
    for (const auto& c : data.clusters()) {
        const auto inv = working_inverse(c, params, spec, tau2, gamma);
        const auto r = residuals(c, params);
        double diag = 0.0, ru = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) {
            diag += r[j] * inv.w[j] * r[j];
            ru += r[j] * inv.u[j];
        }
        q += diag - inv.c * ru * ru;
    }
    return q;
}

Eigen::Matrix2d cluster_covariance(const ClusteredDataset& data, const MMParams& params, double tau2, double gamma,
                                   const VarianceSpec& spec) {
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    for (const auto& c : data.clusters()) {
        const ClusterDesign design = cluster_design(c, params, spec);
        const Eigen::MatrixXd vinv_d = solve_working_cov(design.z, design.h, tau2, gamma, Eigen::MatrixXd(design.d));
        info.noalias() += design.d.transpose() * vinv_d;
    }
    info(0, 1) = info(1, 0) = 0.5 * (info(0, 1) + info(1, 0));
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(info, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues()(0), lmax = eig.eigenvalues()(1);
    if (!(lmin > 0.0) || lmax / lmin > kMaxInformationCondition) {
        throw Error(ErrorCode::SingularInformation,
                    fmt::format("cluster information is singular or ill-conditioned (eigenvalues {:.3g}, {:.3g})",
                                lmin, lmax));
    }
    Eigen::Matrix2d cov = info.inverse();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    return cov;
}

ClusterFitResult fit_clustered(const ClusteredDataset& data, const VarianceSpec& spec,
                               const ClusterFitConfig& config) {
    ClusterFitResult out;
    out.alpha = config.alpha;
    out.variance_spec = spec;
    out.clusters = data.cluster_count();
    out.n = data.total_size();

    FitConfig single;
    single.alpha = config.alpha;
    single.search = config.search;
    MMParams beta{1.0, 1.0};
    try {
        beta = fit_single(data.pooled(), spec, single).params;
    } catch (const NonconvergedFit& e) {
        beta = e.partial().params;
    }
    out.initial = beta;

    VarianceComponents vc = moment_update_variance(data, beta, spec);
    double criterion = gls_criterion(data, beta, vc.tau2, vc.gamma, spec);
    out.boundary_tau2 = vc.tau2_truncated;

    for (int it = 1; it <= config.max_iterations; ++it) {
        out.iterations = it;
        const GlsProfileResult gls = gls_km_profile(data, spec, vc.tau2, vc.gamma, beta, config.search);
        out.solver = gls.diag;
        if (!(gls.vmax > 0.0) || !std::isfinite(gls.vmax) || !gls.diag.converged) break;
        const MMParams next_beta(gls.vmax, gls.km);

        VarianceComponents next = moment_update_variance(data, next_beta, spec);
        out.boundary_tau2 = next.tau2_truncated;
        double next_criterion = gls_criterion(data, next_beta, next.tau2, next.gamma, spec);
        if (next_criterion > criterion) {
            next.tau2 = vc.tau2 + config.damping * (next.tau2 - vc.tau2);
            next.gamma = vc.gamma + config.damping * (next.gamma - vc.gamma);
            next_criterion = gls_criterion(data, next_beta, next.tau2, next.gamma, spec);
        }

        const double change = std::max({relative_change(beta.vmax(), next_beta.vmax()),
                                        relative_change(beta.km(), next_beta.km()),
                                        relative_change(vc.tau2, next.tau2),
                                        relative_change(vc.gamma, next.gamma)});
        beta = next_beta;
        vc = next;
        criterion = next_criterion;
        if (change < config.rel_tol) {
            out.converged = true;
            break;
        }
    }

    out.params = beta;
    out.tau2 = vc.tau2;
    out.gamma = vc.gamma;
    try {
        out.cov = cluster_covariance(data, beta, vc.tau2, vc.gamma, spec);
        out.se = {std::sqrt(out.cov(0, 0)), std::sqrt(out.cov(1, 1))};
        out.ci_vmax = wald_interval(beta.vmax(), out.se[0], config.alpha);
        out.ci_km = wald_interval(beta.km(), out.se[1], config.alpha);
    } catch (const Error&) {
        out.converged = false;
        out.cov.setConstant(std::numeric_limits<double>::quiet_NaN());
        out.se = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    return out;
}

} // namespace mminfer
