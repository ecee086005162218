#include "mminfer/fit_single.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numbers>

namespace mminfer {

ProfileValue profile_F(double k, const Dataset& data, const VarianceSpec& spec) {
    const auto s = data.s();
    const auto y = data.y();
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double h = eval_h(spec, s[i]);
        const double ks = k + s[i];
        const double sy = s[i] * y[i] / (ks * h);
        const double ss = s[i] * s[i] / (ks * ks * h);
        a += sy;
        d += sy / ks;
        b += ss;
        c += ss / ks;
    }
    const double left = a * c;
    const double right = d * b;
    return {left - right, std::max(std::abs(left), std::abs(right))};
}

RootSearchResult solve_km(const Dataset& data, const VarianceSpec& spec, const SearchConfig& search) {
    auto [lo, hi] = default_bracket(data.s());
    if (search.k_lo > 0.0) lo = search.k_lo;
    if (search.k_hi > 0.0) hi = search.k_hi;
    return search_profile_root([&](double k) { return profile_F(k, data, spec); }, lo, hi, search);
}

double vmax_plugin(double km, const Dataset& data, const VarianceSpec& spec) {
    const auto s = data.s();
    const auto y = data.y();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double h = eval_h(spec, s[i]);
        const double ks = km + s[i];
        num += s[i] * y[i] / (ks * h);
        den += s[i] * s[i] / (ks * ks * h);
    }
    if (!(den > 0.0)) {
        throw Error(ErrorCode::DegenerateDesign, "Vmax plug-in denominator vanishes (all substrate levels zero)");
    }
    return num / den;
}

double gamma_hat(const Dataset& data, const MMParams& params, const VarianceSpec& spec) {
    const auto s = data.s();
    const auto r = residuals(data, params);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) acc += r[i] * r[i] / eval_h(spec, s[i]);
    return acc / static_cast<double>(r.size());
}

Eigen::Matrix2d plugin_covariance(const Dataset& data, const MMParams& params, double gamma,
                                  const VarianceSpec& spec) {
    if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidInput, "gamma must be >= 0");
    const auto s = data.s();
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto g = mm_gradient(s[i], params);
        const Eigen::Vector2d gv(g[0], g[1]);
        info += gv * gv.transpose() / eval_h(spec, s[i]);
    }
    // (gamma/n) * ((1/n) info)^{-1} == gamma * info^{-1}
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(info, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues()(0), lmax = eig.eigenvalues()(1);
    if (!(lmin > 0.0) || lmax / lmin > kMaxInformationCondition) {
        throw Error(ErrorCode::SingularInformation,
                    fmt::format("information matrix is singular or ill-conditioned (eigenvalues {:.3g}, {:.3g})",
                                lmin, lmax));
    }
    Eigen::Matrix2d cov = gamma * info.inverse();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    return cov;
}

InformationCriteria information_criteria(const Dataset& data, const MMParams& params, double gamma,
                                         const VarianceSpec& spec) {
    const auto s = data.s();
    const auto r = residuals(data, params);
    const double n = static_cast<double>(data.size());
    InformationCriteria ic;
    if (gamma == 0.0) {
        bool all_zero = true;
        for (double v : r) all_zero = all_zero && v == 0.0;
        ic.loglik = all_zero ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    } else {
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double var = gamma * eval_h(spec, s[i]);
            acc += std::log(2.0 * std::numbers::pi * var) + r[i] * r[i] / var;
        }
        ic.loglik = -0.5 * acc;
    }
    const double p = kCriteriaParameterCount;
    ic.aic = -2.0 * ic.loglik + 2.0 * p;
    ic.bic = -2.0 * ic.loglik + p * std::log(n);
    return ic;
}

Interval wald_interval(double estimate, double se, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidInput, "alpha must lie in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
    return {estimate - z * se, estimate + z * se};
}

FitResult fit_single(const Dataset& data, const VarianceSpec& spec, const FitConfig& config) {
    FitResult out;
    out.variance_spec = spec;
    out.alpha = config.alpha;
    out.n = data.size();

    const RootSearchResult root = solve_km(data, spec, config.search);
    out.solver = root.diag;
    const double vmax = vmax_plugin(root.k, data, spec);
    if (!(vmax > 0.0) || !std::isfinite(vmax)) {
        out.solver.converged = false;
        throw NonconvergedFit(out, fmt::format("Vmax plug-in is not positive ({}) at Km={}", vmax, root.k));
    }
    out.params = MMParams(vmax, root.k);
    out.gamma = gamma_hat(data, out.params, spec);

    const InformationCriteria ic = information_criteria(data, out.params, out.gamma, spec);
    out.loglik = ic.loglik;
    out.aic = ic.aic;
    out.bic = ic.bic;

    if (!out.solver.converged) {
        out.cov.setConstant(std::numeric_limits<double>::quiet_NaN());
        out.se = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        throw NonconvergedFit(out, fmt::format("profile equation has no root in [{:.6g}, {:.6g}]; min |F| = {:.3g}",
                                               out.solver.k_lo, out.solver.k_hi, out.solver.f_at_solution));
    }

    try {
        out.cov = plugin_covariance(data, out.params, out.gamma, spec);
    } catch (const Error& e) {
        out.solver.converged = false;
        out.cov.setConstant(std::numeric_limits<double>::quiet_NaN());
        out.se = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        throw NonconvergedFit(out, e.what());
    }
    out.se = {std::sqrt(out.cov(0, 0)), std::sqrt(out.cov(1, 1))};
    out.ci_vmax = wald_interval(out.params.vmax(), out.se[0], config.alpha);
    out.ci_km = wald_interval(out.params.km(), out.se[1], config.alpha);
    return out;
}

} // namespace mminfer
