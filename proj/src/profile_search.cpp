#include "mminfer/profile_search.hpp"
#include "mminfer/errors.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <cstdint>
#include <fmt/format.h>
#include <limits>
#include <vector>

namespace mminfer {

std::pair<double, double> default_bracket(std::span<const double> s) {
    double min_pos = std::numeric_limits<double>::infinity();
    double max_s = 0.0;
    for (double v : s) {
        if (v > 0.0) min_pos = std::min(min_pos, v);
        max_s = std::max(max_s, v);
    }
    if (!std::isfinite(min_pos) || max_s <= 0.0) {
        throw Error(ErrorCode::DegenerateDesign, "no positive substrate concentration in the design");
    }
    return {1e-4 * min_pos, 1e4 * max_s};
}

namespace {

bool within_tolerance(const ProfileValue& v, double tol_rel) {
    return std::abs(v.value) <= tol_rel * v.scale;
}

RootSearchResult refine_root(const ProfileFunction& f, double a, double b, ProfileValue fa, ProfileValue fb,
                             const SearchConfig& config, SolverDiagnostics diag) {
    // Values inside the F tolerance are reported as exact zeros, which makes
    // the bracketing solver stop there.
    auto g = [&](double k) {
        const ProfileValue v = f(k);
        return within_tolerance(v, config.tol_f_rel) ? 0.0 : v.value;
    };
    const double tol_k = config.tol_k_rel;
    auto tol = [tol_k](double lo, double hi) { return std::abs(hi - lo) <= tol_k * std::min(std::abs(lo), std::abs(hi)); };

    double k = a;
    if (within_tolerance(fa, config.tol_f_rel)) {
        k = a;
    } else if (within_tolerance(fb, config.tol_f_rel)) {
        k = b;
    } else {
        std::uintmax_t iters = static_cast<std::uintmax_t>(config.max_iterations);
        const auto [lo, hi] = boost::math::tools::toms748_solve(g, a, b, fa.value, fb.value, tol, iters);
        diag.iterations = static_cast<int>(iters);
        const ProfileValue vlo = f(lo), vhi = f(hi);
        k = std::abs(vlo.value) <= std::abs(vhi.value) ? lo : hi;
    }
    const ProfileValue fk = f(k);
    diag.used_root = true;
    diag.f_at_solution = fk.value;
    diag.f_scale = fk.scale;
    diag.converged = true;
    return {k, diag};
}

RootSearchResult golden_fallback(const ProfileFunction& f, const std::vector<double>& grid,
                                 const std::vector<ProfileValue>& values, const SearchConfig& config,
                                 SolverDiagnostics diag) {
    std::size_t best = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(values[i].value)) continue;
        if (best == grid.size() || std::abs(values[i].value) < std::abs(values[best].value)) best = i;
    }
    double lo = std::log(grid[best == 0 ? 0 : best - 1]);
    double hi = std::log(grid[std::min(best + 1, grid.size() - 1)]);
    auto sq = [&](double logk) {
        const double v = f(std::exp(logk)).value;
        return std::isfinite(v) ? v * v : std::numeric_limits<double>::infinity();
    };

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = sq(c), fd = sq(d);
    int it = 0;
    // Interval on log k; a width of tol in log space is a relative tol in k.
    while (hi - lo > config.golden_tol_rel && it < 4 * config.max_iterations) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = sq(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = sq(d);
        }
        ++it;
    }
    double k = std::exp(0.5 * (lo + hi));
    ProfileValue fk = f(k);
    if (std::abs(values[best].value) < std::abs(fk.value)) {
        k = grid[best];
        fk = values[best];
    }
    diag.used_root = false;
    diag.iterations = it;
    diag.f_at_solution = fk.value;
    diag.f_scale = fk.scale;
    diag.converged = within_tolerance(fk, config.tol_f_rel);
    return {k, diag};
}

} // namespace

RootSearchResult search_profile_root(const ProfileFunction& f, double k_lo, double k_hi,
                                     const SearchConfig& config) {
    return search_profile_root(f, k_lo, k_hi, config, RootCost{});
}

RootSearchResult search_profile_root(const ProfileFunction& f, double k_lo, double k_hi, const SearchConfig& config,
                                     const RootCost& cost) {
    if (!(k_lo > 0.0 && k_lo < k_hi) || config.grid_points < 2) {
        throw Error(ErrorCode::InvalidInput, fmt::format("invalid Km search interval [{}, {}]", k_lo, k_hi));
    }
    const int n = config.grid_points;
    std::vector<double> grid(static_cast<std::size_t>(n));
    std::vector<ProfileValue> values(grid.size());
    const double log_lo = std::log(k_lo), log_hi = std::log(k_hi);
    for (int i = 0; i < n; ++i) {
        grid[i] = i == 0 ? k_lo : (i == n - 1 ? k_hi : std::exp(log_lo + (log_hi - log_lo) * i / (n - 1)));
        values[i] = f(grid[i]);
    }

    SolverDiagnostics diag;
    diag.k_lo = k_lo;
    diag.k_hi = k_hi;

    bool any_finite = false;
    // (left, right) grid indices of each sign-change bracket, ascending in k.
    std::vector<std::pair<std::size_t, std::size_t>> brackets;
    std::size_t prev = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(values[i].value)) continue;
        any_finite = true;
        if (prev != grid.size() && std::signbit(values[prev].value) != std::signbit(values[i].value)) {
            brackets.emplace_back(prev, i);
        }
        prev = i;
    }
    if (!any_finite) {
        throw Error(ErrorCode::NoFiniteEvaluation, "profile equation is non-finite on the whole Km grid");
    }
    diag.sign_changes = static_cast<int>(brackets.size());
    if (brackets.empty()) return golden_fallback(f, grid, values, config, diag);

    auto refine = [&](const std::pair<std::size_t, std::size_t>& b) {
        return refine_root(f, grid[b.first], grid[b.second], values[b.first], values[b.second], config, diag);
    };
    RootSearchResult chosen = refine(brackets.front());
    if (!cost || brackets.size() == 1) return chosen;

    double best = cost(chosen.k);
    for (std::size_t i = 1; i < brackets.size(); ++i) {
        RootSearchResult candidate = refine(brackets[i]);
        const double c = cost(candidate.k);
        if (std::isfinite(c) && (!std::isfinite(best) || c < best)) {
            best = c;
            chosen = candidate;
        }
    }
    return chosen;
}

} // namespace mminfer
