#include "mminfer/bootstrap.hpp"
#include "mminfer/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <limits>
#include <optional>

namespace mminfer {

Multiplier parse_multiplier(const std::string& text) {
    if (text == "rademacher") return Multiplier::Rademacher;
    if (text == "mammen") return Multiplier::Mammen;
    throw Error(ErrorCode::InvalidInput, fmt::format("unknown multiplier law '{}'", text));
}

std::string to_string(Multiplier m) {
    return m == Multiplier::Rademacher ? "rademacher" : "mammen";
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MM_INFER_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

double draw_multiplier(Multiplier law, Rng& rng) {
    if (law == Multiplier::Rademacher) return (rng() >> 63) != 0 ? 1.0 : -1.0;
    static const double root5 = std::sqrt(5.0);
    static const double p_low = (root5 + 1.0) / (2.0 * root5);
    const double u = std::generate_canonical<double, 53>(rng);
    return u < p_low ? -(root5 - 1.0) / 2.0 : (root5 + 1.0) / 2.0;
}

double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

double pivot(double est, double center, double se) {
    const double diff = est - center;
    if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    return diff / se;
}

} // namespace

BootstrapResult wild_bootstrap_ci(const Dataset& data, const FitResult& fit, const BootstrapConfig& config,
                                  const FitConfig& fit_config) {
    if (config.replicates < 99) {
        throw Error(ErrorCode::InvalidInput, fmt::format("bootstrap needs B >= 99, got {}", config.replicates));
    }
    if (!(config.level > 0.0 && config.level < 1.0)) {
        throw Error(ErrorCode::InvalidInput, "bootstrap level must lie in (0, 1)");
    }
    if (!fit.converged() || !std::isfinite(fit.se[0]) || !std::isfinite(fit.se[1])) {
        throw Error(ErrorCode::InvalidInput, "bootstrap requires a converged fit with finite standard errors");
    }

    const auto s = data.s();
    const auto r = residuals(data, fit.params);
    std::vector<double> fitted(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) fitted[i] = mm_mean(s[i], fit.params);

    const auto b_count = static_cast<std::size_t>(config.replicates);
    std::vector<std::optional<std::array<double, 2>>> pivots(b_count);
    parallel_for(b_count, config.threads, [&](std::size_t b) {
        Rng rng = make_rng(config.seed, kStreamBootstrap, b);
        std::vector<double> y(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) y[i] = fitted[i] + r[i] * draw_multiplier(config.multiplier, rng);
        try {
            const FitResult star = fit_single(data.with_response(std::move(y)), fit.variance_spec, fit_config);
            const double tv = pivot(star.params.vmax(), fit.params.vmax(), star.se[0]);
            const double tk = pivot(star.params.km(), fit.params.km(), star.se[1]);
            if (std::isfinite(tv) && std::isfinite(tk)) pivots[b] = std::array<double, 2>{tv, tk};
        } catch (const Error&) {
        }
    });

    BootstrapResult out;
    std::array<std::vector<double>, 2> t;
    for (const auto& p : pivots) {
        if (!p) {
            ++out.failures;
            continue;
        }
        t[0].push_back((*p)[0]);
        t[1].push_back((*p)[1]);
    }
    out.replicates = config.replicates;
    const double fail_rate = static_cast<double>(out.failures) / static_cast<double>(config.replicates);
    if (fail_rate > 0.20) {
        throw Error(ErrorCode::TooManyFailures,
                    fmt::format("{} of {} bootstrap refits failed", out.failures, config.replicates));
    }
    out.flagged = fail_rate > 0.05;

    const double alpha = 1.0 - config.level;
    const std::array<double, 2> est{fit.params.vmax(), fit.params.km()};
    std::array<Interval, 2> ci;
    for (int j = 0; j < 2; ++j) {
        std::sort(t[j].begin(), t[j].end());
        const double q_lo = quantile_type7(t[j], alpha / 2.0);
        const double q_hi = quantile_type7(t[j], 1.0 - alpha / 2.0);
        out.t_quantiles[j] = {q_lo, q_hi};
        ci[j] = {est[j] - q_hi * fit.se[j], est[j] - q_lo * fit.se[j]};
    }
    out.ci_vmax = ci[0];
    out.ci_km = ci[1];
    return out;
}

} // namespace mminfer
