#pragma once
// Studentized (percentile-t) wild bootstrap for single-curve Wald intervals.
//
// y*_i = mu(s_i; beta_hat) + r_i * w_i with mean-zero, unit-variance
// multipliers w_i; each replicate is refitted with the same working variance
// and contributes the pivot t* = (theta* - theta_hat) / se*.

#include "mminfer/fit_single.hpp"
#include "mminfer/rng.hpp"

#include <array>
#include <cstdint>

namespace mminfer {

enum class Multiplier { Rademacher, Mammen };

Multiplier parse_multiplier(const std::string& text);
std::string to_string(Multiplier m);

struct BootstrapConfig {
    int replicates = 999;
    Multiplier multiplier = Multiplier::Rademacher;
    std::uint64_t seed = 1;
    double level = 0.95;
    int threads = 1;
};

struct BootstrapResult {
    Interval ci_vmax;
    Interval ci_km;
    // (q_{alpha/2}, q_{1-alpha/2}) of the pivots, per parameter.
    std::array<std::array<double, 2>, 2> t_quantiles{};
    int replicates = 0;
    int failures = 0;
    // More than 5% of refits failed.
    bool flagged = false;
};

double draw_multiplier(Multiplier law, Rng& rng);

// Type-7 quantile of an ascending-sorted sample.
double quantile_type7(std::span<const double> sorted, double p);

// Throws Error(TooManyFailures) when more than 20% of refits fail.
BootstrapResult wild_bootstrap_ci(const Dataset& data, const FitResult& fit, const BootstrapConfig& config,
                                  const FitConfig& fit_config = {});

} // namespace mminfer
