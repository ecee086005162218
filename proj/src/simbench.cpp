#include "mminfer/simbench.hpp"
#include "mminfer/numeric.hpp"
#include "mminfer/parallel.hpp"
#include "mminfer/rng.hpp"

#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <random>

namespace mminfer {

std::string to_string(VarianceShape shape) {
    switch (shape) {
    case VarianceShape::MMType: return "mm";
    case VarianceShape::Exp: return "exp";
    case VarianceShape::Hill: return "hill";
    }
    return "?";
}

VarianceShape parse_variance_shape(const std::string& text) {
    if (text == "mm") return VarianceShape::MMType;
    if (text == "exp") return VarianceShape::Exp;
    if (text == "hill") return VarianceShape::Hill;
    throw Error(ErrorCode::InvalidInput, fmt::format("unknown scenario '{}' (expected mm|exp|hill)", text));
}

std::string to_string(ClusterMethod method) {
    switch (method) {
    case ClusterMethod::PooledNLS: return "pooled-nls";
    case ClusterMethod::PooledPower: return "pooled-pow:0.5";
    case ClusterMethod::ClusteredPower: return "clustered-pow:0.5";
    }
    return "?";
}

double true_variance(VarianceShape shape, double s) {
    switch (shape) {
    case VarianceShape::MMType: return 1.0 + 9.0 * s / (20.0 + s);
    case VarianceShape::Exp: return 1.0 + 9.0 * (1.0 - std::exp(-0.05 * s));
    case VarianceShape::Hill: return 1.0 + 9.0 * s * s / (20.0 * 20.0 + s * s);
    }
    return 1.0;
}

std::vector<double> SingleScenario::grid() const {
    std::vector<double> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[i] = n == 1 ? s_min : s_min + (s_max - s_min) * i / (n - 1);
    return s;
}

std::string SingleScenario::name() const {
    return fmt::format("{}-normal-n{}", to_string(shape), n);
}

Dataset generate_single(const SingleScenario& scenario, std::size_t replicate) {
    const auto s = scenario.grid();
    const std::uint64_t stream = kStreamSingleData + static_cast<std::uint64_t>(scenario.shape);
    Rng rng = make_rng(scenario.master_seed, stream, replicate);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        y[i] = mm_mean(s[i], scenario.truth) + std::sqrt(true_variance(scenario.shape, s[i])) * normal(rng);
    }
    return Dataset(s, std::move(y));
}

double ClusterScenario::marginal_variance(double s) const {
    const double z = s / (truth.km() + s);
    return tau * tau * z * z + gamma_true * eval_h(h_true, s);
}

std::string ClusterScenario::name() const {
    return fmt::format("clustered-m{}", m);
}

ClusteredDataset generate_clustered(const ClusterScenario& scenario, std::size_t replicate) {
    Rng rng = make_rng(scenario.master_seed, kStreamClusterData + static_cast<std::uint64_t>(scenario.m), replicate);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Dataset> clusters;
    clusters.reserve(static_cast<std::size_t>(scenario.m));
    for (int i = 0; i < scenario.m; ++i) {
        const double b = scenario.tau * normal(rng);
        std::vector<double> s, y;
        for (double level : scenario.s_levels) {
            for (int rep = 0; rep < scenario.reps_per_level; ++rep) {
                const double mean = (scenario.truth.vmax() + b) * level / (scenario.truth.km() + level);
                const double sd = std::sqrt(scenario.gamma_true * eval_h(scenario.h_true, level));
                s.push_back(level);
                y.push_back(mean + sd * normal(rng));
            }
        }
        clusters.push_back(Dataset::relaxed(std::move(s), std::move(y)));
    }
    return ClusteredDataset(std::move(clusters));
}

MetricsRow compute_metrics(std::span<const ReplicateRecord> records, const MMParams& truth,
                           std::span<const double> true_variance_curve, double alpha,
                           std::optional<double> true_tau2) {
    if (records.size() < 2) {
        throw Error(ErrorCode::InsufficientSuccesses,
                    fmt::format("metrics need at least 2 successful replicates, got {}", records.size()));
    }
    const double r_count = static_cast<double>(records.size());
    const std::array<double, 2> theta0{truth.vmax(), truth.km()};

    MetricsRow row;
    row.successes = static_cast<int>(records.size());
    for (int j = 0; j < 2; ++j) {
        CompensatedSum err, sq, cover, width, score, est, se;
        for (const auto& rec : records) {
            const double e = rec.estimate[j] - theta0[j];
            const Interval& iv = rec.interval[j];
            err += e;
            sq += e * e;
            est += rec.estimate[j];
            se += rec.se[j];
            cover += iv.contains(theta0[j]) ? 1.0 : 0.0;
            width += iv.width();
            double s_alpha = iv.width();
            if (theta0[j] < iv.lower) s_alpha += (2.0 / alpha) * (iv.lower - theta0[j]);
            if (theta0[j] > iv.upper) s_alpha += (2.0 / alpha) * (theta0[j] - iv.upper);
            score += s_alpha;
        }
        const double mean_est = est.value() / r_count;
        CompensatedSum dev;
        for (const auto& rec : records) dev += (rec.estimate[j] - mean_est) * (rec.estimate[j] - mean_est);
        const double sd = std::sqrt(dev.value() / r_count);

        ParamMetrics& pm = row.param[j];
        pm.bias = err.value() / r_count;
        pm.rmse = std::sqrt(sq.value() / r_count);
        pm.cp = cover.value() / r_count;
        pm.mil = width.value() / r_count;
        pm.interval_score = score.value() / r_count;
        pm.secr = sd / (se.value() / r_count);
    }

    CompensatedSum var_err, runtime, tau_err;
    for (const auto& rec : records) {
        if (rec.fitted_variance.size() != true_variance_curve.size()) {
            throw Error(ErrorCode::InvalidInput, "fitted variance length does not match the true variance curve");
        }
        CompensatedSum point;
        for (std::size_t i = 0; i < true_variance_curve.size(); ++i) {
            const double d = rec.fitted_variance[i] - true_variance_curve[i];
            point += d * d;
        }
        var_err += point.value() / static_cast<double>(true_variance_curve.size());
        runtime += rec.runtime_seconds;
        if (true_tau2 && rec.tau2) tau_err += (*rec.tau2 - *true_tau2) * (*rec.tau2 - *true_tau2);
    }
    row.var_mse = var_err.value() / r_count;
    row.var_rmse = std::sqrt(row.var_mse);
    row.mean_runtime_seconds = runtime.value() / r_count;
    if (true_tau2) row.tau2_rmse = std::sqrt(tau_err.value() / r_count);
    return row;
}

namespace {

using Clock = std::chrono::steady_clock;

bool finite_se(const std::array<double, 2>& se) {
    return std::isfinite(se[0]) && std::isfinite(se[1]);
}

std::optional<ReplicateRecord> single_record(const Dataset& data, const VarianceSpec& spec, const FitConfig& config,
                                             std::span<const double> design) {
    const auto start = Clock::now();
    try {
        const FitResult fit = fit_single(data, spec, config);
        const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
        if (!fit.converged() || !finite_se(fit.se)) return std::nullopt;
        ReplicateRecord rec;
        rec.estimate = {fit.params.vmax(), fit.params.km()};
        rec.se = fit.se;
        rec.interval = {fit.ci_vmax, fit.ci_km};
        rec.fitted_variance.reserve(design.size());
        for (double s : design) rec.fitted_variance.push_back(fit.gamma * eval_h(spec, s));
        rec.runtime_seconds = elapsed;
        return rec;
    } catch (const Error&) {
        return std::nullopt;
    }
}

MetricsRow aggregate(const std::string& scenario, const std::string& method,
                     const std::vector<std::optional<ReplicateRecord>>& slots, const MMParams& truth,
                     std::span<const double> true_curve, double alpha, std::optional<double> true_tau2) {
    std::vector<ReplicateRecord> ok;
    for (const auto& s : slots) {
        if (s) ok.push_back(*s);
    }
    MetricsRow row;
    try {
        row = compute_metrics(ok, truth, true_curve, alpha, true_tau2);
    } catch (const Error&) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (auto& p : row.param) p = {nan, nan, nan, nan, nan, nan};
        row.var_mse = row.var_rmse = nan;
        row.successes = static_cast<int>(ok.size());
    }
    row.scenario = scenario;
    row.method = method;
    row.attempts = static_cast<int>(slots.size());
    return row;
}

} // namespace

BenchmarkReport run_single_benchmark(const SingleBenchmarkConfig& config) {
    BenchmarkReport report;
    report.suite = "single";
    report.seed = config.seed;
    report.replications = config.replications;

    FitConfig fit_config;
    fit_config.alpha = config.alpha;
    const auto reps = static_cast<std::size_t>(config.replications);

    for (VarianceShape shape : config.shapes) {
        SingleScenario scenario;
        scenario.n = config.n;
        scenario.shape = shape;
        scenario.replications = config.replications;
        scenario.master_seed = config.seed;
        const auto design = scenario.grid();
        std::vector<double> truth_curve;
        for (double s : design) truth_curve.push_back(true_variance(shape, s));

        // slots[method][replicate]
        std::vector<std::vector<std::optional<ReplicateRecord>>> slots(
            config.methods.size(), std::vector<std::optional<ReplicateRecord>>(reps));
        parallel_for(reps, config.threads, [&](std::size_t r) {
            const Dataset data = generate_single(scenario, r);
            for (std::size_t m = 0; m < config.methods.size(); ++m) {
                slots[m][r] = single_record(data, config.methods[m], fit_config, design);
            }
        });
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            report.rows.push_back(aggregate(scenario.name(), config.methods[m].label(), slots[m], scenario.truth,
                                            truth_curve, config.alpha, std::nullopt));
        }
    }
    return report;
}

BenchmarkReport run_clustered_benchmark(const ClusterBenchmarkConfig& config) {
    BenchmarkReport report;
    report.suite = "clustered";
    report.seed = config.seed;
    report.replications = config.replications;
    const auto reps = static_cast<std::size_t>(config.replications);

    for (int m : config.cluster_counts) {
        ClusterScenario scenario;
        scenario.m = m;
        scenario.tau = config.tau;
        scenario.gamma_true = config.gamma_true;
        scenario.replications = config.replications;
        scenario.master_seed = config.seed;
        const std::vector<double>& design = scenario.s_levels;
        std::vector<double> truth_curve;
        for (double s : design) truth_curve.push_back(scenario.marginal_variance(s));
        const double true_tau2 = config.tau * config.tau;

        std::vector<std::vector<std::optional<ReplicateRecord>>> slots(
            config.methods.size(), std::vector<std::optional<ReplicateRecord>>(reps));
        parallel_for(reps, config.threads, [&](std::size_t r) {
            const ClusteredDataset data = generate_clustered(scenario, r);
            const Dataset pooled = data.pooled();
            for (std::size_t k = 0; k < config.methods.size(); ++k) {
                const ClusterMethod method = config.methods[k];
                if (method != ClusterMethod::ClusteredPower) {
                    const VarianceSpec spec = method == ClusterMethod::PooledNLS ? VarianceSpec::constant()
                                                                                 : VarianceSpec::power(0.5);
                    FitConfig fc;
                    fc.alpha = config.alpha;
                    slots[k][r] = single_record(pooled, spec, fc, design);
                    continue;
                }
                const auto start = Clock::now();
                try {
                    ClusterFitConfig cc;
                    cc.alpha = config.alpha;
                    const VarianceSpec spec = VarianceSpec::power(0.5);
                    const ClusterFitResult fit = fit_clustered(data, spec, cc);
                    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
                    if (!fit.converged || !finite_se(fit.se)) continue;
                    ReplicateRecord rec;
                    rec.estimate = {fit.params.vmax(), fit.params.km()};
                    rec.se = fit.se;
                    rec.interval = {fit.ci_vmax, fit.ci_km};
                    for (double s : design) {
                        const double z = s / (fit.params.km() + s);
                        rec.fitted_variance.push_back(fit.tau2 * z * z + fit.gamma * eval_h(spec, s));
                    }
                    rec.runtime_seconds = elapsed;
                    rec.tau2 = fit.tau2;
                    slots[k][r] = std::move(rec);
                } catch (const Error&) {
                }
            }
        });
        for (std::size_t k = 0; k < config.methods.size(); ++k) {
            const bool clustered = config.methods[k] == ClusterMethod::ClusteredPower;
            report.rows.push_back(aggregate(scenario.name(), to_string(config.methods[k]), slots[k], scenario.truth,
                                            truth_curve, config.alpha,
                                            clustered ? std::optional<double>(true_tau2) : std::nullopt));
        }
    }
    return report;
}

} // namespace mminfer
