#pragma once
// Monte Carlo benchmark engine: data generators for the single-curve and
// clustered designs, the performance metrics and the two benchmark drivers.
//
// Each replicate draws from its own RNG stream keyed by (seed, scenario,
// replicate index) and every method is fitted to the same generated data.

#include "mminfer/fit_cluster.hpp"
#include "mminfer/fit_single.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mminfer {

enum class VarianceShape { MMType, Exp, Hill };
enum class Innovation { Normal };

std::string to_string(VarianceShape shape);
VarianceShape parse_variance_shape(const std::string& text);

// v_MM(s) = 1 + 9 s/(20+s);  v_Exp(s) = 1 + 9 (1 - e^{-0.05 s});
// v_Hill(s) = 1 + 9 s^2/(20^2 + s^2).
double true_variance(VarianceShape shape, double s);

struct SingleScenario {
    int n = 50;
    double s_min = 1.0;
    double s_max = 100.0;
    MMParams truth{100.0, 20.0};
    VarianceShape shape = VarianceShape::MMType;
    Innovation innovation = Innovation::Normal;
    int replications = 1000;
    std::uint64_t master_seed = 1;

    // n equally spaced concentrations over [s_min, s_max].
    std::vector<double> grid() const;
    std::string name() const;
};

Dataset generate_single(const SingleScenario& scenario, std::size_t replicate);

struct ClusterScenario {
    int m = 6;
    std::vector<double> s_levels{10, 40, 80, 130, 200, 350, 700, 1200};
    int reps_per_level = 4;
    MMParams truth{100.0, 20.0};
    // Standard deviation of the cluster effect on Vmax.
    double tau = 40.0;
    double gamma_true = 25.0;
    VarianceSpec h_true = VarianceSpec::power(0.5);
    int replications = 1000;
    std::uint64_t master_seed = 1;

    // tau^2 z(s)^2 + gamma_true h(s), z = s/(Km+s).
    double marginal_variance(double s) const;
    std::string name() const;
};

ClusteredDataset generate_clustered(const ClusterScenario& scenario, std::size_t replicate);

struct ReplicateRecord {
    std::array<double, 2> estimate{};
    std::array<double, 2> se{};
    std::array<Interval, 2> interval{};
    // Fitted variance at each design point (same order as the true curve).
    std::vector<double> fitted_variance;
    double runtime_seconds = 0.0;
    std::optional<double> tau2;
};

struct ParamMetrics {
    double bias = 0.0;
    double rmse = 0.0;
    double cp = 0.0;
    double mil = 0.0;
    double interval_score = 0.0;
    double secr = 0.0;
};

struct MetricsRow {
    std::string scenario;
    std::string method;
    // [0] Vmax, [1] Km
    std::array<ParamMetrics, 2> param{};
    double var_mse = 0.0;
    double var_rmse = 0.0;
    std::optional<double> tau2_rmse;
    double mean_runtime_seconds = 0.0;
    int successes = 0;
    int attempts = 0;
};

// Averages use 1/R throughout, including the SD in SECR. Throws
// Error(InsufficientSuccesses) when fewer than two records are given.
MetricsRow compute_metrics(std::span<const ReplicateRecord> records, const MMParams& truth,
                           std::span<const double> true_variance_curve, double alpha = 0.05,
                           std::optional<double> true_tau2 = std::nullopt);

struct BenchmarkReport {
    std::string suite;
    std::uint64_t seed = 0;
    int replications = 0;
    std::vector<MetricsRow> rows;
};

struct SingleBenchmarkConfig {
    std::vector<VarianceShape> shapes{VarianceShape::MMType, VarianceShape::Exp, VarianceShape::Hill};
    std::vector<VarianceSpec> methods = default_candidates();
    int n = 50;
    int replications = 1000;
    std::uint64_t seed = 1;
    int threads = 1;
    double alpha = 0.05;
};

BenchmarkReport run_single_benchmark(const SingleBenchmarkConfig& config);

enum class ClusterMethod { PooledNLS, PooledPower, ClusteredPower };
std::string to_string(ClusterMethod method);

struct ClusterBenchmarkConfig {
    std::vector<int> cluster_counts{3, 6};
    std::vector<ClusterMethod> methods{ClusterMethod::PooledNLS, ClusterMethod::PooledPower,
                                       ClusterMethod::ClusteredPower};
    double tau = 40.0;
    double gamma_true = 25.0;
    int replications = 1000;
    std::uint64_t seed = 1;
    int threads = 1;
    double alpha = 0.05;
};

BenchmarkReport run_clustered_benchmark(const ClusterBenchmarkConfig& config);

} // namespace mminfer
