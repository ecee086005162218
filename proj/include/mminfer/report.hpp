#pragma once
// Report documents and their JSON / CSV / text renderings.
//
// JSON is the canonical format: keys are emitted in a fixed order and doubles
// use the shortest representation that round-trips exactly (at most 17
// significant digits), so parse(emit(doc)) == doc.

#include "mminfer/bootstrap.hpp"
#include "mminfer/fit_cluster.hpp"
#include "mminfer/fit_single.hpp"
#include "mminfer/simbench.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mminfer {

inline constexpr const char* kToolName = "mminfer";
inline constexpr const char* kToolVersion = "0.1.0";

struct CurvePoint {
    double s = 0.0;
    double mean = 0.0;
    // Pointwise prediction band mean +- z sqrt(gamma h(s)).
    double lower = 0.0;
    double upper = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct BootstrapBlock {
    int replicates = 0;
    std::string multiplier;
    std::uint64_t seed = 0;
    double level = 0.95;
    Interval ci_vmax;
    Interval ci_km;
    int failures = 0;
    bool flagged = false;
};

struct FitBlock {
    std::string group;
    std::string model;   // "single" or "clustered"
    std::string variance;
    bool ok = false;
    std::string error;
    double vmax = 0.0;
    double km = 0.0;
    double se_vmax = 0.0;
    double se_km = 0.0;
    Interval ci_vmax;
    Interval ci_km;
    double gamma = 0.0;
    std::optional<double> tau2;
    std::optional<bool> boundary_tau2;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    int rank = 0;
    int n = 0;
    bool converged = false;
    bool used_root = false;
    int iterations = 0;
    double f_at_solution = 0.0;
    int sign_changes = 0;
    std::optional<BootstrapBlock> bootstrap;
    std::vector<CurvePoint> curve;
};

struct SummaryBlock {
    std::string variance;
    double mean_aic = 0.0;
    double mean_bic = 0.0;
    double mean_vmax = 0.0;
    double mean_km = 0.0;
    int groups = 0;
    int wins = 0;
};

struct ReportDocument {
    std::string tool = kToolName;
    std::string version = kToolVersion;
    std::string command;
    std::string input_digest;
    std::size_t rows_in = 0;
    std::size_t rows_dropped = 0;
    std::vector<FitBlock> fits;
    std::vector<SummaryBlock> summary;
    std::string suite;
    std::optional<std::uint64_t> seed;
    std::vector<MetricsRow> metrics;
    // Wall-clock runtimes are left out unless asked for, keeping seeded
    // reports byte-reproducible.
    bool include_timing = false;
};

enum class ReportFormat { Json, Csv, Text };
ReportFormat parse_report_format(const std::string& text);

FitBlock make_fit_block(const FitResult& fit, const Dataset& data, const std::string& group = "");
FitBlock make_fit_block(const ClusterFitResult& fit);
FitBlock make_failed_block(const VarianceSpec& spec, const std::string& error, const std::string& group = "");
std::vector<FitBlock> make_screen_blocks(const std::vector<ScreenEntry>& ranked, const Dataset& data,
                                         const std::string& group = "");

std::string emit_report(const ReportDocument& doc, ReportFormat format);
ReportDocument parse_report_json(const std::string& text);

bool operator==(const FitBlock& a, const FitBlock& b);
bool operator==(const SummaryBlock& a, const SummaryBlock& b);
bool same_metrics(const MetricsRow& a, const MetricsRow& b, bool compare_runtime);
bool operator==(const ReportDocument& a, const ReportDocument& b);

} // namespace mminfer
