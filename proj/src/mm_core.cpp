#include "mminfer/mm_core.hpp"
#include "mminfer/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>

namespace mminfer {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NoFiniteEvaluation: return "NoFiniteEvaluation";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::NonconvergedFit: return "NonconvergedFit";
    case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorCode::NonPositiveGamma: return "NonPositiveGamma";
    case ErrorCode::InsufficientReplication: return "InsufficientReplication";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::InsufficientSuccesses: return "InsufficientSuccesses";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

MMParams::MMParams(double vmax, double km) : vmax_(vmax), km_(km) {
    if (!(std::isfinite(vmax) && vmax > 0.0) || !(std::isfinite(km) && km > 0.0)) {
        throw Error(ErrorCode::InvalidInput,
                    fmt::format("MMParams requires finite positive values, got vmax={} km={}", vmax, km));
    }
}

VarianceSpec VarianceSpec::power(double p) {
    if (!(std::isfinite(p) && p > 0.0)) {
        throw Error(ErrorCode::InvalidInput, fmt::format("power exponent must be > 0, got {}", p));
    }
    return VarianceSpec(VarianceFamily::Power, p);
}

VarianceSpec VarianceSpec::parse(const std::string& text) {
    if (text == "constant" || text == "nls") return constant();
    if (text == "log") return log_shift();
    if (text.rfind("pow:", 0) == 0) {
        const std::string num = text.substr(4);
        // Accept simple fractions such as pow:1/3.
        if (const auto slash = num.find('/'); slash != std::string::npos) {
            try {
                std::size_t used_a = 0, used_b = 0;
                const std::string a = num.substr(0, slash), b = num.substr(slash + 1);
                const double num_v = std::stod(a, &used_a);
                const double den_v = std::stod(b, &used_b);
                if (used_a == a.size() && used_b == b.size() && den_v != 0.0) return power(num_v / den_v);
            } catch (const std::logic_error&) {
            }
        } else {
            double p = 0.0;
            const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), p);
            if (ec == std::errc{} && ptr == num.data() + num.size()) return power(p);
        }
    }
    throw Error(ErrorCode::InvalidInput,
                fmt::format("unknown variance spec '{}' (expected constant|log|pow:<p>)", text));
}

std::string VarianceSpec::label() const {
    switch (family_) {
    case VarianceFamily::Constant: return "constant";
    case VarianceFamily::LogShift: return "log";
    case VarianceFamily::Power: return fmt::format("pow:{}", exponent_);
    }
    return "?";
}

std::string VarianceSpec::display_name() const {
    switch (family_) {
    case VarianceFamily::Constant: return "NLS";
    case VarianceFamily::LogShift: return "log(S+1)";
    case VarianceFamily::Power: return fmt::format("S^{:.4g}", exponent_);
    }
    return "?";
}

namespace {

void check_values(std::span<const double> s, std::span<const double> y) {
    if (s.size() != y.size()) {
        throw Error(ErrorCode::InvalidInput,
                    fmt::format("substrate/velocity length mismatch ({} vs {})", s.size(), y.size()));
    }
    if (s.empty()) throw Error(ErrorCode::InvalidInput, "dataset is empty");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s[i]) || s[i] < 0.0) {
            throw Error(ErrorCode::InvalidInput, fmt::format("substrate[{}]={} must be finite and >= 0", i, s[i]));
        }
        if (!std::isfinite(y[i])) {
            throw Error(ErrorCode::InvalidInput, fmt::format("velocity[{}] is not finite", i));
        }
    }
}

} // namespace

Dataset::Dataset(Unchecked, std::vector<double> s, std::vector<double> y)
    : s_(std::move(s)), y_(std::move(y)) {}

Dataset::Dataset(std::vector<double> s, std::vector<double> y) : s_(std::move(s)), y_(std::move(y)) {
    check_values(s_, y_);
    if (s_.size() < 3) {
        throw Error(ErrorCode::InvalidInput, fmt::format("need at least 3 observations, got {}", s_.size()));
    }
    if (distinct_levels() < 3) {
        throw Error(ErrorCode::InvalidInput,
                    fmt::format("need at least 3 distinct substrate levels, got {}", distinct_levels()));
    }
}

Dataset Dataset::relaxed(std::vector<double> s, std::vector<double> y) {
    check_values(s, y);
    return Dataset(Unchecked{}, std::move(s), std::move(y));
}

std::size_t Dataset::distinct_levels() const {
    std::vector<double> sorted(s_);
    std::sort(sorted.begin(), sorted.end());
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

Dataset Dataset::with_response(std::vector<double> y) const {
    check_values(s_, y);
    return Dataset(Unchecked{}, s_, std::move(y));
}

ClusteredDataset::ClusteredDataset(std::vector<Dataset> clusters, std::vector<std::string> ids)
    : clusters_(std::move(clusters)), ids_(std::move(ids)) {
    if (clusters_.size() < 2) {
        throw Error(ErrorCode::InvalidInput,
                    fmt::format("clustered data needs at least 2 clusters, got {}", clusters_.size()));
    }
    if (ids_.empty()) {
        for (std::size_t i = 0; i < clusters_.size(); ++i) ids_.push_back(std::to_string(i + 1));
    }
    if (ids_.size() != clusters_.size()) {
        throw Error(ErrorCode::InvalidInput, "cluster id count does not match cluster count");
    }
    // Validates the pooled design (n >= 3, three distinct levels).
    const Dataset all = pooled();
    (void)Dataset(std::vector<double>(all.s().begin(), all.s().end()),
                  std::vector<double>(all.y().begin(), all.y().end()));
}

std::size_t ClusteredDataset::total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& c : clusters_) n += c.size();
    return n;
}

Dataset ClusteredDataset::pooled() const {
    std::vector<double> s, y;
    s.reserve(total_size());
    y.reserve(total_size());
    for (const auto& c : clusters_) {
        s.insert(s.end(), c.s().begin(), c.s().end());
        y.insert(y.end(), c.y().begin(), c.y().end());
    }
    return Dataset::relaxed(std::move(s), std::move(y));
}

double mm_mean(double s, const MMParams& params) {
    return params.vmax() * s / (params.km() + s);
}

std::array<double, 2> mm_gradient(double s, const MMParams& params) {
    const double denom = params.km() + s;
    return {s / denom, -params.vmax() * s / (denom * denom)};
}

double eval_h(const VarianceSpec& spec, double s) {
    double h = 1.0;
    switch (spec.family()) {
    case VarianceFamily::Constant: h = 1.0; break;
    case VarianceFamily::LogShift: h = std::log1p(s); break;
    case VarianceFamily::Power: h = std::pow(s, spec.exponent()); break;
    }
    return std::max(h, kVarianceFloor);
}

std::vector<double> residuals(const Dataset& data, const MMParams& params) {
    std::vector<double> r(data.size());
    const auto s = data.s();
    const auto y = data.y();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - mm_mean(s[i], params);
    return r;
}

} // namespace mminfer
