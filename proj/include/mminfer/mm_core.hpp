#pragma once
// Michaelis-Menten mean model, its parameter gradient, working variance
// families and the dataset containers shared by every estimator.
//
//   mu(s; Vmax, Km) = Vmax * s / (Km + s)
//   g(s)            = ( s/(Km+s), -Vmax*s/(Km+s)^2 )
//   Var(Y | s)      = gamma * h(s)

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mminfer {

// Lower clamp applied to every working-variance evaluation.
inline constexpr double kVarianceFloor = 1e-12;

class MMParams {
public:
    // Throws Error(InvalidInput) unless both values are finite and > 0.
    MMParams(double vmax, double km);

    double vmax() const noexcept { return vmax_; }
    double km() const noexcept { return km_; }

    friend bool operator==(const MMParams&, const MMParams&) = default;

private:
    double vmax_;
    double km_;
};

enum class VarianceFamily { Constant, LogShift, Power };

class VarianceSpec {
public:
    static VarianceSpec constant() { return VarianceSpec(VarianceFamily::Constant, 0.0); }
    static VarianceSpec log_shift() { return VarianceSpec(VarianceFamily::LogShift, 0.0); }
    // p must be finite and > 0.
    static VarianceSpec power(double p);

    // Accepts "constant", "log" and "pow:<p>" (the CLI spelling).
    static VarianceSpec parse(const std::string& text);

    VarianceFamily family() const noexcept { return family_; }
    double exponent() const noexcept { return exponent_; }

    // Canonical spelling, inverse of parse(): "constant", "log", "pow:0.5".
    std::string label() const;
    // Human label used in text reports: "NLS", "log(S+1)", "S^0.5".
    std::string display_name() const;

    friend bool operator==(const VarianceSpec&, const VarianceSpec&) = default;

private:
    VarianceSpec(VarianceFamily family, double exponent)
        : family_(family), exponent_(exponent) {}

    VarianceFamily family_;
    double exponent_;
};

// Observations (s_i, y_i) of a single curve.
class Dataset {
public:
    // Full validation: equal lengths, n >= 3, finite s >= 0, finite y and at
    // least three distinct substrate levels.
    Dataset(std::vector<double> s, std::vector<double> y);

    // Only lengths (>= 1) and finiteness/sign are checked. Used for cluster
    // members and for hand-built designs that are deliberately degenerate.
    static Dataset relaxed(std::vector<double> s, std::vector<double> y);

    std::size_t size() const noexcept { return s_.size(); }
    std::span<const double> s() const noexcept { return s_; }
    std::span<const double> y() const noexcept { return y_; }

    std::size_t distinct_levels() const;

    // Same design, responses replaced.
    Dataset with_response(std::vector<double> y) const;

private:
    struct Unchecked {};
    Dataset(Unchecked, std::vector<double> s, std::vector<double> y);

    std::vector<double> s_;
    std::vector<double> y_;
};

class ClusteredDataset {
public:
    // Requires m >= 2 nonempty clusters whose pooled observations satisfy the
    // full Dataset invariants. ids default to "1".."m" when empty.
    ClusteredDataset(std::vector<Dataset> clusters, std::vector<std::string> ids = {});

    std::size_t cluster_count() const noexcept { return clusters_.size(); }
    std::size_t total_size() const noexcept;
    const std::vector<Dataset>& clusters() const noexcept { return clusters_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    Dataset pooled() const;

private:
    std::vector<Dataset> clusters_;
    std::vector<std::string> ids_;
};

double mm_mean(double s, const MMParams& params);
std::array<double, 2> mm_gradient(double s, const MMParams& params);
double eval_h(const VarianceSpec& spec, double s);
std::vector<double> residuals(const Dataset& data, const MMParams& params);

} // namespace mminfer
