#pragma once
// Single-curve heteroscedastic Michaelis-Menten fit.
//
// For a fixed working variance h, Km solves the scalar profile equation
//
//   F_h(k) = A(k) C(k) - D(k) B(k) = 0,
//     A = sum s y / ((k+s) h)      B = sum s^2 / ((k+s)^2 h)
//     D = sum s y / ((k+s)^2 h)    C = sum s^2 / ((k+s)^3 h)
//
// after which Vmax = A/B at k = Km, gamma = mean(r^2 / h) and
// Cov(Vmax, Km) = (gamma/n) M^{-1} with M = (1/n) sum g g^T / h.
// With h == 1 this is ordinary nonlinear least squares.

#include "mminfer/errors.hpp"
#include "mminfer/mm_core.hpp"
#include "mminfer/profile_search.hpp"

#include <Eigen/Core>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mminfer {

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    double width() const noexcept { return upper - lower; }
    bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

struct FitConfig {
    double alpha = 0.05;
    SearchConfig search;
};

struct InformationCriteria {
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
};

struct FitResult {
    MMParams params{1.0, 1.0};
    double gamma = 0.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    std::array<double, 2> se{0.0, 0.0};
    Interval ci_vmax;
    Interval ci_km;
    double alpha = 0.05;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    VarianceSpec variance_spec = VarianceSpec::constant();
    SolverDiagnostics solver;
    std::size_t n = 0;

    bool converged() const noexcept { return solver.converged; }
};

// Raised by fit_single when the profile search or the covariance step fails;
// the partially filled result travels with the exception.
class NonconvergedFit : public Error {
public:
    NonconvergedFit(FitResult partial, const std::string& reason)
        : Error(ErrorCode::NonconvergedFit, reason), partial_(std::move(partial)) {}

    const FitResult& partial() const noexcept { return partial_; }

private:
    FitResult partial_;
};

ProfileValue profile_F(double k, const Dataset& data, const VarianceSpec& spec);

RootSearchResult solve_km(const Dataset& data, const VarianceSpec& spec, const SearchConfig& search = {});

// Throws Error(DegenerateDesign) when sum s^2/((km+s)^2 h) <= 0.
double vmax_plugin(double km, const Dataset& data, const VarianceSpec& spec);

double gamma_hat(const Dataset& data, const MMParams& params, const VarianceSpec& spec);

// Throws Error(SingularInformation) when cond(M) > kMaxInformationCondition.
Eigen::Matrix2d plugin_covariance(const Dataset& data, const MMParams& params, double gamma,
                                  const VarianceSpec& spec);

inline constexpr double kMaxInformationCondition = 1e12;
// Parameters counted by the information criteria: Vmax, Km, gamma.
inline constexpr int kCriteriaParameterCount = 3;

InformationCriteria information_criteria(const Dataset& data, const MMParams& params, double gamma,
                                         const VarianceSpec& spec);

// Two-sided Wald interval estimate +- z_{1-alpha/2} * se.
Interval wald_interval(double estimate, double se, double alpha);

// Throws NonconvergedFit (with diagnostics) instead of returning a
// nonconverged result.
FitResult fit_single(const Dataset& data, const VarianceSpec& spec, const FitConfig& config = {});

// ---------------------------------------------------------------------------
// Variance-model screening.

struct ScreenEntry {
    VarianceSpec spec = VarianceSpec::constant();
    std::optional<FitResult> fit;
    std::optional<ErrorCode> error_code;
    std::string error;
    // 1-based AIC rank among successful fits; 0 for failed candidates.
    int rank = 0;
};

// NLS, log(S+1), S^(1/2), S^(1/3).
std::vector<VarianceSpec> default_candidates();

// Ranked by AIC, then BIC, then candidate order; failed fits follow the
// ranked ones in candidate order. Throws Error(AllCandidatesFailed).
std::vector<ScreenEntry> screen_models(const Dataset& data, const std::vector<VarianceSpec>& candidates,
                                       const FitConfig& config = {});

struct GroupOutcome {
    std::vector<ScreenEntry> ranked;
    std::optional<ErrorCode> error_code;
    std::string error;
};

struct SpecSummary {
    VarianceSpec spec = VarianceSpec::constant();
    double mean_aic = 0.0;
    double mean_bic = 0.0;
    double mean_vmax = 0.0;
    double mean_km = 0.0;
    // Labels with a successful fit for this spec.
    int groups = 0;
    int wins = 0;
};

struct GroupFitResult {
    std::map<std::string, GroupOutcome> groups;
    // Candidate order; averages run over successful labels.
    std::vector<SpecSummary> summary;
};

GroupFitResult group_fit(const std::map<std::string, Dataset>& panel, const std::vector<VarianceSpec>& candidates,
                         const FitConfig& config = {});

} // namespace mminfer
