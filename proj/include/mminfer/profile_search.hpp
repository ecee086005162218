#pragma once
// One-dimensional search for a positive root of a profile equation in Km.
//
// The function is scanned on a log-spaced grid over [k_lo, k_hi]. The first
// sign change (scanning upward) is refined by a bracketing root finder;
// without a sign change the grid minimiser of F^2 is refined by golden-section
// search on log k between its grid neighbours.

#include <cstddef>
#include <functional>
#include <span>
#include <utility>

namespace mminfer {

struct SearchConfig {
    // Non-positive bounds mean "derive from the design":
    // [1e-4 * min positive s, 1e4 * max s].
    double k_lo = 0.0;
    double k_hi = 0.0;
    int grid_points = 256;
    // |F| <= tol_f_rel * scale counts as a root (scale supplied with F).
    double tol_f_rel = 1e-10;
    // Root bracket width at termination, relative to k.
    double tol_k_rel = 1e-10;
    double golden_tol_rel = 1e-10;
    int max_iterations = 200;
};

struct SolverDiagnostics {
    double k_lo = 0.0;
    double k_hi = 0.0;
    bool used_root = false;
    int iterations = 0;
    double f_at_solution = 0.0;
    // Magnitude against which f_at_solution is judged.
    double f_scale = 0.0;
    bool converged = false;
    // Number of sign changes seen on the grid.
    int sign_changes = 0;
};

// F value together with the magnitude of its largest constituent term.
struct ProfileValue {
    double value = 0.0;
    double scale = 0.0;
};

using ProfileFunction = std::function<ProfileValue(double)>;

struct RootSearchResult {
    double k = 0.0;
    SolverDiagnostics diag;
};

std::pair<double, double> default_bracket(std::span<const double> s);

// Throws Error(NoFiniteEvaluation) when F is non-finite at every grid point.
RootSearchResult search_profile_root(const ProfileFunction& f, double k_lo, double k_hi,
                                     const SearchConfig& config);

// Objective used to choose among several roots; +inf marks a root as
// inadmissible.
using RootCost = std::function<double(double)>;

// With several sign changes every bracket is refined and the root of lowest
// finite cost is returned (the first root when none is finite).
RootSearchResult search_profile_root(const ProfileFunction& f, double k_lo, double k_hi, const SearchConfig& config,
                                     const RootCost& cost);

} // namespace mminfer
