#include "mminfer/fit_cluster.hpp"
#include "mminfer/simbench.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <numeric>
#include <doctest.h>
#include <random>

using namespace mminfer;

namespace {

const std::vector<double> kLevels{10, 40, 80, 130, 200, 350, 700, 1200};

ClusteredDataset clustered_sample(int m, double tau, double gamma, std::uint64_t seed, std::size_t rep = 0) {
    ClusterScenario sc;
    sc.m = m;
    sc.tau = tau;
    sc.gamma_true = gamma;
    sc.master_seed = seed;
    return generate_clustered(sc, rep);
}

Eigen::VectorXd to_vec(std::span<const double> x) {
    return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

std::vector<std::vector<double>> cluster_s(const ClusteredDataset& d) {
    std::vector<std::vector<double>> out;
    for (const auto& c : d.clusters()) out.emplace_back(c.s().begin(), c.s().end());
    return out;
}

std::vector<std::vector<double>> cluster_y(const ClusteredDataset& d) {
    std::vector<std::vector<double>> out;
    for (const auto& c : d.clusters()) out.emplace_back(c.y().begin(), c.y().end());
    return out;
}

} // namespace

TEST_CASE("cluster_design") {
    const MMParams p(100, 20);
    const auto d0 = cluster_design(Dataset::relaxed({20, 20, 20}, {1, 2, 3}), p, VarianceSpec::power(0.5));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(d0.z(j) == 0.5);

    const Dataset c({3, 17, 60, 250}, {10, 40, 70, 90});
    const auto d = cluster_design(c, MMParams(95, 22), VarianceSpec::log_shift());
    CHECK(d.d.col(0) == d.z);
    for (Eigen::Index j = 0; j < 4; ++j) {
        const auto fd = oracle::fd_gradient(c.s()[j], 95, 22);
        CHECK(std::abs(d.d(j, 0) - fd[0]) <= 1e-6 * std::abs(fd[0]));
        CHECK(std::abs(d.d(j, 1) - fd[1]) <= 1e-6 * std::abs(fd[1]));
        CHECK(d.h(j) == std::log1p(c.s()[j]));
    }
}

TEST_CASE("solve_working_cov closed cases") {
    Eigen::VectorXd z(3), h(3), rhs(3);
    z << 0.2, 0.5, 0.9;
    h << 1.5, 2.0, 4.0;
    rhs << 1.0, -2.0, 3.0;
    const Eigen::VectorXd diag = solve_working_cov(z, h, 0.0, 2.0, rhs);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(diag(j) == doctest::Approx(rhs(j) / (2.0 * h(j))).epsilon(1e-15));

    Eigen::VectorXd z2(2), h2(2), r2(2);
    z2 << 1, 1;
    h2 << 1, 1;
    r2 << 1, 0;
    const Eigen::VectorXd x = solve_working_cov(z2, h2, 1.0, 1.0, r2);
    CHECK(x(0) == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(x(1) == doctest::Approx(-1.0 / 3).epsilon(1e-15));

    CHECK_THROWS_AS(solve_working_cov(z2, h2, 1.0, 0.0, r2), Error);
}

TEST_CASE("solve_working_cov matches dense solves on random instances") {
    std::mt19937_64 rng(2718);
    std::uniform_int_distribution<int> size(1, 8);
    std::uniform_real_distribution<double> u(0.01, 1.0), lu(-3, 3), r(-5, 5);
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const int n = size(rng);
        Eigen::VectorXd z(n), h(n);
        Eigen::MatrixXd rhs(n, 3);
        for (int j = 0; j < n; ++j) {
            z(j) = u(rng);
            h(j) = std::exp(lu(rng));
            for (int c = 0; c < 3; ++c) rhs(j, c) = r(rng);
        }
        const double tau2 = std::exp(lu(rng)), gamma = std::exp(lu(rng));
        const Eigen::MatrixXd a = solve_working_cov(z, h, tau2, gamma, rhs);
        const Eigen::MatrixXd b = oracle::dense_solve(z, h, tau2, gamma, rhs);
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("working covariance marginal moments") {
    Eigen::VectorXd z(3), h(3);
    z << 0.3, 0.6, 0.8;
    h << 1, 2, 3;
    const Eigen::MatrixXd v = oracle::dense_working_cov(z, h, 4.0, 0.5);
    // V^{-1} applied to V recovers the identity, so the rank-one form is the covariance V.
    const Eigen::MatrixXd back = solve_working_cov(z, h, 4.0, 0.5, v);
    CHECK((back - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(v(1, 1) == doctest::Approx(4.0 * 0.36 + 0.5 * 2));
    CHECK(v(0, 2) == doctest::Approx(4.0 * 0.3 * 0.8));
}

TEST_CASE("gls_km_profile without random effect matches the single-curve solver") {
    const ClusteredDataset d = clustered_sample(3, 0.0, 25.0, 5);
    const auto spec = VarianceSpec::power(0.5);
    const Dataset pooled = d.pooled();
    const double km = solve_km(pooled, spec).k;
    const double vmax = vmax_plugin(km, pooled, spec);
    const auto g = gls_km_profile(d, spec, 0.0, 25.0, MMParams(100, 20));
    CHECK(g.km == doctest::Approx(km).epsilon(1e-9));
    CHECK(g.vmax == doctest::Approx(vmax).epsilon(1e-9));
}

TEST_CASE("gls_km_profile on noiseless clusters returns the truth") {
    const ClusteredDataset d = clustered_sample(4, 0.0, 0.0, 1);
    const auto g = gls_km_profile(d, VarianceSpec::power(0.5), 100.0, 1.0, MMParams(90, 25));
    CHECK(std::abs(g.km - 20) <= 1e-6 * 20);
    CHECK(std::abs(g.vmax - 100) <= 1e-6 * 100);
}

TEST_CASE("gls_km_profile matches a brute-force GLS criterion grid") {
    std::mt19937_64 rng(44);
    std::normal_distribution<double> z;
    const std::vector<double> s{5, 20, 60, 200};
    std::vector<Dataset> clusters;
    for (int c = 0; c < 2; ++c) {
        const double b = 15 * z(rng);
        std::vector<double> y;
        for (double v : s) y.push_back((100 + b) * v / (20 + v) + std::sqrt(3 * std::sqrt(v)) * z(rng));
        clusters.emplace_back(s, y);
    }
    const ClusteredDataset d(clusters);
    const MMParams anchor(100, 20);
    const double tau2 = 200, gamma = 3;
    const auto g = gls_km_profile(d, VarianceSpec::power(0.5), tau2, gamma, anchor);

    const auto cs = cluster_s(d), cy = cluster_y(d);
    double best = 1e300, bv = 0, bk = 0;
    double v_lo = 20, v_hi = 300, k_lo = std::log(0.5), k_hi = std::log(500);
    int pts = 301;
    for (int round = 0; round < 30; ++round) {
        for (int i = 0; i < pts; ++i) {
            for (int j = 0; j < pts; ++j) {
                const double v = v_lo + (v_hi - v_lo) * i / (pts - 1);
                const double k = std::exp(k_lo + (k_hi - k_lo) * j / (pts - 1));
                const double q = oracle::dense_gls_criterion(cs, cy, v, k, 20, tau2, gamma, 0.5);
                if (q < best) {
                    best = q;
                    bv = v;
                    bk = k;
                }
            }
        }
        const double dv = 4 * (v_hi - v_lo) / (pts - 1), dk = 4 * (k_hi - k_lo) / (pts - 1);
        v_lo = bv - dv;
        v_hi = bv + dv;
        k_lo = std::log(bk) - dk;
        k_hi = std::log(bk) + dk;
        pts = 41;
    }
    CHECK(std::abs(g.km - bk) <= 1e-3 * bk);
    CHECK(std::abs(g.vmax - bv) <= 1e-3 * bv);
}

TEST_CASE("moment_update_variance plant-and-recover") {
    const MMParams p(100, 20);
    const double c = 12.0;
    std::vector<Dataset> clusters;
    for (int i = 0; i < 4; ++i) {
        const double b = (i % 2 == 0) ? c : -c;
        std::vector<double> s, y;
        for (double v : kLevels) {
            s.push_back(v);
            y.push_back(mm_mean(v, p) + b * v / (20 + v));
        }
        clusters.emplace_back(s, y);
    }
    const ClusteredDataset d(clusters);
    const auto vc = moment_update_variance(d, p, VarianceSpec::power(0.5));
    CHECK(vc.tau2 == doctest::Approx(c * c).epsilon(1e-12));
    CHECK(vc.gamma == doctest::Approx(gamma_floor(d)).epsilon(1e-3));
    CHECK_FALSE(vc.tau2_truncated);

    std::vector<Dataset> exact;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> y;
        for (double v : kLevels) y.push_back(mm_mean(v, p));
        exact.emplace_back(kLevels, y);
    }
    const ClusteredDataset e(exact);
    const auto z = moment_update_variance(e, p, VarianceSpec::power(0.5));
    CHECK(z.tau2 == 0.0);
    CHECK(z.gamma == gamma_floor(e));
}

TEST_CASE("moment_update_variance truncates on about half of independent datasets") {
    int truncated = 0;
    const int runs = 400;
    double mean_tau2 = 0;
    for (int r = 0; r < runs; ++r) {
        const ClusteredDataset d = clustered_sample(6, 0.0, 25.0, 77, static_cast<std::size_t>(r));
        const auto vc = moment_update_variance(d, MMParams(100, 20), VarianceSpec::power(0.5));
        truncated += vc.tau2_truncated ? 1 : 0;
        mean_tau2 += vc.tau2 / runs;
    }
    CHECK(truncated > runs * 0.4);
    CHECK(truncated < runs * 0.6);
    CHECK(mean_tau2 < 20);
}

TEST_CASE("variance components ignore cluster and observation order") {
    const ClusteredDataset d = clustered_sample(5, 40, 25, 3);
    std::vector<Dataset> shuffled;
    std::mt19937_64 rng(1);
    for (auto it = d.clusters().rbegin(); it != d.clusters().rend(); ++it) {
        std::vector<std::size_t> idx(it->size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<double> s, y;
        for (auto i : idx) {
            s.push_back(it->s()[i]);
            y.push_back(it->y()[i]);
        }
        shuffled.emplace_back(s, y);
    }
    const ClusteredDataset e(shuffled);
    const MMParams p(97, 19);
    const auto a = moment_update_variance(d, p, VarianceSpec::power(0.5));
    const auto b = moment_update_variance(e, p, VarianceSpec::power(0.5));
    CHECK(a.tau2 == doctest::Approx(b.tau2).epsilon(1e-12));
    CHECK(a.gamma == doctest::Approx(b.gamma).epsilon(1e-12));
}

TEST_CASE("singleton clusters have no replication") {
    const ClusteredDataset d({Dataset::relaxed({1}, {1}), Dataset::relaxed({5}, {4}), Dataset::relaxed({20}, {9})});
    try {
        (void)moment_update_variance(d, MMParams(10, 5), VarianceSpec::constant());
        FAIL("expected InsufficientReplication");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientReplication);
    }
    CHECK_THROWS_AS(fit_clustered(d, VarianceSpec::constant()), Error);
}

TEST_CASE("cluster_covariance identities") {
    const ClusteredDataset d = clustered_sample(2, 40, 25, 8);
    const auto spec = VarianceSpec::power(0.5);
    const MMParams p(101, 21);

    // Zero random effect: identical to the single-curve plug-in covariance of the pooled data.
    const Eigen::Matrix2d a = cluster_covariance(d, p, 0.0, 25.0, spec);
    const Eigen::Matrix2d b = plugin_covariance(d.pooled(), p, 25.0, spec);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());

    // Dense assembly.
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    for (const auto& c : d.clusters()) {
        const auto n = static_cast<Eigen::Index>(c.size());
        Eigen::MatrixXd dm(n, 2);
        Eigen::VectorXd z(n), h(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double s = c.s()[j];
            z(j) = s / (21 + s);
            h(j) = std::sqrt(s);
            dm(j, 0) = z(j);
            dm(j, 1) = -101 * s / ((21 + s) * (21 + s));
        }
        info += dm.transpose() * oracle::dense_working_cov(z, h, 1600, 25).ldlt().solve(dm);
    }
    const Eigen::Matrix2d dense = info.inverse();
    const Eigen::Matrix2d mine = cluster_covariance(d, p, 1600, 25, spec);
    CHECK((mine - dense).cwiseAbs().maxCoeff() <= 1e-10 * dense.cwiseAbs().maxCoeff());
    CHECK(mine(0, 1) == mine(1, 0));

    std::vector<Dataset> twice = d.clusters();
    twice.insert(twice.end(), d.clusters().begin(), d.clusters().end());
    const Eigen::Matrix2d half = cluster_covariance(ClusteredDataset(twice), p, 1600, 25, spec);
    CHECK((half - 0.5 * mine).cwiseAbs().maxCoeff() <= 1e-10 * mine.cwiseAbs().maxCoeff());
}

TEST_CASE("fit_clustered reduces to the pooled fit when tau2 is truncated") {
    int checked = 0;
    for (std::size_t r = 0; r < 40 && checked < 5; ++r) {
        const ClusteredDataset d = clustered_sample(6, 0.0, 25.0, 90, r);
        const ClusterFitResult f = fit_clustered(d, VarianceSpec::power(0.5));
        if (!f.boundary_tau2) continue;
        ++checked;
        const FitResult p = fit_single(d.pooled(), VarianceSpec::power(0.5));
        CHECK(f.converged);
        CHECK(f.tau2 == 0.0);
        CHECK(std::abs(f.params.vmax() - p.params.vmax()) <= 1e-8 * p.params.vmax());
        CHECK(std::abs(f.params.km() - p.params.km()) <= 1e-8 * p.params.km());
    }
    CHECK(checked == 5);
}

TEST_CASE("fit_clustered on random-effect data") {
    const ClusteredDataset d = clustered_sample(6, 40, 25, 2);
    const auto spec = VarianceSpec::power(0.5);
    const ClusterFitResult f = fit_clustered(d, spec);
    REQUIRE(f.converged);
    CHECK(f.tau2 > 0);
    CHECK(f.gamma > 0);
    CHECK(f.clusters == 6);
    CHECK(f.n == 192);
    CHECK(std::isfinite(f.se[0]));
    CHECK(f.ci_vmax.contains(f.params.vmax()));

    // Stacked score at the solution, with V built at the solution.
    Eigen::Vector2d score = Eigen::Vector2d::Zero();
    double scale = 0;
    for (const auto& c : d.clusters()) {
        const auto des = cluster_design(c, f.params, spec);
        Eigen::VectorXd r = to_vec(c.y());
        for (Eigen::Index j = 0; j < r.size(); ++j) r(j) -= mm_mean(c.s()[j], f.params);
        score += des.d.transpose() * solve_working_cov(des.z, des.h, f.tau2, f.gamma, r);
        scale += (des.d.transpose() * solve_working_cov(des.z, des.h, f.tau2, f.gamma, to_vec(c.y()))).norm();
    }
    CHECK(score.norm() <= 1e-6 * scale);
}

TEST_CASE("fit_clustered without clustering stays near the pooled fit") {
    const ClusteredDataset d = clustered_sample(6, 0.0, 25.0, 31, 1);
    const ClusterFitResult f = fit_clustered(d, VarianceSpec::power(0.5));
    const FitResult p = fit_single(d.pooled(), VarianceSpec::power(0.5));
    CHECK(f.params.vmax() == doctest::Approx(p.params.vmax()).epsilon(1e-6));
    CHECK(f.params.km() == doctest::Approx(p.params.km()).epsilon(1e-6));
    CHECK(f.tau2 < 50);
}
