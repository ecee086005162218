#include "mminfer/cli.hpp"
#include "mminfer/report.hpp"
#include "mminfer/simbench.hpp"

#include <doctest.h>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <random>
#include <sstream>

using namespace mminfer;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "mminfer");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch() {
    const fs::path dir = fs::temp_directory_path() / fmt::format("mminfer_cli_{}", ::getpid());
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_csv(const fs::path& p, const std::vector<double>& s, const std::vector<double>& y) {
    std::ofstream out(p);
    out << "substrate,velocity\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << fmt::format("{:.17g},{:.17g}\n", s[i], y[i]);
}

} // namespace

TEST_CASE("fit on noiseless data recovers the parameters") {
    const fs::path dir = scratch();
    std::vector<double> s, y;
    for (double v : {1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0}) {
        s.push_back(v);
        y.push_back(100 * v / (20 + v));
    }
    write_csv(dir / "clean.csv", s, y);
    const Run r = run({"fit", "--input", (dir / "clean.csv").string()});
    REQUIRE(r.code == kExitOk);
    const ReportDocument doc = parse_report_json(r.out);
    REQUIRE(doc.fits.size() == 1);
    CHECK(doc.fits[0].vmax == doctest::Approx(100).epsilon(1e-9));
    CHECK(doc.fits[0].km == doctest::Approx(20).epsilon(1e-9));
    CHECK(doc.rows_in == 8);
    CHECK(doc.input_digest.size() == 16);
}

TEST_CASE("benchmark output is byte-identical across runs and thread counts") {
    const fs::path dir = scratch();
    const auto a = run({"benchmark", "--suite", "single", "--replications", "50", "--seed", "7", "--out",
                        (dir / "a").string()});
    const auto b = run({"benchmark", "--suite", "single", "--replications", "50", "--seed", "7", "--out",
                        (dir / "b").string(), "--threads", "3"});
    REQUIRE(a.code == kExitOk);
    REQUIRE(b.code == kExitOk);
    for (const char* ext : {".csv", ".json"}) {
        const std::string x = slurp(dir / (std::string("a") + ext));
        CHECK_FALSE(x.empty());
        CHECK(x == slurp(dir / (std::string("b") + ext)));
    }
}

TEST_CASE("exit codes") {
    const fs::path dir = scratch();
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"fit"}).code == kExitUsage);
    CHECK(run({"fit", "--input", "x.csv", "--alpha", "abc"}).code == kExitUsage);
    CHECK(run({"fit", "--input", (dir / "missing.csv").string()}).code == kExitData);

    {
        std::ofstream bad(dir / "bad.csv");
        bad << "conc,rate\n1,2\n";
    }
    const Run missing_col = run({"fit", "--input", (dir / "bad.csv").string()});
    CHECK(missing_col.code == kExitData);
    CHECK_FALSE(missing_col.err.empty());

    {
        std::ofstream sat(dir / "sat.csv");
        sat << "substrate,velocity\n1,1\n2,2\n3,3\n";
    }
    CHECK(run({"fit", "--input", (dir / "sat.csv").string(), "--variance", "nonsense"}).code == kExitUsage);
}

TEST_CASE("screening via the CLI favours the square-root model under sqrt(s) noise") {
    const fs::path dir = scratch();
    const fs::path file = dir / "screen.csv";
    int top = 0;
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::normal_distribution<double> z(0.0, 1.0);
        std::vector<double> s, y;
        for (int lvl = 0; lvl < 20; ++lvl) {
            const double level = std::pow(10.0, 4.0 * lvl / 19.0);
            for (int rep = 0; rep < 5; ++rep) {
                s.push_back(level);
                y.push_back(100 * level / (20 + level) + std::pow(level, 0.25) * z(rng));
            }
        }
        write_csv(file, s, y);
        const Run r = run({"screen", "--input", file.string()});
        REQUIRE(r.code == kExitOk);
        const ReportDocument doc = parse_report_json(r.out);
        for (const auto& f : doc.fits) {
            if (f.rank == 1 && f.variance == "pow:0.5") ++top;
        }
    }
    MESSAGE("pow:0.5 ranked first in " << top << " of 100 runs");
    CHECK(top >= 90);
}

TEST_CASE("simulate writes a loadable dataset") {
    const fs::path dir = scratch();
    const Run r = run({"simulate", "--scenario", "hill", "--seed", "3", "--out", (dir / "sim.csv").string()});
    REQUIRE(r.code == kExitOk);
    const Run f = run({"fit", "--input", (dir / "sim.csv").string(), "--format", "text"});
    CHECK(f.code == kExitOk);
    CHECK(f.out.find("S^0.5") != std::string::npos);
    fs::remove_all(dir);
}
