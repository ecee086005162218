#include "mminfer/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <json.hpp>
#include <limits>
#include <sstream>

namespace mminfer {

using ojson = nlohmann::ordered_json;

ReportFormat parse_report_format(const std::string& text) {
    if (text == "json") return ReportFormat::Json;
    if (text == "csv") return ReportFormat::Csv;
    if (text == "text") return ReportFormat::Text;
    throw Error(ErrorCode::Usage, fmt::format("unknown report format '{}'", text));
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<CurvePoint> fitted_curve(const MMParams& params, double gamma, const VarianceSpec& spec,
                                     std::span<const double> s, double alpha) {
    const double s_max = *std::max_element(s.begin(), s.end());
    const double z = wald_interval(0.0, 1.0, alpha).upper;
    constexpr int points = 60;
    std::vector<CurvePoint> out;
    out.reserve(points);
    for (int i = 0; i < points; ++i) {
        const double x = s_max * i / (points - 1);
        const double mean = mm_mean(x, params);
        const double half = z * std::sqrt(gamma * eval_h(spec, x));
        out.push_back({x, mean, mean - half, mean + half});
    }
    return out;
}

bool same(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool same(const Interval& a, const Interval& b) {
    return same(a.lower, b.lower) && same(a.upper, b.upper);
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    return a.has_value() == b.has_value() && (!a || same(*a, *b));
}

// JSON has no NaN/Inf; they are written as null and read back as NaN.
ojson num(double v) {
    return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

double get_num(const ojson& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? kNaN : v.get<double>();
}

ojson interval_json(const Interval& iv) {
    return ojson::array({num(iv.lower), num(iv.upper)});
}

Interval get_interval(const ojson& j, const char* key) {
    const auto& a = j.at(key);
    return {a.at(0).is_null() ? kNaN : a.at(0).get<double>(), a.at(1).is_null() ? kNaN : a.at(1).get<double>()};
}

ojson fit_json(const FitBlock& f) {
    ojson j;
    j["group"] = f.group;
    j["model"] = f.model;
    j["variance"] = f.variance;
    j["ok"] = f.ok;
    j["error"] = f.error;
    j["rank"] = f.rank;
    j["n"] = f.n;
    j["vmax"] = num(f.vmax);
    j["km"] = num(f.km);
    j["se_vmax"] = num(f.se_vmax);
    j["se_km"] = num(f.se_km);
    j["ci_vmax"] = interval_json(f.ci_vmax);
    j["ci_km"] = interval_json(f.ci_km);
    j["gamma"] = num(f.gamma);
    j["tau2"] = f.tau2 ? num(*f.tau2) : ojson(nullptr);
    j["boundary_tau2"] = f.boundary_tau2 ? ojson(*f.boundary_tau2) : ojson(nullptr);
    j["loglik"] = num(f.loglik);
    j["aic"] = num(f.aic);
    j["bic"] = num(f.bic);
    j["diagnostics"] = {{"converged", f.converged},
                        {"used_root", f.used_root},
                        {"iterations", f.iterations},
                        {"f_at_solution", num(f.f_at_solution)},
                        {"sign_changes", f.sign_changes}};
    if (f.bootstrap) {
        const auto& b = *f.bootstrap;
        j["bootstrap"] = {{"replicates", b.replicates}, {"multiplier", b.multiplier}, {"seed", b.seed},
                          {"level", b.level},           {"ci_vmax", interval_json(b.ci_vmax)},
                          {"ci_km", interval_json(b.ci_km)}, {"failures", b.failures}, {"flagged", b.flagged}};
    } else {
        j["bootstrap"] = nullptr;
    }
    ojson curve = ojson::array();
    for (const auto& p : f.curve) curve.push_back(ojson::array({num(p.s), num(p.mean), num(p.lower), num(p.upper)}));
    j["curve"] = std::move(curve);
    return j;
}

FitBlock fit_from_json(const ojson& j) {
    FitBlock f;
    f.group = j.at("group").get<std::string>();
    f.model = j.at("model").get<std::string>();
    f.variance = j.at("variance").get<std::string>();
    f.ok = j.at("ok").get<bool>();
    f.error = j.at("error").get<std::string>();
    f.rank = j.at("rank").get<int>();
    f.n = j.at("n").get<int>();
    f.vmax = get_num(j, "vmax");
    f.km = get_num(j, "km");
    f.se_vmax = get_num(j, "se_vmax");
    f.se_km = get_num(j, "se_km");
    f.ci_vmax = get_interval(j, "ci_vmax");
    f.ci_km = get_interval(j, "ci_km");
    f.gamma = get_num(j, "gamma");
    if (!j.at("tau2").is_null()) f.tau2 = j.at("tau2").get<double>();
    if (!j.at("boundary_tau2").is_null()) f.boundary_tau2 = j.at("boundary_tau2").get<bool>();
    f.loglik = get_num(j, "loglik");
    f.aic = get_num(j, "aic");
    f.bic = get_num(j, "bic");
    const auto& d = j.at("diagnostics");
    f.converged = d.at("converged").get<bool>();
    f.used_root = d.at("used_root").get<bool>();
    f.iterations = d.at("iterations").get<int>();
    f.f_at_solution = get_num(d, "f_at_solution");
    f.sign_changes = d.at("sign_changes").get<int>();
    if (!j.at("bootstrap").is_null()) {
        const auto& b = j.at("bootstrap");
        BootstrapBlock bb;
        bb.replicates = b.at("replicates").get<int>();
        bb.multiplier = b.at("multiplier").get<std::string>();
        bb.seed = b.at("seed").get<std::uint64_t>();
        bb.level = b.at("level").get<double>();
        bb.ci_vmax = get_interval(b, "ci_vmax");
        bb.ci_km = get_interval(b, "ci_km");
        bb.failures = b.at("failures").get<int>();
        bb.flagged = b.at("flagged").get<bool>();
        f.bootstrap = bb;
    }
    for (const auto& p : j.at("curve")) {
        auto at = [&](int i) { return p.at(i).is_null() ? kNaN : p.at(i).get<double>(); };
        f.curve.push_back({at(0), at(1), at(2), at(3)});
    }
    return f;
}

ojson param_metrics_json(const ParamMetrics& p) {
    return {{"bias", num(p.bias)}, {"rmse", num(p.rmse)},   {"cp", num(p.cp)},
            {"mil", num(p.mil)},   {"interval_score", num(p.interval_score)}, {"secr", num(p.secr)}};
}

ParamMetrics param_metrics_from_json(const ojson& j) {
    return {get_num(j, "bias"), get_num(j, "rmse"), get_num(j, "cp"),
            get_num(j, "mil"),  get_num(j, "interval_score"), get_num(j, "secr")};
}

ojson metrics_json(const MetricsRow& m, bool timing) {
    ojson j;
    j["scenario"] = m.scenario;
    j["method"] = m.method;
    j["vmax"] = param_metrics_json(m.param[0]);
    j["km"] = param_metrics_json(m.param[1]);
    j["var_mse"] = num(m.var_mse);
    j["var_rmse"] = num(m.var_rmse);
    j["tau2_rmse"] = m.tau2_rmse ? num(*m.tau2_rmse) : ojson(nullptr);
    j["mean_runtime_seconds"] = timing ? num(m.mean_runtime_seconds) : ojson(nullptr);
    j["successes"] = m.successes;
    j["attempts"] = m.attempts;
    return j;
}

MetricsRow metrics_from_json(const ojson& j) {
    MetricsRow m;
    m.scenario = j.at("scenario").get<std::string>();
    m.method = j.at("method").get<std::string>();
    m.param[0] = param_metrics_from_json(j.at("vmax"));
    m.param[1] = param_metrics_from_json(j.at("km"));
    m.var_mse = get_num(j, "var_mse");
    m.var_rmse = get_num(j, "var_rmse");
    if (!j.at("tau2_rmse").is_null()) m.tau2_rmse = j.at("tau2_rmse").get<double>();
    m.mean_runtime_seconds = j.at("mean_runtime_seconds").is_null() ? 0.0 : j.at("mean_runtime_seconds").get<double>();
    m.successes = j.at("successes").get<int>();
    m.attempts = j.at("attempts").get<int>();
    return m;
}

std::string g17(double v) {
    return fmt::format("{:.17g}", v);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string emit_json(const ReportDocument& doc) {
    ojson j;
    j["tool"] = doc.tool;
    j["version"] = doc.version;
    j["command"] = doc.command;
    j["input"] = {{"digest", doc.input_digest}, {"rows_in", doc.rows_in}, {"rows_dropped", doc.rows_dropped}};
    ojson fits = ojson::array();
    for (const auto& f : doc.fits) fits.push_back(fit_json(f));
    j["fits"] = std::move(fits);
    ojson summary = ojson::array();
    for (const auto& s : doc.summary) {
        summary.push_back({{"variance", s.variance}, {"mean_aic", num(s.mean_aic)}, {"mean_bic", num(s.mean_bic)},
                           {"mean_vmax", num(s.mean_vmax)}, {"mean_km", num(s.mean_km)}, {"groups", s.groups},
                           {"wins", s.wins}});
    }
    j["summary"] = std::move(summary);
    ojson bench;
    bench["suite"] = doc.suite;
    bench["seed"] = doc.seed ? ojson(*doc.seed) : ojson(nullptr);
    bench["include_timing"] = doc.include_timing;
    ojson metrics = ojson::array();
    for (const auto& m : doc.metrics) metrics.push_back(metrics_json(m, doc.include_timing));
    bench["metrics"] = std::move(metrics);
    j["benchmark"] = std::move(bench);
    return j.dump(2) + "\n";
}

std::string emit_csv(const ReportDocument& doc) {
    std::ostringstream out;
    if (!doc.fits.empty()) {
        out << "group,model,variance,rank,ok,n,vmax,se_vmax,vmax_lower,vmax_upper,km,se_km,km_lower,km_upper,"
               "gamma,tau2,loglik,aic,bic,converged,used_root,iterations,error\n";
        for (const auto& f : doc.fits) {
            out << csv_field(f.group) << ',' << f.model << ',' << f.variance << ',' << f.rank << ','
                << (f.ok ? 1 : 0) << ',' << f.n << ',' << g17(f.vmax) << ',' << g17(f.se_vmax) << ','
                << g17(f.ci_vmax.lower) << ',' << g17(f.ci_vmax.upper) << ',' << g17(f.km) << ',' << g17(f.se_km)
                << ',' << g17(f.ci_km.lower) << ',' << g17(f.ci_km.upper) << ',' << g17(f.gamma) << ','
                << (f.tau2 ? g17(*f.tau2) : std::string()) << ',' << g17(f.loglik) << ',' << g17(f.aic) << ','
                << g17(f.bic) << ',' << (f.converged ? 1 : 0) << ',' << (f.used_root ? 1 : 0) << ','
                << f.iterations << ',' << csv_field(f.error) << '\n';
        }
    }
    if (!doc.metrics.empty()) {
        out << "scenario,method,successes,attempts";
        for (const char* p : {"vmax", "km"}) {
            for (const char* m : {"bias", "rmse", "cp", "mil", "interval_score", "secr"}) out << ',' << m << '_' << p;
        }
        out << ",var_mse,var_rmse,tau2_rmse,mean_runtime_seconds\n";
        for (const auto& m : doc.metrics) {
            out << m.scenario << ',' << m.method << ',' << m.successes << ',' << m.attempts;
            for (const auto& p : m.param) {
                out << ',' << g17(p.bias) << ',' << g17(p.rmse) << ',' << g17(p.cp) << ',' << g17(p.mil) << ','
                    << g17(p.interval_score) << ',' << g17(p.secr);
            }
            out << ',' << g17(m.var_mse) << ',' << g17(m.var_rmse) << ','
                << (m.tau2_rmse ? g17(*m.tau2_rmse) : std::string()) << ','
                << (doc.include_timing ? g17(m.mean_runtime_seconds) : std::string()) << '\n';
        }
    }
    return out.str();
}

std::string emit_text(const ReportDocument& doc) {
    std::ostringstream out;
    out << fmt::format("{} {} - {}\n", doc.tool, doc.version, doc.command);
    if (!doc.input_digest.empty()) {
        out << fmt::format("input digest {}  rows read {}  dropped {}\n", doc.input_digest, doc.rows_in,
                           doc.rows_dropped);
    }
    if (!doc.fits.empty()) {
        out << fmt::format("\n{:<10} {:<10} {:>12} {:>27} {:>12} {:>27} {:>12} {:>12} {:>12} {:>5}\n", "Group",
                           "Model", "Vmax", "95% CI (Vmax)", "Km", "95% CI (Km)", "gamma", "AIC", "BIC", "Rank");
        for (const auto& f : doc.fits) {
            std::string name = VarianceSpec::parse(f.variance).display_name();
            if (f.model == "clustered") name = "GLS " + name;
            if (!f.ok) {
                out << fmt::format("{:<10} {:<10} failed: {}\n", f.group, name, f.error);
                continue;
            }
            out << fmt::format("{:<10} {:<10} {:>12.5g} {:>27} {:>12.5g} {:>27} {:>12.4g} {:>12.5g} {:>12.5g} {:>5}\n",
                               f.group, name, f.vmax,
                               fmt::format("[{:.5g}, {:.5g}]", f.ci_vmax.lower, f.ci_vmax.upper), f.km,
                               fmt::format("[{:.5g}, {:.5g}]", f.ci_km.lower, f.ci_km.upper), f.gamma, f.aic, f.bic,
                               f.rank);
        }
    }
    if (!doc.summary.empty()) {
        out << fmt::format("\n{:<10} {:>12} {:>12} {:>12} {:>12} {:>7} {:>5}\n", "Model", "Mean AIC", "Mean BIC",
                           "Avg Vmax", "Avg Km", "Groups", "Wins");
        for (const auto& s : doc.summary) {
            out << fmt::format("{:<10} {:>12.5g} {:>12.5g} {:>12.5g} {:>12.5g} {:>7} {:>5}\n",
                               VarianceSpec::parse(s.variance).display_name(),
                               s.mean_aic, s.mean_bic, s.mean_vmax, s.mean_km, s.groups, s.wins);
        }
    }
    if (!doc.metrics.empty()) {
        out << fmt::format("\n{:<18} {:<18} {:>9} {:>9} {:>7} {:>8} {:>9} {:>9} {:>7} {:>8} {:>10}\n", "Scenario",
                           "Method", "Bias(V)", "RMSE(V)", "CP(V)", "MIL(V)", "Bias(K)", "RMSE(K)", "CP(K)", "MIL(K)",
                           "Var_MSE");
        for (const auto& m : doc.metrics) {
            out << fmt::format("{:<18} {:<18} {:>9.5f} {:>9.5f} {:>7.3f} {:>8.4f} {:>9.5f} {:>9.5f} {:>7.3f} {:>8.4f} {:>10.5g}\n",
                               m.scenario, m.method, m.param[0].bias, m.param[0].rmse, m.param[0].cp,
                               m.param[0].mil, m.param[1].bias, m.param[1].rmse, m.param[1].cp, m.param[1].mil,
                               m.var_mse);
        }
    }
    return out.str();
}

} // namespace

FitBlock make_fit_block(const FitResult& fit, const Dataset& data, const std::string& group) {
    FitBlock b;
    b.group = group;
    b.model = "single";
    b.variance = fit.variance_spec.label();
    b.ok = true;
    b.vmax = fit.params.vmax();
    b.km = fit.params.km();
    b.se_vmax = fit.se[0];
    b.se_km = fit.se[1];
    b.ci_vmax = fit.ci_vmax;
    b.ci_km = fit.ci_km;
    b.gamma = fit.gamma;
    b.loglik = fit.loglik;
    b.aic = fit.aic;
    b.bic = fit.bic;
    b.rank = 1;
    b.n = static_cast<int>(fit.n);
    b.converged = fit.converged();
    b.used_root = fit.solver.used_root;
    b.iterations = fit.solver.iterations;
    b.f_at_solution = fit.solver.f_at_solution;
    b.sign_changes = fit.solver.sign_changes;
    b.curve = fitted_curve(fit.params, fit.gamma, fit.variance_spec, data.s(), fit.alpha);
    return b;
}

FitBlock make_fit_block(const ClusterFitResult& fit) {
    FitBlock b;
    b.model = "clustered";
    b.variance = fit.variance_spec.label();
    b.ok = true;
    b.vmax = fit.params.vmax();
    b.km = fit.params.km();
    b.se_vmax = fit.se[0];
    b.se_km = fit.se[1];
    b.ci_vmax = fit.ci_vmax;
    b.ci_km = fit.ci_km;
    b.gamma = fit.gamma;
    b.tau2 = fit.tau2;
    b.boundary_tau2 = fit.boundary_tau2;
    b.loglik = kNaN;
    b.aic = kNaN;
    b.bic = kNaN;
    b.rank = 1;
    b.n = static_cast<int>(fit.n);
    b.converged = fit.converged;
    b.used_root = fit.solver.used_root;
    b.iterations = fit.iterations;
    b.f_at_solution = fit.solver.f_at_solution;
    b.sign_changes = fit.solver.sign_changes;
    return b;
}

FitBlock make_failed_block(const VarianceSpec& spec, const std::string& error, const std::string& group) {
    FitBlock b;
    b.group = group;
    b.model = "single";
    b.variance = spec.label();
    b.ok = false;
    b.error = error;
    b.vmax = b.km = b.se_vmax = b.se_km = b.gamma = b.loglik = b.aic = b.bic = kNaN;
    b.ci_vmax = b.ci_km = {kNaN, kNaN};
    b.f_at_solution = kNaN;
    return b;
}

std::vector<FitBlock> make_screen_blocks(const std::vector<ScreenEntry>& ranked, const Dataset& data,
                                         const std::string& group) {
    std::vector<FitBlock> out;
    for (const auto& e : ranked) {
        if (e.fit) {
            FitBlock b = make_fit_block(*e.fit, data, group);
            b.rank = e.rank;
            b.curve.clear();
            out.push_back(std::move(b));
        } else {
            out.push_back(make_failed_block(e.spec, e.error, group));
        }
    }
    return out;
}

std::string emit_report(const ReportDocument& doc, ReportFormat format) {
    switch (format) {
    case ReportFormat::Json: return emit_json(doc);
    case ReportFormat::Csv: return emit_csv(doc);
    case ReportFormat::Text: return emit_text(doc);
    }
    return {};
}

ReportDocument parse_report_json(const std::string& text) {
    const ojson j = ojson::parse(text);
    ReportDocument doc;
    doc.tool = j.at("tool").get<std::string>();
    doc.version = j.at("version").get<std::string>();
    doc.command = j.at("command").get<std::string>();
    const auto& in = j.at("input");
    doc.input_digest = in.at("digest").get<std::string>();
    doc.rows_in = in.at("rows_in").get<std::size_t>();
    doc.rows_dropped = in.at("rows_dropped").get<std::size_t>();
    for (const auto& f : j.at("fits")) doc.fits.push_back(fit_from_json(f));
    for (const auto& s : j.at("summary")) {
        doc.summary.push_back({s.at("variance").get<std::string>(), get_num(s, "mean_aic"), get_num(s, "mean_bic"),
                               get_num(s, "mean_vmax"), get_num(s, "mean_km"), s.at("groups").get<int>(),
                               s.at("wins").get<int>()});
    }
    const auto& bench = j.at("benchmark");
    doc.suite = bench.at("suite").get<std::string>();
    if (!bench.at("seed").is_null()) doc.seed = bench.at("seed").get<std::uint64_t>();
    doc.include_timing = bench.at("include_timing").get<bool>();
    for (const auto& m : bench.at("metrics")) doc.metrics.push_back(metrics_from_json(m));
    return doc;
}

bool operator==(const FitBlock& a, const FitBlock& b) {
    const bool boot_eq = a.bootstrap.has_value() == b.bootstrap.has_value() &&
                         (!a.bootstrap || (a.bootstrap->replicates == b.bootstrap->replicates &&
                                           a.bootstrap->multiplier == b.bootstrap->multiplier &&
                                           a.bootstrap->seed == b.bootstrap->seed &&
                                           same(a.bootstrap->level, b.bootstrap->level) &&
                                           same(a.bootstrap->ci_vmax, b.bootstrap->ci_vmax) &&
                                           same(a.bootstrap->ci_km, b.bootstrap->ci_km) &&
                                           a.bootstrap->failures == b.bootstrap->failures &&
                                           a.bootstrap->flagged == b.bootstrap->flagged));
    bool curve_eq = a.curve.size() == b.curve.size();
    for (std::size_t i = 0; curve_eq && i < a.curve.size(); ++i) {
        curve_eq = same(a.curve[i].s, b.curve[i].s) && same(a.curve[i].mean, b.curve[i].mean) &&
                   same(a.curve[i].lower, b.curve[i].lower) && same(a.curve[i].upper, b.curve[i].upper);
    }
    return a.group == b.group && a.model == b.model && a.variance == b.variance && a.ok == b.ok &&
           a.error == b.error && same(a.vmax, b.vmax) && same(a.km, b.km) && same(a.se_vmax, b.se_vmax) &&
           same(a.se_km, b.se_km) && same(a.ci_vmax, b.ci_vmax) && same(a.ci_km, b.ci_km) &&
           same(a.gamma, b.gamma) && same(a.tau2, b.tau2) && a.boundary_tau2 == b.boundary_tau2 &&
           same(a.loglik, b.loglik) && same(a.aic, b.aic) && same(a.bic, b.bic) && a.rank == b.rank &&
           a.n == b.n && a.converged == b.converged && a.used_root == b.used_root &&
           a.iterations == b.iterations && same(a.f_at_solution, b.f_at_solution) &&
           a.sign_changes == b.sign_changes && boot_eq && curve_eq;
}

bool operator==(const SummaryBlock& a, const SummaryBlock& b) {
    return a.variance == b.variance && same(a.mean_aic, b.mean_aic) && same(a.mean_bic, b.mean_bic) &&
           same(a.mean_vmax, b.mean_vmax) && same(a.mean_km, b.mean_km) && a.groups == b.groups && a.wins == b.wins;
}

bool same_metrics(const MetricsRow& a, const MetricsRow& b, bool compare_runtime) {
    for (int j = 0; j < 2; ++j) {
        const auto& p = a.param[j];
        const auto& q = b.param[j];
        if (!(same(p.bias, q.bias) && same(p.rmse, q.rmse) && same(p.cp, q.cp) && same(p.mil, q.mil) &&
              same(p.interval_score, q.interval_score) && same(p.secr, q.secr))) {
            return false;
        }
    }
    return a.scenario == b.scenario && a.method == b.method && same(a.var_mse, b.var_mse) &&
           same(a.var_rmse, b.var_rmse) && same(a.tau2_rmse, b.tau2_rmse) &&
           (!compare_runtime || same(a.mean_runtime_seconds, b.mean_runtime_seconds)) &&
           a.successes == b.successes && a.attempts == b.attempts;
}

bool operator==(const ReportDocument& a, const ReportDocument& b) {
    if (a.metrics.size() != b.metrics.size()) return false;
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        if (!same_metrics(a.metrics[i], b.metrics[i], a.include_timing)) return false;
    }
    return a.tool == b.tool && a.version == b.version && a.command == b.command &&
           a.input_digest == b.input_digest && a.rows_in == b.rows_in && a.rows_dropped == b.rows_dropped &&
           a.fits == b.fits && a.summary == b.summary && a.suite == b.suite && a.seed == b.seed &&
           a.include_timing == b.include_timing;
}

} // namespace mminfer
